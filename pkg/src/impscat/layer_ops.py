"""Boundary layer operators and combined-field system assembly.

On the sphere of radius a every layer operator diagonalizes on spherical
harmonics.  With the factor-2 convention (each operator is twice the
principal-value integral) and the obstacle-outward normal, the eigenvalues
on Y_n^m are

    S   : 2 i k a² j_n(ka) h_n(ka)
    K=K': i k² a² [j_n'(ka) h_n(ka) + j_n(ka) h_n'(ka)]
    T   : 2 i k³ a² j_n'(ka) h_n'(ka)
    S₀  : 2 a / (2n + 1)                (static kernel 1/(4π|x−y|))

The scattered field is represented by the combined ansatz
u^s = SL[φ] + iη DL[S₀² φ].  Imposing ∂_ν u^s + iλ u^s = g with the exterior
jump relations gives the boundary system

    (I − [K' + iη T S₀² + M_{iλ} (S + iη (K + I) S₀²)]) φ = −2 g,

where M_{iλ} is multiplication by iλ.  The M_{iλ}(S + iη(K+I)S₀²) coupling
is twice the exterior trace of the ansatz; writing it this way (rather than
a bare S + K coupling) is what makes the solved far field agree with the
separation-of-variables reference to machine precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .geometry import ObstacleGeometry
from .specfun import (
    QuadratureRule,
    gauss_product_rule,
    harmonic_degrees,
    harmonic_index,
    num_harmonics,
    real_sph_harmonic_all,
    sph_bessel_j,
    sph_hankel1,
    sph_harmonic_all,
)

OP_KINDS = ("S", "K", "Kp", "T", "S0")


class SingularSystemError(RuntimeError):
    """Assembled combined-field matrix is numerically singular."""


class AliasingError(ValueError):
    """Quadrature order too low to resolve a product of bandwidths."""


# ---------------------------------------------------------------------------
# Impedance fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ImpedanceField:
    """Nonnegative surface impedance λ as real harmonic coefficients.

    ``coefficients`` uses the flat degree-major real-harmonic indexing of
    :func:`impscat.specfun.real_sph_harmonic_all`.  ``bound`` is a sup-norm
    cap M; admissibility (λ >= 0, λ <= M on the grid) is enforced on
    construction.
    """

    coefficients: np.ndarray
    bound: float = np.inf

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=float)
        object.__setattr__(self, "coefficients", coeffs)
        coeffs.setflags(write=False)
        vals = self.evaluate_on(gauss_product_rule(max(8, 2 * self.band_limit)))
        if np.any(vals < -1e-12):
            raise ValueError("impedance must be nonnegative on the boundary")
        if np.max(vals, initial=0.0) > self.bound + 1e-12:
            raise ValueError("impedance exceeds its stated bound M")

    @classmethod
    def constant(cls, value: float, bound: float | None = None) -> "ImpedanceField":
        if value < 0:
            raise ValueError("impedance must be nonnegative")
        return cls(np.array([value * np.sqrt(4.0 * np.pi)]),
                   bound=value if bound is None else bound)

    @property
    def band_limit(self) -> int:
        return int(np.sqrt(self.coefficients.size)) - 1 if self.coefficients.size else 0

    @property
    def is_constant(self) -> bool:
        return self.coefficients.size <= 1 or not np.any(self.coefficients[1:])

    @property
    def constant_value(self) -> float:
        return float(self.coefficients[0]) / np.sqrt(4.0 * np.pi)

    def evaluate_on(self, rule: QuadratureRule) -> np.ndarray:
        basis = real_sph_harmonic_all(self.band_limit, rule.mu, rule.phi)
        return self.coefficients @ basis

    def sup_norm(self, rule: QuadratureRule | None = None) -> float:
        rule = rule or gauss_product_rule(max(16, 4 * (self.band_limit + 1)))
        return float(np.max(np.abs(self.evaluate_on(rule))))


# ---------------------------------------------------------------------------
# Operator matrices
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundaryOperatorMatrix:
    """Dense complex Galerkin matrix in the Y_n^m basis."""

    entries: np.ndarray
    op_kind: str

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def offdiagonal_mass(self) -> float:
        diag = np.diag(np.diag(self.entries))
        denom = np.linalg.norm(diag)
        return np.linalg.norm(self.entries - diag) / denom if denom else 0.0


def sphere_operator_eigenvalue(op_kind: str, k: float, a: float, n: int) -> complex:
    """Eigenvalue of a factor-2 layer operator on Y_n^m for the radius-a sphere."""
    if op_kind not in OP_KINDS:
        raise ValueError(f"unknown operator kind {op_kind!r}")
    if a <= 0 or n < 0:
        raise ValueError("need a > 0 and n >= 0")
    if op_kind == "S0":
        return 2.0 * a / (2 * n + 1)
    if k <= 0:
        raise ValueError("need wavenumber k > 0")
    ka = k * a
    jn, jnp = sph_bessel_j(n, ka), sph_bessel_j(n, ka, derivative=True)
    hn, hnp = sph_hankel1(n, ka), sph_hankel1(n, ka, derivative=True)
    if op_kind == "S":
        return 2j * k * a * a * jn * hn
    if op_kind in ("K", "Kp"):
        return 1j * k * k * a * a * (jnp * hn + jn * hnp)
    return 2j * k**3 * a * a * jnp * hnp  # T


def sphere_operator_diagonal(op_kind: str, k: float, a: float,
                             band_limit: int) -> np.ndarray:
    degs = harmonic_degrees(band_limit)
    per_degree = np.array(
        [sphere_operator_eigenvalue(op_kind, k, a, n) for n in range(band_limit + 1)]
    )
    return per_degree[degs]


@lru_cache(maxsize=16)
def _cached_rule(order: int) -> QuadratureRule:
    return gauss_product_rule(order)


@lru_cache(maxsize=16)
def _cached_ymat(band_limit: int, order: int) -> np.ndarray:
    return sph_harmonic_all(band_limit, _cached_rule(order).mu, _cached_rule(order).phi)


def assemble_multiplication(lam: ImpedanceField, band_limit: int,
                            rule: QuadratureRule | None = None) -> BoundaryOperatorMatrix:
    """Galerkin matrix of f -> iλ f in the Y_n^m basis.

    Exact for the resolved bandwidths provided the rule order is at least
    N + N_λ; a coarser rule raises :class:`AliasingError`.
    """
    min_order = band_limit + lam.band_limit
    if rule is None:
        rule = _cached_rule(max(min_order, band_limit + 2))
    elif rule.order < min_order:
        raise AliasingError(
            f"rule order {rule.order} < N + N_lambda = {min_order}; aliasing"
        )
    ymat = _cached_ymat(band_limit, rule.order)
    lam_vals = lam.evaluate_on(rule)
    entries = 1j * (np.conj(ymat) * (rule.weights * lam_vals)) @ ymat.T
    return BoundaryOperatorMatrix(entries=entries, op_kind="M_ilambda")


@dataclass(frozen=True)
class IdentityPlusInverse:
    """Factorized (I + M)^{-1} with a round-trip residual certificate."""

    matrix: np.ndarray
    _lu: tuple

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return lu_solve(self._lu, rhs)

    def as_matrix(self) -> np.ndarray:
        return lu_solve(self._lu, np.eye(self.matrix.shape[0], dtype=complex))


def invert_identity_plus(mult: BoundaryOperatorMatrix) -> IdentityPlusInverse:
    """Factorize I + M_{iλ}; warns if conditioning is suspicious."""
    a = np.eye(mult.size, dtype=complex) + mult.entries
    lu = lu_factor(a)
    inv = lu_solve(lu, np.eye(mult.size, dtype=complex))
    residual = np.linalg.norm(a @ inv - np.eye(mult.size)) / np.sqrt(mult.size)
    if residual > 1e-10:
        cond = np.linalg.cond(a)
        if cond > 1e8:
            warnings.warn(f"I + M is badly conditioned (cond ~ {cond:.2e})")
    return IdentityPlusInverse(matrix=a, _lu=lu)


def default_coupling(k: float) -> float:
    """Combined-field coupling η = max(1, k)."""
    return max(1.0, k)


def assemble_combined_system(k: float, geom: ObstacleGeometry, lam: ImpedanceField,
                             eta: float, band_limit: int,
                             check_singular: bool = True) -> BoundaryOperatorMatrix:
    """System matrix A with A φ = −2 g for the combined-field ansatz."""
    if eta == 0.0:
        raise ValueError("coupling parameter eta must be nonzero")
    if not geom.is_sphere:
        raise NotImplementedError(
            "operator assembly is implemented for sphere geometry only"
        )
    a = geom.radius
    nh = num_harmonics(band_limit)
    s_diag = sphere_operator_diagonal("S", k, a, band_limit)
    k_diag = sphere_operator_diagonal("K", k, a, band_limit)
    kp_diag = sphere_operator_diagonal("Kp", k, a, band_limit)
    t_diag = sphere_operator_diagonal("T", k, a, band_limit)
    s0_diag = sphere_operator_diagonal("S0", k, a, band_limit)
    s0sq = s0_diag * s0_diag
    # twice the exterior trace of the ansatz, applied under M_{iλ}
    trace_diag = s_diag + 1j * eta * (k_diag + 1.0) * s0sq
    if lam.is_constant:
        ilam = 1j * lam.constant_value
        diag = 1.0 - (kp_diag + 1j * eta * t_diag * s0sq + ilam * trace_diag)
        entries = np.diag(diag).astype(complex)
    else:
        mult = assemble_multiplication(lam, band_limit)
        bracket = np.diag(kp_diag + 1j * eta * t_diag * s0sq).astype(complex)
        bracket += mult.entries * trace_diag[None, :]
        entries = np.eye(nh, dtype=complex) - bracket
    if check_singular:
        smin = np.linalg.svd(entries, compute_uv=False)[-1]
        if smin < 1e-12:
            raise SingularSystemError(
                f"combined system is singular (sigma_min = {smin:.3e})"
            )
    return BoundaryOperatorMatrix(entries=entries, op_kind="combined")


def exterior_trace_operators(k: float, a: float, eta: float,
                             band_limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals mapping density φ to (u^s, ∂_ν u^s) exterior boundary traces."""
    s_diag = sphere_operator_diagonal("S", k, a, band_limit)
    k_diag = sphere_operator_diagonal("K", k, a, band_limit)
    kp_diag = sphere_operator_diagonal("Kp", k, a, band_limit)
    t_diag = sphere_operator_diagonal("T", k, a, band_limit)
    s0sq = sphere_operator_diagonal("S0", k, a, band_limit) ** 2
    trace = 0.5 * (s_diag + 1j * eta * (k_diag + 1.0) * s0sq)
    dtrace = 0.5 * (kp_diag - 1.0 + 1j * eta * t_diag * s0sq)
    return trace, dtrace


def radiating_coefficient_diagonal(k: float, a: float, eta: float,
                                   band_limit: int) -> np.ndarray:
    """c with u^s = Σ c_nm φ_nm h_n(k r) Y_n^m outside the obstacle."""
    degs = harmonic_degrees(band_limit)
    jn = np.array([sph_bessel_j(n, k * a) for n in range(band_limit + 1)])[degs]
    jnp = np.array(
        [sph_bessel_j(n, k * a, derivative=True) for n in range(band_limit + 1)]
    )[degs]
    s0sq = sphere_operator_diagonal("S0", k, a, band_limit) ** 2
    return 1j * k * a * a * jn + 1j * eta * s0sq * 1j * k * k * a * a * jnp


def incident_coefficients(k: float, omega: np.ndarray, a: float,
                          band_limit: int) -> tuple[np.ndarray, np.ndarray]:
    """Jacobi-Anger coefficients of (u^i, ∂_ν u^i) on the radius-a sphere."""
    omega = np.asarray(omega, dtype=float)
    if abs(np.linalg.norm(omega) - 1.0) > 1e-12:
        raise ValueError("incident direction must be a unit vector")
    mu = np.clip(omega[2], -1.0, 1.0)
    phi = np.arctan2(omega[1], omega[0])
    y_at_omega = sph_harmonic_all(band_limit, mu, phi)[:, 0]
    degs = harmonic_degrees(band_limit)
    amp = 4.0 * np.pi * (1j**degs) * np.conj(y_at_omega)
    jn = np.array([sph_bessel_j(n, k * a) for n in range(band_limit + 1)])[degs]
    jnp = np.array(
        [sph_bessel_j(n, k * a, derivative=True) for n in range(band_limit + 1)]
    )[degs]
    return amp * jn, amp * k * jnp


def rhs_from_incident(k: float, omega: np.ndarray, lam: ImpedanceField,
                      band_limit: int, a: float = 1.0,
                      tail_tol: float = 1e-12) -> np.ndarray:
    """Coefficients of g = −(∂_ν u^i + iλ u^i) on the boundary.

    Warns when the plane-wave (Jacobi-Anger) tail at degree N is not yet
    negligible against its head.
    """
    u_inc, dnu_inc = incident_coefficients(k, omega, a, band_limit)
    head = np.max(np.abs(u_inc))
    degs = harmonic_degrees(band_limit)
    tail = np.max(np.abs(u_inc[degs == band_limit]), initial=0.0)
    if head > 0 and tail > tail_tol * head:
        warnings.warn(
            f"plane-wave series tail at degree {band_limit} is {tail / head:.2e} "
            "of its head; raise the band limit"
        )
    if lam.is_constant:
        return -(dnu_inc + 1j * lam.constant_value * u_inc)
    mult = assemble_multiplication(lam, band_limit)
    return -(dnu_inc + mult.entries @ u_inc)

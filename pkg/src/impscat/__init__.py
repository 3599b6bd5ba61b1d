"""Impedance obstacle scattering and quantitative continuation checks."""

from .carleman import (
    CarlemanSetup,
    TestFunction,
    carleman_sides,
    chain_lower_bound,
    continuation_check,
    continuation_constants,
    corollary_thresholds,
    lemma42_witness,
    random_test_suite,
    three_sphere_check,
)
from .forward import (
    FarField,
    HarmonicDensity,
    WaveContext,
    energy_identity,
    eval_scattered,
    farfield,
    mie_farfield,
    solve_density,
    solve_farfield,
    uniform_bound_check,
)
from .geometry import (
    ConeChain,
    GeometryError,
    ObstacleGeometry,
    build_cone_chain,
    chain_ball_count,
    chain_ratio,
    check_GA2,
    exterior_contact_point,
)
from .layer_ops import (
    ImpedanceField,
    SingularSystemError,
    assemble_combined_system,
    default_coupling,
    sphere_operator_eigenvalue,
)
from .specfun import (
    QuadratureRule,
    gauss_product_rule,
    sph_bessel_j,
    sph_bessel_y,
    sph_hankel1,
    sph_harmonic,
    sph_harmonic_all,
)
from .stability import (
    StabilityRecord,
    StabilitySweep,
    bushuyev_theta,
    far_field_delta,
    lemma51_check,
    prop41_bound,
    prop41_stationary_s,
    reconstruct,
    stability_sweep,
    theorem13_bound,
)

__version__ = "0.1.0"

__all__ = [
    "CarlemanSetup",
    "ConeChain",
    "FarField",
    "GeometryError",
    "HarmonicDensity",
    "ImpedanceField",
    "ObstacleGeometry",
    "QuadratureRule",
    "SingularSystemError",
    "StabilityRecord",
    "StabilitySweep",
    "TestFunction",
    "WaveContext",
    "assemble_combined_system",
    "build_cone_chain",
    "bushuyev_theta",
    "carleman_sides",
    "chain_ball_count",
    "chain_lower_bound",
    "chain_ratio",
    "check_GA2",
    "continuation_check",
    "continuation_constants",
    "corollary_thresholds",
    "default_coupling",
    "energy_identity",
    "eval_scattered",
    "exterior_contact_point",
    "far_field_delta",
    "farfield",
    "gauss_product_rule",
    "lemma42_witness",
    "lemma51_check",
    "mie_farfield",
    "prop41_bound",
    "prop41_stationary_s",
    "random_test_suite",
    "reconstruct",
    "solve_density",
    "solve_farfield",
    "sph_bessel_j",
    "sph_bessel_y",
    "sph_hankel1",
    "sph_harmonic",
    "sph_harmonic_all",
    "sphere_operator_eigenvalue",
    "stability_sweep",
    "theorem13_bound",
    "three_sphere_check",
    "uniform_bound_check",
]

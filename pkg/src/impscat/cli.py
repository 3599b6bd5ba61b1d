"""Command-line entry point: batch jobs, JSON configs, CSV/JSON outputs.

One subcommand per job type.  Each takes a JSON config file as the single
positional argument plus ``--set key=value`` dotted-path overrides.  All
outputs are written atomically (temp file in the target directory, then
rename); every JSON summary embeds the fully resolved config.  Exit codes:
0 success, 1 configuration/validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile

import numpy as np

from . import carleman, forward, geometry, layer_ops, stability
from .specfun import gauss_product_rule

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Config plumbing
# ---------------------------------------------------------------------------

DEFAULTS = {
    "k": 1.0,
    "omega": [0.0, 0.0, 1.0],
    "radius": 1.0,
    "impedance": 1.0,
    "band_limit": 24,
    "eta": None,
    "seed": 0,
    "workers": os.cpu_count() or 1,
    "output": None,
}


def load_config(path: str, overrides) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    merged = dict(DEFAULTS)
    merged.update(cfg)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            merged[key] = json.loads(raw)
        except json.JSONDecodeError:
            merged[key] = raw
    return merged


def validate_common(cfg: dict) -> list:
    problems = []
    if not (isinstance(cfg["k"], (int, float)) and cfg["k"] > 0):
        problems.append("k must be a positive number")
    om = np.asarray(cfg["omega"], dtype=float)
    if om.shape != (3,) or abs(np.linalg.norm(om) - 1.0) > 1e-9:
        problems.append("omega must be a 3-vector of unit length")
    if not (isinstance(cfg["radius"], (int, float)) and cfg["radius"] > 0):
        problems.append("radius must be positive")
    if not (isinstance(cfg["band_limit"], int) and cfg["band_limit"] >= 1):
        problems.append("band_limit must be an integer >= 1")
    imp = cfg["impedance"]
    if isinstance(imp, (int, float)):
        if imp < 0:
            problems.append("impedance must be nonnegative")
    elif not isinstance(imp, list):
        problems.append("impedance must be a number or a coefficient list")
    return problems


def build_impedance(cfg: dict) -> layer_ops.ImpedanceField:
    imp = cfg["impedance"]
    if isinstance(imp, (int, float)):
        return layer_ops.ImpedanceField.constant(float(imp))
    return layer_ops.ImpedanceField(coefficients=np.asarray(imp, dtype=float),
                                    bound=np.inf)


def build_context(cfg: dict) -> forward.WaveContext:
    om = np.asarray(cfg["omega"], dtype=float)
    return forward.WaveContext(k=float(cfg["k"]), omega=om / np.linalg.norm(om))


def build_geometry(cfg: dict) -> geometry.ObstacleGeometry:
    return geometry.ObstacleGeometry(radius=float(cfg["radius"]))


# ---------------------------------------------------------------------------
# Atomic writers
# ---------------------------------------------------------------------------

def atomic_write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def farfield_csv(ff: forward.FarField) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["theta", "phi", "re_uinf", "im_uinf"])
    theta = np.arccos(np.clip(ff.rule.mu, -1.0, 1.0))
    for t, p, s in zip(theta, ff.rule.phi, ff.samples):
        writer.writerow([f"{t:.17g}", f"{p:.17g}", f"{s.real:.17g}", f"{s.imag:.17g}"])
    return buf.getvalue()


def sweep_csv(sweep: stability.StabilitySweep) -> str:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epsilon", "delta", "dsup", "bound", "C_fit", "sigma_fit"])
    for rec in sweep.records:
        writer.writerow([f"{rec.epsilon:.17g}", f"{rec.delta:.17g}",
                         f"{rec.dsup:.17g}", f"{rec.bound:.17g}",
                         f"{sweep.c_fit:.17g}", f"{sweep.sigma_fit:.17g}"])
    return buf.getvalue()


def emit_summary(cfg: dict, payload: dict):
    record = {"config": _jsonable(cfg), **_jsonable(payload)}
    text = json.dumps(record, indent=2, sort_keys=True) + "\n"
    if cfg.get("summary"):
        atomic_write_text(cfg["summary"], text)
    else:
        sys.stdout.write(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    return obj


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def cmd_forward(cfg: dict) -> int:
    ctx = build_context(cfg)
    geom = build_geometry(cfg)
    lam = build_impedance(cfg)
    phi = forward.solve_density(ctx, geom, lam, cfg["eta"], cfg["band_limit"])
    emit_summary(cfg, {
        "density_norm": float(np.linalg.norm(phi.coeffs)),
        "tail_fraction": phi.tail_fraction(),
    })
    return EXIT_OK


def cmd_farfield(cfg: dict) -> int:
    ctx = build_context(cfg)
    geom = build_geometry(cfg)
    lam = build_impedance(cfg)
    ff = forward.solve_farfield(ctx, geom, lam, cfg["eta"], cfg["band_limit"])
    if cfg.get("output"):
        atomic_write_text(cfg["output"], farfield_csv(ff))
    emit_summary(cfg, {"farfield_l2_norm": ff.norm()})
    return EXIT_OK


def cmd_mie(cfg: dict) -> int:
    imp = cfg["impedance"]
    if not isinstance(imp, (int, float)):
        raise ConfigError("mie requires a constant impedance")
    ctx = build_context(cfg)
    ff = forward.mie_farfield(ctx, float(cfg["radius"]), float(imp))
    if cfg.get("output"):
        atomic_write_text(cfg["output"], farfield_csv(ff))
    emit_summary(cfg, {"farfield_l2_norm": ff.norm()})
    return EXIT_OK


def cmd_carleman_check(cfg: dict) -> int:
    rho = float(cfg.get("rho", 1.0))
    d = float(cfg.get("d", 1.0))
    size = int(cfg.get("suite_size", 50))
    setup = carleman.CarlemanSetup(x0=np.zeros(3), rho=rho, d=d)
    suite = carleman.random_test_suite(size, seed=int(cfg["seed"]))
    reports = []
    all_pass = True
    for mult in (1.0, 2.0, 4.0):
        lam_w = mult * setup.lambda_threshold
        tau = mult * setup.tau_threshold
        for i, v in enumerate(suite):
            res = carleman.carleman_sides(v, setup, lam_w, tau)
            all_pass &= res.holds
            reports.append({"check": "carleman", "test_function": i,
                            "threshold_multiple": mult,
                            "lhs": res.lhs_factored, "rhs": res.rhs_factored,
                            "ratio": res.ratio, "pass": bool(res.holds)})
    emit_summary(cfg, {"reports": reports, "all_pass": bool(all_pass),
                       "m": setup.m, "M": setup.M})
    return EXIT_OK if all_pass else EXIT_NUMERICAL


def cmd_three_sphere(cfg: dict) -> int:
    k = float(cfg["k"])
    r = float(cfg.get("ball_radius", 0.2))
    y = np.asarray(cfg.get("center", [2.0, 0.0, 0.0]), dtype=float)
    size = int(cfg.get("family_size", 8))
    rng = np.random.default_rng(int(cfg["seed"]))
    family = [
        carleman.TestFunction.plane_wave(k, rng.normal(size=3),
                                         rng.uniform(0, 2 * np.pi))
        for _ in range(size)
    ]
    fit = carleman.three_sphere_check(family, y, r)
    emit_summary(cfg, {"alpha": fit.alpha, "C": fit.C,
                       "monotonicity_violations": fit.monotonicity_violations})
    return EXIT_OK


def cmd_chain(cfg: dict) -> int:
    r = float(cfg.get("r", 0.1))
    big_r = float(cfg.get("R", 8.0))
    theta = float(cfg.get("cone_half_angle", np.pi / 6))
    geom = geometry.ObstacleGeometry(radius=float(cfg["radius"]),
                                     cone_half_angle=theta)
    x_tilde = np.asarray(cfg.get("x_tilde", [0.0, 0.0, float(cfg["radius"])]),
                         dtype=float)
    chain = geometry.build_cone_chain(x_tilde, r, geom, big_r)
    bound = carleman.chain_lower_bound(chain, i0=float(cfg.get("i0", 1.0)),
                                       m_tilde=float(cfg.get("m_tilde", 1.0)),
                                       c=float(cfg.get("c", 0.5)),
                                       alpha=float(cfg.get("alpha", 0.5)), r=r)
    emit_summary(cfg, {
        "count": chain.count, "ratio": chain.ratio,
        "max_nesting_residual": float(np.max(chain.nesting_residuals()))
        if chain.count else 0.0,
        "log_lower_bound": bound.log_lower_bound,
        "log_simplified_bound": bound.log_simplified_bound,
        "eta": bound.eta,
        "iteration_residual": bound.iteration_residual,
    })
    return EXIT_OK


def cmd_stability_sweep(cfg: dict) -> int:
    ctx = build_context(cfg)
    geom = build_geometry(cfg)
    base = build_impedance(cfg)
    shape_cfg = cfg.get("perturbation", [0.0, 0.0, 1.0, 0.0])
    if isinstance(shape_cfg, (int, float)):
        shape = np.array([float(shape_cfg) * np.sqrt(4.0 * np.pi)])
    else:
        shape = np.asarray(shape_cfg, dtype=float)
    eps_list = cfg.get("eps_list", [0.0125, 0.025, 0.05, 0.1])
    sweep = stability.stability_sweep(base, shape, eps_list, ctx, geom,
                                      cfg["eta"], cfg["band_limit"])
    if cfg.get("output"):
        atomic_write_text(cfg["output"], sweep_csv(sweep))
    emit_summary(cfg, {"C_fit": sweep.c_fit, "sigma_fit": sweep.sigma_fit,
                       "dominated": sweep.dominated()})
    return EXIT_OK


def cmd_lemma51(cfg: dict) -> int:
    ctx = build_context(cfg)
    geom = build_geometry(cfg)
    lam = build_impedance(cfg)
    candidates = cfg.get("r_candidates", [2.0, 4.0, 8.0, 16.0, 32.0])
    report = stability.lemma51_check(ctx, geom, lam, candidates,
                                     cfg["eta"], cfg["band_limit"])
    payload = {"qualifying_radius": report.qualifying_radius,
               "found": report.found,
               "radii": report.radii,
               "sup_scattered": report.sup_scattered}
    emit_summary(cfg, payload)
    return EXIT_OK if report.found else EXIT_NUMERICAL


def cmd_reconstruct(cfg: dict) -> int:
    ctx = build_context(cfg)
    geom = build_geometry(cfg)
    truth = cfg.get("true_impedance", cfg["impedance"])
    if not isinstance(truth, (int, float)):
        raise ConfigError("reconstruct requires a constant true_impedance")
    band = int(cfg.get("band_limit", 12))
    rule = gauss_product_rule(band)
    data = forward.solve_farfield(ctx, geom,
                                  layer_ops.ImpedanceField.constant(float(truth)),
                                  cfg["eta"], band, rule)
    noise = float(cfg.get("noise", 0.0))
    if noise > 0:
        rng = np.random.default_rng(int(cfg["seed"]))
        pert = rng.normal(size=data.samples.shape) \
            + 1j * rng.normal(size=data.samples.shape)
        data = forward.FarField(
            samples=data.samples * (1.0 + noise * pert), rule=rule
        )
    prior = build_impedance(cfg)
    report = stability.reconstruct(data, ctx, geom, prior,
                                   reg=float(cfg.get("reg", 1e-6)),
                                   eta=cfg["eta"], band_limit=band)
    emit_summary(cfg, {
        "misfit": report.misfit,
        "converged": report.converged,
        "iterations": report.iterations,
        "recovered_constant": report.impedance.coefficients[0] / np.sqrt(4 * np.pi),
        "coefficients": report.impedance.coefficients,
    })
    return EXIT_OK if report.converged else EXIT_NUMERICAL


def cmd_ga2_check(cfg: dict) -> int:
    geom = build_geometry(cfg)
    radii = cfg.get("radii", [0.4, 0.2, 0.1, 0.05])
    c, kappa = geometry.check_GA2(geom, radii, seed=int(cfg["seed"]))
    emit_summary(cfg, {"C": c, "kappa": kappa})
    return EXIT_OK


HANDLERS = {
    "forward": cmd_forward,
    "farfield": cmd_farfield,
    "mie": cmd_mie,
    "carleman-check": cmd_carleman_check,
    "three-sphere": cmd_three_sphere,
    "chain": cmd_chain,
    "stability-sweep": cmd_stability_sweep,
    "lemma51": cmd_lemma51,
    "reconstruct": cmd_reconstruct,
    "ga2-check": cmd_ga2_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="impscat",
        description="Impedance obstacle scattering and continuation checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in HANDLERS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON config file")
        p.add_argument("--set", action="append", default=[], dest="overrides",
                       metavar="KEY=VALUE", help="dotted-path config override")
    return parser


def _error_record(kind: str, message: str):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        problems = validate_common(cfg)
        if problems:
            raise ConfigError("; ".join(problems))
        return HANDLERS[args.command](cfg)
    except ConfigError as exc:
        _error_record("validation", str(exc))
        return EXIT_VALIDATION
    except (ValueError, IndexError) as exc:
        _error_record("validation", str(exc))
        return EXIT_VALIDATION
    except (RuntimeError, np.linalg.LinAlgError, ArithmeticError) as exc:
        _error_record("numerical", str(exc))
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

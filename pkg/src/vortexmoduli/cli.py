"""Command-line entry point.

Subcommands: ``solve-vortex``, ``metric-sample``, ``sweep``, ``spectrum``,
``check-laxmilgram``, ``selftest``.  All read one JSON configuration file
(``--config``), honor ``--output-dir``/``--seed``/``--threads`` overrides,
and exit 0 on success, 1 on any computational failure, 2 on a configuration
error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import experiments
from .config import ExperimentConfig, divisors_from_config
from .errors import ConfigError, VortexModuliError
from .sphere import SphereGrid


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vortex-moduli",
                                description="vortex moduli-space laboratory on the two-sphere")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("solve-vortex", "metric-sample", "sweep", "spectrum", "check-laxmilgram"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="path to JSON configuration")
        sp.add_argument("--output-dir", default=None)
        sp.add_argument("--threads", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
    st = sub.add_parser("selftest", help="run the quick built-in example suite")
    st.add_argument("--l-max", type=int, default=23)
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_json(args.config)
    if args.output_dir is not None:
        cfg.output_dir = args.output_dir
    if args.threads is not None:
        cfg.threads = args.threads
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg.validate()


def _provenance(cfg: ExperimentConfig) -> dict:
    return {"config_hash": cfg.config_hash(), "l_max": cfg.l_max}


def _cmd_solve_vortex(cfg: ExperimentConfig) -> int:
    from .vortex import pseudo_vortex_deviation, solve_vortex

    lab = experiments.Laboratory.build(cfg)
    if cfg.divisor is not None:
        from .bundle import Divisor

        divisor = Divisor.from_points([tuple(t) for t in cfg.divisor])
    else:
        divisor = divisors_from_config(cfg)[0]
    eps = cfg.eps if cfg.eps is not None else cfg.eps_list[0]
    s = solve_vortex(divisor, eps, lab.hermitian, gram=lab.gram)
    dev = pseudo_vortex_deviation(s, lab.hermitian)
    outdir = experiments.ensure_outdir(cfg)
    record = {
        "divisor": [[float(t), float(p), int(k)]
                    for t, p, k in zip(divisor.theta, divisor.phi, divisor.mult)],
        "section": [[float(c.real), float(c.imag)] for c in s.section.coeffs],
        "eps": eps,
        "residual": s.residual,
        "u_c0": dev["u_c0"],
        "field_dev": dev["field_dev"],
        "curvature_dev": dev["curvature_dev"],
        "bradlow_residual": s.bradlow_residual,
        "newton_iters": s.newton_iters,
        "config_hash": cfg.config_hash(),
        "l_max": cfg.l_max,
    }
    experiments.write_json(os.path.join(outdir, "vortex.json"), record)
    if cfg.dump_fields:
        experiments.dump_grid_function(os.path.join(outdir, "u"), s.u, lab.grid, "u")
    return 0


def _cmd_metric_sample(cfg: ExperimentConfig) -> int:
    lab = experiments.Laboratory.build(cfg)
    divisors = divisors_from_config(cfg)
    eps_values = [cfg.eps] if cfg.eps is not None else list(cfg.eps_list)
    rows = experiments.run_case_matrix(lab, divisors, eps_values, threads=cfg.threads)
    outdir = experiments.ensure_outdir(cfg)
    cols = ["eps", "divisor_id", "deviation", "min_eig", "max_eig", "gauge_residual_max", "error"]
    experiments.write_csv(
        os.path.join(outdir, "metric_samples.csv"), rows, cols, _provenance(cfg),
        descriptions={
            "deviation": "spectral norm of G_eps - I in the horizontal frame",
            "gauge_residual_max": "largest gauge-orthogonality PDE residual",
        },
    )
    experiments.write_json(
        os.path.join(outdir, "metric_samples.json"),
        {"rows": rows, "config_hash": cfg.config_hash()},
    )
    return 1 if any(r["error"] for r in rows) else 0


def _cmd_sweep(cfg: ExperimentConfig) -> int:
    result = experiments.run_sweep(cfg)
    outdir = experiments.ensure_outdir(cfg)
    cols = [
        "eps", "divisor_id", "residual", "newton_iters", "bradlow_residual",
        "u_c0", "field_dev", "curvature_dev", "energy_rel_err",
        "deviation", "min_eig", "max_eig", "gauge_residual_max", "error",
    ]
    experiments.write_csv(os.path.join(outdir, "sweep.csv"), result["rows"], cols,
                          _provenance(cfg))
    experiments.write_json(
        os.path.join(outdir, "sweep_summary.json"),
        {
            "fits": result["fits"],
            "divisors": result["divisors"],
            "failed": result["failed"],
            "config_hash": cfg.config_hash(),
        },
    )
    return 1 if result["failed"] else 0


def _cmd_spectrum(cfg: ExperimentConfig) -> int:
    result = experiments.run_spectrum(cfg)
    outdir = experiments.ensure_outdir(cfg)
    cols = ["eps", "k", "lambda_eps", "lambda_fs", "ratio",
            "bound_lower", "bound_upper", "within_bounds"]
    experiments.write_csv(os.path.join(outdir, "spectrum.csv"), result["rows"], cols,
                          _provenance(cfg))
    experiments.write_json(
        os.path.join(outdir, "spectrum_summary.json"),
        {
            "C_emp": result["C_emp"],
            "C_emp_measured": result["C_emp_measured"],
            "anisotropy": {repr(e): f.anisotropy for e, f in result["fields"].items()},
            "volume_normalized": {repr(e): f.volume_normalized()
                                  for e, f in result["fields"].items()},
            "config_hash": cfg.config_hash(),
        },
    )
    return 1 if not all(r["within_bounds"] for r in result["rows"]) else 0


def _cmd_check_laxmilgram(cfg: ExperimentConfig) -> int:
    rows = experiments.run_laxmilgram_suite(cfg)
    outdir = experiments.ensure_outdir(cfg)
    experiments.write_csv(
        os.path.join(outdir, "laxmilgram.csv"), rows,
        ["instance", "lhs", "rhs", "satisfied"], _provenance(cfg),
    )
    return 0 if all(r["satisfied"] for r in rows) else 1


def _cmd_selftest(l_max: int) -> int:
    """Quick end-to-end checks of the documented trivial examples."""
    from .bundle import Divisor, constant_curvature_weight
    from .geometry import SurfaceMetric, integrate, laplace_beltrami, solve_poisson
    from .spectral import fs_spectrum, ratio_bounds
    from .vortex import reconstruct_fields, solve_vortex

    checks = []

    def check(name, ok):
        checks.append(ok)
        print(f"selftest: {name}: {'ok' if ok else 'FAIL'}")

    grid = SphereGrid.build(l_max)
    m = SurfaceMetric.from_harmonics(grid)
    one = np.ones(grid.shape)
    check("round area = 4 pi", abs(integrate(one, m) - 4 * np.pi) < 1e-10 * 4 * np.pi)
    y10 = grid.real_harmonic_field([(1, 0, 1.0)])
    check("Y10 integrates to zero", abs(integrate(y10, m)) < 1e-10)
    check("laplacian eigenvalue l=1",
          float(np.max(np.abs(laplace_beltrami(y10, m) - 2 * y10))) < 1e-8)
    check("poisson inverts eigenfunction",
          float(np.max(np.abs(solve_poisson(2 * y10, m) - y10))) < 1e-8)
    h = constant_curvature_weight(m, 1)
    check("round hermitian weight vanishes", float(np.max(np.abs(h.w))) < 1e-10)
    d = Divisor.from_points([(0.0, 0.0, 1)])
    s = solve_vortex(d, 0.1, h)
    check("vortex solve converges", s.residual <= 1e-9)
    check("Bradlow identity", s.bradlow_residual <= 1e-8 * s.eps)
    rec = reconstruct_fields(s, h)
    check("flux quantization",
          abs(integrate(rec["magnetic"], m) - 2 * np.pi) < 1e-8)
    spec = fs_spectrum(1, 2)
    check("reference spectrum", spec.clusters[1] == (8.0, 3) and spec.clusters[2] == (24.0, 5))
    lo, up = ratio_bounds(1.0, 0.0, 1)
    check("degenerate sandwich", lo == 1.0 and up == 1.0)
    return 0 if all(checks) else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _cmd_selftest(args.l_max)
        cfg = _load_config(args)
        handler = {
            "solve-vortex": _cmd_solve_vortex,
            "metric-sample": _cmd_metric_sample,
            "sweep": _cmd_sweep,
            "spectrum": _cmd_spectrum,
            "check-laxmilgram": _cmd_check_laxmilgram,
        }[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except VortexModuliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

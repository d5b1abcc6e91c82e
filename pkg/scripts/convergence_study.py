#!/usr/bin/env python3
"""Print the coupling-convergence table for one configuration.

A quick interactive view of the quantities the acceptance suite gates:
per-coupling pseudo-vortex deviations, metric deviation, and the fitted
convergence orders.

    python scripts/convergence_study.py --n 2 --bump 0.3 --l-max 63
"""

import argparse

import numpy as np

from vortexmoduli import ExperimentConfig, fit_convergence_order
from vortexmoduli.config import divisors_from_config
from vortexmoduli.experiments import Laboratory, run_case_matrix


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1)
    ap.add_argument("--bump", type=float, default=0.0, help="coefficient of the (1,0) mode of rho")
    ap.add_argument("--l-max", type=int, default=63)
    ap.add_argument("--divisors", type=int, default=3)
    ap.add_argument("--seed", type=int, default=2025)
    ap.add_argument("--threads", type=int, default=2)
    args = ap.parse_args()

    rho = [(1, 0, args.bump)] if args.bump else []
    cfg = ExperimentConfig(
        n=args.n,
        l_max=args.l_max,
        rho_coeffs=rho,
        divisor_spec=f"random:{args.divisors}",
        seed=args.seed,
        threads=args.threads,
    ).validate()
    lab = Laboratory.build(cfg)
    divisors = divisors_from_config(cfg)
    rows = run_case_matrix(lab, divisors, cfg.eps_list, threads=cfg.threads)

    print(f"n={args.n}  rho_10={args.bump}  l_max={args.l_max}  area={lab.metric.area:.6f}")
    print(f"{'eps':>7} {'u_c0/eps':>10} {'field/eps':>10} {'curv/eps':>10} {'dev/eps':>10} {'iters':>6}")
    for eps in cfg.eps_list:
        sub = [r for r in rows if r["eps"] == eps]
        mean = lambda k: np.mean([r[k] for r in sub])  # noqa: E731
        print(
            f"{eps:>7} {mean('u_c0') / eps:>10.5f} {mean('field_dev') / eps:>10.5f} "
            f"{mean('curvature_dev') / eps:>10.5f} {mean('deviation') / eps:>10.6f} "
            f"{mean('newton_iters'):>6.1f}"
        )
    for key in ("u_c0", "field_dev", "curvature_dev", "deviation"):
        pts = [(r["eps"], r[key]) for r in rows if r[key] > 1e-13]
        if len(pts) >= 4:
            fit = fit_convergence_order(pts)
            print(f"{key:>14}: slope {fit.slope:.4f}  r^2 {fit.r_squared:.6f}")
        else:
            print(f"{key:>14}: at numerical floor (no rate to fit)")


if __name__ == "__main__":
    main()

"""Acceptance suite at production resolution.

Runs the quantitative gate for the whole laboratory: saturation and energy
identities, pseudo-vortex and metric convergence rates, the moduli volume
law, reference-spectrum reproduction, the spectral sandwich, the randomized
a-priori-bound suite, the Kahler residual, and a full re-run of the rate
criteria at higher resolution.  One PASS/FAIL line is printed per criterion
(run with ``pytest -s`` to see them as they complete).

The homogeneous-domain one-vortex family is exactly the reference metric
(its deviation sits at the numerical floor at every coupling), so rate fits
exclude that degenerate configuration and assert the stronger exact
statement for it instead.
"""

import os

import numpy as np
import pytest

from vortexmoduli import (
    ExperimentConfig,
    SphereGrid,
    fit_convergence_order,
    fs_spectrum,
    laplace_spectrum,
    moduli_metric_field,
    ratio_bounds,
)
from vortexmoduli.bundle import Divisor
from vortexmoduli.experiments import Laboratory, run_case_matrix, run_laxmilgram_suite
from vortexmoduli.spectral import ModuliMetricField

L_MAIN = 63
L_CHECK = 95
EPS_SWEEP = (0.4, 0.2, 0.1, 0.05, 0.025)
EPS_IDENTITIES = (0.4, 0.1, 0.025)  # criteria 1 and 2
EPS_FIELDS = (0.1, 0.05)  # criteria 5, 7, 9
METRICS = {"round": [], "bump": [(1, 0, 0.3)]}
DEGREES = (1, 2)
N_DIVISORS = 5
N_METRIC_DIVISORS = 3  # 3 divisors x 4 configurations = 12 moduli points
MODULI_GRID = (24, 48)
SEED = 2025
SLOPE_BAND = (0.8, 1.2)
HALVING_BAND = (0.35, 0.65)
DEVIATION_FLOOR = 1e-8  # below this the metric deviation is numerical zero
THREADS = int(os.environ.get("VM_ACCEPT_THREADS", min(2, os.cpu_count() or 1)))


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE CRITERION {criterion}: {'PASS' if ok else 'FAIL'} - {detail}", flush=True)
    assert ok, f"criterion {criterion}: {detail}"


def _divisors(n: int) -> list[Divisor]:
    rng = np.random.default_rng(SEED + n)
    out = []
    for _ in range(N_DIVISORS):
        z = rng.uniform(-1.0, 1.0, size=n)
        ph = rng.uniform(0.0, 2.0 * np.pi, size=n)
        out.append(Divisor.from_points([(np.arccos(zz), pp, 1) for zz, pp in zip(z, ph)]))
    return out


def compute_suite(l_max: int) -> dict:
    """Solve-and-assemble matrix for criteria 1-4 at one resolution."""
    cases = {}
    for n in DEGREES:
        divisors = _divisors(n)
        for mname, rho in METRICS.items():
            cfg = ExperimentConfig(
                n=n, l_max=l_max, eps_list=list(EPS_SWEEP), rho_coeffs=rho, seed=SEED
            ).validate()
            lab = Laboratory.build(cfg)
            rows = run_case_matrix(
                lab, divisors[:N_METRIC_DIVISORS], EPS_SWEEP, with_metric=True, threads=THREADS
            )
            rows += [
                dict(r, divisor_id=r["divisor_id"] + N_METRIC_DIVISORS)
                for r in run_case_matrix(
                    lab,
                    divisors[N_METRIC_DIVISORS:],
                    EPS_SWEEP,
                    with_metric=False,
                    threads=THREADS,
                )
            ]
            assert not any(r["error"] for r in rows)
            cases[(n, mname)] = rows
    return summarize_suite(cases)


def summarize_suite(cases: dict) -> dict:
    stats = {"cases": cases}
    stats["c1"] = max(
        r["bradlow_residual"] / r["eps"]
        for rows in cases.values()
        for r in rows
        if r["eps"] in EPS_IDENTITIES
    )
    stats["c2"] = max(
        r["energy_rel_err"]
        for rows in cases.values()
        for r in rows
        if r["eps"] in EPS_IDENTITIES
    )

    variations, slopes = [], []
    for rows in cases.values():
        for di in set(r["divisor_id"] for r in rows):
            sub = sorted((r for r in rows if r["divisor_id"] == di), key=lambda r: -r["eps"])
            for key in ("field_dev", "curvature_dev"):
                ratios = [r[key] / r["eps"] for r in sub]
                variations.append(max(ratios) / min(ratios) - 1.0)
                slopes.append(fit_convergence_order([(r["eps"], r[key]) for r in sub]).slope)
    stats["c3_variation_max"] = max(variations)
    stats["c3_slope_min"] = min(slopes)
    stats["c3_slope_max"] = max(slopes)

    c4 = {}
    pooled_points = []
    for (n, mname), rows in cases.items():
        pts = [(r["eps"], r["deviation"]) for r in rows if "deviation" in r]
        if max(d / e for e, d in pts) <= DEVIATION_FLOOR:
            c4[(n, mname)] = {"degenerate": True, "max_dev": max(d for _, d in pts)}
            continue
        fit = fit_convergence_order(pts)
        mean_at = {
            e: float(np.mean([d for ee, d in pts if ee == e])) for e in (0.05, 0.025)
        }
        c4[(n, mname)] = {
            "degenerate": False,
            "slope": fit.slope,
            "halving": mean_at[0.025] / mean_at[0.05],
            "max_dev_over_eps": max(d / e for e, d in pts),
        }
        pooled_points.extend(pts)
    stats["c4"] = c4
    stats["c4_overall_slope"] = fit_convergence_order(pooled_points).slope
    stats["C_emp"] = max(
        rec["max_dev_over_eps"] for rec in c4.values() if not rec["degenerate"]
    )
    return stats


@pytest.fixture(scope="module")
def suite_main():
    print(f"\n[acceptance] case matrix at l_max={L_MAIN} (threads={THREADS})", flush=True)
    return compute_suite(L_MAIN)


@pytest.fixture(scope="module")
def suite_check():
    print(f"\n[acceptance] case matrix re-run at l_max={L_CHECK}", flush=True)
    return compute_suite(L_CHECK)


@pytest.fixture(scope="module")
def moduli_fields():
    """Measured one-vortex moduli metric fields on the round domain."""
    grid = SphereGrid.build(L_MAIN)
    from vortexmoduli import SurfaceMetric, constant_curvature_weight

    m = SurfaceMetric.from_harmonics(grid)
    h = constant_curvature_weight(m, 1)
    mg = SphereGrid.for_shape(*MODULI_GRID)
    fields = {}
    for eps in EPS_FIELDS:
        print(f"[acceptance] moduli metric field at eps={eps}", flush=True)
        fields[eps] = moduli_metric_field(eps, m, h, mg, threads=THREADS)
    return fields


def test_criterion_1_bradlow_identity(suite_main):
    worst = suite_main["c1"]
    _report(1, worst <= 1e-6, f"max |  ||phi||^2 - eps | / eps = {worst:.3e} (tol 1e-6)")


def test_criterion_2_energy_saturation(suite_main):
    worst = suite_main["c2"]
    _report(2, worst <= 1e-6, f"max relative energy error = {worst:.3e} (tol 1e-6)")


def test_criterion_3_pseudo_vortex_rates(suite_main):
    var = suite_main["c3_variation_max"]
    smin, smax = suite_main["c3_slope_min"], suite_main["c3_slope_max"]
    ok = var <= 0.30 and SLOPE_BAND[0] <= smin and smax <= SLOPE_BAND[1]
    _report(
        3,
        ok,
        f"deviation/eps variation {var:.3f} (tol 0.30), slopes in [{smin:.3f}, {smax:.3f}]",
    )


def test_criterion_4_metric_convergence(suite_main):
    c4 = suite_main["c4"]
    problems = []
    degenerate = []
    for key, rec in c4.items():
        if rec["degenerate"]:
            degenerate.append(key)
            if rec["max_dev"] > DEVIATION_FLOOR:
                problems.append(f"{key}: floor exceeded {rec['max_dev']:.2e}")
            continue
        if not (SLOPE_BAND[0] <= rec["slope"] <= SLOPE_BAND[1]):
            problems.append(f"{key}: slope {rec['slope']:.3f}")
        if not (HALVING_BAND[0] <= rec["halving"] <= HALVING_BAND[1]):
            problems.append(f"{key}: halving {rec['halving']:.3f}")
    overall = suite_main["c4_overall_slope"]
    if not (SLOPE_BAND[0] <= overall <= SLOPE_BAND[1]):
        problems.append(f"pooled slope {overall:.3f}")
    n_points = sum(
        len(set(r["divisor_id"] for r in rows if "deviation" in r))
        for rows in suite_main["cases"].values()
    )
    detail = (
        f"{n_points} moduli points, pooled slope {overall:.3f}; degenerate configs "
        f"{degenerate} held at the numerical floor"
    )
    _report(4, not problems and n_points >= 10, detail if not problems else "; ".join(problems))


def test_criterion_5_volume_law(moduli_fields):
    errs = {
        eps: abs(f.volume() - np.pi * eps) / (np.pi * eps) for eps, f in moduli_fields.items()
    }
    worst = max(errs.values())
    _report(5, worst <= 0.02, f"|vol - pi eps| / (pi eps) = {worst:.2e} (tol 2e-2)")


def test_criterion_6_reference_spectrum():
    mg = SphereGrid.for_shape(*MODULI_GRID)
    spec = laplace_spectrum(ModuliMetricField.fs_reference(mg), 3)
    ref = fs_spectrum(1, 3)
    problems = []
    for (lam, d), (lam_ref, d_ref) in zip(spec.clusters, ref.clusters):
        if d != d_ref:
            problems.append(f"degeneracy {d} != {d_ref} at {lam_ref}")
        if lam_ref and abs(lam - lam_ref) > 5e-3 * lam_ref:
            problems.append(f"cluster {lam:.4f} vs {lam_ref}")
    _report(
        6,
        not problems,
        "clusters {8, 24, 48} x {3, 5, 7} reproduced to 0.5%"
        if not problems
        else "; ".join(problems),
    )


def test_criterion_7_spectral_sandwich(suite_main, moduli_fields):
    C = suite_main["C_emp"]
    ref = fs_spectrum(1, 3)
    n_flat = ref.eigenvalues.size  # 16 values through the k = 3 cluster
    dev_from_1 = {}
    problems = []
    for eps, fld in moduli_fields.items():
        lower, upper = ratio_bounds(C, eps, 1)
        spec = laplace_spectrum(fld, 3)
        ratios = spec.eigenvalues[1:n_flat] / ref.eigenvalues[1:n_flat]
        dev_from_1[eps] = float(np.max(np.abs(ratios - 1.0)))
        if not (np.all(ratios >= lower) and np.all(ratios <= upper)):
            problems.append(f"eps={eps}: ratios outside [{lower:.4f}, {upper:.4f}]")
    d_big, d_small = dev_from_1[EPS_FIELDS[0]], dev_from_1[EPS_FIELDS[1]]
    if d_big <= DEVIATION_FLOOR and d_small <= DEVIATION_FLOOR:
        halving_note = (
            f"ratio deviations {d_big:.1e}, {d_small:.1e} at the numerical floor "
            "(homogeneous domain: measured and reference metrics coincide)"
        )
    else:
        ratio = d_small / d_big
        if not (HALVING_BAND[0] <= ratio <= HALVING_BAND[1]):
            problems.append(f"deviation halving ratio {ratio:.3f}")
        halving_note = f"deviation halving ratio {ratio:.3f}"
    _report(
        7,
        not problems,
        f"C_emp={C:.4f}; all ratios within bounds; {halving_note}"
        if not problems
        else "; ".join(problems),
    )


def test_criterion_8_apriori_bound_suite():
    results = {}
    for mname, rho in METRICS.items():
        cfg = ExperimentConfig(
            n=1, l_max=L_MAIN, rho_coeffs=rho, seed=42, instances=100
        ).validate()
        rows = run_laxmilgram_suite(cfg)
        results[mname] = sum(r["satisfied"] for r in rows), len(rows)
    ok = all(s == t for s, t in results.values())
    _report(8, ok, "; ".join(f"{m}: {s}/{t} satisfied" for m, (s, t) in results.items()))


def test_criterion_9_kahler_residual(moduli_fields):
    worst = max(f.anisotropy for f in moduli_fields.values())
    _report(9, worst <= 1e-3, f"max conformality defect = {worst:.2e} (tol 1e-3)")


def test_criterion_10_resolution_independence(suite_main, suite_check):
    """Criteria 1-4 statistics move by at most 10% of their tolerance bands."""
    a, b = suite_main, suite_check
    problems = []

    def compare(name, va, vb, band):
        if abs(va - vb) > 0.1 * band:
            problems.append(f"{name}: {va:.4g} -> {vb:.4g} (band {band})")

    compare("bradlow", a["c1"], b["c1"], 1e-6)
    compare("energy", a["c2"], b["c2"], 1e-6)
    compare("c3 variation", a["c3_variation_max"], b["c3_variation_max"], 0.30)
    compare("c3 slope min", a["c3_slope_min"], b["c3_slope_min"], 0.4)
    compare("c3 slope max", a["c3_slope_max"], b["c3_slope_max"], 0.4)
    for key in a["c4"]:
        ra, rb = a["c4"][key], b["c4"][key]
        if ra["degenerate"] != rb["degenerate"]:
            problems.append(f"{key}: degeneracy flag changed")
            continue
        if ra["degenerate"]:
            continue
        compare(f"{key} slope", ra["slope"], rb["slope"], 0.4)
        compare(f"{key} halving", ra["halving"], rb["halving"], 0.30)
    compare("c4 pooled slope", a["c4_overall_slope"], b["c4_overall_slope"], 0.4)
    _report(
        10,
        not problems,
        f"all statistics stable from l_max={L_MAIN} to {L_CHECK}"
        if not problems
        else "; ".join(problems),
    )

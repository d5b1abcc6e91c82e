"""Moduli-sphere conformal factor, Laplace spectra, sandwich bounds."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vortexmoduli import (
    PreconditionError,
    SphereGrid,
    fs_spectrum,
    laplace_spectrum,
    moduli_metric_field,
    ratio_bounds,
)
from vortexmoduli.spectral import ModuliMetricField, cluster_eigenvalues


# -- fs_spectrum -------------------------------------------------------------


def test_reference_spectrum_one_vortex():
    spec = fs_spectrum(1, 3)
    assert spec.clusters == [(0.0, 1), (8.0, 3), (24.0, 5), (48.0, 7)]
    assert spec.eigenvalues[0] == 0.0
    assert np.all(np.diff(spec.eigenvalues) >= 0)


def test_reference_spectrum_two_vortices():
    spec = fs_spectrum(2, 1)
    assert spec.clusters[1] == (12.0, 8)


@given(n=st.integers(1, 6), k=st.integers(1, 6))
@settings(max_examples=40, deadline=None)
def test_degeneracy_formula_identity(n, k):
    """Difference of squared binomials equals (n + 2k)/n * C(n+k-1, k)^2."""
    d = math.comb(n + k, k) ** 2 - math.comb(n + k - 1, k - 1) ** 2
    alt = (n + 2 * k) * math.comb(n + k - 1, k) ** 2
    assert alt % n == 0
    assert d == alt // n


def test_fs_spectrum_rejects_bad_args():
    with pytest.raises(PreconditionError):
        fs_spectrum(0, 3)
    with pytest.raises(PreconditionError):
        fs_spectrum(1, 0)


# -- ratio_bounds -------------------------------------------------------------


def test_bounds_degenerate_at_zero():
    assert ratio_bounds(1.0, 0.0, 1) == (1.0, 1.0)


def test_bounds_closed_form_example():
    lo, up = ratio_bounds(1.0, 0.1, 1)
    assert abs(lo - 0.9 / 1.21) < 1e-15
    assert abs(up - 1.1 / 0.81) < 1e-15


@given(
    C=st.floats(0.1, 5.0),
    x=st.floats(0.0, 0.9),
    n=st.integers(1, 5),
)
@settings(max_examples=50, deadline=None)
def test_bounds_reciprocal_symmetry(C, x, n):
    """lower(n) times the exponent-swapped upper equals one."""
    eps = x / C  # keeps C * eps < 1
    lo, _ = ratio_bounds(C, eps, n)
    swapped_upper = (1 + C * eps) ** (n + 1) / (1 - C * eps) ** n
    assert abs(lo * swapped_upper - 1.0) < 1e-9


def test_bounds_domain_error():
    with pytest.raises(PreconditionError):
        ratio_bounds(2.0, 0.6, 1)


# -- laplace_spectrum on the reference field -------------------------------------


def test_reference_field_spectrum():
    mg = SphereGrid.for_shape(16, 32)
    spec = laplace_spectrum(ModuliMetricField.fs_reference(mg), 3)
    ref = fs_spectrum(1, 3)
    assert abs(spec.eigenvalues[0]) <= 1e-8 * 8.0
    for (lam, d), (lam_ref, d_ref) in zip(spec.clusters, ref.clusters):
        assert d == d_ref
        if lam_ref:
            assert abs(lam - lam_ref) <= 5e-3 * lam_ref


def test_spectrum_scales_inversely_with_factor():
    mg = SphereGrid.for_shape(12, 24)
    base = ModuliMetricField.fs_reference(mg)
    scaled = ModuliMetricField(
        moduli_grid=mg,
        eps=0.0,
        Phi=2.5 * base.Phi,
        phi_rel=2.5 * base.phi_rel,
        sqrt_det_rel=2.5 * base.sqrt_det_rel,
        deviation=base.deviation,
        anisotropy=0.0,
    )
    s1 = laplace_spectrum(base, 2)
    s2 = laplace_spectrum(scaled, 2)
    assert np.max(np.abs(s2.eigenvalues - s1.eigenvalues / 2.5)) < 1e-8


def test_cluster_helper():
    vals = np.array([0.0, 7.9999, 8.0001, 8.0000, 24.0, 24.0])
    cl = cluster_eigenvalues(vals, rtol=1e-3)
    assert [c[1] for c in cl] == [1, 3, 2]


# -- measured moduli field ----------------------------------------------------------


@pytest.fixture(scope="module")
def round_field(bundles):
    h, _ = bundles[("round", 1)]
    return moduli_metric_field(0.2, h.metric, h, SphereGrid.for_shape(8, 16))


def test_round_field_constant_factor(round_field):
    rel = round_field.phi_rel
    assert (rel.max() - rel.min()) / rel.mean() <= 1e-6


def test_round_field_kahler_residual(round_field):
    assert round_field.anisotropy <= 1e-3


def test_round_field_volume_law(round_field):
    assert abs(round_field.volume() - np.pi * 0.2) <= 0.02 * np.pi * 0.2
    assert abs(round_field.volume_normalized() - np.pi) <= 0.02 * np.pi


def test_round_field_positive(round_field):
    assert np.all(round_field.Phi > 0)


def test_round_field_matches_reference_factor(round_field):
    """Homogeneous domain: the normalized factor is the reference value 1/4
    (in the chart: 1/(1+|zeta|^2)^2) already at finite coupling."""
    assert np.max(np.abs(round_field.phi_rel - 0.25)) <= 1e-8


def test_round_field_spectrum_kernel(round_field):
    spec = laplace_spectrum(round_field, 2)
    assert abs(spec.eigenvalues[0]) <= 1e-8 * spec.eigenvalues[1]


def test_bump_field_ratio_deviation_scales_linearly(bundles):
    """Non-round domain: the worst spectral-ratio deviation is O(eps)."""
    from vortexmoduli import fit_convergence_order

    h, _ = bundles[("bump", 1)]
    mg = SphereGrid.for_shape(8, 16)
    ref = fs_spectrum(1, 3)
    pts = []
    for eps in (0.4, 0.2, 0.1, 0.05):
        fld = moduli_metric_field(eps, h.metric, h, mg)
        spec = laplace_spectrum(fld, 3)
        ratios = spec.eigenvalues[1:16] / ref.eigenvalues[1:16]
        pts.append((eps, float(np.max(np.abs(ratios - 1.0)))))
    devs = [d for _, d in pts]
    assert all(d2 < d1 for d1, d2 in zip(devs, devs[1:]))
    fit = fit_convergence_order(pts)
    assert 0.8 <= fit.slope <= 1.2


def test_bump_field_spectrum_in_sandwich(bundles):
    """Non-round domain: measured spectrum sits inside the sandwich with the
    field's own empirical constant, and the volume law still holds."""
    h, _ = bundles[("bump", 1)]
    fld = moduli_metric_field(0.2, h.metric, h, SphereGrid.for_shape(8, 16))
    assert abs(fld.volume() - np.pi * 0.2) <= 0.02 * np.pi * 0.2
    assert fld.anisotropy <= 1e-3
    C = max(fld.max_deviation / fld.eps, 1e-12)
    lo, up = ratio_bounds(C, 0.2, 1)
    spec = laplace_spectrum(fld, 3)
    ref = fs_spectrum(1, 3)
    ratios = spec.eigenvalues[1:16] / ref.eigenvalues[1:16]
    assert np.all(ratios >= lo - 1e-9)
    assert np.all(ratios <= up + 1e-9)


def test_field_requires_degree_one(bundles):
    h, _ = bundles[("round", 2)]
    with pytest.raises(PreconditionError):
        moduli_metric_field(0.1, h.metric, h, SphereGrid.for_shape(8, 16))


def test_spectrum_rejects_anisotropic_field(round_field):
    from dataclasses import replace

    bad = replace(round_field, anisotropy=0.5)
    with pytest.raises(PreconditionError):
        laplace_spectrum(bad, 2)


def test_anisotropy_stable_under_moduli_refinement(bundles):
    """The Kahler residual reflects domain discretization, not the moduli
    grid, so refining the moduli grid must not degrade it."""
    h, _ = bundles[("round", 1)]
    coarse = moduli_metric_field(0.2, h.metric, h, SphereGrid.for_shape(6, 12))
    fine = moduli_metric_field(0.2, h.metric, h, SphereGrid.for_shape(12, 24))
    assert fine.anisotropy <= max(coarse.anisotropy * 1.5, 1e-6)

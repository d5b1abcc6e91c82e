"""Shared fixtures: small grids and metrics reused across the suite."""

import numpy as np
import pytest

from vortexmoduli import SphereGrid, SurfaceMetric, constant_curvature_weight, gram_matrix

UNIT_L_MAX = 31  # unit tests run well below the production resolution
BUMP = [(1, 0, 0.3)]
WAVY = [(1, 0, 0.1), (2, 1, 0.05)]


@pytest.fixture(scope="session")
def grid():
    return SphereGrid.build(UNIT_L_MAX)


@pytest.fixture(scope="session")
def round_metric(grid):
    return SurfaceMetric.from_harmonics(grid)


@pytest.fixture(scope="session")
def bump_metric(grid):
    return SurfaceMetric.from_harmonics(grid, BUMP)


@pytest.fixture(scope="session")
def wavy_metric(grid):
    return SurfaceMetric.from_harmonics(grid, WAVY)


@pytest.fixture(scope="session")
def bundles(round_metric, bump_metric):
    """Hermitian structures and Gram matrices for the degrees the suite uses."""
    out = {}
    for name, m in (("round", round_metric), ("bump", bump_metric)):
        for n in (0, 1, 2):
            h = constant_curvature_weight(m, n)
            out[(name, n)] = (h, gram_matrix(h))
    return out


def random_band_limited(grid, rng, band=8, scale=1.0):
    """Real random field with harmonic content up to the given degree."""
    c = np.zeros(grid.n_coef, dtype=complex)
    idx = np.where(grid.ell <= band)[0]
    raw = rng.standard_normal((idx.size, 2))
    c[idx] = raw[:, 0] + 1j * raw[:, 1]
    f = grid.synthesis(c).real
    return scale * f / max(float(np.max(np.abs(f))), 1e-300)

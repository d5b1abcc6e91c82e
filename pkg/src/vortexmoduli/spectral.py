"""Spectrum of the n=1 moduli metric versus the Fubini-Study reference.

For one vortex the moduli space is a 2-sphere with stereographic coordinate
``zeta`` equal to the vortex position (``zeta = tan(theta/2) e^{i phi}``), and
the metric is Kahler, hence conformal in that chart: ``g_eps = Phi |dzeta|^2``.
The conformal factor is measured at each node of a moduli grid by one vortex
solve plus one metric assembly, converted to the coordinate chart through the
analytic divisor-to-coefficient Jacobian.  The Laplace spectrum then comes
from the generalized band-limited eigenproblem
``Delta_round psi = lambda (Phi / Phi_round) psi`` on the moduli sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bundle import Divisor, HermitianStructure, Section, gram_matrix, section_from_divisor
from .errors import ConvergenceError, PreconditionError
from .moduli import TangentFrame, _rip, assemble_metric, horizontal_basis, horizontal_lift
from .sphere import SphereGrid
from .vortex import solve_vortex

ANISOTROPY_FAIL = 1e-2  # beyond this the field is a discretization failure


@dataclass
class SpectrumReport:
    """Nondecreasing eigenvalue list with degeneracy clusters."""

    eigenvalues: np.ndarray
    clusters: list  # (cluster mean, multiplicity)


@dataclass
class ModuliMetricField:
    """Conformal factor of the normalized moduli metric on the moduli sphere.

    ``Phi`` is the factor in the stereographic chart (g_eps = Phi |dzeta|^2),
    ``phi_rel`` the same factor relative to the round unit moduli sphere,
    ``deviation`` the per-node distance of the frame matrix from the
    identity, and ``anisotropy`` the worst relative conformality defect.
    """

    moduli_grid: SphereGrid
    eps: float
    Phi: np.ndarray
    phi_rel: np.ndarray
    sqrt_det_rel: np.ndarray = field(repr=False)
    deviation: np.ndarray = field(repr=False)
    anisotropy: float = 0.0

    def volume_normalized(self) -> float:
        """Area of the moduli sphere under g_eps (the pi of the flat-volume law)."""
        return float(np.sum(self.moduli_grid.weights * self.sqrt_det_rel))

    def volume(self) -> float:
        """Area under the unnormalized metric g = eps * g_eps."""
        return self.eps * self.volume_normalized()

    @property
    def max_deviation(self) -> float:
        return float(np.max(self.deviation)) if self.deviation.size else 0.0

    @classmethod
    def fs_reference(cls, moduli_grid: SphereGrid) -> "ModuliMetricField":
        """The submersion (Fubini-Study) metric itself: a round sphere of area pi."""
        zeta2 = np.tan(moduli_grid.theta2d / 2.0) ** 2
        Phi = 1.0 / (1.0 + zeta2) ** 2
        rel = np.full(moduli_grid.shape, 0.25)
        return cls(
            moduli_grid=moduli_grid,
            eps=0.0,
            Phi=Phi,
            phi_rel=rel,
            sqrt_det_rel=rel.copy(),
            deviation=np.zeros(moduli_grid.shape),
            anisotropy=0.0,
        )


def fs_spectrum(n: int, k_max: int) -> SpectrumReport:
    """Closed-form Fubini-Study spectrum on the n-vortex moduli space.

    Distinct eigenvalues ``lambda_k = 4 k (n + k)`` with multiplicities
    ``C(n+k, k)^2 - C(n+k-1, k-1)^2`` (equivalently
    ``(n + 2k)/n * C(n+k-1, k)^2``), flattened in nondecreasing order.
    """
    if n < 1 or k_max < 1:
        raise PreconditionError("need n >= 1 and k_max >= 1")
    values = []
    clusters = []
    for k in range(k_max + 1):
        lam = 4.0 * k * (n + k)
        if k == 0:
            d = 1
        else:
            d = math.comb(n + k, k) ** 2 - math.comb(n + k - 1, k - 1) ** 2
        clusters.append((lam, d))
        values.extend([lam] * d)
    return SpectrumReport(eigenvalues=np.array(values), clusters=clusters)


def cluster_eigenvalues(values: np.ndarray, rtol: float = 1e-4, atol: float = 1e-8) -> list:
    """Group a sorted eigenvalue list into (mean, multiplicity) clusters."""
    clusters = []
    group = [values[0]]
    for v in values[1:]:
        if abs(v - group[-1]) <= atol + rtol * max(abs(v), 1.0):
            group.append(v)
        else:
            clusters.append((float(np.mean(group)), len(group)))
            group = [v]
    clusters.append((float(np.mean(group)), len(group)))
    return clusters


def _chart_matrix(frame: TangentFrame, G_eps: np.ndarray, psi_norm: float) -> np.ndarray:
    """Metric matrix in the real stereographic chart (x, y) = (Re, Im) zeta.

    The coefficient path for a moving root is ``psi(zeta) = (-zeta, 1)``, so
    the coordinate velocities are constant sections; they are rescaled by the
    path norm, projected horizontally, and expressed in the frame.
    """
    v_x = np.array([-1.0, 0.0], dtype=complex) / psi_norm
    v_y = np.array([-1.0j, 0.0], dtype=complex) / psi_norm
    cols = []
    for v in (v_x, v_y):
        lifted = horizontal_lift(frame, v)
        cols.append([_rip(lifted.coeffs, d.coeffs, frame.gram) for d in frame.directions])
    J = np.array(cols).T  # (n_dirs, 2)
    return J.T @ G_eps @ J


def metric_at_divisor_point(theta: float, phi: float, eps: float, h: HermitianStructure,
                            gram: np.ndarray) -> dict:
    """One moduli node: solve the vortex there and return chart-metric data."""
    d = Divisor.from_points([(theta, phi, 1)])
    sec = section_from_divisor(d, h, gram)
    s = solve_vortex(d, eps, h, section=sec, gram=gram)

    zeta = np.tan(theta / 2.0) * np.exp(1j * phi)
    psi = np.array([-zeta, 1.0], dtype=complex)
    psi_norm = float(np.sqrt(np.real(psi @ gram @ psi.conj())))
    base = Section(psi / psi_norm)
    frame = horizontal_basis(base, gram)
    sample = assemble_metric(s, frame, h)

    A = _chart_matrix(frame, sample.G_eps, psi_norm)
    a01 = 0.5 * (A[0, 1] + A[1, 0])
    phi_chart = 0.5 * (A[0, 0] + A[1, 1])
    aniso = float(np.hypot(0.5 * (A[0, 0] - A[1, 1]), a01) / phi_chart)
    conf = (1.0 + abs(zeta) ** 2) ** 2 / 4.0  # chart-to-round conversion
    det = A[0, 0] * A[1, 1] - a01 * a01
    return {
        "Phi": phi_chart,
        "phi_rel": phi_chart * conf,
        "sqrt_det_rel": float(np.sqrt(max(det, 0.0))) * conf,
        "deviation": sample.deviation,
        "anisotropy": aniso,
        "gauge_residual": sample.gauge_residual_max,
    }


# fork-shared state for parallel moduli-field evaluation (set before Pool creation)
_FIELD_STATE: dict = {}


def _field_worker(args):
    it, ip, theta, phi = args
    st = _FIELD_STATE
    rec = metric_at_divisor_point(theta, phi, st["eps"], st["h"], st["gram"])
    return it, ip, rec


def moduli_metric_field(
    eps: float,
    m,
    h: HermitianStructure,
    moduli_grid: SphereGrid,
    *,
    threads: int = 1,
) -> ModuliMetricField:
    """Measure the n=1 normalized moduli metric over a grid of vortex positions.

    Runs one vortex solve and one metric assembly per moduli node (nodes are
    independent; with ``threads > 1`` they are evaluated by a forked pool in a
    fixed order, so results are deterministic).
    """
    if h.degree != 1:
        raise PreconditionError("moduli metric field requires bundle degree 1")
    if not (0.0 < eps < 1.0):
        raise PreconditionError(f"eps={eps} outside (0, 1)")
    if m is not h.metric and not np.array_equal(m.rho, h.metric.rho):
        raise PreconditionError("surface metric does not match the hermitian structure")
    gram = gram_matrix(h)
    tasks = [
        (it, ip, float(moduli_grid.theta[it]), float(moduli_grid.phi[ip]))
        for it in range(moduli_grid.n_theta)
        for ip in range(moduli_grid.n_phi)
    ]
    out: dict = {k: np.zeros(moduli_grid.shape) for k in
                 ("Phi", "phi_rel", "sqrt_det_rel", "deviation", "anisotropy")}
    if threads > 1:
        import multiprocessing

        _FIELD_STATE.update({"eps": eps, "h": h, "gram": gram})
        ctx = multiprocessing.get_context("fork")
        with ctx.Pool(processes=threads) as pool:
            results = pool.map(_field_worker, tasks, chunksize=8)
        _FIELD_STATE.clear()
    else:
        results = [(_t[0], _t[1], metric_at_divisor_point(_t[2], _t[3], eps, h, gram))
                   for _t in tasks]
    for it, ip, rec in results:
        for k in out:
            out[k][it, ip] = rec[k]
    aniso = float(np.max(out["anisotropy"]))
    if aniso > ANISOTROPY_FAIL:
        raise ConvergenceError(f"conformality defect {aniso:.3e}: discretization failure")
    return ModuliMetricField(
        moduli_grid=moduli_grid,
        eps=eps,
        Phi=out["Phi"],
        phi_rel=out["phi_rel"],
        sqrt_det_rel=out["sqrt_det_rel"],
        deviation=out["deviation"],
        anisotropy=aniso,
    )


def laplace_spectrum(f: ModuliMetricField, k_max: int) -> SpectrumReport:
    """Low eigenvalues of the Laplacian of the measured moduli metric.

    Solves the dense generalized band-limited problem
    ``diag(l(l+1)) c = lambda B c`` with ``B`` the Gram matrix of harmonics
    weighted by the relative conformal factor.
    """
    if f.anisotropy > ANISOTROPY_FAIL:
        raise PreconditionError("field anisotropy too large for a spectral solve")
    g = f.moduli_grid
    n = g.n_coef
    needed = 1 + sum(2 * k + 1 for k in range(1, k_max + 1))
    if needed > n:
        raise PreconditionError("moduli grid too coarse for the requested clusters")
    B = np.zeros((n, n), dtype=complex)
    for k in range(n):
        e = np.zeros(n, dtype=complex)
        e[k] = 1.0
        B[:, k] = g.analysis(f.phi_rel * g.synthesis(e))
    B = 0.5 * (B + B.conj().T)
    L = np.diag(g.lap_eigs).astype(complex)
    try:
        vals = scipy.linalg.eigh(L, B, eigvals_only=True)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceError(f"moduli eigensolve failed: {exc}") from exc
    vals = np.sort(vals.real)[:needed]
    return SpectrumReport(eigenvalues=vals, clusters=cluster_eigenvalues(vals))


def ratio_bounds(C: float, eps: float, n: int) -> tuple[float, float]:
    """Closed-form sandwich for eigenvalue ratios lambda_k(g_eps)/lambda_k(g_0)."""
    if C <= 0.0:
        raise PreconditionError("constant C must be positive")
    if not (0.0 <= eps < 1.0 / C):
        raise PreconditionError(f"eps={eps} outside [0, 1/C) for C={C}")
    lower = (1.0 - C * eps) ** n / (1.0 + C * eps) ** (n + 1)
    upper = (1.0 + C * eps) ** n / (1.0 - C * eps) ** (n + 1)
    return lower, upper

"""Conformal surface metrics on S^2 and the associated elliptic solvers.

A metric is ``g = exp(2 rho) * g_round`` with ``rho`` band-limited, so the
(positive-spectrum) Laplace-Beltrami operator is
``Delta_g f = exp(-2 rho) * Delta_round f`` and every PDE here reduces to a
multiplication-plus-spectral-operator problem.  Poisson problems are solved
diagonally in harmonic space; Helmholtz problems ``Delta_g v + a v = b`` by
conjugate gradients preconditioned with ``(Delta_round + mean(a e^{2 rho}))^-1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, PreconditionError, SolvabilityError
from .sphere import GridFunction, SphereGrid

_TINY = np.finfo(float).eps


@dataclass
class SurfaceMetric:
    """Conformal metric exp(2 rho) * g_round on the unit sphere.

    ``area`` is the total area and ``lambda1`` the first nonzero eigenvalue
    of Delta_g (computed lazily).  Instances are immutable by convention and
    safe to share across threads.
    """

    grid: SphereGrid
    rho: GridFunction
    rho_terms: tuple = ()
    e2rho: GridFunction = field(default=None, repr=False)
    area: float = 0.0
    _lambda1: float | None = field(default=None, repr=False)

    @classmethod
    def from_harmonics(cls, grid: SphereGrid, rho_terms=()) -> "SurfaceMetric":
        """Build from a list of real-harmonic ``(l, m, value)`` terms for rho."""
        rho = grid.real_harmonic_field(rho_terms) if rho_terms else np.zeros(grid.shape)
        e2rho = np.exp(2.0 * rho)
        area = float(np.sum(grid.weights * e2rho))
        return cls(grid=grid, rho=rho, rho_terms=tuple(rho_terms), e2rho=e2rho, area=area)

    @property
    def lambda1(self) -> float:
        if self._lambda1 is None:
            self._lambda1 = first_eigenvalue(self)
        return self._lambda1


def integrate(f: GridFunction, m: SurfaceMetric):
    """Integral of f over the surface, with the conformal area weight."""
    f = m.grid.check_field(f)
    val = np.sum(m.grid.weights * m.e2rho * f)
    return val if np.iscomplexobj(f) else float(val)


def laplace_beltrami(f: GridFunction, m: SurfaceMetric) -> GridFunction:
    """Delta_g f with the positive-spectrum convention (Delta Y_lm = l(l+1) Y_lm)."""
    g = m.grid
    out = g.synthesis(g.lap_eigs * g.analysis(f)) / m.e2rho
    return out.real if np.isrealobj(f) else out


def norms(f: GridFunction, m: SurfaceMetric) -> dict:
    """L2, H1 and sup norms of f.

    The Dirichlet energy is conformally invariant in two dimensions, so it
    is summed from round-sphere harmonic coefficients.
    """
    f = m.grid.check_field(f)
    l2sq = float(np.real(integrate(np.abs(f) ** 2, m)))
    c = m.grid.analysis(f)
    dirichlet = float(np.sum(m.grid.lap_eigs * np.abs(c) ** 2))
    return {
        "l2": np.sqrt(max(l2sq, 0.0)),
        "h1": np.sqrt(max(l2sq + dirichlet, 0.0)),
        "c0": float(np.max(np.abs(f))),
    }


def _l2(f: GridFunction, m: SurfaceMetric) -> float:
    return float(np.sqrt(max(np.real(integrate(np.abs(f) ** 2, m)), 0.0)))


def equation_residual(v, a, b, m: SurfaceMetric) -> float:
    """Relative residual of Delta_g v + a v = b in the discretization space.

    Both sides are weighted by e^{2 rho} (which turns Delta_g v into the
    exactly representable Delta_round v) and projected onto degree <= l_max:
    the defect of the Galerkin system the solver poses.  For band-limited
    data this agrees with the plain relative L2 residual; for rough data it
    excludes the unresolved tail, which belongs to the data, not the solver.
    """
    g = m.grid
    defect = g.synthesis(g.lap_eigs * g.analysis(v)) - m.e2rho * b
    if a is not None:
        defect = defect + m.e2rho * a * v
    num = float(np.linalg.norm(g.analysis(defect)))
    den = float(np.linalg.norm(g.analysis(m.e2rho * b)))
    return num / max(den, _TINY)


def solve_poisson(b: GridFunction, m: SurfaceMetric) -> GridFunction:
    """Solve Delta_g v = b for the unique solution with integral zero.

    Requires b mean-zero (relative to sqrt(area) * ||b||, tolerance 1e-9).
    The conformal rescaling Delta_round v = e^{2 rho} b diagonalizes in
    harmonic space, so the solve is direct.
    """
    g = m.grid
    b = g.check_field(b)
    nb = _l2(b, m)
    if nb == 0.0:
        return np.zeros(g.shape)
    defect = abs(integrate(b, m))
    if defect > 1e-9 * np.sqrt(m.area) * nb:
        raise SolvabilityError(
            f"right-hand side is not mean-zero: |integral|={defect:.3e}, ||b||={nb:.3e}"
        )
    rhs = g.analysis(m.e2rho * b)
    c = np.zeros_like(rhs)
    c[1:] = rhs[1:] / g.lap_eigs[1:]
    v = g.synthesis(c)
    v = v.real if np.isrealobj(b) else v
    v = v - integrate(v, m) / m.area
    res = equation_residual(v, None, b, m)
    if res > 1e-9:
        raise ConvergenceError("Poisson solve left an unexpected residual", residual=res)
    return v


def solve_helmholtz(
    a: GridFunction,
    b: GridFunction,
    m: SurfaceMetric,
    *,
    check: bool = True,
    cg_rtol: float = 1e-10,
) -> GridFunction:
    """Solve Delta_g v + a v = b for a >= 0 with positive integral.

    Conjugate gradients on the coefficient-space system, preconditioned by
    ``(l (l + 1) + mean(a e^{2 rho}))^-1``; iteration cap 10 * l_max.  With
    ``check=True`` the band-limited relative residual is verified against
    the 1e-9 contract.
    """
    g = m.grid
    a = g.check_field(a)
    b = g.check_field(b)
    amin = float(np.min(np.real(a)))
    if amin < -1e-13 * max(1.0, float(np.max(np.abs(a)))):
        raise PreconditionError(f"helmholtz coefficient has negative values (min={amin:.3e})")
    inta = float(np.real(integrate(a, m)))
    if inta <= 0.0:
        raise PreconditionError("helmholtz coefficient must have positive integral")

    W = m.e2rho * a
    rhs = g.analysis(m.e2rho * b)
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm == 0.0:
        return np.zeros(g.shape) if np.isrealobj(b) else np.zeros(g.shape, dtype=complex)

    wbar = float(np.sum(g.weights * W)) / (4.0 * np.pi)
    diag = g.lap_eigs + wbar

    def apply(c):
        return g.lap_eigs * c + g.analysis(W * g.synthesis(c))

    tol = cg_rtol * rhs_norm
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = r / diag
    p = z.copy()
    rz = np.vdot(r, z).real
    max_iters = 10 * max(g.l_max, 1)
    converged = False
    for _ in range(max_iters):
        Ap = apply(p)
        alpha = rz / np.vdot(p, Ap).real
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol:
            converged = True
            break
        z = r / diag
        rz_new = np.vdot(r, z).real
        p = z + (rz_new / rz) * p
        rz = rz_new
    if not converged:
        raise ConvergenceError(
            f"helmholtz CG did not converge in {max_iters} iterations",
            residual=float(np.linalg.norm(r)) / rhs_norm,
        )
    v = g.synthesis(x)
    if np.isrealobj(a) and np.isrealobj(b):
        v = v.real
    if check:
        res = equation_residual(v, a, b, m)
        if res > 1e-9:
            raise ConvergenceError("helmholtz residual above contract", residual=res)
    return v


def first_eigenvalue(m: SurfaceMetric, *, tol: float = 0.0) -> float:
    """Smallest positive eigenvalue of Delta_g.

    Solves the generalized problem ``Delta_round f = lambda e^{2 rho} f``:
    eliminating the constant mode by a Schur complement leaves a hermitian
    positive-definite pencil on the l >= 1 coefficients, whose largest
    inverse-eigenvalue is found with ARPACK.
    """
    g = m.grid
    n = g.n_coef
    if n < 2:
        raise PreconditionError("band limit too small for an eigenvalue problem")

    def bop(c):
        return g.analysis(m.e2rho * g.synthesis(c))

    e0 = np.zeros(n, dtype=complex)
    e0[0] = 1.0
    col0 = bop(e0)
    b00 = col0[0].real
    sqrt_l = np.sqrt(g.lap_eigs[1:])

    def kop(y):
        y = np.asarray(y, dtype=complex)
        cp = y / sqrt_l
        full = np.zeros(n, dtype=complex)
        full[1:] = cp
        bc = bop(full)
        t = bc[1:] - col0[1:] * (np.vdot(col0[1:], cp) / b00)
        return t / sqrt_l

    K = spla.LinearOperator((n - 1, n - 1), matvec=kop, dtype=complex)
    v0 = np.zeros(n - 1, dtype=complex)
    v0[g.index(1, 0) - 1] = 1.0
    try:
        mu = spla.eigsh(K, k=1, which="LA", v0=v0, maxiter=10000, tol=tol,
                        return_eigenvectors=False)
    except spla.ArpackNoConvergence as exc:  # pragma: no cover
        raise ConvergenceError("eigenvalue iteration failed to converge") from exc
    mu_max = float(mu[0])
    if mu_max <= 0.0:
        raise ConvergenceError("eigenvalue iteration produced a nonpositive value")
    return 1.0 / mu_max

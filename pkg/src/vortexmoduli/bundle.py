"""Degree-n hermitian line bundle over the sphere and its holomorphic sections.

Sections are stored as homogeneous degree-n polynomials in
``(z0, z1) = (cos(theta/2), sin(theta/2) e^{i phi})``; this absorbs the round
hermitian weight exactly and keeps pointwise norms stable at both poles.
On a general conformal metric the hermitian structure carries an extra
scalar weight ``w`` chosen so that the bundle curvature is constant:
``|s|_h^2 = |P(z0, z1)|^2 e^{-2 w}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, PreconditionError
from .geometry import SurfaceMetric, integrate, laplace_beltrami, solve_poisson
from .sphere import GridFunction


@dataclass(frozen=True)
class Divisor:
    """Multiset of points on S^2 with positive integer multiplicities."""

    theta: np.ndarray
    phi: np.ndarray
    mult: np.ndarray

    @classmethod
    def from_points(cls, points) -> "Divisor":
        """Build from an iterable of ``(theta, phi, multiplicity)`` triples."""
        pts = list(points)
        theta = np.array([float(p[0]) for p in pts])
        phi = np.array([float(p[1]) for p in pts])
        mult = np.array([int(p[2]) if len(p) > 2 else 1 for p in pts], dtype=int)
        if np.any(mult < 1):
            raise PreconditionError("divisor multiplicities must be positive")
        return cls(theta=theta, phi=phi, mult=mult)

    @property
    def degree(self) -> int:
        return int(self.mult.sum()) if self.mult.size else 0

    def xyz(self) -> np.ndarray:
        """Unit vectors of the support points, one row per point."""
        st, ct = np.sin(self.theta), np.cos(self.theta)
        return np.stack([st * np.cos(self.phi), st * np.sin(self.phi), ct], axis=-1)

    def expanded(self):
        """Support points repeated with multiplicity."""
        for t, p, k in zip(self.theta, self.phi, self.mult):
            for _ in range(int(k)):
                yield float(t), float(p)


@dataclass(frozen=True)
class Section:
    """Holomorphic section as homogeneous-polynomial coefficients (a_0..a_n)."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=complex))

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def scaled(self, c: complex) -> "Section":
        return Section(self.coeffs * c)


def homogeneous_eval(coeffs: np.ndarray, theta, phi) -> np.ndarray:
    """Evaluate sum_j a_j z0^{n-j} z1^j at the given angles (stable at poles)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    n = coeffs.size - 1
    z0 = np.cos(np.asarray(theta) / 2.0).astype(complex)
    z1 = np.sin(np.asarray(theta) / 2.0) * np.exp(1j * np.asarray(phi))
    out = np.zeros(np.broadcast(z0, z1).shape, dtype=complex)
    for j in range(n + 1):
        out = out + coeffs[j] * z0 ** (n - j) * z1**j
    return out


@dataclass
class HermitianStructure:
    """Constant-curvature hermitian structure on the degree-n bundle.

    ``w`` is the mean-zero curvature-correction weight: the pointwise norm of
    a section with polynomial P is ``|P|^2 e^{-2 w}``.  Monomial evaluations
    on the grid are cached for reuse across sections.
    """

    degree: int
    metric: SurfaceMetric
    w: GridFunction
    curvature: GridFunction = field(repr=False)
    e_m2w: GridFunction = field(repr=False)
    _monomials: np.ndarray = field(repr=False)  # (n+1, n_theta, n_phi)

    @property
    def grid(self):
        return self.metric.grid

    def monomial_fields(self) -> np.ndarray:
        return self._monomials

    def section_field(self, s: Section) -> np.ndarray:
        """Grid samples of the homogeneous polynomial of s."""
        if s.degree != self.degree:
            raise PreconditionError(
                f"section degree {s.degree} does not match bundle degree {self.degree}"
            )
        return np.einsum("j,jtp->tp", s.coeffs, self._monomials)


def constant_curvature_weight(m: SurfaceMetric, n: int) -> HermitianStructure:
    """Hermitian structure whose curvature is the constant 2 pi n / area.

    The round-weight curvature density is ``e^{-2 rho} n / 2``; the correction
    weight solves the Poisson problem driving the difference to zero, and the
    resulting curvature is verified pointwise.
    """
    if n < 0:
        raise PreconditionError("bundle degree must be nonnegative")
    g = m.grid
    target = 2.0 * np.pi * n / m.area
    if n == 0:
        w = np.zeros(g.shape)
    else:
        rhs = 0.5 * n / m.e2rho - target
        scale = 0.5 * n * np.sqrt(m.area)
        if float(np.sqrt(np.real(integrate(rhs**2, m)))) <= 1e-12 * scale:
            w = np.zeros(g.shape)  # round weight is already constant-curvature
        else:
            w = solve_poisson(rhs, m)
    curvature = 0.5 * n / m.e2rho - laplace_beltrami(w, m)
    dev = float(np.max(np.abs(curvature - target)))
    if dev > 1e-7 * (target + 1.0):
        raise ConvergenceError(
            f"curvature is not constant to tolerance (sup deviation {dev:.3e})"
        )

    theta2, phi2 = g.theta2d, g.phi2d
    z0 = np.cos(theta2 / 2.0).astype(complex)
    z1 = np.sin(theta2 / 2.0) * np.exp(1j * phi2)
    monomials = np.stack([z0 ** (n - j) * z1**j for j in range(n + 1)])
    return HermitianStructure(
        degree=n,
        metric=m,
        w=w,
        curvature=curvature,
        e_m2w=np.exp(-2.0 * w),
        _monomials=monomials,
    )


def gram_matrix(h: HermitianStructure) -> np.ndarray:
    """L2 Gram matrix M_jk = <e_j, e_k> of the monomial basis sections.

    Hermitian positive-definite; on the round sphere it is the diagonal of
    Beta integrals ``4 pi j! (n-j)! / (n+1)!``.
    """
    wt = h.metric.grid.weights * h.metric.e2rho * h.e_m2w
    E = h.monomial_fields()
    M = np.einsum("jtp,tp,ktp->jk", E, wt, E.conj())
    return 0.5 * (M + M.conj().T)


def section_inner(s: Section, t: Section, gram: np.ndarray) -> complex:
    """L2 inner product <s, t>, linear in the first argument."""
    return complex(s.coeffs @ gram @ t.coeffs.conj())


def section_from_divisor(d: Divisor, h: HermitianStructure, gram: np.ndarray | None = None) -> Section:
    """Unit-norm holomorphic section vanishing exactly on the divisor.

    The coefficient vector is the expanded product of the linear forms
    ``sin(t/2) e^{i p} z0 - cos(t/2) z1`` over divisor points; the phase is
    fixed by making the largest-magnitude coefficient real and positive.
    """
    n = h.degree
    if d.degree != n:
        raise PreconditionError(f"divisor degree {d.degree} does not match bundle degree {n}")
    c = np.array([1.0 + 0.0j])
    for t, p in d.expanded():
        alpha = np.sin(t / 2.0) * np.exp(1j * p)
        beta = np.cos(t / 2.0)
        c = alpha * np.concatenate([c, [0.0]]) - beta * np.concatenate([[0.0], c])
    if gram is None:
        gram = gram_matrix(h)
    nrm2 = float(np.real(c @ gram @ c.conj()))
    c = c / np.sqrt(nrm2)
    j = int(np.argmax(np.abs(c)))
    c = c * (np.abs(c[j]) / c[j])
    return Section(c)


def evaluate_norm(s: Section, h: HermitianStructure) -> GridFunction:
    """Pointwise squared norm |s|_h^2 on the grid (nonnegative)."""
    P = h.section_field(s)
    return (P.real**2 + P.imag**2) * h.e_m2w


def pair_field(s: Section, t: Section, h: HermitianStructure) -> GridFunction:
    """Pointwise fibre pairing h(s, t) = P_s conj(P_t) e^{-2w} (linear in s)."""
    return h.section_field(s) * h.section_field(t).conj() * h.e_m2w


def sup_norm_alpha(h: HermitianStructure, samples: int, seed: int = 0) -> float:
    """Empirical lower bound for sup |s|_h over unit sections and grid nodes.

    Maximizes over the monomial basis, sections concentrated at a coarse
    subset of nodes, and ``samples`` random unit sections drawn from a fixed
    seed (so the estimate is monotone in ``samples``).
    """
    if samples < 100:
        raise PreconditionError("need at least 100 random samples")
    n = h.degree
    gram = gram_matrix(h)
    g = h.grid

    def unit_max(c):
        nrm2 = float(np.real(c @ gram @ c.conj()))
        s = Section(c / np.sqrt(nrm2))
        return float(np.sqrt(np.max(evaluate_norm(s, h))))

    best = 0.0
    for j in range(n + 1):
        e = np.zeros(n + 1, dtype=complex)
        e[j] = 1.0
        best = max(best, unit_max(e))
    if n > 0:
        stride_t = max(1, g.n_theta // 8)
        stride_p = max(1, g.n_phi // 8)
        for it in range(0, g.n_theta, stride_t):
            for ip in range(0, g.n_phi, stride_p):
                d = Divisor.from_points([(g.theta[it], g.phi[ip], n)])
                best = max(best, unit_max(section_from_divisor(d, h, gram).coeffs))
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        raw = rng.standard_normal(2 * (n + 1))
        c = raw[: n + 1] + 1j * raw[n + 1 :]
        best = max(best, unit_max(c))
    return best

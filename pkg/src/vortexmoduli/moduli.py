"""Moduli-space metrics: horizontal frames, linearized solves, assembly.

A tangent direction at a moduli point is a section variation ``psidot``
orthogonal (in the real L2 sense) to both ``phihat`` and ``i phihat``.  Each
direction drives two linear PDEs sharing the coefficient
``a = eps |phihat|^2 e^u``:

    Delta chidot + a chidot = -eps e^u Re h(i phihat, psidot)   (gauge fixing)
    Delta udot   + a udot   = -2 eps e^u Re h(phihat, psidot)   (linearized flow)

and the squared length of the moduli velocity is

    g(v, v) = eps * integral e^u { |psidot|^2 + Re h(psidot, phihat) udot
              + 2 Re h(psidot, i phihat) chidot + |phihat|^2 (udot^2/4 + chidot^2) }
              + 1/4 ||d udot||^2 + ||d chidot||^2.

The bilinear extension is assembled by polarization; the linear solves are
reused across direction pairs.  Fibre pairings inside real integrands take
the real part of the hermitian product, and all assembled quantities are
verified real.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import HermitianStructure, Section, evaluate_norm, pair_field, section_inner
from .errors import DegenerateDirectionError, PreconditionError
from .geometry import (
    SurfaceMetric,
    equation_residual,
    integrate,
    norms,
    solve_helmholtz,
)
from .sphere import GridFunction
from .vortex import VortexSolution


@dataclass
class TangentFrame:
    """Real-orthonormal horizontal directions at a moduli point."""

    base: Section
    directions: list
    gram: np.ndarray = field(repr=False)


@dataclass
class LinearizedResponse:
    """Solution pair (udot, chidot) of the driven linear PDEs for one direction."""

    u_dot: GridFunction
    chi_dot: GridFunction
    a: GridFunction
    b_u: GridFunction
    b_chi: GridFunction
    residual_u: float
    residual_chi: float


@dataclass
class MetricSample:
    """Normalized metric matrix at one moduli point, in a horizontal frame.

    ``G_eps`` is the L2 metric divided by eps expressed in a frame that is
    orthonormal for the submersion metric, so the deviation from the
    identity is the pointwise distance between the two metrics.
    """

    divisor: object
    eps: float
    G_eps: np.ndarray
    deviation: float
    gauge_residual_max: float
    diag_pairs: list  # (g_eps(v, v), g_0(v, v)) per frame direction


def _rip(u: np.ndarray, v: np.ndarray, gram: np.ndarray) -> float:
    """Real part of the coefficient-space L2 inner product."""
    return float(np.real(u @ gram @ v.conj()))


def horizontal_basis(phi_hat: Section, gram: np.ndarray) -> TangentFrame:
    """Orthonormal basis of the horizontal subspace at a unit section.

    Gram-Schmidt with pivoting over the real 2(n+1)-dimensional coefficient
    space, against the vertical pair {phi_hat, i phi_hat}; returns exactly
    2n directions.
    """
    n = phi_hat.degree
    base = phi_hat.coeffs
    nrm2 = _rip(base, base, gram)
    if abs(nrm2 - 1.0) > 1e-8:
        raise PreconditionError("frame base section must have unit L2 norm")

    accepted = [base, 1j * base]
    candidates = []
    for j in range(n + 1):
        e = np.zeros(n + 1, dtype=complex)
        e[j] = 1.0
        candidates.append(e)
        candidates.append(1j * e)

    def project_out(v):
        for b in accepted:
            v = v - _rip(v, b, gram) * b
        return v

    frame = []
    residual = [project_out(c) for c in candidates]
    for _ in range(2 * n):
        nrms = [_rip(v, v, gram) for v in residual]
        k = int(np.argmax(nrms))
        if nrms[k] <= 1e-20:
            raise PreconditionError("rank-deficient coefficient space")
        v = residual[k] / np.sqrt(nrms[k])
        v = project_out(v)  # second pass for orthogonality to 1e-10
        v = v / np.sqrt(_rip(v, v, gram))
        accepted.append(v)
        frame.append(Section(v))
        residual = [r - _rip(r, v, gram) * v for r in residual]
    return TangentFrame(base=phi_hat, directions=frame, gram=gram)


def horizontal_lift(frame: TangentFrame, coeff_dir: np.ndarray) -> Section:
    """Project a raw coefficient variation onto the horizontal subspace."""
    v = np.asarray(coeff_dir, dtype=complex)
    base = frame.base.coeffs
    scale = max(np.sqrt(_rip(v, v, frame.gram)), 1e-300)
    v = v - _rip(v, base, frame.gram) * base
    v = v - _rip(v, 1j * base, frame.gram) * (1j * base)
    if np.sqrt(_rip(v, v, frame.gram)) <= 1e-12 * scale:
        raise DegenerateDirectionError("direction is vertical (parallel to the fibre)")
    return Section(v)


def solve_linearized(
    s: VortexSolution,
    direction: Section,
    h: HermitianStructure,
    *,
    base: Section | None = None,
) -> LinearizedResponse:
    """Solve the two driven PDEs for one horizontal direction.

    ``base`` selects the unit-section representative the direction is
    horizontal against (defaults to the solution's own section; any common
    phase rotation of base and direction leaves the result unchanged).
    """
    m = h.metric
    if base is None:
        base = s.section
    base_sq = pair_field(base, base, h).real
    if float(np.max(np.abs(base_sq - s.q))) > 1e-8 * max(float(np.max(s.q)), 1e-300):
        raise PreconditionError("frame base does not represent the solved moduli point")

    eu = np.exp(s.u)
    a = s.eps * s.q * eu
    pairing = pair_field(base, direction, h)  # h(phihat, psidot) pointwise
    # horizontality of the direction against the base, in the L2 sense
    ip = np.conj(complex(integrate(pairing, m)))
    dir_norm = np.sqrt(max(float(np.real(integrate(evaluate_norm(direction, h), m))), 0.0))
    if abs(ip) > 1e-7 * max(dir_norm, 1e-300):
        raise PreconditionError(f"direction is not horizontal (<dir, base> = {ip:.2e})")

    b_u = -2.0 * s.eps * eu * pairing.real
    # Re h(i phihat, psidot) = Re(i h(phihat, psidot)) = -Im h(phihat, psidot)
    b_chi = s.eps * eu * pairing.imag
    if float(np.max(np.abs(b_u))) == 0.0 and float(np.max(np.abs(b_chi))) == 0.0:
        zero = np.zeros(m.grid.shape)
        return LinearizedResponse(zero, zero.copy(), a, b_u, b_chi, 0.0, 0.0)
    u_dot = solve_helmholtz(a, b_u, m, check=False)
    chi_dot = solve_helmholtz(a, b_chi, m, check=False)
    res_u = equation_residual(u_dot, a, b_u, m)
    res_chi = equation_residual(chi_dot, a, b_chi, m)
    return LinearizedResponse(u_dot, chi_dot, a, b_u, b_chi, res_u, res_chi)


def assemble_metric(
    s: VortexSolution,
    frame: TangentFrame,
    h: HermitianStructure,
    *,
    include_responses: bool = True,
) -> MetricSample:
    """Assemble the normalized L2 metric matrix in the given frame.

    ``include_responses=False`` drops the udot/chidot contributions and
    keeps only the leading term ``eps * integral e^u Re h(psi_i, psi_j)``.
    """
    m = h.metric
    g = m.grid
    dirs = frame.directions
    nd = len(dirs)
    eu = np.exp(s.u)
    wt = g.weights * m.e2rho * eu  # quadrature weight for integral e^u (...) dA_g

    P_base = h.section_field(frame.base)
    P_dirs = [h.section_field(d) for d in dirs]

    responses = []
    gauge_res = 0.0
    if include_responses and nd:
        for d in dirs:
            r = solve_linearized(s, d, h, base=frame.base)
            responses.append(r)
            gauge_res = max(gauge_res, r.residual_chi)

    # pair(psi_i, base) pointwise; real part drives udot terms, imag chidot terms
    pair_ib = [P * P_base.conj() * h.e_m2w for P in P_dirs]
    ud_coef = [g.analysis(r.u_dot) for r in responses]
    cd_coef = [g.analysis(r.chi_dot) for r in responses]

    G = np.zeros((nd, nd))
    for i in range(nd):
        for j in range(i, nd):
            t1 = float(np.sum(wt * np.real(P_dirs[i] * P_dirs[j].conj() * h.e_m2w)))
            if include_responses:
                ri, rj = responses[i], responses[j]
                t2 = 0.5 * float(
                    np.sum(wt * (pair_ib[i].real * rj.u_dot + pair_ib[j].real * ri.u_dot))
                )
                t3 = float(
                    np.sum(wt * (pair_ib[i].imag * rj.chi_dot + pair_ib[j].imag * ri.chi_dot))
                )
                t4 = float(
                    np.sum(wt * s.q * (0.25 * ri.u_dot * rj.u_dot + ri.chi_dot * rj.chi_dot))
                )
                t5 = 0.25 * float(np.sum(g.lap_eigs * np.real(ud_coef[i] * ud_coef[j].conj())))
                t5 += float(np.sum(g.lap_eigs * np.real(cd_coef[i] * cd_coef[j].conj())))
                val = s.eps * (t1 + t2 + t3 + t4) + t5
            else:
                val = s.eps * t1
            G[i, j] = G[j, i] = val

    G_eps = G / s.eps
    if nd:
        deviation = float(np.max(np.abs(np.linalg.eigvalsh(G_eps - np.eye(nd)))))
    else:
        deviation = 0.0
    return MetricSample(
        divisor=s.divisor,
        eps=s.eps,
        G_eps=G_eps,
        deviation=deviation,
        gauge_residual_max=gauge_res,
        diag_pairs=[(float(G_eps[i, i]), 1.0) for i in range(nd)],
    )


def fs_metric_coeff(psi: Section, psi_dot: Section, gram: np.ndarray) -> float:
    """Submersion quadratic form for an unnormalized projective path.

    ``(||psidot||^2 ||psi||^2 - |<psidot, psi>|^2) / ||psi||^4``; equals
    ``||psidot||^2`` for unit psi with horizontal psidot, and is invariant
    under common rescaling of (psi, psidot).
    """
    n2 = float(np.real(section_inner(psi, psi, gram)))
    if n2 <= 0.0:
        raise PreconditionError("base section must be nonzero")
    d2 = float(np.real(section_inner(psi_dot, psi_dot, gram)))
    cross = section_inner(psi_dot, psi, gram)
    return (d2 * n2 - abs(cross) ** 2) / n2**2


def lax_milgram_check(a: GridFunction, b: GridFunction, m: SurfaceMetric) -> dict:
    """Solve Delta v + a v = b and test the explicit H1 a-priori bound.

    The bound is ``C {(1 + r)(||b|| + r |int b|) + |int b| / int a}`` with
    ``r = ||a|| / int a`` and ``C = (1 + 1/lambda_1) max(1, sqrt(area))``.
    """
    v = solve_helmholtz(a, b, m)
    l2a = norms(a, m)["l2"]
    inta = float(np.real(integrate(a, m)))
    intb = float(np.real(integrate(b, m)))
    l2b = norms(b, m)["l2"]
    C = (1.0 + 1.0 / m.lambda1) * max(1.0, np.sqrt(m.area))
    ratio = l2a / inta
    rhs = C * ((1.0 + ratio) * (l2b + ratio * abs(intb)) + abs(intb) / inta)
    lhs = norms(v, m)["h1"]
    return {
        "lhs": lhs,
        "rhs": rhs,
        "satisfied": bool(lhs <= rhs * (1.0 + 1e-6)),
        "v": v,
    }

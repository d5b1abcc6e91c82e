"""Pseudospectral grid and spherical-harmonic transforms on S^2.

The grid is the product of Gauss-Legendre colatitude nodes (pole-free by
construction) and uniformly spaced longitudes.  With ``n_theta >= l_max + 1``
and ``n_phi >= 2 * l_max + 1`` the quadrature integrates products of two
band-limited functions of degree <= l_max exactly, so the forward and
backward transforms are mutually inverse on the retained band.

Conventions
-----------
* Complex harmonics ``Y_lm(theta, phi) = Pbar_lm(cos theta) exp(i m phi)``,
  orthonormal on the round unit sphere, Condon-Shortley phase included
  (matching ``scipy.special.sph_harm``).
* Coefficients are packed in a flat complex array indexed ``l*l + l + m``.
* Real harmonics used for configuration input: ``m = 0`` is ``Y_l0``;
  ``m > 0`` carries ``sqrt(2) * Pbar_lm * cos(m phi)``; ``m < 0`` carries
  ``sqrt(2) * Pbar_l|m| * sin(|m| phi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, PreconditionError

# A GridFunction is a (n_theta, n_phi) ndarray of real or complex samples.
GridFunction = np.ndarray


def normalized_legendre(l_max: int, x: np.ndarray) -> np.ndarray:
    """Fully normalized associated Legendre functions Pbar_lm(x).

    Returns an array of shape ``(l_max + 1, l_max + 1, len(x))`` indexed
    ``[m, l, node]`` (zero for l < m), normalized so that
    ``integral Pbar_lm^2 dx * 2 pi = 1``; includes the Condon-Shortley
    phase (-1)^m.  Stable three-term recurrence in l for each m.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((l_max + 1, l_max + 1, x.size))
    P[0, 0] = 1.0 / np.sqrt(4.0 * np.pi)
    for m in range(1, l_max + 1):
        P[m, m] = -np.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * P[m - 1, m - 1]
    for m in range(l_max + 1):
        if m + 1 <= l_max:
            P[m, m + 1] = np.sqrt(2.0 * m + 3.0) * x * P[m, m]
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt(
                (2.0 * l + 1.0)
                * (l - 1.0 + m)
                * (l - 1.0 - m)
                / ((2.0 * l - 3.0) * (l * l - m * m))
            )
            P[m, l] = a * x * P[m, l - 1] - b * P[m, l - 2]
    return P


@dataclass(frozen=True)
class SphereGrid:
    """Gauss-Legendre x uniform-longitude grid with transform tables.

    Instances are immutable and safe to share across threads; all cached
    tables are computed once at construction.
    """

    l_max: int
    n_theta: int
    n_phi: int
    theta: np.ndarray = field(repr=False)  # (n_theta,) ascending colatitudes
    phi: np.ndarray = field(repr=False)  # (n_phi,)
    x: np.ndarray = field(repr=False)  # cos(theta), descending
    w_theta: np.ndarray = field(repr=False)  # Gauss-Legendre weights
    weights: np.ndarray = field(repr=False)  # (n_theta, n_phi), sums to 4 pi
    ell: np.ndarray = field(repr=False)  # degree l per packed coefficient
    emm: np.ndarray = field(repr=False)  # order m per packed coefficient
    lap_eigs: np.ndarray = field(repr=False)  # l (l + 1) per coefficient
    _plm: np.ndarray = field(repr=False)  # (2 l_max + 1, l_max + 1, n_theta)
    _bin_map: np.ndarray = field(repr=False)  # FFT bin per order m
    _theta2d: np.ndarray = field(repr=False)
    _phi2d: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, l_max: int, n_theta: int | None = None, n_phi: int | None = None) -> "SphereGrid":
        if l_max < 0:
            raise PreconditionError("l_max must be nonnegative")
        n_theta = l_max + 1 if n_theta is None else n_theta
        n_phi = 2 * (l_max + 1) if n_phi is None else n_phi
        if n_theta < l_max + 1:
            raise PreconditionError(f"n_theta={n_theta} < l_max+1={l_max + 1}")
        if n_phi < 2 * l_max + 1:
            raise PreconditionError(f"n_phi={n_phi} < 2*l_max+1={2 * l_max + 1}")
        xs, ws = np.polynomial.legendre.leggauss(n_theta)
        order = np.argsort(-xs)  # theta ascending <=> x descending
        x = xs[order]
        w_theta = ws[order]
        theta = np.arccos(x)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        weights = np.outer(w_theta, np.full(n_phi, 2.0 * np.pi / n_phi))

        n_coef = (l_max + 1) ** 2
        ell = np.zeros(n_coef, dtype=int)
        emm = np.zeros(n_coef, dtype=int)
        for l in range(l_max + 1):
            for m in range(-l, l + 1):
                ell[l * l + l + m] = l
                emm[l * l + l + m] = m
        lap_eigs = (ell * (ell + 1)).astype(float)

        pm = normalized_legendre(l_max, x)  # m >= 0
        plm = np.zeros((2 * l_max + 1, l_max + 1, n_theta))
        for m in range(-l_max, l_max + 1):
            sign = (-1.0) ** (-m) if m < 0 else 1.0
            plm[m + l_max] = sign * pm[abs(m)]
        bin_map = np.arange(-l_max, l_max + 1) % n_phi

        return cls(
            l_max=l_max,
            n_theta=n_theta,
            n_phi=n_phi,
            theta=theta,
            phi=phi,
            x=x,
            w_theta=w_theta,
            weights=weights,
            ell=ell,
            emm=emm,
            lap_eigs=lap_eigs,
            _plm=plm,
            _bin_map=bin_map,
            _theta2d=np.broadcast_to(theta[:, None], (n_theta, n_phi)).copy(),
            _phi2d=np.broadcast_to(phi[None, :], (n_theta, n_phi)).copy(),
        )

    @classmethod
    def for_shape(cls, n_theta: int, n_phi: int) -> "SphereGrid":
        """Grid of a prescribed shape with the largest exactly supported band."""
        l_max = min(n_theta - 1, (n_phi - 1) // 2)
        return cls.build(l_max, n_theta=n_theta, n_phi=n_phi)

    # -- basic queries -----------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def n_coef(self) -> int:
        return (self.l_max + 1) ** 2

    @property
    def theta2d(self) -> np.ndarray:
        return self._theta2d

    @property
    def phi2d(self) -> np.ndarray:
        return self._phi2d

    def check_field(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise GridMismatchError(
                f"grid function of shape {f.shape} does not match grid {self.shape}"
            )
        return f

    def index(self, l: int, m: int) -> int:
        if not (0 <= l <= self.l_max and abs(m) <= l):
            raise PreconditionError(f"(l, m)=({l}, {m}) outside band limit {self.l_max}")
        return l * l + l + m

    # -- transforms --------------------------------------------------------

    def analysis(self, f: np.ndarray) -> np.ndarray:
        """Forward transform: grid samples -> packed coefficients."""
        f = self.check_field(f)
        F = np.fft.fft(f, axis=1) * (2.0 * np.pi / self.n_phi)
        Fm = F[:, self._bin_map].T * self.w_theta  # (n_m, n_theta)
        C = np.einsum("mlt,mt->ml", self._plm, Fm)
        return C[self.emm + self.l_max, self.ell]

    def synthesis(self, coeffs: np.ndarray) -> np.ndarray:
        """Backward transform: packed coefficients -> complex grid samples."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (self.n_coef,):
            raise GridMismatchError(
                f"coefficient vector of shape {coeffs.shape}; expected ({self.n_coef},)"
            )
        C = np.zeros((2 * self.l_max + 1, self.l_max + 1), dtype=complex)
        C[self.emm + self.l_max, self.ell] = coeffs
        G = np.einsum("mlt,ml->mt", self._plm, C)
        bins = np.zeros((self.n_theta, self.n_phi), dtype=complex)
        bins[:, self._bin_map] = G.T
        return np.fft.ifft(bins, axis=1) * self.n_phi

    def synthesis_at(self, coeffs: np.ndarray, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Evaluate a coefficient vector at arbitrary points (off-grid)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        phi = np.atleast_1d(np.asarray(phi, dtype=float))
        pm = normalized_legendre(self.l_max, np.cos(theta))
        out = np.zeros(theta.shape, dtype=complex)
        for m in range(-self.l_max, self.l_max + 1):
            sign = (-1.0) ** (-m) if m < 0 else 1.0
            ls = np.arange(abs(m), self.l_max + 1)
            idx = ls * ls + ls + m
            radial = np.einsum("l,lt->t", coeffs[idx], pm[abs(m), ls])
            out += sign * radial * np.exp(1j * m * phi)
        return out

    def band_project(self, f: np.ndarray) -> np.ndarray:
        """Project a grid function onto the resolved band (degree <= l_max)."""
        out = self.synthesis(self.analysis(f))
        return out.real if np.isrealobj(f) else out

    # -- coefficient helpers -------------------------------------------------

    def coeffs_from_real_harmonics(self, terms) -> np.ndarray:
        """Packed complex coefficients for a sum of real harmonics.

        ``terms`` is an iterable of ``(l, m, value)`` in the real basis
        described in the module docstring.
        """
        c = np.zeros(self.n_coef, dtype=complex)
        r = 1.0 / np.sqrt(2.0)
        for l, m, v in terms:
            l, m = int(l), int(m)
            if l > self.l_max or abs(m) > l:
                raise PreconditionError(f"real harmonic (l={l}, m={m}) outside band limit")
            if m == 0:
                c[self.index(l, 0)] += v
            elif m > 0:
                c[self.index(l, m)] += v * r
                c[self.index(l, -m)] += v * r * (-1.0) ** m
            else:
                mu = -m
                c[self.index(l, mu)] += -1j * v * r
                c[self.index(l, -mu)] += 1j * v * r * (-1.0) ** mu
        return c

    def real_harmonic_field(self, terms) -> np.ndarray:
        """Grid samples of a sum of real harmonics."""
        return self.synthesis(self.coeffs_from_real_harmonics(terms)).real

"""Anisotropic Sobolev norms on a discrete Fourier grid.

Frequency space is split by a polarization: two closed cones meeting only
at the origin, with smooth angular profiles that are 1 on one cone and 0 on
the other.  Crossed with a dyadic annulus decomposition this yields the
mask family psi_{n,sigma}; the anisotropic norm weights the masked L2
pieces by 2^(2pn) in the plus cone and 2^(2qn) in the minus cone.

Everything lives on an N x N periodic grid (functions supported in a
designated rectangle with at least 25% zero padding per side), so the
continuum statements are tested as grid statements: the masks form an exact
partition of unity at every representable frequency, Parseval ties the
space and frequency sides, and exactly frequency-disjoint pieces are
orthogonal to rounding.

Cones are given by closed slope intervals; an interval with lo > hi wraps
through the vertical direction (the infinite-slope convention).  Internally
every cone is an arc of direction angles modulo pi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, InvalidArgument, PreconditionViolation
from .smooth import chi, step

_PI = math.pi


def _slope_angle(slope: float) -> float:
    """Direction angle in [0, pi) of the line of the given slope."""
    return math.atan(slope) % _PI


@dataclass(frozen=True)
class ConeSpec:
    """Closed cone in the plane given by a slope interval.

    lo <= hi is the cone of directions with slope in [lo, hi]; lo > hi wraps
    through the vertical line (slopes >= lo together with slopes <= hi and
    the vertical direction itself).  Cones are symmetric through the origin,
    so all tests live on arcs of angles modulo pi.
    """

    slope_lo: float
    slope_hi: float

    @property
    def arc(self) -> tuple:
        """(start, end) with start in [0, pi), start < end <= start + pi."""
        a = _slope_angle(self.slope_lo)
        b = _slope_angle(self.slope_hi)
        if self.slope_lo <= self.slope_hi:
            if b < a:
                b += _PI
        else:
            b = a + ((b - a) % _PI)
            if b == a:
                b = a + _PI
        return a, b

    def contains_angle(self, beta, strict: bool = False, margin: float = 0.0):
        a, b = self.arc
        rel = (np.asarray(beta, dtype=float) - a) % _PI
        width = b - a
        if strict:
            return (rel > margin) & (rel < width - margin)
        return rel <= width

    def intersects(self, other: "ConeSpec") -> bool:
        """Nontrivial intersection as sets of lines: the angle arcs meet."""
        a0, _ = self.arc
        b0, _ = other.arc
        return bool(self.contains_angle(b0)) or bool(other.contains_angle(a0)) \
            or bool(self.contains_angle(other.arc[1] % _PI)) \
            or bool(other.contains_angle(self.arc[1] % _PI))

    def strictly_inside(self, other: "ConeSpec", margin: float = 1e-12) -> bool:
        """Closure of self inside the interior of other (except the origin)."""
        return _arc_strictly_inside(self.arc, other.arc, margin)


def _arc_strictly_inside(inner: tuple, outer: tuple, margin: float = 1e-12) -> bool:
    a, b = inner
    oa, ob = outer
    if (b - a) >= (ob - oa):
        return False
    rel_a = (a - oa) % _PI
    rel_b = rel_a + (b - a)
    return margin < rel_a and rel_b < (ob - oa) - margin


def _complement_arc(cone: ConeSpec) -> tuple:
    """Angle arc of the closure of the complementary cone."""
    a, b = cone.arc
    return b % _PI, (b % _PI) + (_PI - (b - a))


@dataclass(frozen=True)
class Polarization:
    """Pair of transversal closed cones with smooth angular profiles.

    The plus profile is exactly 1 on the plus cone, exactly 0 on the minus
    cone, and follows the shared smooth step across the two gaps; the minus
    profile is literally 1 minus the plus profile.
    """

    cone_plus: ConeSpec
    cone_minus: ConeSpec

    def __post_init__(self):
        if self.cone_plus.intersects(self.cone_minus):
            raise InvalidArgument("polarization cones must meet only at the origin")

    def _gap_data(self):
        p0, p1 = self.cone_plus.arc
        m0, m1 = self.cone_minus.arc
        # position the minus arc inside (p1, p0 + pi)
        shift0 = (m0 - p0) % _PI
        shift1 = shift0 + (m1 - m0)
        return p0, p1 - p0, shift0, shift1

    def phi_plus(self, beta):
        """Angular profile at direction angle(s) beta."""
        p0, pw, m0, m1 = self._gap_data()
        rel = (np.asarray(beta, dtype=float) - p0) % _PI
        out = np.empty_like(rel)
        in_plus = rel <= pw
        in_minus = (rel >= m0) & (rel <= m1)
        gap1 = (rel > pw) & (rel < m0)
        gap2 = rel > m1
        out[in_plus] = 1.0
        out[in_minus] = 0.0
        if np.any(gap1):
            out[gap1] = 1.0 - step((rel[gap1] - pw) / (m0 - pw))
        if np.any(gap2):
            out[gap2] = step((rel[gap2] - m1) / (_PI - m1))
        return out

    def angular(self, sigma: str, beta):
        phi = self.phi_plus(beta)
        return phi if sigma == "+" else 1.0 - phi


def strictly_precedes(theta: Polarization, theta_prime: Polarization) -> bool:
    """Ordering of polarizations: the complement of the finer plus cone is
    compactly inside the coarser minus cone."""
    comp = _complement_arc(theta_prime.cone_plus)
    return _arc_strictly_inside(comp, theta.cone_minus.arc)


@dataclass(frozen=True)
class NormParams:
    """Dyadic weights: 2^(2pn) on the plus pieces, 2^(2qn) on the minus."""

    p: float
    q: float
    eps: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.eps < 0.5:
            raise InvalidArgument(f"eps must lie in (0, 1/2), got {self.eps}")

    @classmethod
    def strong(cls, eps: float = 0.25) -> "NormParams":
        return cls(p=1.0, q=0.0, eps=eps)

    @classmethod
    def weak(cls, eps: float = 0.25) -> "NormParams":
        return cls(p=1.0 - eps, q=-eps, eps=eps)


@dataclass
class GridFunction2D:
    """Samples on an N x N periodic grid covering a centered square.

    ``values`` may be space-side samples (domain "space") or a
    frequency-side array on the unshifted FFT lattice (domain "frequency").
    ``rect`` gives the half-widths of the designated support rectangle; the
    square side is four times the larger half-width, leaving at least a 25%
    zero-padding margin per side.
    """

    values: np.ndarray
    spacing: float
    rect: tuple
    domain: str = "space"

    def __post_init__(self):
        self.values = np.asarray(self.values)
        N = self.values.shape[0]
        if self.values.shape != (N, N) or N & (N - 1) != 0:
            raise InvalidArgument("values must be a square array of power-of-two size")

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def side(self) -> float:
        return self.N * self.spacing

    def coords(self):
        """Physical coordinates of the sample lattice (origin at center)."""
        axis = (np.arange(self.N) - self.N // 2) * self.spacing
        return np.meshgrid(axis, axis, indexing="ij")

    def freqs(self):
        """Angular frequency lattice matching numpy's FFT layout."""
        axis = 2.0 * _PI * np.fft.fftfreq(self.N, d=self.spacing)
        return np.meshgrid(axis, axis, indexing="ij")

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)) * self.spacing)

    def fft(self) -> np.ndarray:
        return np.fft.fft2(self.values)

    def nyquist(self) -> float:
        return _PI / self.spacing


def make_grid(rx: float, ry: float, N: int) -> GridFunction2D:
    """Empty space-side grid for functions supported in the centered
    rectangle of half-widths (rx, ry)."""
    side = 4.0 * max(rx, ry)
    return GridFunction2D(values=np.zeros((N, N)), spacing=side / N, rect=(rx, ry))


def _support_ok(u: GridFunction2D, tol: float = 1e-12) -> bool:
    X, Y = u.coords()
    amax = float(np.max(np.abs(u.values)))
    if amax == 0.0:
        return True
    outside = (np.abs(X) > u.rect[0] + u.spacing / 2) | (np.abs(Y) > u.rect[1] + u.spacing / 2)
    return float(np.max(np.abs(u.values[outside]), initial=0.0)) <= tol * amax


def _mask_values(theta: Polarization, n: int, sigma: str,
                 xi1: np.ndarray, xi2: np.ndarray) -> np.ndarray:
    """psi_{Theta,n,sigma} on the frequency lattice.

    n = 0: chi(|xi|)/2 for each sign; n >= 1: angular profile times the
    dyadic annulus bump chi(2^-n |xi|) - chi(2^-n+1 |xi|).  The angular
    factor at the origin is irrelevant because the annulus bump vanishes
    there.
    """
    r = np.hypot(xi1, xi2)
    if n == 0:
        return chi(r) / 2.0
    radial = chi(r * 2.0 ** -n) - chi(r * 2.0 ** (-n + 1))
    beta = np.arctan2(xi2, xi1) % _PI
    return theta.angular(sigma, beta) * radial


def mask_value(theta: Polarization, n: int, sigma: str, xi1, xi2):
    """Pointwise mask evaluation at arbitrary frequencies."""
    return _mask_values(theta, n, sigma,
                        np.asarray(xi1, dtype=float), np.asarray(xi2, dtype=float))


def dyadic_mask(theta: Polarization, n: int, sigma: str,
                grid: GridFunction2D) -> GridFunction2D:
    """Frequency-side mask as a grid function."""
    if n < 0:
        raise InvalidArgument(f"n must be >= 0, got {n}")
    if sigma not in ("+", "-"):
        raise InvalidArgument(f"sigma must be '+' or '-', got {sigma!r}")
    if n >= 1 and 2.0 ** n > grid.nyquist():
        raise InvalidArgument(
            f"annulus scale 2^{n} exceeds the grid Nyquist frequency {grid.nyquist():.3g}")
    xi1, xi2 = grid.freqs()
    vals = _mask_values(theta, n, sigma, xi1, xi2)
    return GridFunction2D(values=vals, spacing=grid.spacing, rect=grid.rect,
                          domain="frequency")


def _top_band(grid: GridFunction2D) -> int:
    """Smallest n beyond which every mask vanishes on the grid."""
    xi_max = math.sqrt(2.0) * grid.nyquist()
    return max(1, math.ceil(math.log2(xi_max))) + 1


def partition_defect(theta: Polarization, grid: GridFunction2D) -> float:
    """max over grid frequencies of |sum of all masks - 1|."""
    xi1, xi2 = grid.freqs()
    total = np.zeros_like(xi1)
    for n in range(_top_band(grid) + 1):
        for sigma in ("+", "-"):
            total += _mask_values(theta, n, sigma, xi1, xi2)
    return float(np.max(np.abs(total - 1.0)))


def band_norms(u: GridFunction2D, theta: Polarization) -> dict:
    """Squared L2 norms of every masked dyadic piece of u, keyed (n, sigma)."""
    if u.domain != "space":
        raise InvalidArgument("band_norms expects a space-side grid function")
    F = u.fft()
    xi1, xi2 = u.freqs()
    scale = (u.spacing ** 2) / (u.N ** 2)  # discrete Parseval factor
    out = {}
    for n in range(_top_band(u) + 1):
        for sigma in ("+", "-"):
            m = _mask_values(theta, n, sigma, xi1, xi2)
            out[(n, sigma)] = float(np.sum(np.abs(m * F) ** 2)) * scale
    return out


def aniso_norm(u: GridFunction2D, theta: Polarization, params: NormParams) -> float:
    """The anisotropic norm of u for the given polarization and weights."""
    if not _support_ok(u):
        raise DomainViolation("function is not supported in the designated rectangle")
    pieces = band_norms(u, theta)
    total = 0.0
    for (n, sigma), sq in pieces.items():
        w = 2.0 ** (2.0 * params.p * n) if sigma == "+" else 2.0 ** (2.0 * params.q * n)
        total += w * sq
    return math.sqrt(total)


def embedding_check(u: GridFunction2D, theta: Polarization) -> float:
    """Ratio of the plain L2 norm to the strong anisotropic norm; bounded by
    sqrt(6), the intersection multiplicity of the mask supports."""
    l2 = u.l2_norm()
    if l2 == 0.0:
        raise InvalidArgument("embedding_check needs a nonzero function")
    return l2 / aniso_norm(u, theta, NormParams.strong())


def cone_filter(u: GridFunction2D, cone: ConeSpec) -> GridFunction2D:
    """Sharp frequency-side restriction of u to a cone (zero frequency
    removed, since the origin belongs to every cone)."""
    F = u.fft()
    xi1, xi2 = u.freqs()
    beta = np.arctan2(xi2, xi1) % _PI
    keep = cone.contains_angle(beta)
    keep[0, 0] = False
    vals = np.fft.ifft2(F * keep)
    if np.isrealobj(u.values):
        vals = vals.real
    return GridFunction2D(values=vals, spacing=u.spacing, rect=u.rect)


def paired_band_inner(u: GridFunction2D, v: GridFunction2D,
                      theta_hat: Polarization) -> float:
    """max over n of |(psi_{n,-}(D)u, psi_{n,-}(D)v)_{L2}|, frequency-side."""
    Fu = u.fft()
    Fv = v.fft()
    xi1, xi2 = u.freqs()
    scale = (u.spacing ** 2) / (u.N ** 2)
    best = 0.0
    for n in range(_top_band(u) + 1):
        m = _mask_values(theta_hat, n, "-", xi1, xi2)
        inner = np.sum(m * Fu * np.conj(m * Fv)) * scale
        best = max(best, float(abs(inner)))
    return best


def transversal_orthogonality(u: GridFunction2D, v: GridFunction2D,
                              theta_hat: Polarization,
                              cone_u: ConeSpec, cone_v: ConeSpec) -> float:
    """Paired minus-band inner products of two cone-supported functions.

    Caller contract: u and v have been sharply filtered into cone_u and
    cone_v (see ``cone_filter``).  When the cones are disjoint the Fourier
    supports are disjoint, so every paired term vanishes to rounding.
    """
    if cone_u.intersects(cone_v):
        raise PreconditionViolation("cone_u and cone_v must meet only at the origin")
    return paired_band_inner(u, v, theta_hat)

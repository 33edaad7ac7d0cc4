"""Ceiling functions for the suspension flow and their class constants.

A ceiling is a strictly positive trigonometric polynomial on the circle,

    f(x) = mean + sum_j ( cos_j * cos(2 pi k_j x) + sin_j * sin(2 pi k_j x) ),

paired with the expansion base ``ell`` of the angle-multiplying map
tau(x) = ell * x mod 1.  Trigonometric polynomials give exact derivatives of
every Birkhoff sum downstream, so no numerical differentiation enters the
slope and cone computations.

``classify`` certifies the extrema of f and f' (grid scan refined by
bisection on the derivative) and derives the constants that control cone
apertures and slope Lipschitz bounds everywhere else in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainViolation, InvalidArgument

# Order-3 truncation of the smoothness-norm surrogate: reports must carry
# this caveat because derivatives beyond f''' never enter the computations.
CR_TRUNCATION_CAVEAT = "C^r norm surrogate truncated at order 3"


@dataclass(frozen=True)
class TrigPolynomial:
    """Positive trig polynomial ceiling together with the map base ell.

    harmonics is a sequence of (k, cos_coeff, sin_coeff) with distinct
    positive integer frequencies; it is stored sorted by k.
    """

    mean_coeff: float
    harmonics: tuple = ()
    ell: int = 2

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 2:
            raise InvalidArgument(f"ell must be an integer >= 2, got {self.ell}")
        object.__setattr__(self, "ell", int(self.ell))
        hs = []
        seen = set()
        for k, c, s in self.harmonics:
            if int(k) != k or k < 1:
                raise InvalidArgument(f"harmonic index must be a positive integer, got {k}")
            if int(k) in seen:
                raise InvalidArgument(f"duplicate harmonic index {k}")
            seen.add(int(k))
            hs.append((int(k), float(c), float(s)))
        hs.sort(key=lambda h: h[0])
        object.__setattr__(self, "harmonics", tuple(hs))
        object.__setattr__(self, "mean_coeff", float(self.mean_coeff))

    @property
    def max_harmonic(self) -> int:
        return self.harmonics[-1][0] if self.harmonics else 0

    def key(self) -> str:
        """Stable identity string used to match reports from the same ceiling."""
        parts = [f"ell={self.ell}", f"mean={self.mean_coeff!r}"]
        parts += [f"{k}:{c!r}:{s!r}" for k, c, s in self.harmonics]
        return ";".join(parts)

    def __call__(self, x, order: int = 0):
        return eval(self, x, order)


def eval(f: TrigPolynomial, x, order: int = 0):
    """Derivative of order 0..3 of f at x (scalar or array), in closed form.

    The k-th derivative of cos(w x) is w^k cos(w x + k pi/2), likewise for
    sin, so every value is exact up to rounding.
    """
    if order not in (0, 1, 2, 3):
        raise InvalidArgument(f"order must be in {{0,1,2,3}}, got {order}")
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, f.mean_coeff if order == 0 else 0.0)
    shift = order * math.pi / 2.0
    for k, c, s in f.harmonics:
        w = 2.0 * math.pi * k
        arg = w * x + shift
        out = out + (w ** order) * (c * np.cos(arg) + s * np.sin(arg))
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class CeilingClass:
    """Certified geometric constants of a ceiling.

    theta_f is the invariant-cone aperture max|f'| / (gamma0*ell - 1);
    K bounds 1/min f, max f and the order-<=3 smoothness surrogate;
    theta_K = K / (gamma0*ell - 1) is the slope Lipschitz constant used by
    certified grid sweeps; d2s_bound = K / (ell^2 - 1) bounds the second
    derivative of every branch slope.
    """

    gamma0: float
    theta_f: float
    K: float
    f_min: float
    f_max: float
    theta_K: float
    d2s_bound: float
    max_abs_f1: float
    caveats: tuple = field(default=(CR_TRUNCATION_CAVEAT,))


def _refine_roots(f: TrigPolynomial, order: int, grid: np.ndarray, tol: float = 1e-12):
    """Roots of the order-th derivative of f, bracketed on the grid and
    refined by bisection.  Returns an array of x values in [0, 1)."""
    g = eval(f, grid, order)
    g_next = np.roll(g, -1)
    sign_change = (g * g_next) < 0
    idx = np.nonzero(sign_change)[0]
    roots = []
    n = len(grid)
    h = 1.0 / n
    for i in idx:
        lo, hi = grid[i], grid[i] + h
        glo = eval(f, lo, order)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            gm = eval(f, mid, order)
            if glo * gm <= 0:
                hi = mid
            else:
                lo, glo = mid, gm
            if hi - lo < tol:
                break
        roots.append(0.5 * (lo + hi) % 1.0)
    roots.extend(grid[g == 0.0])
    return np.asarray(roots, dtype=float)


def _certified_extrema(f: TrigPolynomial, order: int, grid: np.ndarray):
    """(min, max) of the order-th derivative of f over the circle, taking
    the grid values together with the bisected critical points."""
    candidates = [eval(f, grid, order)]
    crit = _refine_roots(f, order + 1, grid)
    if crit.size:
        candidates.append(eval(f, crit, order))
    allv = np.concatenate([np.atleast_1d(v) for v in candidates])
    return float(allv.min()), float(allv.max())


def classify(f: TrigPolynomial, gamma0: float, grid_size: int = 4096,
             k_override: float | None = None) -> CeilingClass:
    """Certify the extrema of f and f' and populate the class constants.

    K is the smallest power of two exceeding
    1.01 * max(1/min f, max f, grid max of |f|,|f'|,|f''|,|f'''|); a user
    override may only raise it.
    """
    ell = f.ell
    if not (1.0 / ell < gamma0 < 1.0):
        raise InvalidArgument(f"gamma0 must lie in (1/ell, 1) = (1/{ell}, 1), got {gamma0}")
    if grid_size < 64:
        raise InvalidArgument(f"grid_size must be >= 64, got {grid_size}")
    grid = np.arange(grid_size) / grid_size

    f_min, f_max = _certified_extrema(f, 0, grid)
    if f_min <= 0.0:
        raise DomainViolation(f"ceiling is nonpositive (min {f_min:.6g}); it must be strictly positive")
    d1_min, d1_max = _certified_extrema(f, 1, grid)
    max_abs_f1 = max(abs(d1_min), abs(d1_max))

    denom = gamma0 * ell - 1.0
    theta_f = max_abs_f1 / denom

    surrogate = max(
        float(np.max(np.abs(eval(f, grid, order)))) for order in (0, 1, 2, 3)
    )
    base = 1.01 * max(1.0 / f_min, f_max, surrogate)
    K = 2.0 ** math.ceil(math.log2(base))
    if K <= base:
        K *= 2.0
    if k_override is not None:
        if k_override < K:
            raise InvalidArgument(
                f"K override {k_override} is below the computed bound {K}; overrides may only raise K")
        K = float(k_override)

    theta_K = K / denom
    d2s_bound = K * ell ** -2 / (1.0 - ell ** -2)
    return CeilingClass(
        gamma0=float(gamma0), theta_f=theta_f, K=K,
        f_min=f_min, f_max=f_max, theta_K=theta_K,
        d2s_bound=d2s_bound, max_abs_f1=max_abs_f1,
    )


def ceiling_from_config(spec: dict) -> TrigPolynomial:
    """Build a ceiling from its serialized form: keys ell, mean, harmonics
    (a list of [k, cos, sin] triples)."""
    harmonics = tuple((k, c, s) for k, c, s in spec.get("harmonics", ()))
    return TrigPolynomial(mean_coeff=spec["mean"], harmonics=harmonics, ell=spec["ell"])

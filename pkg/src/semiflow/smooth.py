"""The C-infinity step and bump profiles shared by the frequency masks
and the perturbation-direction constructions.

``step`` is the classic exponential partition-of-unity step: exactly 0 for
u <= 0, exactly 1 for u >= 1, strictly monotone in between, all derivatives
vanishing at both ends.
"""

from __future__ import annotations

import numpy as np


def _g(u):
    """exp(-1/u) for u > 0, 0 otherwise (vectorized, overflow-safe)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


def step(u):
    """Smooth step: 0 for u <= 0, 1 for u >= 1, C-infinity everywhere."""
    u = np.asarray(u, dtype=float)
    a = _g(u)
    b = _g(1.0 - u)
    return a / (a + b)


def chi(s):
    """Radial cutoff: 1 for s <= 1.5, 0 for s >= 2, smooth in between.

    Only the plateaus at 1 (below 1) and 0 (above 2) are constrained; the
    transition sits in [1.5, 2] so that mid-annulus frequencies such as
    1.5 * 2^n carry a full dyadic bump.
    """
    s = np.asarray(s, dtype=float)
    return step((2.0 - s) / 0.5)


def plateau(u, inner, outer):
    """Even profile equal to 1 on |u| <= inner, 0 on |u| >= outer."""
    if not inner < outer:
        raise ValueError("plateau needs inner < outer")
    r = np.abs(np.asarray(u, dtype=float))
    return step((outer - r) / (outer - inner))


def flat_bump(u, lo, hi, shoulder=0.15):
    """Bump supported on [lo, hi], equal to 1 on the middle (1-2*shoulder)
    fraction; mean value over [lo, hi] is close to 1 - shoulder."""
    if not lo < hi:
        raise ValueError("flat_bump needs lo < hi")
    v = (np.asarray(u, dtype=float) - lo) / (hi - lo)
    return step(v / shoulder) * step((1.0 - v) / shoulder)

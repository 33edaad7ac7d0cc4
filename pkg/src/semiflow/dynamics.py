"""The suspension semi-flow, its symbolic words, and inverse-branch structure.

Points move upward at unit speed under the graph of the ceiling f; on
reaching the roof at (x, f(x)) they jump to (tau(x), 0) with
tau(x) = ell*x mod 1.  The time-t preimages of a point are indexed by words
over {1..ell}: the word picks one chain of inverse branches of tau, and the
Birkhoff sum of f along the chain fixes the flow coordinate of the preimage.

Slope convention: a branch of length n at target x carries

    slope = sum_{i=1..n} ell^{-i} f'(prefix_i(x)),

the slope of the image of a horizontal tangent vector.  Only slope
differences enter the transversality sums, so a global sign flip would be
immaterial.  The same word-based formula is used for targets off the base
section S^1 x {0}: the horizontal dynamics does not depend on the flow
coordinate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ceiling import TrigPolynomial
from .errors import DomainViolation, InvalidArgument, ResourceLimit

# Points within ROOF_TOL of the roof are treated as already transferred to
# the base of the next fiber (right-limit convention of the flow).
ROOF_TOL = 1e-12

DEFAULT_BRANCH_CAP = 2 ** 24


@dataclass(frozen=True)
class Word:
    """A word over the alphabet {1..ell}; indexes one inverse branch chain."""

    letters: tuple
    ell: int

    def __post_init__(self):
        object.__setattr__(self, "letters", tuple(int(a) for a in self.letters))
        if any(not 1 <= a <= self.ell for a in self.letters):
            raise InvalidArgument(f"letters must lie in 1..{self.ell}: {self.letters}")

    def __len__(self):
        return len(self.letters)

    def prefix(self, p: int) -> "Word":
        if not 0 <= p <= len(self.letters):
            raise InvalidArgument(f"prefix length {p} out of range 0..{len(self.letters)}")
        return Word(self.letters[:p], self.ell)

    @property
    def index(self) -> int:
        """Little-endian digit encoding: sum (a_p - 1) ell^(p-1)."""
        k = 0
        for p, a in enumerate(self.letters):
            k += (a - 1) * self.ell ** p
        return k

    @classmethod
    def from_index(cls, k: int, n: int, ell: int) -> "Word":
        letters = []
        for _ in range(n):
            letters.append(k % ell + 1)
            k //= ell
        return cls(tuple(letters), ell)

    def __str__(self):
        return "".join(str(a) for a in self.letters)


@dataclass(frozen=True)
class FlowPoint:
    """A point (x, s) with 0 <= s < f(x) in the region under the ceiling."""

    x: float
    s: float


@dataclass(frozen=True)
class Cone:
    """Slope cone {(xi, eta): |eta - center*xi| <= width*|xi|}."""

    center_slope: float
    half_width: float

    def intersects(self, other: "Cone") -> bool:
        """Two such cones share a nonzero vector iff the center distance is
        at most the sum of the widths."""
        return abs(self.center_slope - other.center_slope) <= self.half_width + other.half_width

    def contains_slope(self, sigma: float) -> bool:
        return abs(sigma - self.center_slope) <= self.half_width


@dataclass(frozen=True)
class Branch:
    """One time-t inverse branch of the flow at a target point."""

    word: Word
    preimage: FlowPoint
    expansion: float
    slope: float
    level: int
    cone: Cone


def validate_point(f: TrigPolynomial, z: FlowPoint) -> None:
    if not (0.0 <= z.s < f(z.x) + ROOF_TOL):
        raise DomainViolation(f"point (x={z.x}, s={z.s}) is outside the region under the ceiling")


def word_interval(a: Word):
    """(left endpoint, width) of the cylinder interval of the word.

    The cylinder is the set of points whose inverse-branch chain follows the
    word; its width is ell^(-n) and the left endpoint is the chain applied
    to 0.
    """
    if len(a) == 0:
        raise InvalidArgument("word_interval requires a nonempty word")
    return branch_point(a, 0.0), a.ell ** -len(a)


def branch_point(a: Word, x):
    """The unique preimage of x under tau^n lying in the word's cylinder.

    Reads the word letter by letter, each step applying the affine inverse
    branch y -> (y + letter - 1)/ell; the intermediate values are exactly
    the prefix points entering the Birkhoff sums.
    """
    y = np.asarray(x, dtype=float)
    for letter in a.letters:
        y = (y + (letter - 1)) / a.ell
    if y.ndim == 0:
        return float(y)
    return y


def _prefix_points(a: Word, x) -> list:
    """Prefix points [a]_i(x) for i = 1..n."""
    pts = []
    y = x
    for letter in a.letters:
        y = (y + (letter - 1)) / a.ell
        pts.append(y)
    return pts


def birkhoff(f: TrigPolynomial, a: Word, x: float, order: int = 0) -> float:
    """Birkhoff sum of f along the branch chain of the word, or its first
    or second derivative with respect to the target point:

        order 0:  sum_i f(prefix_i(x))
        order 1:  sum_i ell^(-i)  f'(prefix_i(x))
        order 2:  sum_i ell^(-2i) f''(prefix_i(x))
    """
    if order not in (0, 1, 2):
        raise InvalidArgument(f"birkhoff order must be 0, 1 or 2, got {order}")
    if a.ell != f.ell:
        raise InvalidArgument("word and ceiling use different ell")
    total = 0.0
    for i, y in enumerate(_prefix_points(a, x), start=1):
        total += f.ell ** (-order * i) * f(y, order)
    return total


def advance(f: TrigPolynomial, x, total):
    """Flow the base point x for total >= 0 units of flow time measured from
    s = 0.  Returns (x', s', n): the landing base point, the remaining flow
    coordinate, and the number of roof crossings.  Vectorized over arrays.

    A partial Birkhoff sum within ROOF_TOL of total counts as a crossing, so
    points landing exactly on the roof come out at the base of the next
    fiber.
    """
    x = np.asarray(x, dtype=float)
    total = np.asarray(total, dtype=float)
    x, rem = np.broadcast_arrays(x, total)
    x = x.copy()
    rem = rem.astype(float).copy()
    n = np.zeros(x.shape, dtype=int)
    while True:
        fx = f(x)
        fx = np.asarray(fx, dtype=float)
        cross = fx <= rem + ROOF_TOL
        if not np.any(cross):
            break
        rem = np.where(cross, rem - fx, rem)
        x = np.where(cross, (f.ell * x) % 1.0, x)
        n = n + cross
    rem = np.maximum(rem, 0.0)
    return x, rem, n


def flow_count(f: TrigPolynomial, x: float, T: float) -> int:
    """Largest n with Birkhoff sum f^(n)(x) <= T (number of roof crossings
    accumulated by flow time T starting from the base)."""
    if T < 0:
        raise InvalidArgument(f"T must be >= 0, got {T}")
    _, _, n = advance(f, x, T)
    return int(n)


def time_t_map(f: TrigPolynomial, z: FlowPoint, t: float) -> FlowPoint:
    """The time-t map of the semi-flow."""
    if t < 0:
        raise InvalidArgument(f"t must be >= 0, got {t}")
    validate_point(f, z)
    x, s, _ = advance(f, z.x, z.s + t)
    return FlowPoint(float(x), float(s))


class _BranchTable:
    """Flat arrays describing every time-t inverse branch at one target.

    Columns (parallel arrays): level n, word index k (little-endian), the
    preimage base point y, the flow coordinate s', and the slope.  Grouped
    by level; within a level the word index enumerates the branch.
    """

    __slots__ = ("levels", "indices", "points", "s_values", "slopes", "ell")

    def __init__(self, levels, indices, points, s_values, slopes, ell):
        self.levels = levels
        self.indices = indices
        self.points = points
        self.s_values = s_values
        self.slopes = slopes
        self.ell = ell

    @property
    def count(self) -> int:
        return sum(len(ix) for ix in self.indices.values())

    def weight_sum(self) -> float:
        return sum(float(self.ell) ** -n * len(self.indices[n]) for n in self.levels)


def _max_admissible_t(f: TrigPolynomial, s: float, cap: int) -> float:
    """Largest t for which the level scan provably stays under the cap."""
    f_min = f.mean_coeff - sum(abs(c) + abs(s_) for _, c, s_ in f.harmonics)
    f_min = max(f_min, 1e-9)
    # level scan reaches depth ~ (t - s)/f_min + 1; ell^depth <= cap
    depth = math.log(cap, f.ell) - 1.0
    return s + depth * f_min


def branch_table(f: TrigPolynomial, z: FlowPoint, t: float,
                 cap: int = DEFAULT_BRANCH_CAP) -> _BranchTable:
    """Enumerate every inverse branch by a vectorized level scan.

    Level n holds the ell^n candidate words; the little-endian word index k
    gives the prefix of length i as k mod ell^i, so partial Birkhoff sums
    and slopes tile from one level to the next.  A word is a branch iff its
    flow defect d = s + S_n - t lies in [0, f(y)) and its parent's defect is
    still negative; defects increase along a chain, so the parent test alone
    settles all ancestors.  Produces exactly the same branch set as the
    depth-first enumeration in ``inverse_branches``.
    """
    if t < 0:
        raise InvalidArgument(f"t must be >= 0, got {t}")
    ell = f.ell
    x, s = z.x, z.s

    levels, indices, points, s_values, slopes = [], {}, {}, {}, {}

    # level 0: the empty word
    d0 = s - t
    fx = f(x)
    if -ROOF_TOL <= d0 < fx - ROOF_TOL:
        levels.append(0)
        indices[0] = np.array([0], dtype=np.int64)
        points[0] = np.array([x])
        s_values[0] = np.array([max(d0, 0.0)])
        slopes[0] = np.array([0.0])
    if d0 >= -ROOF_TOL:
        return _BranchTable(levels, indices, points, s_values, slopes, ell)

    S_prev = np.zeros(1)          # Birkhoff sums of the parents
    slope_prev = np.zeros(1)
    n = 0
    while True:
        n += 1
        size = ell ** n
        if size > cap:
            raise ResourceLimit(
                f"branch enumeration at t={t} would exceed the cap of {cap} words per level",
                t_limit=_max_admissible_t(f, s, cap), cap=cap)
        k = np.arange(size, dtype=np.int64)
        y = (x + k) / size
        S = np.tile(S_prev, ell) + f(y)
        sl = np.tile(slope_prev, ell) + ell ** float(-n) * f(y, 1)
        d = s + S - t
        d_parent = s + np.tile(S_prev, ell) - t
        fy = f(y)
        valid = (d_parent < -ROOF_TOL) & (d >= -ROOF_TOL) & (d < fy - ROOF_TOL)
        if np.any(valid):
            levels.append(n)
            indices[n] = k[valid]
            points[n] = y[valid]
            s_values[n] = np.maximum(d[valid], 0.0)
            slopes[n] = sl[valid]
        if np.min(d) >= -ROOF_TOL:
            break
        S_prev, slope_prev = S, sl
    return _BranchTable(levels, indices, points, s_values, slopes, ell)


def inverse_branches(f: TrigPolynomial, z: FlowPoint, t: float, theta: float,
                     cap: int = DEFAULT_BRANCH_CAP) -> list:
    """All time-t inverse branches of the flow at z, as Branch records.

    Depth-first search over words: a prefix whose flow defect
    d = s + S_k - t is still negative is extended letter by letter; once
    d >= 0 the subtree closes, because defects only grow deeper.  A prefix
    is recorded when d lies in [0, f(y)) (with roof points assigned to the
    shallower representative, which the roof tolerance makes automatic).
    The branch list comes out sorted lexicographically by word.

    theta sets the cone aperture at level 0; level-n branches carry cones of
    half-width theta * ell^(-n).
    """
    if t < 0:
        raise InvalidArgument(f"t must be >= 0, got {t}")
    if theta < 0:
        raise InvalidArgument(f"theta must be >= 0, got {theta}")
    validate_point(f, z)
    ell = f.ell
    x, s = z.x, z.s
    out = []
    visited = 0

    # iterative DFS; stack entries: (letters, y, birkhoff_sum, slope)
    stack = [((), x, 0.0, 0.0)]
    while stack:
        letters, y, S, slope = stack.pop()
        visited += 1
        if visited > 2 * cap + 2:
            raise ResourceLimit(
                f"branch enumeration at t={t} exceeded the cap of {cap}",
                t_limit=_max_admissible_t(f, s, cap), cap=cap)
        n = len(letters)
        d = s + S - t
        if d >= -ROOF_TOL:
            fy = f(y)
            if d < fy - ROOF_TOL:
                word = Word(letters, ell)
                out.append(Branch(
                    word=word,
                    preimage=FlowPoint(float(y), float(max(d, 0.0))),
                    expansion=float(ell) ** n,
                    slope=float(slope),
                    level=n,
                    cone=Cone(float(slope), theta * float(ell) ** -n),
                ))
            continue
        # push children in reverse letter order so they pop lexicographically
        for letter in range(ell, 0, -1):
            y_child = (y + (letter - 1)) / ell
            stack.append((
                letters + (letter,),
                y_child,
                S + f(y_child),
                slope + ell ** float(-(n + 1)) * f(y_child, 1),
            ))
    out.sort(key=lambda b: b.word.letters)
    return out

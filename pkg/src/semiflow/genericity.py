"""Perturbation machinery: slope clusters, direction families, Jacobians,
and the bad-set measure probe.

Slope clusters diagnose the degeneracy that obstructs transversality: the
largest set of equal-length words whose branch slopes at a cylinder
endpoint fall inside a window shrinking like ell^(-n).  For constant
ceilings the cluster is everything; ceilings with transversal branch
geometry show cluster growth rates strictly below ell.

Perturbation families f_t = f + sum t_i phi_i move branch slopes linearly
in t; ``g_matrix`` is the (base-independent) linear part of the
slope-difference map, and ``bump_family`` builds the order-separated bump
directions whose slope-difference map has Jacobian bounded below (after the
standard doubling of the bump amplitude).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ceiling import CeilingClass, TrigPolynomial, classify
from .dynamics import Word, birkhoff, word_interval
from .errors import DomainViolation, InvalidArgument, ResourceLimit
from .smooth import flat_bump, plateau

MAX_CLUSTER_WORDS = 2 ** 20

# Normalized bump-derivative profile on [-1, 1]: a plateau of height 1 on
# |u| <= 1/3 and a compensating negative collar on 2/3 <= |u| <= 1 chosen so
# the profile integrates to zero exactly; the collar amplitude is
# (1/3 + 1/6) / ((1/3) * 0.85) = 30/17 < 2, so |profile| < 2 everywhere.
_COLLAR_AMPLITUDE = 30.0 / 17.0
_PROFILE_TABLE_SIZE = (1 << 14) + 1


def _profile(u):
    u = np.asarray(u, dtype=float)
    return plateau(u, 1.0 / 3.0, 2.0 / 3.0) - _COLLAR_AMPLITUDE * flat_bump(np.abs(u), 2.0 / 3.0, 1.0)


def _profile_antiderivative_table():
    grid = np.linspace(-1.0, 1.0, _PROFILE_TABLE_SIZE)
    vals = _profile(grid)
    du = grid[1] - grid[0]
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1]) * du)])
    # the analytic integral is exactly zero; spread the quadrature defect so
    # the cached antiderivative vanishes at both support ends
    cum -= (grid + 1.0) / 2.0 * cum[-1]
    return grid, cum


_PROFILE_GRID, _PROFILE_CUM = _profile_antiderivative_table()


def _circle_offset(x, center):
    """Signed circle distance from center, in [-1/2, 1/2)."""
    return (np.asarray(x, dtype=float) - center + 0.5) % 1.0 - 0.5


@dataclass(frozen=True)
class BumpDirection:
    """Smooth circle bump with closed-form derivative.

    The derivative equals ``deriv_plateau`` exactly on the inner third of
    the support interval and stays below twice that value in absolute
    value; the bump itself is the cached antiderivative of the profile.
    """

    center: float
    radius: float
    deriv_plateau: float
    label: str = ""

    def deriv(self, x):
        u = _circle_offset(x, self.center) / self.radius
        return self.deriv_plateau * _profile(u)

    def value(self, x):
        u = np.clip(_circle_offset(x, self.center) / self.radius, -1.0, 1.0)
        return self.deriv_plateau * self.radius * np.interp(u, _PROFILE_GRID, _PROFILE_CUM)


@dataclass(frozen=True)
class PerturbationFamily:
    """f_t = base + sum_i t_i * directions_i for t in [-epsilon, epsilon]^m.

    Positivity of f_t over the whole parameter box is checked on a dense
    grid at construction.
    """

    base: TrigPolynomial
    directions: tuple
    epsilon: float
    nu: int = 0

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidArgument("epsilon must be >= 0")
        if self.directions and self.epsilon > 0:
            grid = np.arange(8192) / 8192
            worst = np.asarray(self.base(grid), dtype=float)
            for d in self.directions:
                worst = worst - self.epsilon * np.abs(d.value(grid))
            if float(worst.min()) <= 0.0:
                raise DomainViolation(
                    "family leaves the positive ceilings inside the parameter box "
                    f"(worst margin {float(worst.min()):.3g})")

    @property
    def m(self) -> int:
        return len(self.directions)

    def ceiling_values(self, t: np.ndarray, x: np.ndarray):
        vals = np.asarray(self.base(x), dtype=float)
        for ti, d in zip(t, self.directions):
            vals = vals + ti * d.value(x)
        return vals


@dataclass(frozen=True)
class GenericityParams:
    """The constant chain governing the bad-set measure bound.

    Validity (checked by ``validate``): 1 < beta < alpha < gamma < ell,
    beta^(-p) ell^2 < 1, (nu+1)(p+1) alpha^(-nu) < 1, and delta is the
    derived exponent (log gamma - log alpha)/(log ell - log alpha).
    """

    rho: float
    gamma: float
    alpha: float
    beta: float
    p: int
    nu: int
    delta: float
    N: int

    def validate(self, ell: int) -> list:
        problems = []
        if not 1.0 < self.beta < self.alpha < self.gamma:
            problems.append("need 1 < beta < alpha < gamma")
        if not self.gamma < ell:
            problems.append(f"gamma must be < ell = {ell}")
        if not self.beta ** -self.p * ell ** 2 < 1.0:
            problems.append("need beta^(-p) ell^2 < 1")
        if not (self.nu + 1) * (self.p + 1) * self.alpha ** -self.nu < 1.0:
            problems.append("need (nu+1)(p+1) alpha^(-nu) < 1")
        delta = (math.log(self.gamma) - math.log(self.alpha)) / (math.log(ell) - math.log(self.alpha))
        if abs(delta - self.delta) > 1e-9 or not 0.0 < delta < 1.0:
            problems.append("delta must equal (log gamma - log alpha)/(log ell - log alpha) in (0,1)")
        if self.N <= self.nu:
            problems.append("need N > nu")
        else:
            if not ell ** self.nu * self.alpha ** self.N < self.gamma ** self.N:
                problems.append("need ell^nu alpha^n < gamma^n for n >= N")
            factor = 1.0 - (self.nu + 1) * (self.p + 1) * self.alpha ** -self.nu
            nprime = self.delta * self.N
            if not ell ** -self.nu * (self.gamma / self.beta) ** nprime * factor >= 1.0:
                problems.append("need ell^-nu (gamma/beta)^(delta N) (1 - (nu+1)(p+1) alpha^-nu) >= 1")
        return problems


def default_params(ell: int, rho: float = 2.0, gamma: float | None = None,
                   alpha: float | None = None, beta: float | None = None) -> GenericityParams:
    """A valid constant chain for the given ell, at desk scale."""
    if gamma is None:
        gamma = 1.0 + 0.9 * (ell - 1.0)
    if alpha is None:
        alpha = 1.0 + 0.8 * (ell - 1.0)
    if beta is None:
        beta = 1.0 + 0.4 * (ell - 1.0)
    p = 1
    while beta ** -p * ell ** 2 >= 1.0:
        p += 1
    nu = 1
    while (nu + 1) * (p + 1) * alpha ** -nu >= 1.0:
        nu += 1
    delta = (math.log(gamma) - math.log(alpha)) / (math.log(ell) - math.log(alpha))
    N = nu + 1
    factor = 1.0 - (nu + 1) * (p + 1) * alpha ** -nu
    while (ell ** nu * alpha ** N >= gamma ** N
           or ell ** -nu * (gamma / beta) ** (delta * N) * factor < 1.0):
        N += 1
    params = GenericityParams(rho=rho, gamma=gamma, alpha=alpha, beta=beta,
                              p=p, nu=nu, delta=delta, N=N)
    problems = params.validate(ell)
    if problems:
        raise InvalidArgument("default parameter chain failed validation: " + "; ".join(problems))
    return params


@dataclass(frozen=True)
class SlopeClusterReport:
    n: int
    base_word: Word
    window: float
    max_cluster: int
    cluster_words: tuple


def _all_slopes(f: TrigPolynomial, x: float, n: int) -> np.ndarray:
    """Branch slopes at x for every word of length n, indexed little-endian."""
    ell = f.ell
    slopes = np.zeros(1)
    for i in range(1, n + 1):
        size = ell ** i
        pts = (x + np.arange(size)) / size
        slopes = np.tile(slopes, ell) + ell ** float(-i) * f(pts, 1)
    return slopes


def slope_clusters(f: TrigPolynomial, n: int, c: Word,
                   cls: CeilingClass | None = None, gamma0: float = 0.9,
                   window_factor: float = 8.0) -> SlopeClusterReport:
    """Largest set of length-n words whose slopes at the cylinder endpoint
    of c fall in a sliding window of width window_factor * theta_K *
    ell^(-n) (anchored at the sorted slope values, which is exact for the
    max-pairwise-difference criterion)."""
    if f.ell ** n > MAX_CLUSTER_WORDS:
        raise ResourceLimit(f"ell^n = {f.ell}^{n} exceeds the cluster cap {MAX_CLUSTER_WORDS}",
                            max_words=MAX_CLUSTER_WORDS)
    if cls is None:
        cls = classify(f, gamma0)
    x_c, _ = word_interval(c)
    slopes = _all_slopes(f, x_c, n)
    window = window_factor * cls.theta_K * f.ell ** float(-n)
    order = np.argsort(slopes, kind="stable")
    sorted_slopes = slopes[order]
    hi = np.searchsorted(sorted_slopes, sorted_slopes + window, side="right")
    counts = hi - np.arange(len(sorted_slopes))
    best = int(np.argmax(counts))
    max_cluster = int(counts[best])
    members = order[best:best + max_cluster]
    words = tuple(Word.from_index(int(k), n, f.ell) for k in sorted(members))
    return SlopeClusterReport(n=n, base_word=c, window=window,
                              max_cluster=max_cluster, cluster_words=words)


def prefix_refinement(report: SlopeClusterReport, p: int) -> list:
    """Split the maximal cluster into the mutually disjoint classes of words
    sharing a common length-p prefix, largest first.

    Several large classes with pairwise distinct prefixes witness the
    stronger clustering degeneracy that the perturbation argument excludes.
    """
    if not 0 <= p <= report.n:
        raise InvalidArgument(f"prefix length must lie in 0..{report.n}, got {p}")
    classes = {}
    for w in report.cluster_words:
        classes.setdefault(w.letters[:p], []).append(w)
    return sorted(classes.values(), key=lambda ws: (-len(ws), ws[0].letters))


def g_matrix(x: float, sigma, family: PerturbationFamily) -> np.ndarray:
    """Linear part of the slope-difference map of the family at x.

    Rows follow sigma[1:], the reference word is sigma[0]; entry (i, j) is
    sum_k ell^(-k) (phi_j'(prefix_k of b_i) - phi_j'(prefix_k of b_0)).
    Independent of the base ceiling by construction.
    """
    words = list(sigma)
    if len({len(w) for w in words}) != 1:
        raise InvalidArgument("all words in sigma must have the same length")
    n = len(words[0])
    if n < family.nu:
        raise InvalidArgument(f"word length {n} below the family separation order {family.nu}")
    ell = words[0].ell

    def weighted_prefix_derivs(word: Word) -> np.ndarray:
        out = np.zeros(family.m)
        y = x
        for k, letter in enumerate(word.letters, start=1):
            y = (y + (letter - 1)) / ell
            for j, d in enumerate(family.directions):
                out[j] += ell ** float(-k) * float(d.deriv(y))
        return out

    base_row = weighted_prefix_derivs(words[0])
    rows = [weighted_prefix_derivs(w) - base_row for w in words[1:]]
    return np.asarray(rows)


def jacobian(L: np.ndarray) -> float:
    """sqrt(det(L L^T)) for a full-rank p x m matrix with p <= m, else 0."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise InvalidArgument("jacobian expects a matrix")
    p, m = L.shape
    if p > m:
        raise InvalidArgument(f"jacobian needs p <= m, got {p} x {m}")
    if p == 0:
        return 1.0
    s = np.linalg.svd(L, compute_uv=False)
    if s[-1] <= 1e-12 * max(1.0, s[0]):
        return 0.0
    return float(np.prod(s))


def _circle_distance(a, b):
    d = abs((a - b + 0.5) % 1.0 - 0.5)
    return d


@dataclass(frozen=True)
class BumpFamilyData:
    """Order-separated bump directions at the level-nu preimages of y."""

    y: float
    nu: int
    mu: int
    eps0: float
    eps_max: float
    amplitude: float
    directions: tuple            # one BumpDirection per word of length nu
    words: tuple                 # matching Word records
    predecessors: dict           # word letters -> tuple of word letters below it
    neighborhood: tuple          # (y, eps0/3): where the separation holds

    def maximal_in(self, subset) -> list:
        """Maximal elements of a subset of words under the orbit order."""
        letters = [w.letters for w in subset]
        chosen = []
        for w in subset:
            if any(w.letters in self.predecessors[other] and other != w.letters
                   for other in letters):
                continue
            chosen.append(w)
        return chosen


def default_mu(ell: int, nu: int, p: int) -> int:
    """Smallest separation horizon making the off-plateau slope tail at most
    1/(4p): 2 ell^(nu - mu) / (1 - 1/ell) <= 1/(4p)."""
    bound = 8.0 * p * ell ** nu * ell / (ell - 1.0)
    return max(nu + 1, math.ceil(math.log(bound, ell)))


def bump_family(y: float, nu: int, eps0: float, mu: int,
                amplitude: float = 1.0, ell: int = 2) -> BumpFamilyData:
    """Bumps phi_a at every level-nu preimage of y, derivative plateau
    amplitude * ell^nu on the inner third of each support.

    The supports are the branch images of the eps0-neighborhood of y, so
    they have radius eps0 * ell^(-nu); eps0 must keep them pairwise
    disjoint, and any forward image tau^i (i <= mu) of one support may meet
    another only along the orbit partial order.  Violations raise with the
    maximal admissible eps0.

    amplitude = 2 realizes the doubling that upgrades the Jacobian lower
    bound from 1/2 to 1.
    """
    if nu < 1:
        raise InvalidArgument(f"nu must be >= 1, got {nu}")
    if mu <= nu:
        raise InvalidArgument(f"mu must exceed nu, got mu={mu}, nu={nu}")
    if not 0 < eps0 < 0.5:
        raise InvalidArgument(f"eps0 must lie in (0, 1/2), got {eps0}")
    count = ell ** nu
    points = (y + np.arange(count)) / count
    words = tuple(Word.from_index(k, nu, ell) for k in range(count))

    # orbit partial order: b below a iff some forward image of a's point
    # hits b's point
    tol = 1e-11
    predecessors = {}
    for a_idx, a in enumerate(words):
        below = set()
        z = points[a_idx]
        for _ in range(2 * nu + 4):
            d = np.abs((z - points + 0.5) % 1.0 - 0.5)
            for h in np.nonzero(d <= tol)[0]:
                below.add(words[int(h)].letters)
            z = (ell * z) % 1.0
        predecessors[a.letters] = tuple(sorted(below))

    # admissible eps0: support disjointness plus the order condition
    gaps = np.abs((points[:, None] - points[None, :] + 0.5) % 1.0 - 0.5)
    eps_max = float(np.min(gaps[np.triu_indices(count, k=1)])) * count / 2.0
    allowed = np.zeros((count, count), dtype=bool)       # [b, a]: a below b
    for i_b, wb in enumerate(words):
        for i_a, wa in enumerate(words):
            allowed[i_b, i_a] = wa.letters in predecessors[wb.letters]
    for i in range(1, mu + 1):
        scale = float(ell) ** i
        images = (points * scale) % 1.0
        d = np.abs((images[:, None] - points[None, :] + 0.5) % 1.0 - 0.5)
        relevant = d[~allowed & (d > tol)]
        if relevant.size:
            eps_max = min(eps_max, float(relevant.min()) * count / (scale + 1.0))
    if eps0 >= eps_max:
        raise InvalidArgument(
            f"eps0 = {eps0} too large for separation; maximal admissible eps0 is {eps_max:.6g}")

    radius = eps0 / count
    directions = tuple(
        BumpDirection(center=float(points[k]), radius=radius,
                      deriv_plateau=amplitude * count, label=str(words[k]))
        for k in range(count))
    return BumpFamilyData(y=y, nu=nu, mu=mu, eps0=eps0, eps_max=eps_max,
                          amplitude=amplitude, directions=directions, words=words,
                          predecessors=predecessors, neighborhood=(y, eps0 / 3.0))


@dataclass(frozen=True)
class ProbeResult:
    fraction: float
    ci_low: float
    ci_high: float
    t_samples: int
    combos_used: int
    window: float


def _wilson_interval(k: int, n: int, z: float = 1.96) -> tuple:
    if n == 0:
        return 0.0, 1.0
    phat = k / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def bad_set_probe(family: PerturbationFamily, n: int, samples: int,
                  params: GenericityParams, seed: int, combos: int = 64,
                  gamma0: float = 0.9) -> ProbeResult:
    """Monte Carlo measure of the degenerate parameter set.

    Draws random (word, sigma) combinations at level n, keeps those whose
    slope-difference map has Jacobian >= 1 (skipped when the family has no
    directions, where the parameter box is a single point), and estimates
    the fraction of parameters t whose perturbed ceiling keeps all sigma
    slope differences inside the window 10 * theta_K * ell^(-n).  Reported
    with a 95% Wilson interval.  Full enumeration of all combinations is
    out of computational reach; only the measure trend is probed.
    """
    f = family.base
    ell = f.ell
    cls = classify(f, gamma0)
    window = 10.0 * cls.theta_K * ell ** float(-n)
    rng = np.random.default_rng([seed, n, family.m])
    p = params.p
    if 0 < family.m < p:
        raise InvalidArgument(
            f"family provides {family.m} directions but the chain needs p = {p}; "
            "no slope-difference map can reach Jacobian 1")

    events = []
    attempts = 0
    while len(events) < combos and attempts < 20 * combos:
        attempts += 1
        c_idx = int(rng.integers(ell ** n))
        sig_idx = rng.choice(ell ** n, size=p + 1, replace=False)
        c = Word.from_index(c_idx, n, ell)
        sigma = [Word.from_index(int(k), n, ell) for k in sig_idx]
        x_c, _ = word_interval(c)
        if family.m > 0:
            G = g_matrix(x_c, sigma, family)
            if jacobian(G) < 1.0:
                continue
        else:
            G = np.zeros((p, 0))
        d0 = np.array([
            birkhoff(f, b, x_c, 1) - birkhoff(f, sigma[0], x_c, 1)
            for b in sigma[1:]
        ])
        events.append((G, d0))

    if family.m == 0:
        inside_any = any(np.all(np.abs(d0) <= window) for _, d0 in events)
        frac = 1.0 if inside_any else 0.0
        return ProbeResult(frac, frac, frac, 1, len(events), window)

    T = rng.uniform(-family.epsilon, family.epsilon, size=(samples, family.m))
    hit = np.zeros(samples, dtype=bool)
    for G, d0 in events:
        D = T @ G.T + d0
        hit |= np.all(np.abs(D) <= window, axis=1)
    k = int(np.count_nonzero(hit))
    lo, hi = _wilson_interval(k, samples)
    return ProbeResult(k / samples, lo, hi, samples, len(events), window)

"""Ulam discretization of the transfer operator, spectra, and correlations.

The flow domain is tiled by nx columns of ns rectangular boxes whose
heights follow the ceiling at the column midpoint.  The Ulam matrix entry
(i, j) is the fraction of a deterministic rank-1 lattice of points seeded
in box j that the time-t map sends into box i; columns therefore sum to one
exactly and the leading eigenvalue sits at 1 up to solver tolerance.

Ulam eigenvalues approximate transfer-operator resonances only
heuristically; every spectrum report carries the "discretized spectrum"
caveat and ``resonance_compare`` labels its output advisory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .ceiling import TrigPolynomial, _certified_extrema
from .dynamics import advance
from .errors import InvalidArgument, NumericalFailure, ResourceLimit
from .smooth import step
from .transversality import TransversalityEstimate, exponent_fit

DISCRETIZED_SPECTRUM_CAVEAT = "discretized spectrum"

GOLDEN_FRAC = (math.sqrt(5.0) - 1.0) / 2.0

MAX_DIM = 2 ** 16
MEM_CAP_BYTES = 2 ** 31

# observables vanish within this fraction of min f near the top and bottom
# of each fiber, keeping them smooth and supported in the interior
CUTOFF_MARGIN_FRACTION = 0.05


@dataclass(frozen=True)
class BoxPartition:
    """Rectangles tiling the flow domain: per column, ns equal slices of
    [0, f(column midpoint))."""

    nx: int
    ns: int
    column_heights: np.ndarray

    @classmethod
    def build(cls, f: TrigPolynomial, nx: int, ns: int) -> "BoxPartition":
        mids = (np.arange(nx) + 0.5) / nx
        return cls(nx=nx, ns=ns, column_heights=np.asarray(f(mids), dtype=float))

    @property
    def dim(self) -> int:
        return self.nx * self.ns

    def total_measure(self) -> float:
        return float(np.sum(self.column_heights)) / self.nx


@dataclass(frozen=True)
class UlamOperator:
    matrix: np.ndarray
    partition: BoxPartition
    t: float
    points_per_box: int
    seed: int
    mode: str
    ceiling_key: str


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: tuple          # complex, sorted by decreasing modulus
    multiplicities: tuple
    t: float
    ceiling_key: str
    essential_bound: float | None = None
    caveats: tuple = (DISCRETIZED_SPECTRUM_CAVEAT,)


@dataclass(frozen=True)
class Observable:
    """Closed-form observable: optional trig factor in x, optional trig
    factor in s, times a smooth interior cutoff in s."""

    x_wave: tuple | None = None   # ("cos"|"sin", integer frequency)
    s_wave: tuple | None = None   # ("cos"|"sin", real frequency)
    cutoff: bool = True

    @property
    def id(self) -> str:
        parts = []
        if self.x_wave:
            parts.append(f"{self.x_wave[0]}_x({self.x_wave[1]:g})")
        if self.s_wave:
            parts.append(f"{self.s_wave[0]}_s({self.s_wave[1]:g})")
        if not parts:
            parts.append("one")
        if self.cutoff:
            parts.append("cutoff")
        return "*".join(parts)

    def values(self, x: np.ndarray, s: np.ndarray, fx: np.ndarray, margin: float) -> np.ndarray:
        v = np.ones_like(np.asarray(x, dtype=float))
        if self.x_wave:
            kind, k = self.x_wave
            arg = 2.0 * np.pi * k * x
            v = v * (np.cos(arg) if kind == "cos" else np.sin(arg))
        if self.s_wave:
            kind, a = self.s_wave
            arg = 2.0 * np.pi * a * s
            v = v * (np.cos(arg) if kind == "cos" else np.sin(arg))
        if self.cutoff:
            v = v * step(s / margin) * step((fx - s) / margin)
        return v


@dataclass(frozen=True)
class CorrelationCurve:
    samples: tuple              # of (t, value)
    psi_id: str
    phi_id: str
    ceiling_key: str


def _lattice(points: int, seed: int, mode: str, count: int):
    """(u, v) in [0,1)^2 per box: a golden-ratio rank-1 lattice in the
    deterministic default, or seeded uniforms in Monte Carlo mode (one
    independent stream per box, stable under any evaluation order)."""
    if mode == "lattice":
        k = np.arange(points)
        u = (k + 0.5) / points
        v = ((k + 0.5) * GOLDEN_FRAC) % 1.0
        return np.tile(u, (count, 1)), np.tile(v, (count, 1))
    if mode == "monte-carlo":
        rng = np.random.default_rng(seed)
        pts = rng.random((count, points, 2))
        return pts[:, :, 0], pts[:, :, 1]
    raise InvalidArgument(f"mode must be 'lattice' or 'monte-carlo', got {mode!r}")


def build_ulam(f: TrigPolynomial, t: float, nx: int, ns: int,
               points_per_box: int, seed: int = 0,
               mode: str = "lattice") -> UlamOperator:
    """Ulam matrix of the time-t map on the box partition.

    Sample points in a box may stick out above the true ceiling when f dips
    below the column-midpoint height; the flow advance handles any s >= 0
    and lands inside the domain, and landing coordinates above the landing
    column's height are assigned to its top slice, so every sampled point is
    accounted for and columns sum to one exactly.
    """
    if t < 0:
        raise InvalidArgument(f"t must be >= 0, got {t}")
    if points_per_box < 16:
        raise InvalidArgument(f"points_per_box must be >= 16, got {points_per_box}")
    part = BoxPartition.build(f, nx, ns)
    dim = part.dim
    if dim > MAX_DIM:
        raise ResourceLimit(f"nx*ns = {dim} exceeds the cap {MAX_DIM}", max_dim=MAX_DIM)
    if dim * dim * 8 > MEM_CAP_BYTES:
        raise ResourceLimit(
            f"dense Ulam matrix of dimension {dim} exceeds the memory cap",
            max_dim=int(math.isqrt(MEM_CAP_BYTES // 8)))

    if t == 0.0:
        # the time-0 map is the identity on the domain; sampling would only
        # move the few points that stick out above the true ceiling
        return UlamOperator(matrix=np.eye(dim), partition=part, t=0.0,
                            points_per_box=points_per_box, seed=seed, mode=mode,
                            ceiling_key=f.key())

    u, v = _lattice(points_per_box, seed, mode, dim)
    cols = np.repeat(np.arange(nx), ns)
    slices = np.tile(np.arange(ns), nx)
    heights = part.column_heights[cols]
    x0 = (cols[:, None] + u) / nx
    s0 = (slices[:, None] + v) * (heights[:, None] / ns)

    x1, s1, _ = advance(f, x0.ravel(), s0.ravel() + t)
    land_col = np.minimum((x1 * nx).astype(int), nx - 1)
    land_height = part.column_heights[land_col]
    land_slice = np.minimum((s1 * ns / land_height).astype(int), ns - 1)
    land_idx = land_col * ns + land_slice
    src_idx = np.repeat(np.arange(dim), points_per_box)

    matrix = np.zeros((dim, dim))
    np.add.at(matrix, (land_idx, src_idx), 1.0 / points_per_box)
    return UlamOperator(matrix=matrix, partition=part, t=float(t),
                        points_per_box=points_per_box, seed=seed, mode=mode,
                        ceiling_key=f.key())


def spectrum(op: UlamOperator, k: int) -> SpectrumReport:
    """Top-k eigenvalues of the Ulam matrix by modulus.

    Small problems go through the dense LAPACK path; larger ones use the
    implicitly restarted Arnoldi iteration with a fixed start vector, so the
    result is deterministic given the matrix.
    """
    if k > 32:
        raise InvalidArgument(f"k must be <= 32, got {k}")
    dim = op.matrix.shape[0]
    if dim <= 128 or k >= dim - 1:
        vals = scipy.linalg.eigvals(op.matrix)
    else:
        v0 = np.full(dim, 1.0 / math.sqrt(dim))
        try:
            vals = scipy.sparse.linalg.eigs(
                op.matrix, k=min(k + 2, dim - 2), which="LM",
                v0=v0, return_eigenvectors=False)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise NumericalFailure(
                "Arnoldi iteration did not converge",
                converged=len(exc.eigenvalues), requested=k) from exc
    order = np.lexsort((-vals.imag, -vals.real, -np.abs(vals)))
    vals = vals[order][:k]

    mults = []
    tol = 1e-8
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and abs(vals[j] - vals[i]) <= tol * max(1.0, abs(vals[i])):
            j += 1
        mults.extend([j - i] * (j - i))
        i = j
    return SpectrumReport(
        eigenvalues=tuple(complex(v) for v in vals),
        multiplicities=tuple(mults), t=op.t, ceiling_key=op.ceiling_key)


def _quadrature_nodes(f: TrigPolynomial, nx: int, ns: int):
    """Midpoint nodes and normalized weights for the flow-invariant measure
    (Lebesgue under the ceiling, normalized)."""
    mids = (np.arange(nx) + 0.5) / nx
    heights = np.asarray(f(mids), dtype=float)
    x = np.repeat(mids, ns)
    fx = np.repeat(heights, ns)
    frac = (np.tile(np.arange(ns), nx) + 0.5) / ns
    s = frac * fx
    w = fx / (nx * ns)
    w = w / w.sum()
    return x, s, fx, w


def correlation(f: TrigPolynomial, psi: Observable, phi: Observable,
                t_list, nx: int, ns: int) -> CorrelationCurve:
    """Correlation of two observables along the flow by midpoint quadrature
    on the box grid."""
    x, s, fx, w = _quadrature_nodes(f, nx, ns)
    f_min = _certified_extrema(f, 0, np.arange(4096) / 4096)[0]
    margin = CUTOFF_MARGIN_FRACTION * f_min
    psi_vals = psi.values(x, s, fx, margin)
    mean_psi = float(np.sum(w * psi_vals))
    samples = []
    for t in t_list:
        x1, s1, _ = advance(f, x, s + float(t))
        fx1 = np.asarray(f(x1), dtype=float)
        phi_vals = phi.values(x1, s1, fx1, margin)
        mean_phi = float(np.sum(w * phi_vals))
        cor = float(np.sum(w * psi_vals * phi_vals) - mean_phi * mean_psi)
        samples.append((float(t), cor))
    return CorrelationCurve(samples=tuple(samples), psi_id=psi.id, phi_id=phi.id,
                            ceiling_key=f.key())


def decay_fit(curve: CorrelationCurve) -> tuple:
    """Fitted exponential rate of |Cor_t| with zero values masked."""
    pts = [(t, abs(v)) for t, v in curve.samples if abs(v) > 1e-15]
    return exponent_fit(pts)


def resonance_compare(spec: SpectrumReport, fit: tuple,
                      m_estimate: TransversalityEstimate,
                      slack: float = 0.05) -> dict:
    """Side-by-side of |lambda_2|, the fitted correlation rate, and the
    per-unit-time transversality bound m(f,t)^(1/(2t)).  Advisory only."""
    if abs(spec.t - m_estimate.t) > 1e-12:
        raise InvalidArgument(
            f"spectrum computed at t={spec.t} but transversality at t={m_estimate.t}")
    if m_estimate.ceiling_key and m_estimate.ceiling_key != spec.ceiling_key:
        raise InvalidArgument("spectrum and transversality come from different ceilings")
    lambda2 = abs(spec.eigenvalues[1]) if len(spec.eigenvalues) > 1 else None
    rate, residual = fit
    bound = m_estimate.m_value ** (1.0 / (2.0 * m_estimate.t))
    return {
        "lambda2_abs": lambda2,
        "fitted_rate": rate,
        "fit_log_residual": residual,
        "m_bound_per_unit_time": bound,
        "fit_le_bound": bool(rate <= bound + slack),
        "slack": slack,
        "caveats": [DISCRETIZED_SPECTRUM_CAVEAT, "advisory only"],
    }

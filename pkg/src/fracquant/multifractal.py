"""Coarse multifractal counts and separated families of dyadic cubes.

``N(alpha, n)`` counts level-``n`` cubes with ``J(Q) = nu(Q) 2^{-n r} >= 2^{-alpha n}``.
The optimized coarse dimension is ``sup_alpha F(alpha) / alpha`` where
``F(alpha)`` is the growth exponent of ``N(alpha, n)`` in ``n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube
from .errors import InputError
from .measures import MeasureModel

THRESHOLD_SLACK = 1e-12
INSTABILITY_EPS = 0.05
INSTABILITY_RATIO = 0.1
GRID_POINTS = 20
GRID_LIMIT = 1 << 24


def _log2_J(model: MeasureModel, r: float, n: int):
    masses, counts = model.level_distribution(n)
    keep = masses > 0
    return np.log2(masses[keep]) - r * n, counts[keep]


def _count(log2_J, counts, alpha, n, eps=0.0) -> int:
    # relative slack so cubes sitting exactly on the threshold are counted
    cut = -alpha * n - eps + math.log2(1.0 - THRESHOLD_SLACK)
    return int(round(float(np.sum(counts[log2_J >= cut]))))


def count_N_alpha(model: MeasureModel, r: float, alpha: float, n: int) -> int:
    """Number of level-``n`` cubes with ``nu(Q) 2^{-n r} >= 2^{-alpha n}``.

    Examples
    --------
    >>> from fracquant.measures import UniformDensity
    >>> count_N_alpha(UniformDensity(1), 1.0, 2.0, 5)
    32
    """
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    if n < 1:
        raise InputError(f"level must be >= 1, got {n}")
    lj, counts = _log2_J(model, r, n)
    return _count(lj, counts, alpha, n)


def default_alpha_grid(r: float, d: int, points: int = GRID_POINTS) -> np.ndarray:
    return np.geomspace(0.1 * (r + d), 4.0 * (r + d), points)


@dataclass
class CoarseCounts:
    r: float
    alpha_grid: np.ndarray
    levels: list[int]
    counts: dict[float, dict[int, int]]
    F_upper: dict[float, float]
    F_lower: dict[float, float]
    method: str = "regression"
    unstable: list[tuple[float, int]] = field(default_factory=list)


def _slope(x, y) -> float:
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def _exponents(levels, cnts, method, d):
    ns = np.array(levels, dtype=float)
    logs = np.log2(np.maximum(np.array(cnts, dtype=float), 1.0))  # log^+
    if method == "top_levels":
        per = logs[-3:] / ns[-3:]
        hi, lo = float(per.max()), float(per.min())
    else:
        full = _slope(ns, logs)
        half = len(ns) // 2
        tail = _slope(ns[half:], logs[half:]) if len(ns) - half >= 2 else full
        hi, lo = max(full, tail), min(full, tail)
    return float(np.clip(hi, 0.0, d)), float(np.clip(lo, 0.0, d))


def coarse_dimensions(model: MeasureModel, r: float, alpha_grid=None, n_range=None,
                      method: str = "regression", refine: int | None = None):
    """``(F_upper_r, F_lower_r, CoarseCounts)``.

    ``method="regression"`` takes the exponent of ``N(alpha, n)`` as the
    slope of ``log2 N`` in ``n`` (max and min of the full-range and tail-half
    slopes); ``method="top_levels"`` uses ``log2 N / n`` over the three finest
    levels.  Either estimate is replaced by its largest non-decreasing
    minorant in ``alpha``.  After the grid sup, ``refine`` rounds of a finer
    geometric grid between the neighbours of the maximiser sharpen the sup
    (default 2 on the default grid, none on a user grid).
    """
    if method not in ("regression", "top_levels"):
        raise InputError(f"unknown coarse method {method!r}")
    d = model.dimension
    grid = default_alpha_grid(r, d) if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    if len(grid) == 0 or np.any(grid <= 0):
        raise InputError("alpha grid must be non-empty and positive")
    if n_range is None:
        n_range = (4, 12)
    levels = list(range(int(n_range[0]), int(n_range[1]) + 1))
    if not levels or levels[0] < 1:
        raise InputError(f"bad level range {n_range}")
    if method == "regression" and len(levels) < 2:
        raise InputError("regression needs at least two levels")
    data = {n: _log2_J(model, r, n) for n in levels}

    counts, raw_up, raw_lo, unstable = {}, {}, {}, []

    def evaluate(alpha):
        alpha = float(alpha)
        if alpha in counts:
            return
        row = {n: _count(*data[n], alpha, n) for n in levels}
        counts[alpha] = row
        raw_up[alpha], raw_lo[alpha] = _exponents(levels, [row[n] for n in levels], method, d)
        if not model.exact:
            for n in levels:
                lo = _count(*data[n], alpha, n, -INSTABILITY_EPS)
                hi = _count(*data[n], alpha, n, INSTABILITY_EPS)
                if hi - lo > INSTABILITY_RATIO * max(row[n], 1):
                    unstable.append((alpha, n))

    def monotone(raw):
        # N(alpha, n) is non-decreasing in alpha, so its exponent is too; the
        # largest non-decreasing minorant removes onset transients near the
        # smallest admissible alpha
        alphas = sorted(raw)
        vals = np.minimum.accumulate(np.array([raw[a] for a in alphas])[::-1])[::-1]
        return dict(zip(alphas, vals.tolist()))

    for a in grid:
        evaluate(a)
    pts = sorted(grid.tolist())
    if refine is None:
        refine = 2 if alpha_grid is None else 0
    for _ in range(refine):
        F_up = monotone(raw_up)
        best = max(pts, key=lambda a: F_up[a] / a)
        i = pts.index(best)
        lo = pts[max(i - 1, 0)]
        hi = pts[min(i + 1, len(pts) - 1)]
        if hi <= lo:
            break
        pts = sorted(set(pts) | set(np.geomspace(lo, hi, GRID_POINTS).tolist()))
        for a in pts:
            evaluate(a)
    F_up, F_lo = monotone(raw_up), monotone(raw_lo)
    alphas = np.array(sorted(counts))
    F_upper_r = max(F_up[a] / a for a in alphas)
    F_lower_r = max(F_lo[a] / a for a in alphas)
    cc = CoarseCounts(float(r), alphas, levels, counts, F_up, F_lo, method, unstable)
    return F_upper_r, F_lower_r, cc


@dataclass
class SeparatedFamily:
    level: int
    indices: np.ndarray
    source_count: int

    @property
    def card(self) -> int:
        return len(self.indices)

    @property
    def cubes(self) -> list[DyadicCube]:
        return [DyadicCube(self.level, tuple(k)) for k in self.indices]


def _as_rows(cubes):
    if isinstance(cubes, tuple) and len(cubes) == 2 and isinstance(cubes[0], (int, np.integer)):
        level, idx = cubes
        return int(level), np.atleast_2d(np.asarray(idx, dtype=np.int64))
    cubes = list(cubes)
    if not cubes:
        raise InputError("separated_family needs at least one cube")
    levels = {c.level for c in cubes}
    if len(levels) != 1:
        raise InputError(f"cubes must share one level, got levels {sorted(levels)}")
    return cubes[0].level, np.array([c.index for c in cubes], dtype=np.int64)


def separated_family(cubes) -> SeparatedFamily:
    """Greedy subfamily whose 3-fold enlargements have disjoint interiors.

    Cubes are scanned in lexicographic index order; each kept cube removes the
    remaining cubes meeting its 5-fold enlargement, i.e. those within index
    distance 2 in the sup norm.  Accepts a list of :class:`DyadicCube` or a
    ``(level, index_array)`` pair.
    """
    level, idx = _as_rows(cubes)
    if len(idx) == 0:
        raise InputError("separated_family needs at least one cube")
    idx = np.unique(idx, axis=0)  # sorted lexicographically
    m, d = idx.shape
    kept = []
    if (1 << (level * d)) <= GRID_LIMIT:
        side = 1 << level
        blocked = np.zeros((side,) * d, dtype=bool)
        for row in idx:
            key = tuple(row)
            if blocked[key]:
                continue
            kept.append(row)
            blocked[tuple(slice(max(k - 2, 0), k + 3) for k in row)] = True
    else:
        offsets = list(itertools.product(range(-2, 3), repeat=d))
        taken: set[tuple[int, ...]] = set()
        for row in idx:
            key = tuple(int(k) for k in row)
            if any(tuple(a + b for a, b in zip(key, off)) in taken for off in offsets):
                continue
            kept.append(row)
            taken.add(key)
    out = np.array(kept, dtype=np.int64).reshape(-1, d)
    return SeparatedFamily(level, out, m)

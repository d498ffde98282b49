"""Codebooks, quantization errors and the partition-based bounds.

The upper bound comes from the midpoints of a partition ``P_t`` with at most
``n`` cubes; the lower bound from a separated family of cubes with large
``J``.  :func:`estimate_Dr` regresses ``log n`` on ``-log e_n`` for both
routes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, InputError
from .measures import AtomicMeasure, MeasureModel, UniformDensity
from .multifractal import THRESHOLD_SLACK, separated_family
from .partition import gamma_search

DEFAULT_EVAL_SAMPLES = 200_000
DEFAULT_LLOYD_ITERATIONS = 10
CURVE_LLOYD_ITERATIONS = 5
CURVE_TRAINING_SAMPLES = 50_000
COORDINATE_STEPS = 20
DROP_FRACTION = 0.2
WITNESS_PREFIXES = 16


@dataclass
class ErrorEstimate:
    """``value`` is ``e = (int d(x, A)^r dnu)^{1/r}``; ``half_width`` bounds it at 3 sigma."""

    value: float
    power: float
    half_width: float
    method: str
    samples: int | None = None
    seed: int | None = None


@dataclass
class Codebook:
    points: np.ndarray
    r: float
    error: ErrorEstimate | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.points) < 1:
            raise InputError("a codebook needs at least one point")

    @property
    def card(self) -> int:
        return len(self.points)

    @property
    def error_r(self) -> float | None:
        return None if self.error is None else self.error.value


def upper_constant(d: int, r: float) -> float:
    """Constant ``C`` with ``e^r <= C * card * max_J`` for midpoint codebooks.

    Each cube contributes at most ``nu(Q) (sqrt(d) side / 2)^r``, so
    ``(sqrt(d)/2)^r`` suffices; it never exceeds ``sqrt(d)`` for ``d <= 4``.
    """
    return max(math.sqrt(d), (math.sqrt(d) / 2.0) ** r)


def _samples(model: MeasureModel, count: int, seed: int) -> np.ndarray:
    cache = model.__dict__.setdefault("_eval_samples", {})
    key = (int(count), int(seed))
    if key not in cache:
        cache[key] = model.sample(count, seed)
    return cache[key]


def _uniform_interval_power(points: np.ndarray, r: float, lo: float, hi: float) -> float:
    """``int |x - A|^r dx / (hi - lo)`` over ``[lo, hi]`` via the Voronoi cells of ``A``."""
    c = np.sort(points[:, 0])
    edges = np.concatenate([[lo], np.clip(0.5 * (c[1:] + c[:-1]), lo, hi), [hi]])

    def anti(x, centre):
        u = x - centre
        return np.sign(u) * np.abs(u) ** (r + 1) / (r + 1)

    total = np.sum(anti(edges[1:], c) - anti(edges[:-1], c))
    return float(total / (hi - lo))


def default_eval_method(model: MeasureModel) -> str:
    if isinstance(model, AtomicMeasure):
        return "exact"
    if isinstance(model, UniformDensity) and model.dimension == 1:
        return "closed_form"
    return "monte_carlo"


def eval_error(model: MeasureModel, codebook, r: float, method: str = "auto",
               samples: int = DEFAULT_EVAL_SAMPLES, seed: int = 0,
               workers: int = 1) -> ErrorEstimate:
    """Quantization error of a fixed codebook.

    Examples
    --------
    >>> from fracquant.measures import UniformDensity
    >>> eval_error(UniformDensity(1), [[0.5]], 1.0).value
    0.25
    """
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    pts = codebook.points if isinstance(codebook, Codebook) else np.atleast_2d(
        np.asarray(codebook, dtype=float))
    if len(pts) < 1:
        raise InputError("codebook is empty")
    if pts.shape[1] != model.dimension:
        raise InputError(f"codebook dimension {pts.shape[1]} ≠ model dimension {model.dimension}")
    if method == "auto":
        method = default_eval_method(model)
    if method == "exact":
        if not isinstance(model, AtomicMeasure):
            raise InputError("exact evaluation needs an atomic model")
        dist, _ = cKDTree(pts).query(model.atoms, workers=workers)
        power = float(np.dot(model.weights, dist ** r))
        return ErrorEstimate(power ** (1.0 / r), power, 0.0, "exact")
    if method == "closed_form":
        if not (isinstance(model, UniformDensity) and model.dimension == 1):
            raise InputError("closed-form evaluation is available for 1-d uniform models only")
        lo, hi = model.low[0], model.high[0]
        power = _uniform_interval_power(pts, r, float(lo), float(hi))
        return ErrorEstimate(power ** (1.0 / r), power, 0.0, "closed_form")
    if method != "monte_carlo":
        raise InputError(f"unknown evaluation method {method!r}")
    x = _samples(model, samples, seed)
    dist, _ = cKDTree(pts).query(x, workers=workers)
    vals = dist ** r
    power = float(np.mean(vals))
    sigma = float(np.std(vals)) / math.sqrt(len(vals))
    value = power ** (1.0 / r)
    half = (power + 3.0 * sigma) ** (1.0 / r) - value
    return ErrorEstimate(value, power, half, "monte_carlo", len(vals), seed)


def upper_quantizer(model: MeasureModel, r: float, n: int, evaluate: bool = True,
                    **eval_kw) -> tuple[Codebook, float]:
    """Midpoint codebook of a partition ``P_t`` with ``card <= n`` and its certified bound."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    g = gamma_search(model, r, n)
    part = g.partition
    bound = (upper_constant(model.dimension, r) * part.card * part.max_J) ** (1.0 / r)
    book = Codebook(part.midpoints(), r)
    if evaluate:
        book.error = eval_error(model, book, r, **eval_kw)
    return book, bound


@dataclass
class Witness:
    k: int
    bound: float
    level: int
    alpha: float
    family_size: int


def lower_witness(model: MeasureModel, r: float, alpha: float, n: int) -> Witness | None:
    """Lower bound ``e_{k,r} >= (c 2^{-alpha n - 1})^{1/r}`` with ``k = floor(c/2)``.

    ``c`` is the size of a separated family among the level-``n`` cubes with
    ``J >= 2^{-alpha n}``.  Returns ``None`` when fewer than ``5^d`` cubes
    qualify.
    """
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    if n < 1:
        raise InputError(f"level must be >= 1, got {n}")
    table = model.level_masses(n)
    log2_J = np.log2(table.masses) - r * n
    sel = log2_J >= -alpha * n + math.log2(1.0 - THRESHOLD_SLACK)
    if np.count_nonzero(sel) < 5 ** model.dimension:
        return None
    fam = separated_family((n, table.indices[sel]))
    c = fam.card
    if c // 2 < 1:
        return None
    return Witness(c // 2, (c * 2.0 ** (-alpha * n - 1)) ** (1.0 / r), n, float(alpha), c)


def witness_table(model: MeasureModel, r: float, levels) -> list[Witness]:
    """Witnesses over ``levels`` with thresholds at the J-values of geometric prefixes."""
    cache = model.__dict__.setdefault("_witnesses", {})
    out = []
    for n in levels:
        key = (float(r), int(n))
        if key not in cache:
            found = []
            table = model.level_masses(n)
            m = len(table.masses)
            floor = 5 ** model.dimension
            if m >= floor:
                order = np.argsort(-table.masses, kind="stable")
                sizes = np.unique(np.geomspace(floor, m, WITNESS_PREFIXES).astype(int))
                for size in sizes:
                    J_min = table.masses[order[size - 1]] * 2.0 ** (-r * n)
                    alpha = -math.log2(J_min) / n
                    w = lower_witness(model, r, alpha, n)
                    if w is not None:
                        found.append(w)
            cache[key] = found
        out.extend(cache[key])
    return out


def best_lower_bound(model: MeasureModel, r: float, k: int, levels=None) -> Witness | None:
    """Largest witness bound valid for ``k`` points (``e_k >= e_{k'}`` for ``k <= k'``)."""
    if levels is None:
        levels = range(1, feasible_level(model) + 1)
    cands = [w for w in witness_table(model, r, levels) if w.k >= k]
    return max(cands, key=lambda w: w.bound) if cands else None


def feasible_level(model: MeasureModel, max_cubes: int = 1 << 16) -> int:
    """Deepest level (at most 12) whose mass table stays below ``max_cubes`` entries."""
    n = 1
    while n < min(12, model.max_level):
        if len(model.level_masses(n + 1)) > max_cubes:
            break
        n += 1
    return n


def _training_set(model: MeasureModel, budget: int, seed: int):
    if isinstance(model, AtomicMeasure):
        return model.atoms, model.weights
    x = _samples(model, budget, seed)
    return x, np.full(len(x), 1.0 / len(x))


def lloyd_refine(model: MeasureModel, codebook, r: float,
                 iterations: int = DEFAULT_LLOYD_ITERATIONS,
                 sample_budget: int = DEFAULT_EVAL_SAMPLES, seed: int = 0,
                 evaluate: bool = True, workers: int = 1, eval_samples: int | None = None,
                 eval_seed: int | None = None) -> Codebook:
    """Lloyd iterations on a weighted training set (atoms, or model samples).

    ``r = 2`` uses cell means; other orders use a derivative-free coordinate
    search per cell.  Empty cells move to the training point farthest from
    the codebook.  The training loss never increases.
    """
    if iterations < 0:
        raise InputError(f"iterations must be >= 0, got {iterations}")
    pts = codebook.points if isinstance(codebook, Codebook) else np.atleast_2d(
        np.asarray(codebook, dtype=float))
    centres = pts.copy()
    k, d = centres.shape
    x, w = _training_set(model, sample_budget, seed)
    tree_query = lambda c: cKDTree(c).query(x, workers=workers)  # noqa: E731
    dist, labels = tree_query(centres)
    best, best_loss = centres, float(np.dot(w, dist ** r))
    for _ in range(iterations):
        mass = np.bincount(labels, weights=w, minlength=k)
        filled = mass > 0
        if r == 2:
            new = centres.copy()
            for j in range(d):
                sums = np.bincount(labels, weights=w * x[:, j], minlength=k)
                new[filled, j] = sums[filled] / mass[filled]
        else:
            new = _coordinate_search(x, w, centres, labels, r, k)
        empty = np.flatnonzero(~filled)
        if len(empty):
            far = np.argsort(-dist, kind="stable")[:len(empty)]
            new[empty[:len(far)]] = x[far]
        centres = new
        dist, labels = tree_query(centres)
        loss = float(np.dot(w, dist ** r))
        if not loss < best_loss:
            break
        best, best_loss = centres, loss
    book = Codebook(best, r)
    if evaluate:
        book.error = eval_error(model, book, r, samples=eval_samples or sample_budget,
                                seed=seed if eval_seed is None else eval_seed, workers=workers)
    return book


def _coordinate_search(x, w, centres, labels, r, k):
    """``COORDINATE_STEPS`` rounds of +-h moves per axis, halving ``h`` where nothing improves."""
    d = centres.shape[1]
    cur = centres.copy()
    diff = x - cur[labels]
    sq = np.einsum("ij,ij->i", diff, diff)

    def loss_of(sq_vals):
        return np.bincount(labels, weights=w * sq_vals ** (0.5 * r), minlength=k)

    base = loss_of(sq)
    order = np.argsort(labels, kind="stable")
    starts = np.searchsorted(labels[order], np.arange(k))
    spread = np.zeros(k)
    filled = np.bincount(labels, minlength=k) > 0
    for j in range(d):
        col = x[order, j]
        lo = np.minimum.reduceat(col, np.minimum(starts, len(col) - 1))
        hi = np.maximum.reduceat(col, np.minimum(starts, len(col) - 1))
        spread = np.maximum(spread, np.where(filled, hi - lo, 0.0))
    h = 0.25 * spread
    for _ in range(COORDINATE_STEPS):
        improved = np.zeros(k, dtype=bool)
        for j in range(d):
            for sign in (1.0, -1.0):
                step = sign * h
                moved = diff[:, j] - step[labels]
                trial_sq = sq - diff[:, j] ** 2 + moved ** 2
                loss = loss_of(np.maximum(trial_sq, 0.0))
                better = loss < base
                if not np.any(better):
                    continue
                cur[better, j] += step[better]
                take = better[labels]
                diff[take, j] = moved[take]
                sq = np.where(take, trial_sq, sq)
                base = np.where(better, loss, base)
                improved |= better
        h = np.where(improved, h, 0.5 * h)
    return cur


def _pad(model, points, n, x):
    """Add farthest training points until the codebook has ``n`` points."""
    pts = points
    while len(pts) < n:
        dist, _ = cKDTree(pts).query(x)
        extra = min(n - len(pts), max(1, len(pts)))
        far = np.argsort(-dist, kind="stable")[:extra]
        if dist[far[0]] == 0:
            break
        pts = np.vstack([pts, x[far]])
    return pts


@dataclass
class CurveEntry:
    n: int
    upper: float
    lower: float | None
    evaluated: float
    half_width: float = 0.0
    card: int = 0


@dataclass
class ErrorCurve:
    r: float
    entries: list[CurveEntry] = field(default_factory=list)

    def column(self, name):
        return np.array([getattr(e, name) for e in self.entries], dtype=float)


@dataclass
class DrEstimate:
    """``bound_based`` regresses the certified upper bounds, ``evaluated`` the best errors.

    ``upper`` and ``lower`` are the max and min of consecutive-pair slopes of
    the evaluated route over the retained grid.
    """

    bound_based: float
    evaluated: float
    upper: float
    lower: float
    curve: ErrorCurve
    residual_bound: float = 0.0
    residual_evaluated: float = 0.0
    zero_branch: bool = False


def _dim_fit(ns, errs):
    ns = np.asarray(ns, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if np.any(errs <= 0):
        return 0.0, 0.0, [0.0]
    x = -np.log(errs)
    y = np.log(ns)
    if np.ptp(x) < 1e-12:
        return 0.0, 0.0, [0.0]
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    resid = float(np.sqrt(np.mean((y - y.mean() - slope * xc) ** 2)))
    pairs = [(y[i + 1] - y[i]) / (x[i + 1] - x[i]) for i in range(len(x) - 1) if x[i + 1] != x[i]]
    return max(slope, 0.0), resid, pairs or [slope]


def default_n_grid(d: int) -> list[int]:
    return [2 ** m for m in range(1, 11)] if d == 1 else [2 ** m for m in range(1, 10)]


def estimate_Dr(model: MeasureModel, r: float, n_grid=None,
                lloyd_iterations: int = CURVE_LLOYD_ITERATIONS,
                training_samples: int = CURVE_TRAINING_SAMPLES,
                samples: int = DEFAULT_EVAL_SAMPLES, seed: int = 0, workers: int = 1,
                witness_levels=None) -> DrEstimate:
    """Quantization dimension from the certified bounds and from evaluated errors.

    The smallest 20% of the grid is dropped before regressing ``log n`` on
    ``-log e``.  A zero evaluated error (atomic exhaustion) gives ``D = 0``.
    """
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    grid = sorted(int(n) for n in (default_n_grid(model.dimension) if n_grid is None else n_grid))
    if len(grid) < 5:
        raise InputError(f"n grid needs at least 5 points, got {len(grid)}")
    if grid[0] < 1:
        raise InputError("n grid must be positive")
    eval_kw = dict(samples=samples, seed=seed, workers=workers)
    x, _ = _training_set(model, training_samples, seed + 1)
    if witness_levels is None:
        witness_levels = range(1, feasible_level(model) + 1)
    curve = ErrorCurve(float(r))
    best = math.inf
    best_hw = 0.0
    for n in grid:
        book, bound = upper_quantizer(model, r, n, **eval_kw)
        cand = [book]
        if lloyd_iterations > 0:
            start = _pad(model, book.points, n, x)
            cand.append(lloyd_refine(model, Codebook(start, r), r, lloyd_iterations,
                                     training_samples, seed + 1, workers=workers,
                                     eval_samples=samples, eval_seed=seed))
        top = min(cand, key=lambda b: b.error.value)
        if top.error.value <= best:
            best, best_hw = top.error.value, top.error.half_width
        w = best_lower_bound(model, r, n, witness_levels)
        curve.entries.append(CurveEntry(n, bound, None if w is None else w.bound, best, best_hw,
                                        book.card))
    drop = int(DROP_FRACTION * len(grid))
    kept = curve.entries[drop:]
    ns = [e.n for e in kept]
    d_bound, res_b, _ = _dim_fit(ns, [e.upper for e in kept])
    d_eval, res_e, pairs = _dim_fit(ns, [e.evaluated for e in kept])
    zero = any(e.evaluated == 0 for e in curve.entries)
    if zero:
        d_eval, pairs = 0.0, [0.0]
    return DrEstimate(d_bound, d_eval, float(max(pairs)), float(min(pairs)), curve,
                      res_b, res_e, zero)

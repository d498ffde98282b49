"""Adaptive dyadic partitions driven by ``J(Q) = nu(Q) * 2^{-n r}``.

For a threshold ``t`` the partition ``P_t`` consists of the positive-mass
cubes with ``J(Q) < t <= J(parent)``.  The sets ``{Q : J(Q) >= t}`` form a
subtree that grows as ``t`` decreases, so one cached tree serves a whole
sweep of thresholds.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube, child_indices
from .errors import DomainError, InputError, PrecisionError, ResourceError
from .measures import MeasureModel

GAMMA_ITERATIONS = 40
DEFAULT_NODE_BUDGET = 1 << 23


def J_value(mass, level, r: float):
    """``nu(Q) * Lambda(Q)^{r/d} = nu(Q) * 2^{-level r}``."""
    return np.asarray(mass, dtype=float) * np.exp2(-r * np.asarray(level, dtype=float))


@dataclass
class Partition:
    """Positive-mass cubes sorted by ``(level, index)`` with their masses and J-values."""

    levels: np.ndarray
    indices: np.ndarray
    masses: np.ndarray
    J: np.ndarray
    r: float
    threshold: float | None = None

    @property
    def card(self) -> int:
        return len(self.levels)

    def __len__(self) -> int:
        return self.card

    @property
    def max_J(self) -> float:
        return float(self.J.max()) if len(self.J) else 0.0

    @property
    def cubes(self) -> list[DyadicCube]:
        return [DyadicCube(int(n), tuple(k)) for n, k in zip(self.levels, self.indices)]

    def midpoints(self) -> np.ndarray:
        side = np.exp2(-self.levels.astype(float))[:, None]
        return (self.indices + 0.5) * side

    def total_mass(self) -> float:
        return float(np.sum(self.masses))


@dataclass
class _Level:
    idx: np.ndarray
    mass: np.ndarray
    J: np.ndarray
    parent_J: np.ndarray
    expanded_to: float = math.inf  # nodes with J >= expanded_to already have children


class PartitionTree:
    """Lazily expanded tree of positive-mass cubes for one ``(model, r)`` pair.

    Masses come from the model's pure oracle, so the cached tree is the same
    whatever order thresholds are requested in.
    """

    def __init__(self, model: MeasureModel, r: float, node_budget: int = DEFAULT_NODE_BUDGET):
        if r <= 0:
            raise DomainError(f"order r must be positive, got {r}")
        self.model = model
        self.r = float(r)
        self.node_budget = node_budget
        d = model.dimension
        root = np.zeros((1, d), dtype=np.int64)
        mass = model.masses(0, root)
        self._levels = [_Level(root, mass, J_value(mass, 0, r), np.array([math.inf]))]
        self._nodes = 1
        self._lock = threading.Lock()

    @property
    def depth(self) -> int:
        return len(self._levels) - 1

    def _expand(self, t: float, max_card: int | None) -> bool:
        """Generate children of every node with ``J >= t``; False if ``max_card`` is exceeded."""
        emitted = 0
        n = 0
        while n < len(self._levels):
            lev = self._levels[n]
            grow = lev.J >= t
            emitted += int(np.count_nonzero((lev.J < t) & (lev.parent_J >= t)))
            # every growing node has at least one emitted descendant
            if max_card is not None and emitted + int(np.count_nonzero(grow)) > max_card:
                return False
            if not np.any(grow):
                break
            new = grow & (lev.J < lev.expanded_to)
            if np.any(new):
                if n + 1 > self.model.max_level:
                    raise PrecisionError(
                        f"threshold {t:.3g} needs level {n + 1} beyond the oracle's "
                        f"depth {self.model.max_level}",
                        achievable_tolerance=self.model._achievable_tolerance())
                parents = lev.idx[new]
                kids = child_indices(parents)
                if self._nodes + len(kids) > self.node_budget:
                    raise ResourceError(f"partition tree would exceed {self.node_budget} nodes")
                kmass = self.model.masses(n + 1, kids)
                pJ = np.repeat(lev.J[new], 1 << self.model.dimension)
                keep = kmass > 0
                kids, kmass, pJ = kids[keep], kmass[keep], pJ[keep]
                kJ = J_value(kmass, n + 1, self.r)
                if n + 1 == len(self._levels):
                    self._levels.append(_Level(kids, kmass, kJ, pJ))
                else:
                    nxt = self._levels[n + 1]
                    nxt.idx = np.concatenate([nxt.idx, kids])
                    nxt.mass = np.concatenate([nxt.mass, kmass])
                    nxt.J = np.concatenate([nxt.J, kJ])
                    nxt.parent_J = np.concatenate([nxt.parent_J, pJ])
                self._nodes += len(kids)
            lev.expanded_to = min(lev.expanded_to, t)
            n += 1
        return True

    def count(self, t: float, max_card: int | None = None) -> int | None:
        """``card P_t``, or ``None`` when it exceeds ``max_card``."""
        with self._lock:
            if not self._expand(t, max_card):
                return None
            total = 0
            for lev in self._levels:
                total += int(np.count_nonzero((lev.J < t) & (lev.parent_J >= t)))
            return total

    def partition(self, t: float) -> Partition:
        with self._lock:
            self._expand(t, None)
            parts = []
            for n, lev in enumerate(self._levels):
                sel = (lev.J < t) & (lev.parent_J >= t)
                if np.any(sel):
                    idx = lev.idx[sel]
                    order = np.lexsort(idx.T[::-1])
                    parts.append((np.full(len(order), n), idx[order], lev.mass[sel][order],
                                  lev.J[sel][order]))
        d = self.model.dimension
        if not parts:
            return Partition(np.zeros(0, dtype=np.int64), np.zeros((0, d), dtype=np.int64),
                             np.zeros(0), np.zeros(0), self.r, t)
        cols = list(zip(*parts))
        return Partition(np.concatenate(cols[0]).astype(np.int64), np.concatenate(cols[1]),
                         np.concatenate(cols[2]), np.concatenate(cols[3]), self.r, t)


def _tree(model: MeasureModel, r: float) -> PartitionTree:
    """The tree cached on ``model`` for order ``r``."""
    trees = model.__dict__.setdefault("_partition_trees", {})
    key = float(r)
    if key not in trees:
        trees[key] = PartitionTree(model, r)
    return trees[key]


def build_Pt(model: MeasureModel, r: float, t: float,
             tree: PartitionTree | None = None) -> Partition:
    """The partition ``P_t`` for ``0 < t < 1``.

    Examples
    --------
    >>> from fracquant.measures import UniformDensity
    >>> build_Pt(UniformDensity(1), 1.0, 0.5).card
    2
    """
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    if not 0 < t < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {t}")
    return (tree or _tree(model, r)).partition(t)


def partition_complexity(model: MeasureModel, r: float, x: float) -> int:
    """``card P_{1/x}``, an upper bound with the right exponent for the minimal count."""
    if not x > 1:
        raise DomainError(f"x must exceed 1, got {x}")
    return _tree(model, r).count(1.0 / x)


@dataclass
class PartitionExponent:
    upper: float
    lower: float
    slope: float
    table: list[tuple[float, int]] = field(default_factory=list)


def default_t_grid(model: MeasureModel, r: float, points: int = 12,
                   max_card: int = 1 << 15) -> np.ndarray:
    """Geometric thresholds from ``2^{-r}`` down to where ``card P_t`` nears ``max_card``."""
    tree = _tree(model, r)
    hi = 2.0 ** -r
    lo = hi
    floor = 2.0 ** (-r * (model.max_level - 1))
    while lo / 16.0 >= floor:
        trial = lo / 16.0
        if tree.count(trial, max_card) is None:
            break
        lo = trial
    if lo == hi:
        lo = hi / 16.0
    return np.geomspace(hi, lo, points)


def partition_count_exponent(model: MeasureModel, r: float, t_grid=None) -> PartitionExponent:
    """Slope of ``log card P_t`` against ``-log t`` over a geometric grid.

    ``upper`` and ``lower`` are the max and min of the slopes between each
    point of the first half of the grid and the last point.
    """
    grid = default_t_grid(model, r) if t_grid is None else np.asarray(t_grid, dtype=float)
    if len(grid) < 4:
        raise InputError(f"t grid needs at least 4 points, got {len(grid)}")
    if np.any((grid <= 0) | (grid >= 1)):
        raise DomainError("thresholds must lie in (0, 1)")
    grid = np.sort(grid)[::-1]
    tree = _tree(model, r)
    cards = np.array([tree.count(t) for t in grid], dtype=float)
    x = -np.log(grid)
    y = np.log(cards)
    xc = x - x.mean()
    slope = float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))
    half = len(grid) // 2
    tail = [(y[-1] - y[i]) / (x[-1] - x[i]) for i in range(half)]
    table = [(float(t), int(c)) for t, c in zip(grid, cards)]
    return PartitionExponent(float(max(tail)), float(min(tail)), slope, table)


@dataclass
class GammaResult:
    n: int
    gamma: float
    threshold: float
    partition: Partition


def gamma_search(model: MeasureModel, r: float, n: int,
                 iterations: int = GAMMA_ITERATIONS) -> GammaResult:
    """Smallest lattice threshold with ``card P_t <= n`` and its partition.

    The lattice is the dyadic subdivision of ``[log t_min, log 2]`` after
    ``iterations`` halvings, so results are monotone in ``n``.
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    tree = _tree(model, r)
    lo = -r * (model.max_level - 1) * math.log(2.0)
    hi = math.log(2.0)  # t > 1 gives the root partition
    if tree.count(math.exp(lo), n) is not None:
        hi = lo
    else:
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            if tree.count(math.exp(mid), n) is None:
                lo = mid
            else:
                hi = mid
    t = math.exp(hi)
    if t >= 1:
        d = model.dimension
        part = Partition(np.zeros(1, dtype=np.int64), np.zeros((1, d), dtype=np.int64),
                         np.array([1.0]), np.array([1.0]), float(r), t)
    else:
        part = tree.partition(t)
    return GammaResult(n, part.max_J, t, part)


def gamma_n(model: MeasureModel, r: float, n: int) -> float:
    """Upper estimate of ``inf max_Q J(Q)`` over partitions with at most ``n`` cubes."""
    return gamma_search(model, r, n).gamma

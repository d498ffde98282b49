"""Measure models on the unit cube and their dyadic cube-mass oracles.

Every downstream computation talks to a model only through
:meth:`MeasureModel.masses` (batch cube masses at one level),
:meth:`MeasureModel.level_masses`, :meth:`MeasureModel.level_distribution`
and :meth:`MeasureModel.sample`.

Self-similar systems whose maps are dyadic-aligned (ratio ``2^-k`` and
translation on the level-``k`` grid) get exact masses by unrolling the
self-similarity relation on cube indices.  All other similitude systems fall
back to Monte Carlo tables built from a seeded sample of the measure.
"""

from __future__ import annotations

import math
from functools import cached_property
from itertools import combinations

import numpy as np

from .dyadic import (MAX_LEVEL, DyadicCube, MassTable, child_indices, merge_rows,
                     point_index)
from .errors import ConfigError, InputError, PrecisionError, ResourceError

PROB_TOL = 1e-12
DEFAULT_MC_SAMPLES = 1_000_000
DEFAULT_TABLE_BUDGET = 1 << 22

KINDS = ("self_similar", "inhomogeneous_self_similar", "atomic", "uniform_density",
         "empirical_sample", "mixture")


class MeasureModel:
    """Base class: a Borel probability measure on ``(0,1]^d`` with a cube-mass oracle."""

    kind = "abstract"

    def __init__(self, dimension: int, seed: int = 0, table_budget: int = DEFAULT_TABLE_BUDGET):
        if int(dimension) < 1:
            raise InputError(f"dimension must be >= 1, got {dimension}")
        self.dimension = int(dimension)
        self.seed = int(seed)
        self.table_budget = int(table_budget)
        self._tables: dict[int, MassTable] = {}

    # -- properties overridden by subclasses ---------------------------------
    exact = True            # masses are exact up to float rounding
    level_exact = False     # beta_n(q) does not depend on n
    max_level = MAX_LEVEL

    @property
    def mass_tolerance(self) -> float:
        return 0.0

    # -- oracle ---------------------------------------------------------------
    def masses(self, level: int, indices: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check_level(self, level: int):
        if level < 0:
            raise InputError(f"negative level {level}")
        if level > self.max_level:
            raise PrecisionError(
                f"level {level} exceeds the {self.kind} oracle depth {self.max_level}; "
                f"achievable tolerance {self._achievable_tolerance():.3g}",
                achievable_tolerance=self._achievable_tolerance())

    def _achievable_tolerance(self) -> float:
        return max(self.mass_tolerance, 2.0 ** -self.max_level)

    def cube_mass(self, cube: DyadicCube) -> float:
        if cube.dimension != self.dimension:
            raise InputError(f"cube dimension {cube.dimension} does not match "
                             f"model dimension {self.dimension}")
        self._check_level(cube.level)
        return float(self.masses(cube.level, np.array([cube.index], dtype=np.int64))[0])

    def level_masses(self, level: int) -> MassTable:
        """All positive-mass cubes of ``level``, built by descending from the root."""
        self._check_level(level)
        if level in self._tables:
            return self._tables[level]
        start = max((n for n in self._tables if n < level), default=None)
        if start is None:
            root = np.zeros((1, self.dimension), dtype=np.int64)
            table = MassTable(0, root, self.masses(0, root))
            self._tables[0] = table
            start = 0
        table = self._tables[start]
        for n in range(start + 1, level + 1):
            kids = child_indices(table.indices)
            if len(kids) > self.table_budget:
                raise ResourceError(f"level-{n} table needs {len(kids)} candidate cubes, "
                                    f"budget is {self.table_budget}")
            table = MassTable(n, kids, self.masses(n, kids))
            self._tables[n] = table
        return table

    def level_distribution(self, level: int) -> tuple[np.ndarray, np.ndarray]:
        """Positive cube masses at ``level`` with multiplicities ``(masses, counts)``."""
        table = self.level_masses(level)
        return table.masses, np.ones(len(table))

    def sample(self, count: int, seed: int | None = None) -> np.ndarray:
        if int(count) < 1:
            raise InputError(f"sample count must be >= 1, got {count}")
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return self._sample(int(count), rng)

    def _sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.to_dict()!r})"


# ---------------------------------------------------------------------------
# point-mass tables (atomic, empirical, Monte Carlo)
# ---------------------------------------------------------------------------

class _PointTables:
    """Level tables of a finite weighted point set; ``sample_count`` marks Monte Carlo data."""

    def __init__(self, points: np.ndarray, weights: np.ndarray, sample_count: int | None = None):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        self.weights = np.asarray(weights, dtype=float)
        self.sample_count = sample_count
        self._cache: dict[int, MassTable] = {}

    def table(self, level: int) -> MassTable:
        if level not in self._cache:
            if self.sample_count:
                # integer hit counts keep the level total exact up to one rounding per cube
                rows, hits = merge_rows(point_index(self.points, level),
                                        np.ones(len(self.points)), level)
                sums = hits / self.sample_count
            else:
                rows, sums = merge_rows(point_index(self.points, level), self.weights, level)
            if self.sample_count:
                tol = 3.0 * np.sqrt(np.clip(sums * (1.0 - sums), 0.0, None) / self.sample_count)
            else:
                tol = 0.0
            self._cache[level] = MassTable(level, rows, sums, tol)
        return self._cache[level]


class AtomicMeasure(MeasureModel):
    """Finitely many weighted atoms in ``[0,1]^d``."""

    kind = "atomic"

    def __init__(self, atoms, weights=None, seed: int = 0, **kw):
        atoms = np.atleast_2d(np.asarray(atoms, dtype=float))
        super().__init__(atoms.shape[1], seed=seed, **kw)
        if weights is None:
            weights = np.full(len(atoms), 1.0 / len(atoms))
        weights = np.asarray(weights, dtype=float)
        errors = _check_probabilities(weights, "weights")
        if len(weights) != len(atoms):
            errors.append(f"{len(atoms)} atoms but {len(weights)} weights")
        if np.any(atoms < 0) or np.any(atoms > 1):
            errors.append("atoms must lie in [0,1]^d")
        if errors:
            raise ConfigError(errors)
        self.atoms = atoms
        self.weights = weights
        self._points = _PointTables(atoms, weights)

    def masses(self, level, indices):
        self._check_level(level)
        return self._points.table(level).lookup(indices)

    def level_masses(self, level):
        self._check_level(level)
        return self._points.table(level)

    def _sample(self, count, rng):
        pick = rng.choice(len(self.atoms), size=count, p=self.weights)
        return self.atoms[pick].copy()

    def to_dict(self):
        return {"kind": self.kind, "dimension": self.dimension,
                "atoms": self.atoms.tolist(), "weights": self.weights.tolist(),
                "seed": self.seed}


class EmpiricalSample(AtomicMeasure):
    """The empirical measure of a point list (equal weights, duplicates merged)."""

    kind = "empirical_sample"

    def __init__(self, points, seed: int = 0, **kw):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        super().__init__(points, np.full(len(points), 1.0 / len(points)), seed=seed, **kw)

    def to_dict(self):
        return {"kind": self.kind, "dimension": self.dimension,
                "points": self.atoms.tolist(), "seed": self.seed}


class UniformDensity(MeasureModel):
    """Normalised Lebesgue measure on ``(0,1]^d`` or on an axis-parallel box inside it."""

    kind = "uniform_density"

    def __init__(self, dimension: int, box=None, seed: int = 0, **kw):
        super().__init__(dimension, seed=seed, **kw)
        if box is None:
            self.low = np.zeros(self.dimension)
            self.high = np.ones(self.dimension)
            self.full = True
        else:
            low, high = (np.asarray(b, dtype=float).reshape(-1) for b in box)
            if low.shape != (self.dimension,) or high.shape != (self.dimension,):
                raise ConfigError([f"box corners must have {self.dimension} coordinates"])
            if np.any(low < 0) or np.any(high > 1) or np.any(high <= low):
                raise ConfigError(["box must satisfy 0 <= low < high <= 1"])
            self.low, self.high = low, high
            self.full = bool(np.all(low == 0) and np.all(high == 1))

    @property
    def level_exact(self):
        return self.full

    def _overlap(self, level, k, axis):
        h = 2.0 ** -level
        lo = np.maximum(k * h, self.low[axis])
        hi = np.minimum((k + 1) * h, self.high[axis])
        return np.clip(hi - lo, 0.0, None) / (self.high[axis] - self.low[axis])

    def masses(self, level, indices):
        self._check_level(level)
        indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
        if self.full:
            return np.full(len(indices), 2.0 ** (-level * self.dimension))
        out = np.ones(len(indices))
        for axis in range(self.dimension):
            out *= self._overlap(level, indices[:, axis].astype(float), axis)
        return out

    def _axis_cells(self, level, axis):
        h = 2.0 ** -level
        first = int(math.floor(self.low[axis] / h))
        last = min(int(math.ceil(self.high[axis] / h)) - 1, (1 << level) - 1)
        k = np.arange(first, last + 1, dtype=np.int64)
        w = self._overlap(level, k.astype(float), axis)
        return k[w > 0], w[w > 0]

    def level_masses(self, level):
        self._check_level(level)
        if level in self._tables:
            return self._tables[level]
        axes = [self._axis_cells(level, a) for a in range(self.dimension)]
        size = math.prod(len(k) for k, _ in axes)
        if size > self.table_budget:
            raise ResourceError(f"level-{level} uniform table has {size} cubes, "
                                f"budget is {self.table_budget}")
        grids = np.meshgrid(*[k for k, _ in axes], indexing="ij")
        weights = np.meshgrid(*[w for _, w in axes], indexing="ij")
        idx = np.stack([g.ravel() for g in grids], axis=1)
        mass = np.prod(np.stack([w.ravel() for w in weights], axis=1), axis=1)
        table = MassTable(level, idx, mass)
        self._tables[level] = table
        return table

    def level_distribution(self, level):
        self._check_level(level)
        masses = np.ones(1)
        counts = np.ones(1)
        for axis in range(self.dimension):
            _, w = self._axis_cells(level, axis)
            vals, cnt = np.unique(w, return_counts=True)
            masses = np.outer(masses, vals).ravel()
            counts = np.outer(counts, cnt).ravel()
        return masses, counts

    def _sample(self, count, rng):
        u = rng.random((count, self.dimension))
        return self.low + (self.high - self.low) * (1.0 - u)  # (low, high]

    def to_dict(self):
        out = {"kind": self.kind, "dimension": self.dimension, "seed": self.seed}
        if not self.full:
            out["box"] = [self.low.tolist(), self.high.tolist()]
        return out


# ---------------------------------------------------------------------------
# similitude systems
# ---------------------------------------------------------------------------

def _dyadic_exponent(ratio: float) -> int | None:
    k = round(-math.log2(ratio))
    return k if k >= 1 and math.ldexp(1.0, -k) == ratio else None


class _SimilitudeSystem:
    """Maps ``x -> ratio_i * x + translation_i`` with their dyadic alignment data."""

    def __init__(self, ratios, translations, dimension):
        self.ratios = np.asarray(ratios, dtype=float).reshape(-1)
        tr = np.asarray(translations, dtype=float)
        self.translations = tr.reshape(len(self.ratios), dimension)
        self.k = []
        self.m = []
        for r, b in zip(self.ratios, self.translations):
            k = _dyadic_exponent(float(r))
            if k is None:
                self.k, self.m = None, None
                break
            scaled = np.ldexp(b, k)
            if np.any(scaled != np.round(scaled)):
                self.k, self.m = None, None
                break
            self.k.append(k)
            self.m.append(scaled.astype(np.int64))

    @property
    def aligned(self) -> bool:
        return self.k is not None

    def validate(self) -> list[str]:
        errors = []
        if len(self.ratios) < 1:
            errors.append("at least one map is required")
        if np.any(self.ratios <= 0) or np.any(self.ratios >= 1):
            errors.append("all ratios must lie in (0,1)")
        image_hi = self.ratios[:, None] + self.translations
        if np.any(self.translations < 0) or np.any(image_hi > 1 + 1e-15):
            errors.append("every map must send [0,1]^d into itself")
        return errors

    @property
    def disjoint_images(self) -> bool:
        """Aligned images are dyadic cubes; they are disjoint iff none contains another."""
        if not self.aligned:
            return False
        for i, j in combinations(range(len(self.k)), 2):
            lo, hi = (i, j) if self.k[i] <= self.k[j] else (j, i)
            shift = self.k[hi] - self.k[lo]
            if np.all((self.m[hi] >> shift) == self.m[lo]):
                return False
        return True

    @property
    def separated_images(self) -> bool:
        """The images of the unit cube have pairwise disjoint interiors (open set condition)."""
        lo = self.translations
        hi = lo + self.ratios[:, None]
        for i, j in combinations(range(len(self.ratios)), 2):
            if np.all(np.minimum(hi[i], hi[j]) - np.maximum(lo[i], lo[j]) > 1e-12):
                return False
        return True

    def coding_sample(self, rng, count, probs, length):
        """Points ``f_w(y)`` for random words ``w`` of ``length`` letters and uniform ``y``."""
        d = self.translations.shape[1]
        offset = np.zeros((count, d))
        scale = np.ones(count)
        for _ in range(length):
            letters = rng.choice(len(self.ratios), size=count, p=probs)
            offset += scale[:, None] * self.translations[letters]
            scale *= self.ratios[letters]
        y = 1.0 - rng.random((count, d))
        # the true point lies strictly above ``offset``; keep it there after rounding so
        # points just above a dyadic face are not moved onto it (the lower cube)
        return np.maximum(offset + scale[:, None] * y, np.nextafter(offset, np.inf))


def _aligned_masses(level, indices, system: _SimilitudeSystem, probs,
                    condensation: MeasureModel | None = None, p0: float = 0.0):
    """Exact cube masses by unrolling ``nu(Q) = p0 mu(Q) + sum_i p_i nu(f_i^-1 Q)``.

    Each map image is a level-``k_i`` dyadic cube, so every preimage of a dyadic
    cube is again dyadic (one level ``k_i`` coarser) or the whole unit cube.
    """
    indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
    total = len(indices)
    out = np.zeros(total)
    work: dict[int, list] = {level: [(indices, np.ones(total), np.arange(total))]}
    for lev in range(level, 0, -1):
        parts = work.pop(lev, None)
        if not parts:
            continue
        idx = np.concatenate([p[0] for p in parts])
        coeff = np.concatenate([p[1] for p in parts])
        tgt = np.concatenate([p[2] for p in parts])
        if len(idx) > 2 * total + 16:
            idx, coeff, tgt = _merge_work(idx, coeff, tgt, lev)
        if condensation is not None and p0 > 0:
            out += np.bincount(tgt, coeff * p0 * condensation.masses(lev, idx), minlength=total)
        for k, m, p in zip(system.k, system.m, probs):
            if lev >= k:
                shift = lev - k
                inside = np.all((idx >> shift) == m, axis=1)
                if np.any(inside):
                    work.setdefault(lev - k, []).append(
                        (idx[inside] - (m << shift), coeff[inside] * p, tgt[inside]))
            else:
                contains = np.all(idx == (m >> (k - lev)), axis=1)
                if np.any(contains):
                    out += np.bincount(tgt[contains], coeff[contains] * p, minlength=total)
    for _, coeff, tgt in work.pop(0, []):
        out += np.bincount(tgt, coeff, minlength=total)
    return out


def _merge_work(idx, coeff, tgt, level):
    rows = np.concatenate([tgt[:, None], idx], axis=1)
    uniq, inverse = np.unique(rows, axis=0, return_inverse=True)
    sums = np.zeros(len(uniq))
    np.add.at(sums, inverse.ravel(), coeff)
    return uniq[:, 1:], sums, uniq[:, 0]


def _compositions(total: int, parts: int):
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    if parts == 1:
        return np.array([[total]], dtype=np.int64)
    rows = []
    for first in range(total + 1):
        rest = _compositions(total - first, parts - 1)
        rows.append(np.concatenate([np.full((len(rest), 1), first), rest], axis=1))
    return np.concatenate(rows)


class SelfSimilarMeasure(MeasureModel):
    """Self-similar measure ``nu = sum_i p_i nu o f_i^-1`` for similitudes ``f_i``.

    ``oracle`` is ``"auto"`` (exact when dyadic-aligned, Monte Carlo otherwise),
    ``"exact"`` or ``"monte_carlo"``.
    """

    kind = "self_similar"

    def __init__(self, ratios, translations, probabilities, dimension: int | None = None,
                 seed: int = 0, samples: int = DEFAULT_MC_SAMPLES, oracle: str = "auto",
                 prefix_length: int | None = None, **kw):
        tr = np.asarray(translations, dtype=float)
        if dimension is None:
            dimension = 1 if tr.ndim == 1 else tr.shape[1]
        super().__init__(dimension, seed=seed, **kw)
        self.probabilities = np.asarray(probabilities, dtype=float).reshape(-1)
        errors = _check_probabilities(self.probabilities, "probabilities")
        try:
            self.system = _SimilitudeSystem(ratios, translations, self.dimension)
        except ValueError as exc:
            raise ConfigError([f"maps: {exc}"]) from exc
        errors += self.system.validate()
        if len(self.probabilities) != len(self.system.ratios):
            errors.append(f"{len(self.system.ratios)} maps but "
                          f"{len(self.probabilities)} probabilities")
        if oracle not in ("auto", "exact", "monte_carlo"):
            errors.append(f"unknown oracle {oracle!r}")
        if oracle == "exact" and not self.system.aligned:
            errors.append("exact oracle requires dyadic-aligned maps")
        if errors:
            raise ConfigError(errors)
        self.samples = int(samples)
        self.oracle = oracle
        if prefix_length is None:
            prefix_length = math.ceil(52 * math.log(2) / -math.log(float(self.system.ratios.max())))
        self.prefix_length = int(prefix_length)

    @property
    def exact(self):
        return self.system.aligned and self.oracle != "monte_carlo"

    @property
    def multiplicative(self) -> bool:
        """Level masses are products ``p_w`` over words (equal dyadic ratios, disjoint images)."""
        return self.exact and len(set(self.system.k)) == 1 and self.system.disjoint_images

    @property
    def level_exact(self):
        return self.multiplicative and self.system.k[0] == 1

    @property
    def max_level(self):
        return MAX_LEVEL if self.exact else 40

    @property
    def mass_tolerance(self):
        return 0.0 if self.exact else 3.0 * math.sqrt(0.25 / self.samples)

    @cached_property
    def _mc(self) -> _PointTables:
        pts = self.sample(self.samples, self.seed)
        return _PointTables(pts, np.full(len(pts), 1.0 / len(pts)), sample_count=len(pts))

    def masses(self, level, indices):
        self._check_level(level)
        if self.exact:
            return _aligned_masses(level, indices, self.system, self.probabilities)
        return self._mc.table(level).lookup(indices)

    def level_masses(self, level):
        if self.exact:
            return super().level_masses(level)
        self._check_level(level)
        return self._mc.table(level)

    def level_distribution(self, level):
        self._check_level(level)
        if self.multiplicative:
            k = self.system.k[0]
            words, rest = divmod(level, k)
            # type classes of words are far fewer than cubes once words >= 2
            if words >= 2:
                return self._product_distribution(words, rest)
        return super().level_distribution(level)

    def _product_distribution(self, words, rest):
        n_maps = len(self.probabilities)
        if math.comb(words + n_maps - 1, n_maps - 1) > self.table_budget:
            raise ResourceError(f"{words}-letter type classes exceed the table budget")
        comp = _compositions(words, n_maps)
        log_mass = comp @ np.log(self.probabilities)
        log_mult = (math.lgamma(words + 1)
                    - np.sum([[math.lgamma(c + 1) for c in row] for row in comp], axis=1))
        base = super().level_masses(rest).masses
        masses = np.outer(np.exp(log_mass), base).ravel()
        counts = np.outer(np.exp(log_mult), np.ones(len(base))).ravel()
        return masses, counts

    def _sample(self, count, rng):
        return self.system.coding_sample(rng, count, self.probabilities, self.prefix_length)

    def to_dict(self):
        out = {"kind": self.kind, "dimension": self.dimension,
               "maps": [{"ratio": float(r), "translation": b.tolist()}
                        for r, b in zip(self.system.ratios, self.system.translations)],
               "probabilities": self.probabilities.tolist(), "seed": self.seed,
               "samples": self.samples}
        if self.oracle != "auto":
            out["oracle"] = self.oracle
        return out


class InhomogeneousSelfSimilarMeasure(MeasureModel):
    """Fixed point of ``nu = p0 mu + sum_i p_i nu o f_i^-1`` with condensation measure ``mu``."""

    kind = "inhomogeneous_self_similar"
    residual_weight = 1e-12

    def __init__(self, ratios, translations, probabilities, condensation_weight: float,
                 condensation: MeasureModel, dimension: int | None = None, seed: int = 0,
                 samples: int = DEFAULT_MC_SAMPLES, **kw):
        dimension = condensation.dimension if dimension is None else dimension
        super().__init__(dimension, seed=seed, **kw)
        self.probabilities = np.asarray(probabilities, dtype=float).reshape(-1)
        self.p0 = float(condensation_weight)
        self.condensation = condensation
        errors = []
        full = np.concatenate([[self.p0], self.probabilities])
        errors += _check_probabilities(full, "condensation_weight + probabilities")
        if self.p0 <= 0:
            errors.append("condensation_weight must be positive")
        if condensation.dimension != self.dimension:
            errors.append("condensation measure dimension mismatch")
        self.system = _SimilitudeSystem(ratios, translations, self.dimension)
        errors += self.system.validate()
        if len(self.probabilities) != len(self.system.ratios):
            errors.append(f"{len(self.system.ratios)} maps but "
                          f"{len(self.probabilities)} probabilities")
        if errors:
            raise ConfigError(errors)
        self.samples = int(samples)

    @property
    def exact(self):
        return self.system.aligned and self.condensation.exact

    @property
    def max_level(self):
        return min(self.condensation.max_level, MAX_LEVEL if self.exact else 40)

    @property
    def mass_tolerance(self):
        if self.exact:
            return self.condensation.mass_tolerance
        return 3.0 * math.sqrt(0.25 / self.samples)

    @cached_property
    def _mc(self) -> _PointTables:
        pts = self.sample(self.samples, self.seed)
        return _PointTables(pts, np.full(len(pts), 1.0 / len(pts)), sample_count=len(pts))

    def masses(self, level, indices):
        self._check_level(level)
        if self.exact:
            return _aligned_masses(level, indices, self.system, self.probabilities,
                                   self.condensation, self.p0)
        return self._mc.table(level).lookup(indices)

    def level_masses(self, level):
        if self.exact:
            return super().level_masses(level)
        self._check_level(level)
        return self._mc.table(level)

    def _sample(self, count, rng):
        d = self.dimension
        offset = np.zeros((count, d))
        scale = np.ones(count)
        active = np.ones(count, dtype=bool)
        letters_p = np.concatenate([[self.p0], self.probabilities])
        weight = 1.0
        # unroll the fixed-point relation until the unresolved weight is negligible
        while active.any() and weight >= self.residual_weight:
            idx = np.flatnonzero(active)
            letters = rng.choice(len(letters_p), size=len(idx), p=letters_p)
            stop = letters == 0
            active[idx[stop]] = False
            go = idx[~stop]
            maps = letters[~stop] - 1
            offset[go] += scale[go, None] * self.system.translations[maps]
            scale[go] *= self.system.ratios[maps]
            weight *= 1.0 - self.p0
        y = self.condensation._sample(count, rng)
        return offset + scale[:, None] * y

    def to_dict(self):
        return {"kind": self.kind, "dimension": self.dimension,
                "maps": [{"ratio": float(r), "translation": b.tolist()}
                         for r, b in zip(self.system.ratios, self.system.translations)],
                "probabilities": self.probabilities.tolist(),
                "condensation_weight": self.p0,
                "condensation": self.condensation.to_dict(),
                "seed": self.seed, "samples": self.samples}


class MixtureMeasure(MeasureModel):
    """Convex combination ``sum_j w_j nu_j`` of component models."""

    kind = "mixture"

    def __init__(self, weights, components, seed: int = 0, **kw):
        components = list(components)
        if not components:
            raise ConfigError(["mixture needs at least one component"])
        super().__init__(components[0].dimension, seed=seed, **kw)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        self.components = components
        errors = _check_probabilities(self.weights, "mixture weights")
        if len(self.weights) != len(components):
            errors.append(f"{len(components)} components but {len(self.weights)} weights")
        if any(c.dimension != self.dimension for c in components):
            errors.append("mixture components must share one dimension")
        if errors:
            raise ConfigError(errors)

    @property
    def exact(self):
        return all(c.exact for c in self.components)

    @property
    def max_level(self):
        return min(c.max_level for c in self.components)

    @property
    def mass_tolerance(self):
        return float(sum(w * c.mass_tolerance for w, c in zip(self.weights, self.components)))

    def masses(self, level, indices):
        self._check_level(level)
        out = np.zeros(len(np.atleast_2d(indices)))
        for w, c in zip(self.weights, self.components):
            out += w * c.masses(level, indices)
        return out

    def level_masses(self, level):
        self._check_level(level)
        if level not in self._tables:
            tables = [c.level_masses(level) for c in self.components]
            idx = np.concatenate([t.indices for t in tables])
            mass = np.concatenate([w * t.masses for w, t in zip(self.weights, tables)])
            rows, sums = merge_rows(idx, mass, level)
            self._tables[level] = MassTable(level, rows, sums, self.mass_tolerance)
        return self._tables[level]

    def _sample(self, count, rng):
        pick = rng.choice(len(self.components), size=count, p=self.weights)
        out = np.empty((count, self.dimension))
        for j, comp in enumerate(self.components):
            sel = pick == j
            if sel.any():
                out[sel] = comp._sample(int(sel.sum()), rng)
        return out

    def to_dict(self):
        return {"kind": self.kind, "dimension": self.dimension, "seed": self.seed,
                "components": [{"weight": float(w), "measure": c.to_dict()}
                               for w, c in zip(self.weights, self.components)]}


# ---------------------------------------------------------------------------
# construction from JSON-like specs
# ---------------------------------------------------------------------------

def _check_probabilities(p, name) -> list[str]:
    p = np.asarray(p, dtype=float)
    errors = []
    if p.size == 0:
        return [f"{name} must not be empty"]
    if np.any(~np.isfinite(p)):
        return [f"{name} must be finite numbers"]
    if np.any(p <= 0):
        errors.append(f"{name} must be strictly positive")
    total = float(np.sum(p))
    if abs(total - 1.0) > PROB_TOL:
        errors.append(f"{name} sum {total:.12g} ≠ 1")
    return errors


def measure_from_dict(spec: dict, path: str = "measure") -> MeasureModel:
    """Build a model from its JSON object; raises :class:`ConfigError` listing every problem."""
    if not isinstance(spec, dict):
        raise ConfigError([f"{path}: expected an object"])
    kind = spec.get("kind")
    if kind not in KINDS:
        raise ConfigError([f"{path}.kind: unknown measure kind {kind!r}"])
    common = {}
    errors = []
    for key in ("seed", "samples"):
        if key in spec:
            if not isinstance(spec[key], int) or isinstance(spec[key], bool) or spec[key] < 0:
                errors.append(f"{path}.{key}: expected a non-negative integer")
            else:
                common[key] = spec[key]
    dim = spec.get("dimension")
    if dim is not None and (not isinstance(dim, int) or isinstance(dim, bool) or dim < 1):
        errors.append(f"{path}.dimension: expected a positive integer")
        dim = None
    try:
        if kind == "uniform_density":
            common.pop("samples", None)
            if dim is None:
                errors.append(f"{path}.dimension: required")
            if errors:
                raise ConfigError([])
            return UniformDensity(dim, box=spec.get("box"), **common)
        if kind == "atomic":
            common.pop("samples", None)
            atoms = _number_array(spec.get("atoms"), f"{path}.atoms", errors, ndim=2)
            weights = spec.get("weights")
            if weights is not None:
                weights = _number_array(weights, f"{path}.weights", errors, ndim=1)
            if errors:
                raise ConfigError([])
            _check_dim(atoms, dim, path, errors)
            if errors:
                raise ConfigError([])
            return AtomicMeasure(atoms, weights, **common)
        if kind == "empirical_sample":
            common.pop("samples", None)
            points = _number_array(spec.get("points"), f"{path}.points", errors, ndim=2)
            if errors:
                raise ConfigError([])
            _check_dim(points, dim, path, errors)
            if errors:
                raise ConfigError([])
            return EmpiricalSample(points, **common)
        if kind == "mixture":
            comps = spec.get("components")
            if not isinstance(comps, list) or not comps:
                raise ConfigError([f"{path}.components: expected a non-empty list"])
            weights, models = [], []
            for j, c in enumerate(comps):
                cpath = f"{path}.components[{j}]"
                if not isinstance(c, dict) or not _is_number(c.get("weight")):
                    errors.append(f"{cpath}.weight: expected a number")
                    continue
                weights.append(float(c["weight"]))
                try:
                    models.append(measure_from_dict(c.get("measure"), f"{cpath}.measure"))
                except ConfigError as exc:
                    errors.extend(exc.errors)
            if errors:
                raise ConfigError([])
            common.pop("samples", None)
            return MixtureMeasure(weights, models, **common)
        # similitude systems
        maps = spec.get("maps")
        ratios, translations = [], []
        if not isinstance(maps, list) or not maps:
            errors.append(f"{path}.maps: expected a non-empty list of {{ratio, translation}}")
        else:
            for j, mp in enumerate(maps):
                mpath = f"{path}.maps[{j}]"
                if not isinstance(mp, dict) or not _is_number(mp.get("ratio")):
                    errors.append(f"{mpath}.ratio: expected a number")
                    continue
                tr = mp.get("translation", [0.0] * (dim or 1))
                tr = [tr] if _is_number(tr) else tr
                tr = _number_array(tr, f"{mpath}.translation", errors, ndim=1)
                if tr is None:
                    continue
                if dim is not None and len(tr) != dim:
                    errors.append(f"{mpath}.translation: expected {dim} coordinates")
                ratios.append(float(mp["ratio"]))
                translations.append(tr)
        probs = _number_array(spec.get("probabilities"), f"{path}.probabilities", errors, ndim=1)
        if probs is not None and kind == "self_similar":
            errors.extend(f"{path}: {e}" for e in _check_probabilities(probs, "probabilities"))
        if errors:
            raise ConfigError([])
        if dim is None:
            dim = len(translations[0])
        if kind == "self_similar":
            extra = {k: spec[k] for k in ("oracle", "prefix_length") if k in spec}
            return SelfSimilarMeasure(ratios, translations, probs, dimension=dim,
                                      **common, **extra)
        p0 = spec.get("condensation_weight")
        if not _is_number(p0):
            errors.append(f"{path}.condensation_weight: expected a number")
        cond = None
        try:
            cond = measure_from_dict(spec.get("condensation"), f"{path}.condensation")
        except ConfigError as exc:
            errors.extend(exc.errors)
        if errors:
            raise ConfigError([])
        return InhomogeneousSelfSimilarMeasure(ratios, translations, probs, float(p0), cond,
                                               dimension=dim, **common)
    except ConfigError as exc:
        raise ConfigError(errors + [e if e.startswith(path) else f"{path}: {e}"
                                    for e in exc.errors]) from None


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _number_array(value, path, errors, ndim):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        errors.append(f"{path}: malformed numbers")
        return None
    if value is None or arr.size == 0:
        errors.append(f"{path}: required")
        return None
    if ndim == 2 and arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != ndim or not np.all(np.isfinite(arr)):
        errors.append(f"{path}: malformed numbers")
        return None
    return arr


def _check_dim(points, dim, path, errors):
    if dim is not None and points.shape[1] != dim:
        errors.append(f"{path}: points have {points.shape[1]} coordinates, dimension is {dim}")


# ---------------------------------------------------------------------------
# standard models
# ---------------------------------------------------------------------------

def sierpinski_tetraeder(probabilities=(0.66, 0.2, 0.08, 0.06), **kw) -> SelfSimilarMeasure:
    """Four ratio-1/2 maps onto the corner octants at the origin and the unit axes of R^3."""
    translations = [[0, 0, 0], [0.5, 0, 0], [0, 0.5, 0], [0, 0, 0.5]]
    return SelfSimilarMeasure([0.5] * 4, translations, probabilities, dimension=3, **kw)


def cantor_measure(left: float = 0.0, width: float = 1.0, probabilities=(0.5, 0.5),
                   **kw) -> SelfSimilarMeasure:
    """Middle-third Cantor measure on ``[left, left + width]``."""
    b = 2.0 * left / 3.0
    return SelfSimilarMeasure([1 / 3, 1 / 3], [[b], [b + 2.0 * width / 3.0]],
                              probabilities, dimension=1, **kw)


def dirac(point, **kw) -> AtomicMeasure:
    point = np.atleast_1d(np.asarray(point, dtype=float))
    return AtomicMeasure(point[None, :], [1.0], **kw)

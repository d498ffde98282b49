"""Half-open dyadic cubes of the unit cube and level mass tables.

A cube at level ``n`` with integer index vector ``k`` is the product of the
intervals ``(k_i 2^-n, (k_i + 1) 2^-n]``.  Index arrays are ``int64`` with one
row per cube, so levels are capped at :data:`MAX_LEVEL`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import InputError, PrecisionError

MAX_LEVEL = 60


@dataclass(frozen=True, order=True)
class DyadicCube:
    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise InputError(f"negative level {self.level}")
        if self.level > MAX_LEVEL:
            raise PrecisionError(f"level {self.level} exceeds MAX_LEVEL={MAX_LEVEL}",
                                 achievable_tolerance=2.0 ** -MAX_LEVEL)
        object.__setattr__(self, "index", tuple(int(k) for k in self.index))
        if not self.index:
            raise InputError("cube index must have at least one coordinate")
        top = 1 << self.level
        for k in self.index:
            if not 0 <= k < top:
                raise InputError(f"index {self.index} outside level-{self.level} grid")

    @classmethod
    def root(cls, dimension: int) -> "DyadicCube":
        return cls(0, (0,) * dimension)

    @classmethod
    def containing(cls, point, level: int) -> "DyadicCube":
        """The level-``level`` cube containing ``point`` (clipped into the grid)."""
        idx = point_index(np.asarray(point, dtype=float)[None, :], level)[0]
        return cls(level, tuple(idx))

    @property
    def dimension(self) -> int:
        return len(self.index)

    @property
    def side(self) -> float:
        return 2.0 ** -self.level

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.level * self.dimension)

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.index, dtype=float) * self.side

    @property
    def upper(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 1.0) * self.side

    @property
    def center(self) -> np.ndarray:
        return (np.asarray(self.index, dtype=float) + 0.5) * self.side

    def child(self, slot: int) -> "DyadicCube":
        """Child number ``slot`` in ``range(2**d)``.

        Bit ``i`` of ``slot`` selects the upper half in axis ``i``.
        """
        d = self.dimension
        if not 0 <= slot < (1 << d):
            raise InputError(f"child slot {slot} outside range(2**{d})")
        return DyadicCube(self.level + 1,
                          tuple(2 * k + ((slot >> i) & 1) for i, k in enumerate(self.index)))

    def children(self) -> list["DyadicCube"]:
        return [self.child(j) for j in range(1 << self.dimension)]

    def parent(self) -> "DyadicCube":
        if self.level == 0:
            raise InputError("the root cube has no parent")
        return DyadicCube(self.level - 1, tuple(k >> 1 for k in self.index))

    def ancestor(self, level: int) -> "DyadicCube":
        if not 0 <= level <= self.level:
            raise InputError(f"no ancestor at level {level} for a level-{self.level} cube")
        shift = self.level - level
        return DyadicCube(level, tuple(k >> shift for k in self.index))

    def contains(self, other: "DyadicCube") -> bool:
        if other.dimension != self.dimension or other.level < self.level:
            return False
        return other.ancestor(self.level) == self

    def contains_point(self, point) -> bool:
        x = np.asarray(point, dtype=float).reshape(1, -1)
        if np.any(x <= 0) or np.any(x > 1):
            return False
        # integer comparison stays exact at every level
        return bool(np.array_equal(point_index(x, self.level)[0], self.index))


def point_index(points: np.ndarray, level: int) -> np.ndarray:
    """Level-``level`` index rows of the cubes containing ``points``.

    Points on the lower faces of the unit cube (coordinate 0) are assigned to
    the first cube; they carry no mass for the non-atomic models handled here.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    # ldexp is exact; subtract in integers since floats above 2^53 are spaced > 1
    scaled = np.clip(np.ceil(np.ldexp(pts, level)), 1.0, float(1 << level))
    return scaled.astype(np.int64) - 1


def can_encode(level: int, dimension: int) -> bool:
    return level * dimension <= 62


def encode(indices: np.ndarray, level: int) -> np.ndarray:
    """Pack index rows into one ``int64`` key each; key order is lexicographic order."""
    indices = np.asarray(indices, dtype=np.int64)
    keys = np.zeros(len(indices), dtype=np.int64)
    for i in range(indices.shape[1]):
        keys = (keys << level) | indices[:, i]
    return keys


def decode(keys: np.ndarray, level: int, dimension: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    mask = (1 << level) - 1
    out = np.empty((len(keys), dimension), dtype=np.int64)
    for i in range(dimension - 1, -1, -1):
        out[:, i] = keys & mask
        keys = keys >> level
    return out


def sort_rows(indices: np.ndarray) -> np.ndarray:
    """Permutation sorting index rows lexicographically (first coordinate major)."""
    if len(indices) == 0:
        return np.zeros(0, dtype=np.int64)
    return np.lexsort(indices.T[::-1])


def merge_rows(indices: np.ndarray, values: np.ndarray, level: int):
    """Sum ``values`` over duplicate index rows; returns rows sorted lexicographically."""
    indices = np.asarray(indices, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if len(indices) == 0:
        return indices.reshape(0, indices.shape[1] if indices.ndim == 2 else 1), values
    d = indices.shape[1]
    if can_encode(level, d):
        keys, inverse = np.unique(encode(indices, level), return_inverse=True)
        sums = np.zeros(len(keys))
        np.add.at(sums, inverse, values)
        return decode(keys, level, d), sums
    rows, inverse = np.unique(indices, axis=0, return_inverse=True)
    sums = np.zeros(len(rows))
    np.add.at(sums, inverse.ravel(), values)
    return rows, sums


@dataclass
class MassTable:
    """Positive-mass cubes of one level, sorted by index.

    ``tolerance`` is either a scalar or a per-cube array of absolute mass
    uncertainties (zero for exact oracles).
    """

    level: int
    indices: np.ndarray
    masses: np.ndarray
    tolerance: np.ndarray | float = 0.0

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.masses = np.asarray(self.masses, dtype=float)
        keep = self.masses > 0
        if not np.all(keep):
            self.indices = self.indices[keep]
            self.masses = self.masses[keep]
            if np.ndim(self.tolerance):
                self.tolerance = np.asarray(self.tolerance)[keep]
        order = sort_rows(self.indices)
        if len(order) and np.any(order != np.arange(len(order))):
            self.indices = self.indices[order]
            self.masses = self.masses[order]
            if np.ndim(self.tolerance):
                self.tolerance = np.asarray(self.tolerance)[order]
        self._keys = None
        self._dict = None

    @property
    def dimension(self) -> int:
        return self.indices.shape[1]

    def __len__(self) -> int:
        return len(self.masses)

    def total(self) -> float:
        # fixed (sorted) summation order keeps totals bit-reproducible
        return float(np.sum(self.masses))

    def cubes(self) -> Iterator[DyadicCube]:
        for row in self.indices:
            yield DyadicCube(self.level, tuple(row))

    def as_dict(self) -> dict[tuple[int, ...], float]:
        if self._dict is None:
            self._dict = {tuple(int(k) for k in row): float(m)
                          for row, m in zip(self.indices, self.masses)}
        return self._dict

    def lookup(self, indices: np.ndarray) -> np.ndarray:
        """Masses of arbitrary level cubes; cubes absent from the table have mass 0."""
        indices = np.atleast_2d(np.asarray(indices, dtype=np.int64))
        if len(indices) == 0 or len(self.masses) == 0:
            return np.zeros(len(indices))
        if can_encode(self.level, self.dimension):
            if self._keys is None:
                self._keys = encode(self.indices, self.level)
            q = encode(indices, self.level)
            pos = np.searchsorted(self._keys, q)
            pos = np.minimum(pos, len(self._keys) - 1)
            hit = self._keys[pos] == q
            return np.where(hit, self.masses[pos], 0.0)
        table = self.as_dict()
        return np.array([table.get(tuple(int(k) for k in row), 0.0) for row in indices])

    def max_tolerance(self) -> float:
        return float(np.max(self.tolerance)) if np.ndim(self.tolerance) else float(self.tolerance)


def child_indices(indices: np.ndarray) -> np.ndarray:
    """All ``2**d`` children of each row, grouped per parent (parent-major)."""
    indices = np.asarray(indices, dtype=np.int64)
    m, d = indices.shape
    offsets = np.array([[(j >> i) & 1 for i in range(d)] for j in range(1 << d)], dtype=np.int64)
    return (2 * indices[:, None, :] + offsets[None, :, :]).reshape(m * (1 << d), d)

"""L^q-spectrum estimation, the critical value q_r and derived dimensions.

For a level ``n`` the finite-level spectrum is

    beta_n(q) = log(sum_C nu(C)^q) / log(2^n)

over the positive-mass cubes of the level-``n`` grid (so ``0^0 = 0``).  The
spectrum itself is a limsup in ``n``; :class:`SpectrumFunction` provides the
finite-level surrogates (last level, regression over levels, or the max over
the top levels).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, InputError, InvalidModelError
from .measures import MeasureModel, MixtureMeasure

METHODS = ("auto", "last_level", "regression", "limsup", "components")
DEFAULT_Q_GRID = np.round(np.arange(0.0, 1.5 + 1e-9, 0.01), 10)
TOP_LEVELS = 3
LOG2 = math.log(2.0)


def default_n_min(n_max: int) -> int:
    """First regression level; the coarsest levels carry the largest transient bias."""
    return max(1, n_max // 3)


def default_method(model: MeasureModel) -> str:
    """Level-exact models use the last level, mixtures their components, the rest regression."""
    if isinstance(model, MixtureMeasure):
        return "components"
    return "last_level" if model.level_exact else "regression"


class SpectrumFunction:
    """Callable ``q -> beta_hat(q)`` over levels ``n_min..n_max`` of one model.

    Level distributions are loaded once and cached, so the function can be
    evaluated at arbitrary ``q`` (the root finder never interpolates a grid).

    For a finite mixture with positive weights ``sum (w_1 a + w_2 b)^q`` lies
    between constant multiples of ``max(sum a^q, sum b^q)``, so the spectrum
    of the mixture is the pointwise max of the component spectra; the
    ``components`` method uses that identity and avoids the slowly decaying
    cross term of a direct fit.
    """

    def __init__(self, model: MeasureModel, n_min: int | None = None, n_max: int = 12,
                 method: str = "auto"):
        if n_min is None:
            n_min = default_n_min(n_max)
        if method not in METHODS:
            raise InputError(f"unknown spectrum method {method!r}")
        if not 1 <= n_min <= n_max:
            raise InputError(f"need 1 <= n_min <= n_max, got {n_min}, {n_max}")
        if method == "regression" and n_min == n_max:
            raise InputError("regression needs at least two levels")
        if method == "components" and not isinstance(model, MixtureMeasure):
            raise InputError("the components method needs a mixture model")
        self.model = model
        self.n_min = int(n_min)
        self.n_max = int(n_max)
        self.method = default_method(model) if method == "auto" else method
        self._levels: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._parts = []
        if self.method == "components":
            self._parts = [SpectrumFunction(c, n_min, n_max, "auto") for c in model.components]

    @property
    def levels(self) -> list[int]:
        if self.method == "last_level":
            return [self.n_max]
        if self.method == "limsup":
            return list(range(max(self.n_min, self.n_max - TOP_LEVELS + 1), self.n_max + 1))
        return list(range(self.n_min, self.n_max + 1))

    def _dist(self, n: int):
        if n not in self._levels:
            masses, counts = self.model.level_distribution(n)
            keep = masses > 0
            if not np.any(keep):
                raise InvalidModelError(f"level-{n} mass table is empty")
            self._levels[n] = (np.log(masses[keep]), np.log(counts[keep]))
        return self._levels[n]

    def log_sum(self, q: float, n: int) -> float:
        """``log sum_C nu(C)^q`` at level ``n``."""
        if not math.isfinite(q) or q < 0:
            raise DomainError(f"spectrum is evaluated for finite q >= 0, got {q}")
        log_m, log_c = self._dist(n)
        return float(logsumexp(log_c + q * log_m))

    def beta_n(self, q: float, n: int) -> float:
        return self.log_sum(q, n) / (n * LOG2)

    def per_level(self, q: float) -> dict[int, float]:
        return {n: self.beta_n(q, n) for n in range(self.n_min, self.n_max + 1)}

    def __call__(self, q: float) -> float:
        q = float(q)
        if not math.isfinite(q) or q < 0:
            raise DomainError(f"spectrum is evaluated for finite q >= 0, got {q}")
        if self.method == "last_level":
            return self.beta_n(q, self.n_max)
        if self.method == "limsup":
            return max(self.beta_n(q, n) for n in self.levels)
        if self.method == "components":
            return max(part(q) for part in self._parts)
        ns = np.array(self.levels, dtype=float)
        ys = np.array([self.log_sum(q, int(n)) for n in ns]) / LOG2
        return float(_slope(ns, ys))


def _slope(x, y) -> float:
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def beta_n(model: MeasureModel, q: float, n: int) -> float:
    """Finite-level spectrum ``beta_{nu,n}(q)``."""
    if n < 1:
        raise InputError(f"level must be >= 1, got {n}")
    return SpectrumFunction(model, n, n, "last_level").beta_n(q, n)


@dataclass
class BetaEstimate:
    value: float
    spread: float
    per_level: dict[int, float]
    method: str
    flagged: bool = False


def beta_estimate(model: MeasureModel, q: float, n_min: int, n_max: int,
                  method: str = "auto", spread_bound: float | None = None) -> BetaEstimate:
    """Estimate ``beta_nu(q)`` from levels ``n_min..n_max``.

    ``spread`` is ``max - min`` of ``beta_n(q)`` over the levels; it is
    reported as an uncertainty, and exceeding ``spread_bound`` only sets
    ``flagged``.
    """
    if not n_min < n_max:
        raise InputError(f"need n_min < n_max, got {n_min}, {n_max}")
    fn = SpectrumFunction(model, n_min, n_max, method)
    per = fn.per_level(q)
    spread = max(per.values()) - min(per.values())
    flagged = spread_bound is not None and spread > spread_bound
    return BetaEstimate(fn(q), spread, per, fn.method, flagged)


@dataclass
class SpectrumTable:
    q_grid: np.ndarray
    levels: list[int]
    values: dict[int, np.ndarray]
    extrapolated: np.ndarray
    method: str
    convexity_adjusted: bool = False
    raw_extrapolated: np.ndarray | None = None

    def minkowski(self) -> float:
        """The ``q = 0`` entry (box-counting dimension of the support)."""
        hit = np.flatnonzero(self.q_grid == 0.0)
        if not len(hit):
            raise InputError("q = 0 is not on the grid")
        return float(self.extrapolated[hit[0]])


def spectrum_table(model: MeasureModel, q_grid=None, n_min: int | None = None, n_max: int = 12,
                   method: str = "auto", workers: int = 1) -> SpectrumTable:
    """Tabulate ``beta_n(q)`` for every level and the extrapolated ``beta_hat(q)``.

    The extrapolated column is replaced by its lower convex envelope when the
    raw estimate violates convexity by more than 1e-9 (possible for the
    regression estimator on noisy masses); ``convexity_adjusted`` records it.
    """
    grid = DEFAULT_Q_GRID if q_grid is None else np.asarray(q_grid, dtype=float)
    grid = np.unique(np.concatenate([grid, [0.0, 1.0]]))
    if np.any(grid < 0):
        raise InputError("q grid must be non-negative")
    fn = SpectrumFunction(model, n_min, n_max, method)
    levels = list(range(fn.n_min, n_max + 1))
    for n in levels:
        fn._dist(n)

    def column(q):
        return fn(q), [fn.beta_n(q, n) for n in levels]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            cols = list(pool.map(column, grid))
    else:
        cols = [column(q) for q in grid]
    raw = np.array([c[0] for c in cols])
    values = {n: np.array([c[1][i] for c in cols]) for i, n in enumerate(levels)}
    hull = lower_convex_envelope(grid, raw)
    adjusted = bool(np.max(raw - hull) > 1e-9)
    return SpectrumTable(grid, levels, values, hull if adjusted else raw, fn.method,
                         adjusted, raw)


def lower_convex_envelope(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Greatest convex minorant of the points ``(x_i, y_i)`` evaluated at ``x``."""
    hull: list[int] = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (y[b] - y[a]) * (x[i] - x[a]) >= (y[i] - y[a]) * (x[b] - x[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(x, x[hull], y[hull])


def convexity_defect(x: np.ndarray, y: np.ndarray) -> float:
    """Largest violation of convexity over adjacent triples (0 when convex)."""
    if len(x) < 3:
        return 0.0
    left = (y[1:-1] - y[:-2]) / (x[1:-1] - x[:-2])
    right = (y[2:] - y[1:-1]) / (x[2:] - x[1:-1])
    return float(max(0.0, np.max(left - right)))


@dataclass
class CriticalValue:
    r: float
    q_r: float
    beta_at_qr: float
    bracket_width: float
    iterations: int = 0


def solve_qr(beta: Callable[[float], float], r: float, tol: float = 1e-10,
             max_iter: int = 200) -> CriticalValue:
    """Critical value ``q_r = inf{q > 0 : beta(q) < r q}`` by bisection on ``[0, 1]``.

    Examples
    --------
    >>> round(solve_qr(lambda q: 1.0 - q, 1.0).q_r, 8)
    0.5
    """
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    if tol <= 0:
        raise InputError(f"tolerance must be positive, got {tol}")

    def g(q):
        try:
            val = float(beta(q))
        except (ArithmeticError, ValueError) as exc:
            raise InputError(f"beta is not evaluable at q={q}: {exc}") from exc
        if not math.isfinite(val):
            raise InputError(f"beta is not finite at q={q}")
        return val - r * q

    if g(tol) < 0:
        return CriticalValue(r, 0.0, float(beta(0.0)), tol, 0)
    lo, hi = tol, 1.0
    if g(hi) >= 0:
        raise InputError("beta(1) - r >= 0; beta does not behave like an L^q-spectrum")
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = 0.5 * (lo + hi)
        if g(mid) < 0:
            hi = mid
        else:
            lo = mid
        it += 1
    q = 0.5 * (lo + hi)
    return CriticalValue(r, q, float(beta(q)), hi - lo, it)


def qdim_from_qr(r: float, q_r: float) -> float:
    """Quantization dimension ``r q_r / (1 - q_r)`` from the critical value."""
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    if not 0 <= q_r < 1:
        raise DomainError(f"q_r must lie in [0, 1), got {q_r}")
    return r * q_r / (1.0 - q_r)


def quantization_dimension(model: MeasureModel, r: float, n_min: int | None = None, n_max: int = 12,
                           method: str = "auto", tol: float = 1e-10):
    """``(CriticalValue, D_r)`` via the spectrum route."""
    fn = SpectrumFunction(model, n_min, n_max, method)
    cv = solve_qr(fn, r, tol)
    return cv, qdim_from_qr(r, cv.q_r)


def renyi_dimension(model: MeasureModel, q: float, n_min: int | None = None, n_max: int = 12,
                    method: str = "auto") -> float:
    """Generalized Rényi dimension; the ``q = 1`` entropy form is a diagnostic only."""
    if q == 1:
        vals = []
        for n in range(max(n_min or 1, n_max - TOP_LEVELS + 1), n_max + 1):
            masses, counts = model.level_distribution(n)
            keep = masses > 0
            ent = np.sum(counts[keep] * masses[keep] * np.log(masses[keep]))
            vals.append(ent / (-n * LOG2))
        return max(vals)
    fn = SpectrumFunction(model, n_min, n_max, method)
    return fn(q) / (1.0 - q)


def dim_infinity(model: MeasureModel, n_min: int = 1, n_max: int = 12):
    """``(liminf surrogate, per-level values)`` of ``log max_Q nu(Q) / -log 2^n``."""
    seq = {}
    for n in range(n_min, n_max + 1):
        masses, _ = model.level_distribution(n)
        seq[n] = math.log(float(np.max(masses))) / (-n * LOG2)
    return min(seq.values()), seq


def minkowski_dimension(model: MeasureModel, n_min: int | None = None, n_max: int = 12,
                        method: str = "auto") -> float:
    return SpectrumFunction(model, n_min, n_max, method)(0.0)


def lower_dr_upper_bound(model: MeasureModel, r: float, n_min: int | None = None, n_max: int = 12,
                         method: str = "auto") -> float | None:
    """Upper bound ``r dimM / (r + dim_inf - dimM)`` on the lower quantization dimension.

    Returns ``None`` when ``dimM / (r + dim_inf) < 1`` fails.
    """
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    dim_m = minkowski_dimension(model, n_min, n_max, method)
    dim_inf, _ = dim_infinity(model, n_min or default_n_min(n_max), n_max)
    if not dim_m / (r + dim_inf) < 1:
        return None
    return r * dim_m / (r + dim_inf - dim_m)

"""Implicit-equation reference solutions for self-similar and inhomogeneous measures.

Every equation is solved by bisection on a bracket whose endpoints are
checked for the expected sign, so a returned root is always certified by a
sign change.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError, InputError

DEFAULT_TOL = 1e-12
MAX_ITER = 400


@dataclass(frozen=True)
class SimilarSystem:
    """Contraction ratios with one or two weight vectors.

    ``probabilities`` may be a sub-probability vector (sum < 1): the maps of
    an inhomogeneous measure carry total weight ``1 - p_0``.
    """

    ratios: tuple[float, ...]
    probabilities: tuple[float, ...]
    second_probabilities: tuple[float, ...] | None = None
    dimension: int = 1

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(x) for x in self.ratios))
        object.__setattr__(self, "probabilities", tuple(float(x) for x in self.probabilities))
        if self.second_probabilities is not None:
            object.__setattr__(self, "second_probabilities",
                               tuple(float(x) for x in self.second_probabilities))
        n = len(self.ratios)
        if n < 1:
            raise DomainError("a similar system needs at least one map")
        if self.dimension < 1:
            raise InputError(f"dimension must be >= 1, got {self.dimension}")
        for name, vec in (("probabilities", self.probabilities),
                          ("second_probabilities", self.second_probabilities)):
            if vec is None:
                continue
            if len(vec) != n:
                raise InputError(f"{name} has {len(vec)} entries for {n} ratios")
            if any(not p > 0 for p in vec):
                raise DomainError(f"{name} must be strictly positive, got {vec}")
            if sum(vec) > 1 + 1e-12:
                raise DomainError(f"{name} sum {sum(vec):.12g} exceeds 1")
        if any(not 0 < s < 1 for s in self.ratios):
            raise DomainError(f"ratios must lie in (0, 1), got {self.ratios}")

    @property
    def size(self) -> int:
        return len(self.ratios)

    def weights(self, which: str = "p") -> np.ndarray:
        if which == "p":
            return np.array(self.probabilities)
        if which == "t":
            if self.second_probabilities is None:
                raise InputError("system has no second probability vector")
            return np.array(self.second_probabilities)
        raise InputError(f"weight selector must be 'p' or 't', got {which!r}")

    def with_probabilities(self, probabilities) -> "SimilarSystem":
        return SimilarSystem(self.ratios, probabilities, self.second_probabilities, self.dimension)


@dataclass
class Root:
    value: float
    residual: float
    bracket: tuple[float, float]
    iterations: int


def _bisect_decreasing(f: Callable[[float], float], lo: float, hi: float, tol: float,
                       grow: bool = True) -> Root:
    """Root of a strictly decreasing ``f`` with ``f(lo) > 0``; ``hi`` grows until ``f(hi) < 0``."""
    f_lo = f(lo)
    if not f_lo > 0:
        raise DomainError(f"objective not positive at lower bracket {lo} ({f_lo})")
    f_hi = f(hi)
    while f_hi >= 0:
        if not grow or hi > 1e12:
            raise DomainError(f"no sign change up to {hi}")
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = f(hi)
    bracket = (lo, hi)
    it = 0
    # bisect to float exhaustion; ``tol`` only bounds the accepted residual
    while it < MAX_ITER:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        val = f(mid)
        if val == 0.0:
            lo = hi = mid
            break
        if val > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    x = 0.5 * (lo + hi)
    res = f(x)
    if abs(res) > max(tol, 1e-10):
        raise DomainError(f"bisection residual {res:.3g} exceeds tolerance {tol:.3g}")
    return Root(x, res, bracket, it)


def _kr_equation(weights, ratios, r):
    a = weights * ratios ** r
    return lambda k: float(np.sum(a ** (k / (k + r)))) - 1.0


def solve_kr_root(system: SimilarSystem, r: float, tol: float = DEFAULT_TOL,
                  which: str = "p") -> Root:
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    if system.size < 2:
        raise DomainError("the equation needs at least two maps")
    w = system.weights(which)
    if abs(w.sum() - 1.0) > 1e-12:
        raise DomainError(f"weights sum {w.sum():.12g} ≠ 1")
    f = _kr_equation(w, np.array(system.ratios), r)
    return _bisect_decreasing(f, tol, 1.0, tol)


def solve_kr(system: SimilarSystem, r: float, tol: float = DEFAULT_TOL) -> float:
    """Positive root ``k_r`` of ``sum (p_i r_i^r)^{k/(k+r)} = 1``.

    Examples
    --------
    >>> s = SimilarSystem((1/3, 1/3), (0.5, 0.5))
    >>> round(solve_kr(s, 2.0), 10) == round(math.log(2) / math.log(3), 10)
    True
    """
    return solve_kr_root(system, r, tol, "p").value


def solve_epsilon(system: SimilarSystem, r: float, tol: float = DEFAULT_TOL,
                  which: str = "t") -> float:
    """``epsilon`` with ``sum (w_i s_i^r)^{eps/(eps+r)} = 1`` for the selected weights."""
    if which == "t" and system.second_probabilities is None:
        which = "p"
    return solve_kr_root(system, r, tol, which).value


def solve_beta_selfsim_root(system: SimilarSystem, q: float, tol: float = DEFAULT_TOL,
                            which: str = "p") -> Root:
    if not q >= 0 or not math.isfinite(q):
        raise DomainError(f"q must be finite and >= 0, got {q}")
    w = system.weights(which)
    logs = np.log(np.array(system.ratios))
    logw = q * np.log(w)

    def f(rho):
        return float(np.sum(np.exp(logw + rho * logs))) - 1.0

    # f is strictly decreasing in rho; f(0) = sum w^q - 1 may have either sign
    f0 = f(0.0)
    if f0 == 0.0:
        return Root(0.0, 0.0, (0.0, 0.0), 0)
    if f0 > 0:
        return _bisect_decreasing(f, 0.0, 1.0, tol)
    lo = -1.0
    while f(lo) <= 0:
        lo *= 2.0
        if lo < -1e12:
            raise DomainError("no sign change for the self-similar spectrum equation")
    return _bisect_decreasing(f, lo, 0.0, tol, grow=False)


def solve_beta_selfsim(system: SimilarSystem, q: float, tol: float = DEFAULT_TOL,
                       which: str = "p") -> float:
    """``rho(q)`` solving ``sum w_i^q s_i^rho = 1``.

    With a sub-probability weight vector this is the spectrum term of an
    inhomogeneous measure (negative for ``q`` near 1).
    """
    return solve_beta_selfsim_root(system, q, tol, which).value


def beta_inhomogeneous(beta_mu: Callable[[float], float], system: SimilarSystem, q: float,
                       tol: float = DEFAULT_TOL) -> float:
    """``max(beta_mu(q), rho(q))`` for ``q`` in ``(0, 1)``."""
    if not 0 < q < 1:
        raise DomainError(f"q must lie in (0, 1), got {q}")
    return max(float(beta_mu(q)), solve_beta_selfsim(system, q, tol))


def critical_q(beta: Callable[[float], float], r: float, tol: float = DEFAULT_TOL) -> float:
    """Root of ``beta(q) = r q`` on ``(0, 1)`` for a closed-form spectrum."""
    if r <= 0:
        raise DomainError(f"order r must be positive, got {r}")
    root = _bisect_decreasing(lambda q: beta(q) - r * q, 1e-15, 1.0 - 1e-9, tol, grow=False)
    return root.value


def equation_residual(kind: str, system: SimilarSystem, value: float, param: float,
                      which: str = "p") -> float:
    """Left-hand side minus 1 of the named defining equation at ``value``."""
    w = system.weights(which)
    s = np.array(system.ratios)
    if kind in ("kr", "epsilon"):
        return _kr_equation(w, s, param)(value)
    if kind == "beta":
        return float(np.sum(w ** param * s ** value)) - 1.0
    raise InputError(f"unknown equation {kind!r}")

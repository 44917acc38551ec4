"""RIP-constant estimation, closed-form recovery bounds and rate estimation.

For an order ``k`` the lower and upper RIP constants are

    delta_l = max_S (1 - lambda_min(A_S^T A_S)),
    delta_u = max_S (lambda_max(A_S^T A_S) - 1)

over supports ``|S| = k``. Exact enumeration visits every support; the
Monte-Carlo estimate visits random ones and so only bounds the constants
from below.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations, islice

import numpy as np

from .objective import FactorPair

ENUMERATION_BUDGET = 10**7
_CHUNK = 4096


class EnumerationBudgetError(ValueError):
    pass


class InsufficientTraceError(ValueError):
    pass


@dataclass(frozen=True)
class RipEstimate:
    order: int
    lower: float
    upper: float
    method: str
    samples: int

    @property
    def delta(self) -> float:
        return max(self.lower, self.upper)

    @property
    def certified(self) -> bool:
        return self.method == "exact"


def order_ceil(K: float) -> int:
    """Round a possibly fractional RIP order up to an integer."""
    return int(math.ceil(K - 1e-12))


def _extremes(G, supports):
    """(max 1 - lambda_min, max lambda_max - 1) over a batch of supports."""
    idx = np.asarray(supports, dtype=np.intp)
    sub = G[idx[:, :, None], idx[:, None, :]]
    ev = np.linalg.eigvalsh(sub)
    return float(np.max(1.0 - ev[:, 0])), float(np.max(ev[:, -1] - 1.0))


def _check_order(A, k):
    k = order_ceil(k)
    if not 1 <= k <= A.shape[1]:
        raise ValueError(f"RIP order {k} outside [1, {A.shape[1]}]")
    return k


def rip_exact(A, k, budget: int = ENUMERATION_BUDGET) -> RipEstimate:
    """Exact order-``k`` constants by enumerating every ``k``-column support."""
    A = np.asarray(A, dtype=float)
    k = _check_order(A, k)
    n = A.shape[1]
    total = math.comb(n, k)
    if total > budget:
        raise EnumerationBudgetError(f"C({n}, {k}) = {total} exceeds budget {budget}")
    G = A.T @ A
    lo = up = 0.0
    it = combinations(range(n), k)
    while chunk := list(islice(it, _CHUNK)):
        a, b = _extremes(G, chunk)
        lo, up = max(lo, a), max(up, b)
    return RipEstimate(k, lo, up, "exact", total)


def rip_monte_carlo(A, k, trials: int, seed: int = 0) -> RipEstimate:
    """Lower bounds on the order-``k`` constants from ``trials`` random supports."""
    A = np.asarray(A, dtype=float)
    k = _check_order(A, k)
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = A.shape[1]
    rng = np.random.default_rng(seed)
    G = A.T @ A
    lo = up = 0.0
    done = 0
    while done < trials:
        b = min(_CHUNK, trials - done)
        supports = np.sort(np.argsort(rng.random((b, n)), axis=1)[:, :k], axis=1)
        a, c = _extremes(G, supports)
        lo, up = max(lo, a), max(up, c)
        done += b
    return RipEstimate(k, lo, up, "monte_carlo", trials)


def rip_estimate(A, k, budget: int = ENUMERATION_BUDGET, trials: int = 10_000,
                 seed: int = 0) -> RipEstimate:
    """Exact when ``C(n, k)`` fits the budget, Monte-Carlo otherwise."""
    k = order_ceil(k)
    if math.comb(np.shape(A)[1], k) <= budget:
        return rip_exact(A, k, budget)
    return rip_monte_carlo(A, k, trials, seed)


# ---------------------------------------------------------------------------
# recovery bounds

@dataclass(frozen=True)
class BoundReport:
    theorem: str
    feasible: bool
    C1: float = math.nan
    C2: float = math.nan
    C3: float = math.nan
    predicted_error: float = math.nan
    inputs: dict = field(default_factory=dict)
    certified: bool = True


def _validate(a, k, k_T):
    if not a > 0:
        raise ValueError("a must be positive")
    if k < 1 or k_T < 0:
        raise ValueError("need k >= 1 and k_T >= 0")


def bound_thm_2_2(delta_l, delta_u, a, k, k_T, eps, tail_mass, certified=True) -> BoundReport:
    """Tail-l1 error bound under order ``max((a+1)k + k_T, 2ak)`` RIP.

    Feasible iff ``a > 2 delta^2 / (1 - delta_l)^2``. ``tail_mass`` is the
    l1 norm of the signal outside ``T`` and outside its ``k`` largest tail
    entries (or any larger quantity the caller can bound it by).
    """
    _validate(a, k, k_T)
    if delta_l < 0 or delta_u < 0:
        raise ValueError("RIP constants must be non-negative")
    K = order_ceil(max((a + 1) * k + k_T, 2 * a * k))
    inputs = dict(a=a, k=k, k_T=k_T, K=K, eps=eps, tail_mass=tail_mass,
                  delta_l=delta_l, delta_u=delta_u)
    d = max(delta_l, delta_u)
    if delta_l >= 1 or not a > 2 * d * d / (1 - delta_l) ** 2:
        return BoundReport("thm_2_2", False, inputs=inputs, certified=certified)
    sa = math.sqrt(a)
    den = sa * (1 - delta_l) - math.sqrt(2) * d
    C1 = 2 * (sa + 1) * math.sqrt(1 + d) / den
    C2 = 2 * math.sqrt(2) * (sa + 1) * d / den + 2
    err = C1 * eps + C2 * tail_mass / math.sqrt(a * k)
    return BoundReport("thm_2_2", True, C1, C2, math.nan, err, inputs, certified)


def bound_thm_2_4(delta_l, delta_u, a, k, k_T, eps, tail_mass, certified=True) -> BoundReport:
    """Tail-l1 error bound under order ``max(ak + k_T, 2ak)`` RIP; any ``delta_l < 1``."""
    _validate(a, k, k_T)
    if not 0 <= delta_l < 1 or delta_u < 0:
        raise ValueError("need 0 <= delta_l < 1 and delta_u >= 0")
    K = order_ceil(max(a * k + k_T, 2 * a * k))
    d = max(delta_l, delta_u)
    C1 = 2 * math.sqrt(1 + d) / (1 - delta_l)
    C2 = 2 * math.sqrt(2) * d / (1 - delta_l) + 2
    err = C1 * eps + C2 * tail_mass / math.sqrt(a * k)
    inputs = dict(a=a, k=k, k_T=k_T, K=K, eps=eps, tail_mass=tail_mass,
                  delta_l=delta_l, delta_u=delta_u)
    return BoundReport("thm_2_4", True, C1, C2, math.nan, err, inputs, certified)


def bound_thm_2_8(delta, a, k, k_T, lam, tail_mass, certified=True) -> BoundReport:
    """Tail-lasso error bound, valid for ``lam > 2 ||A^T w||_inf``.

    With ``gamma = sqrt((1 + k_T/k) / a)`` and
    ``beta = delta (1 + 3 sqrt(2) gamma)``, feasible iff ``beta < 1``.
    """
    _validate(a, k, k_T)
    if not lam > 0:
        raise ValueError("lam must be positive")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    K = order_ceil(max((a + 1) * k + k_T, 2 * a * k))
    gamma = math.sqrt((1 + k_T / k) / a)
    beta = delta + 3 * math.sqrt(2) * gamma * delta
    inputs = dict(a=a, k=k, k_T=k_T, K=K, lam=lam, tail_mass=tail_mass, delta=delta,
                  gamma=gamma, beta=beta)
    if beta >= 1:
        return BoundReport("thm_2_8", False, inputs=inputs, certified=certified)
    g3 = 3 * gamma + 1
    C1 = 6 * (1 + delta) * g3 / (1 - beta) ** 2
    C2 = 2 * math.sqrt(2) * g3 / (1 - beta)
    C3 = 8 * delta * g3 / (1 - beta) + 4
    err = (C1 * lam * math.sqrt(k + k_T) + C2 * math.sqrt(lam * tail_mass)
           + C3 * tail_mass / math.sqrt(a * k))
    return BoundReport("thm_2_8", True, C1, C2, C3, err, inputs, certified)


def tail_mass(x, T, k: int, exclude_largest: bool = True) -> float:
    """l1 mass of ``x`` off ``T``, optionally also off its ``k`` largest tail entries."""
    x = np.asarray(x, dtype=float)
    tail = np.ones(x.size, dtype=bool)
    tail[np.asarray(T, dtype=np.intp)] = False
    vals = np.abs(x[tail])
    if exclude_largest:
        vals = np.sort(vals)[: max(vals.size - k, 0)]
    return float(vals.sum())


# ---------------------------------------------------------------------------
# convergence rate

def rate_from_distances(r, window: int = 20, floor: float = 1e-13,
                        min_points: int = 10) -> tuple[float, int]:
    """Largest ratio ``r[k+1] / r[k]`` over the last ``window`` pairs above ``floor``."""
    r = np.asarray(r, dtype=float)
    valid = np.flatnonzero(r > floor)
    if valid.size < min_points:
        raise InsufficientTraceError(
            f"only {valid.size} distances above {floor:g}; need {min_points}")
    last = valid[-1]
    # contiguous run of points above the floor ending at `last`
    start = last
    while start > 0 and r[start - 1] > floor:
        start -= 1
    if last - start + 1 < min_points:
        raise InsufficientTraceError("too few contiguous distances above the floor")
    lo = max(start, last - window)
    ratios = r[lo + 1:last + 1] / r[lo:last]
    return float(np.max(ratios)), int(ratios.size)


def rate_estimate(trace, w_star: FactorPair, window: int = 20,
                  floor: float = 1e-13) -> tuple[float, int]:
    """Empirical linear rate of ``||w_k - w*||`` over the tail of a kept-iterate trace.

    The final iterate is excluded. A value below 1 indicates linear
    convergence over the window.
    """
    if not trace.iterates:
        raise InsufficientTraceError("trace was recorded without iterates")
    r = np.array([w.distance(w_star) for w in trace.iterates[:-1]])
    return rate_from_distances(r, window, floor)

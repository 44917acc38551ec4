"""Tail-lasso objective, its Hadamard-product surrogate and optimality checks.

With ``gamma(z) = A^T (A z - y)``::

    f(z)    = 1/2 ||A z - y||^2 + lam * ||z_{T^c}||_1
    g(u, v) = 1/2 ||A (u * v) - y||^2 + lam/2 * (||u_{T^c}||^2 + ||v_{T^c}||^2)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

ZERO_TOL = 1e-10


def as_support(T, n: int) -> np.ndarray:
    """Sorted unique index array, validated against ``[0, n)``."""
    if T is None:
        return np.zeros(0, dtype=np.intp)
    T = np.unique(np.asarray(T, dtype=np.intp).ravel())
    if T.size and (T[0] < 0 or T[-1] >= n):
        raise ValueError(f"support indices must lie in [0, {n})")
    return T


def tail_mask(T, n: int) -> np.ndarray:
    """Float mask, 1.0 on the complement of ``T`` and 0.0 on ``T``."""
    mask = np.ones(n)
    mask[as_support(T, n)] = 0.0
    return mask


@dataclass(frozen=True, eq=False)
class TailProblem:
    A: np.ndarray
    y: np.ndarray
    lam: float
    T: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if A.ndim != 2 or y.shape != (A.shape[0],):
            raise ValueError(f"incompatible shapes A{A.shape}, y{y.shape}")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "T", as_support(self.T, A.shape[1]))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @cached_property
    def tail(self) -> np.ndarray:
        return tail_mask(self.T, self.n)

    @cached_property
    def gram(self) -> np.ndarray:
        return self.A.T @ self.A

    @cached_property
    def aty(self) -> np.ndarray:
        return self.A.T @ self.y

    def with_support(self, T) -> "TailProblem":
        return self._derive(self.lam, T)

    def with_lam(self, lam: float) -> "TailProblem":
        return self._derive(lam, self.T)

    def _derive(self, lam, T):
        # share the cached Gram products
        p = TailProblem(self.A, self.y, lam, T)
        for name in ("gram", "aty"):
            if name in self.__dict__:
                p.__dict__[name] = self.__dict__[name]
        return p

    def gamma(self, z) -> np.ndarray:
        return self.A.T @ (self.A @ z - self.y)

    def _check(self, *arrays):
        for a in arrays:
            if np.shape(a) != (self.n,):
                raise ValueError(f"expected length-{self.n} vector, got shape {np.shape(a)}")


@dataclass(frozen=True)
class FactorPair:
    u: np.ndarray
    v: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return self.u * self.v

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])

    @classmethod
    def from_stacked(cls, w) -> "FactorPair":
        w = np.asarray(w, dtype=float)
        n = w.size // 2
        return cls(w[:n].copy(), w[n:].copy())

    def distance(self, other: "FactorPair") -> float:
        return float(np.sqrt(np.sum((self.u - other.u) ** 2) + np.sum((self.v - other.v) ** 2)))


@dataclass(frozen=True)
class KktReport:
    residual_on_T: float
    residual_active: float
    residual_inactive: float
    margin: float

    @property
    def overall(self) -> float:
        return max(self.residual_on_T, self.residual_active, self.residual_inactive)


def f_value(p: TailProblem, z) -> float:
    z = np.asarray(z, dtype=float)
    p._check(z)
    r = p.A @ z - p.y
    return 0.5 * float(r @ r) + p.lam * float(np.sum(np.abs(z) * p.tail))


def g_value(p: TailProblem, w: FactorPair) -> float:
    p._check(w.u, w.v)
    r = p.A @ (w.u * w.v) - p.y
    pen = np.sum((w.u * w.u + w.v * w.v) * p.tail)
    return 0.5 * float(r @ r) + 0.5 * p.lam * float(pen)


def g_gradient(p: TailProblem, w: FactorPair) -> FactorPair:
    p._check(w.u, w.v)
    gam = p.gamma(w.u * w.v)
    return FactorPair(gam * w.v + p.lam * p.tail * w.u, gam * w.u + p.lam * p.tail * w.v)


def g_hessian(p: TailProblem, w: FactorPair) -> np.ndarray:
    """Dense ``2n x 2n`` Hessian of ``g``; intended for analysis at small n."""
    p._check(w.u, w.v)
    u, v = w.u, w.v
    G = p.gram
    gam = p.gamma(u * v)
    pen = np.diag(p.lam * p.tail)
    uv = G * np.outer(v, u) + np.diag(gam)
    return np.block([[G * np.outer(v, v) + pen, uv], [uv.T, G * np.outer(u, u) + pen]])


def kkt_report(p: TailProblem, z, zero_tol: float = ZERO_TOL) -> KktReport:
    """Residuals of the tail-lasso optimality conditions at ``z``.

    On ``T`` the gradient of the quadratic must vanish; on the tail it must
    equal ``-lam * sign(z_j)`` where ``z_j`` is nonzero and lie in
    ``[-lam, lam]`` where ``|z_j| <= zero_tol``. ``margin`` is the smallest
    slack ``lam - |gamma_j|`` over inactive tail coordinates (inf if none).
    """
    z = np.asarray(z, dtype=float)
    p._check(z)
    gam = p.gamma(z)
    on_T = np.zeros(p.n, dtype=bool)
    on_T[p.T] = True
    zero = np.abs(z) <= zero_tol
    active = ~on_T & ~zero
    inactive = ~on_T & zero

    r_T = float(np.max(np.abs(gam[on_T]), initial=0.0))
    r_act = float(np.max(np.abs(gam[active] + p.lam * np.sign(z[active])), initial=0.0))
    slack = p.lam - np.abs(gam[inactive])
    r_inact = float(max(0.0, -np.min(slack, initial=np.inf)))
    margin = float(np.min(slack, initial=np.inf))
    return KktReport(r_T, r_act, r_inact, margin)


def split_z(z) -> FactorPair:
    """Balanced factorization ``u = sign(z) sqrt|z|``, ``v = sqrt|z|``."""
    z = np.asarray(z, dtype=float)
    root = np.sqrt(np.abs(z))
    return FactorPair(np.sign(z) * root, root)

"""Proximal alternating minimization over the Hadamard factorization ``z = u * v``.

``solve_phpp`` alternates the two closed-form proximal updates for a fixed
estimated support ``T``. ``solve_phpp_improved`` restricts each linear solve
to the coordinates whose partner factor is above a threshold and grows the
estimated support adaptively from the current iterate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .objective import FactorPair, TailProblem, as_support, f_value, g_value, kkt_report
from .problem_gen import INIT_STREAM, stream

STATUSES = ("converged_step", "converged_kkt", "max_iters")


class SingularSystemError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class PhppConfig:
    lam: float
    alpha: float
    tau: float = 1e-5
    k0: int = 1
    kp: int = 1
    max_iters: int = 1000
    step_tol: float = 1e-10
    kkt_tol: float = 1e-8
    keep_iterates: bool = False

    def __post_init__(self):
        if not (self.lam > 0 and self.alpha > 0 and self.tau >= 0):
            raise ValueError("need lam > 0, alpha > 0, tau >= 0")
        if self.max_iters < 1 or self.k0 < 0 or self.kp < 0:
            raise ValueError("need max_iters >= 1 and non-negative support schedule")
        if self.step_tol < 0 or self.kkt_tol < 0:
            raise ValueError("tolerances must be non-negative")

    @classmethod
    def noiseless_defaults(cls, m: int, **overrides) -> "PhppConfig":
        """``lam = 0.1/m``, ``alpha = 10/lam``, ``tau = 1e-5``."""
        lam = overrides.pop("lam", 0.1 / m)
        alpha = overrides.pop("alpha", 10.0 / lam)
        return cls(lam=lam, alpha=alpha, **overrides)


@dataclass(frozen=True)
class IterRecord:
    iter: int
    g: float
    f: float
    step: float
    s_size: int
    s_tilde_size: int
    t_size: int
    kkt: float


@dataclass
class SolverTrace:
    records: list[IterRecord] = field(default_factory=list)
    status: str = "max_iters"
    initial_g: float = float("nan")
    iterates: list[FactorPair] | None = None

    def __len__(self):
        return len(self.records)

    @property
    def iterations(self) -> int:
        return len(self.records)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def descent_gaps(self, alpha: float) -> np.ndarray:
        """``g_{k+1} - g_k + step^2 / (2 alpha)`` per iteration; <= 0 under descent."""
        g = np.concatenate([[self.initial_g], self.column("g")])
        return g[1:] - g[:-1] + self.column("step") ** 2 / (2.0 * alpha)


def default_init(A, y, seed: int = 0) -> FactorPair:
    """``u0 = v0`` uniform on [0.5, 1.5], scaled by ``sqrt(||A^T y||_inf)``."""
    n = A.shape[1]
    scale = np.sqrt(np.max(np.abs(A.T @ y), initial=0.0))
    u0 = stream(seed, INIT_STREAM).uniform(0.5, 1.5, size=n) * scale
    return FactorPair(u0, u0.copy())


def _spd_solve(M, b):
    try:
        return linalg.cho_solve(linalg.cho_factor(M, lower=False, check_finite=False), b,
                                check_finite=False)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"proximal system is not positive definite: {exc}") from exc


def _prox_solve(G, aty, tail, lam, alpha, other, own):
    # [(G o other other^T) + lam*Diag(tail) + I/alpha] x = aty o other + own/alpha
    M = G * np.outer(other, other)
    M[np.diag_indices_from(M)] += lam * tail + 1.0 / alpha
    return _spd_solve(M, aty * other + own / alpha)


def phpp_update_u(p: TailProblem, cfg: PhppConfig, u, v) -> np.ndarray:
    p._check(u, v)
    return _prox_solve(p.gram, p.aty, p.tail, p.lam, cfg.alpha, v, u)


def phpp_update_v(p: TailProblem, cfg: PhppConfig, u_next, v) -> np.ndarray:
    p._check(u_next, v)
    return _prox_solve(p.gram, p.aty, p.tail, p.lam, cfg.alpha, u_next, v)


def _restricted(p, cfg, own, other, S, T):
    n = p.n
    S = np.asarray(S, dtype=np.intp)
    tail = p.tail if np.array_equal(p.T, np.asarray(T)) else _mask(T, n)
    out = np.where(tail > 0, own / (p.lam * cfg.alpha + 1.0), own)
    if S.size:
        G = p.gram[np.ix_(S, S)]
        out[S] = _prox_solve(G, p.aty[S], tail[S], p.lam, cfg.alpha, other[S], own[S])
    return out


def _mask(T, n):
    mask = np.ones(n)
    mask[np.asarray(T, dtype=np.intp)] = 0.0
    return mask


def restricted_update_u(p: TailProblem, cfg: PhppConfig, u, v, S, T) -> np.ndarray:
    """u-update solved only on ``S``; elsewhere kept on ``T`` and shrunk on the tail."""
    p._check(u, v)
    return _restricted(p, cfg, u, v, S, T)


def restricted_update_v(p: TailProblem, cfg: PhppConfig, u_next, v, S_tilde, T) -> np.ndarray:
    p._check(u_next, v)
    return _restricted(p, cfg, v, u_next, S_tilde, T)


def hard_threshold_support(z, s: int) -> np.ndarray:
    """Sorted indices of the ``s`` largest-magnitude entries; ties favour the lower index."""
    z = np.asarray(z, dtype=float)
    if not 0 <= s <= z.size:
        raise ValueError(f"threshold size {s} outside [0, {z.size}]")
    order = np.argsort(-np.abs(z), kind="stable")
    return np.sort(order[:s])


def _check_w0(w0, n):
    if w0.u.shape != (n,) or w0.v.shape != (n,):
        raise ValueError("initial point has wrong length")
    if not (np.all(np.isfinite(w0.u)) and np.all(np.isfinite(w0.v))):
        raise ValueError("initial point must be finite")


def solve_phpp(p: TailProblem, cfg: PhppConfig, w0: FactorPair | None = None,
               seed: int = 0) -> tuple[FactorPair, SolverTrace]:
    """Proximal alternating minimization for a fixed estimated support ``p.T``."""
    if w0 is None:
        w0 = default_init(p.A, p.y, seed)
    _check_w0(w0, p.n)
    u, v = w0.u.astype(float), w0.v.astype(float)
    n = p.n
    trace = SolverTrace(initial_g=g_value(p, FactorPair(u, v)),
                        iterates=[FactorPair(u, v)] if cfg.keep_iterates else None)
    for it in range(1, cfg.max_iters + 1):
        u_new = phpp_update_u(p, cfg, u, v)
        v_new = phpp_update_v(p, cfg, u_new, v)
        step = float(np.sqrt(np.sum((u_new - u) ** 2) + np.sum((v_new - v) ** 2)))
        u, v = u_new, v_new
        w = FactorPair(u, v)
        z = w.z
        kkt = kkt_report(p, z).overall
        trace.records.append(IterRecord(it, g_value(p, w), f_value(p, z), step, n, n,
                                        p.T.size, kkt))
        if trace.iterates is not None:
            trace.iterates.append(w)
        if step <= cfg.step_tol:
            trace.status = "converged_step"
            break
        if kkt <= cfg.kkt_tol:
            trace.status = "converged_kkt"
            break
    return FactorPair(u, v), trace


def solve_phpp_improved(A, y, cfg: PhppConfig, w0: FactorPair | None = None,
                        seed: int = 0, T0=None) -> tuple[np.ndarray, SolverTrace]:
    """Support-restricted updates with an adaptively grown estimated support.

    Each pass solves the u-system on ``{j : |v_j| >= tau}``, the v-system on
    ``{j : |u_j| >= tau}`` (fresh ``u``), then grows the support size by
    ``kp`` (capped at ``min(m, n)``) and re-selects the largest entries of
    the new ``u * v``. Returns the final ``z = u * v``.

    By default the first support holds the ``k0`` largest entries of
    ``u0 * v0``. Passing ``T0`` seeds it with a known index set instead, and
    the support size then starts at ``len(T0)``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    if w0 is None:
        w0 = default_init(A, y, seed)
    _check_w0(w0, n)
    u, v = w0.u.astype(float), w0.v.astype(float)
    cap = min(m, n)
    if T0 is None:
        k_T = min(cfg.k0, cap)
        T_init = hard_threshold_support(u * v, k_T)
    else:
        T_init = as_support(T0, n)
        k_T = min(T_init.size, cap)
    p = TailProblem(A, y, cfg.lam, T_init)
    trace = SolverTrace(initial_g=g_value(p, FactorPair(u, v)),
                        iterates=[FactorPair(u, v)] if cfg.keep_iterates else None)
    for it in range(1, cfg.max_iters + 1):
        S = np.flatnonzero(np.abs(v) >= cfg.tau)
        u_new = restricted_update_u(p, cfg, u, v, S, p.T)
        S_tilde = np.flatnonzero(np.abs(u_new) >= cfg.tau)
        v_new = restricted_update_v(p, cfg, u_new, v, S_tilde, p.T)
        step = float(np.sqrt(np.sum((u_new - u) ** 2) + np.sum((v_new - v) ** 2)))
        u, v = u_new, v_new
        w = FactorPair(u, v)
        z = w.z
        kkt = kkt_report(p, z).overall
        trace.records.append(IterRecord(it, g_value(p, w), f_value(p, z), step, S.size,
                                        S_tilde.size, p.T.size, kkt))
        if trace.iterates is not None:
            trace.iterates.append(w)
        if step <= cfg.step_tol:
            trace.status = "converged_step"
            break
        if kkt <= cfg.kkt_tol:
            trace.status = "converged_kkt"
            break
        k_T = min(k_T + cfg.kp, cap)
        p = p.with_support(hard_threshold_support(z, k_T))
    return u * v, trace

"""Reference solvers: a convex tail-lasso oracle and the comparison baselines.

The oracle is an accelerated proximal-gradient method with an active-set
polish, terminated on the tail-lasso KKT residual. Greedy baselines (OMP,
CoSaMP, subspace pursuit, HTP) are the textbook formulations sharing one
least-squares kernel. HPP and tail-HPP delegate to ``solve_phpp``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .objective import TailProblem, f_value, kkt_report, tail_mask, as_support
from .phpp import PhppConfig, solve_phpp


class ConvergenceWarning(UserWarning):
    pass


class RankDeficiencyWarning(UserWarning):
    pass


class InfeasibleError(ValueError):
    pass


@dataclass(frozen=True)
class BaselineConfig:
    k: int
    max_iters: int = 100
    residual_tol: float = 1e-10
    step: float = 1.0  # HTP gradient step

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("greedy sparsity k must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


# ---------------------------------------------------------------------------
# convex oracle

def power_iteration(A, iters: int = 500, tol: float = 1e-12, seed: int = 0) -> float:
    """Largest eigenvalue of ``A^T A`` (squared spectral norm of ``A``)."""
    x = np.random.default_rng(seed).standard_normal(A.shape[1])
    x /= np.linalg.norm(x)
    val = 0.0
    for _ in range(iters):
        y = A.T @ (A @ x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - val) <= tol * new:
            return new
        val = new
    return val


def soft_threshold(x, t):
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def _polish(p: TailProblem, z):
    """Solve the optimality system on the current active set with fixed signs."""
    tail = p.tail > 0
    active = ~tail | (z != 0)
    E = np.flatnonzero(active)
    if E.size == 0 or E.size > p.A.shape[0]:
        return None
    AE = p.A[:, E]
    s = np.where(tail[E], np.sign(z[E]), 0.0)
    rhs = AE.T @ p.y - p.lam * s
    zE, _, rank, _ = np.linalg.lstsq(AE.T @ AE, rhs, rcond=None)
    if rank < E.size:
        return None
    flip = tail[E] & (np.sign(zE) != s)
    if np.any(flip):
        return None
    out = np.zeros(p.n)
    out[E] = zE
    return out


def tail_lasso_oracle(p: TailProblem, tol: float = 1e-10, max_iters: int = 200_000,
                      z0=None, polish_every: int = 25) -> np.ndarray:
    """Global minimizer of ``1/2||Az - y||^2 + lam ||z_{T^c}||_1``.

    FISTA with gradient-based restart; every ``polish_every`` iterations the
    current active set and signs are used to solve the optimality system
    directly, accepted only if it lowers the KKT residual. Stops once the
    KKT residual is at most ``tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    L = power_iteration(p.A) * 1.02
    if L == 0.0:
        return np.zeros(p.n)
    step = 1.0 / L
    thresh = p.lam * step * p.tail
    G, aty = p.gram, p.aty

    z = np.zeros(p.n) if z0 is None else np.asarray(z0, dtype=float).copy()
    best, best_res = z, kkt_report(p, z).overall
    if best_res <= tol:
        return z
    x, t = z.copy(), 1.0
    for it in range(1, max_iters + 1):
        z_new = soft_threshold(x - step * (G @ x - aty), thresh)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if np.dot(x - z_new, z_new - z) > 0:
            x, t_new = z_new.copy(), 1.0
        else:
            x = z_new + ((t - 1.0) / t_new) * (z_new - z)
        z, t = z_new, t_new

        if it % polish_every == 0:
            res = kkt_report(p, z).overall
            if res < best_res:
                best, best_res = z, res
            cand = _polish(p, z)
            if cand is not None:
                cres = kkt_report(p, cand).overall
                if cres < best_res:
                    best, best_res = cand, cres
            if best_res <= tol:
                return best
    warnings.warn(f"tail-lasso oracle stopped at KKT residual {best_res:.3e} > {tol:.1e}",
                  ConvergenceWarning, stacklevel=2)
    return best


def _lp_tail_l1(A, y, T):
    m, n = A.shape
    tail = np.flatnonzero(tail_mask(T, n))
    nt = tail.size
    c = np.concatenate([np.zeros(n), np.ones(nt)])
    if nt:
        E = np.zeros((nt, n))
        E[np.arange(nt), tail] = 1.0
        I = np.eye(nt)
        A_ub = np.block([[E, -I], [-E, -I]])
        b_ub = np.zeros(2 * nt)
    else:
        A_ub = b_ub = None
    A_eq = np.hstack([A, np.zeros((m, nt))])
    bounds = [(None, None)] * n + [(0, None)] * nt
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if res.status == 2:
        raise InfeasibleError("no z satisfies A z = y")
    if res.status != 0:
        raise RuntimeError(f"linear program failed: {res.message}")
    return res.x[:n]


def _refit_support(A, y, z, T, cutoff=1e-9):
    """Least-squares refit on ``T`` plus the detected tail support, if well posed."""
    E = np.union1d(as_support(T, A.shape[1]), np.flatnonzero(np.abs(z) > cutoff))
    if E.size == 0 or E.size > A.shape[0]:
        return z
    AE = A[:, E]
    coef, _, rank, _ = np.linalg.lstsq(AE, y, rcond=None)
    if rank < E.size:
        return z
    out = np.zeros_like(z)
    out[E] = coef
    if np.linalg.norm(AE @ coef - y) > np.linalg.norm(A @ z - y) + 1e-12:
        return z
    return out


def tail_l1_constrained(A, y, T, eps: float = 0.0, tol: float = 1e-10) -> np.ndarray:
    """``min ||z_{T^c}||_1`` subject to ``||A z - y|| <= eps``.

    ``eps == 0`` is solved as a linear program. ``eps > 0`` bisects the
    tail-lasso weight on a log scale until the residual norm sits just
    below ``eps``.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(y, dtype=float)
    m, n = A.shape
    T = as_support(T, n)
    if eps < 0:
        raise ValueError("eps must be non-negative")
    if not np.any(y):
        return np.zeros(n)
    if eps == 0:
        z = _lp_tail_l1(A, y, T)
        return _refit_support(A, y, z, T)

    zls, *_ = np.linalg.lstsq(A, y, rcond=None)
    if np.linalg.norm(A @ zls - y) > eps:
        raise InfeasibleError(f"least residual {np.linalg.norm(A @ zls - y):.3e} exceeds eps")
    # zero tail, least squares on T
    z_T = np.zeros(n)
    if T.size:
        coef, *_ = np.linalg.lstsq(A[:, T], y, rcond=None)
        z_T[T] = coef
    r0 = y - A @ z_T
    if np.linalg.norm(r0) <= eps:
        return z_T
    lam_hi = float(np.max(np.abs((A.T @ r0) * tail_mask(T, n))))
    lam_lo = lam_hi * 1e-6
    p_lo = TailProblem(A, y, lam_lo, T)
    z_lo = tail_lasso_oracle(p_lo, tol=tol)
    while np.linalg.norm(A @ z_lo - y) > eps:
        lam_lo *= 1e-3
        if lam_lo < lam_hi * 1e-15:
            raise InfeasibleError("continuation could not reach the residual target")
        p_lo = p_lo.with_lam(lam_lo)
        z_lo = tail_lasso_oracle(p_lo, tol=tol, z0=z_lo)
    best, z_warm = z_lo, z_lo
    for _ in range(80):
        lam = np.sqrt(lam_lo * lam_hi)
        p = p_lo.with_lam(lam)
        z = tail_lasso_oracle(p, tol=tol, z0=z_warm)
        res = np.linalg.norm(A @ z - y)
        if res <= eps:
            best, lam_lo, z_warm = z, lam, z
            if res >= eps * (1 - 1e-7):
                break
        else:
            lam_hi = lam
        if lam_hi / lam_lo < 1 + 1e-12:
            break
    return best


# ---------------------------------------------------------------------------
# greedy baselines

def _lstsq_on(A, y, S):
    coef, _, rank, _ = np.linalg.lstsq(A[:, S], y, rcond=None)
    if rank < min(len(S), A.shape[0]):
        warnings.warn(f"rank-deficient least squares on {len(S)} columns (rank {rank})",
                      RankDeficiencyWarning, stacklevel=3)
    return coef


def _top(v, s):
    s = min(s, v.size)
    return np.sort(np.argsort(-np.abs(v), kind="stable")[:s])


def _dense(n, S, coef):
    z = np.zeros(n)
    z[S] = coef
    return z


def _check_k(A, cfg):
    if cfg.k > A.shape[0]:
        raise ValueError(f"sparsity {cfg.k} exceeds number of measurements {A.shape[0]}")


def omp(A, y, cfg: BaselineConfig, full_output: bool = False):
    """Orthogonal matching pursuit for ``cfg.k`` steps."""
    A = np.asarray(A, dtype=float)
    _check_k(A, cfg)
    m, n = A.shape
    z = np.zeros(n)
    ynorm = np.linalg.norm(y)
    S: list[int] = []
    r = np.array(y, dtype=float)
    it = 0
    while len(S) < cfg.k and np.linalg.norm(r) > cfg.residual_tol * ynorm:
        it += 1
        corr = np.abs(A.T @ r)
        corr[S] = -1.0
        S.append(int(np.argmax(corr)))
        coef = _lstsq_on(A, y, S)
        r = y - A[:, S] @ coef
        z = _dense(n, S, coef)
    return (z, it) if full_output else z


def cosamp(A, y, cfg: BaselineConfig, full_output: bool = False):
    """CoSaMP: merge 2k proxy indices with the current support, refit, prune to k."""
    A = np.asarray(A, dtype=float)
    _check_k(A, cfg)
    n = A.shape[1]
    k = cfg.k
    z = np.zeros(n)
    ynorm = np.linalg.norm(y)
    rnorm = ynorm
    it = 0
    while it < cfg.max_iters and rnorm > cfg.residual_tol * ynorm:
        it += 1
        r = y - A @ z
        cand = np.union1d(_top(A.T @ r, 2 * k), np.flatnonzero(z))
        b = _dense(n, cand, _lstsq_on(A, y, cand))
        S = _top(b, k)
        z_new = _dense(n, S, _lstsq_on(A, y, S))
        new_norm = np.linalg.norm(y - A @ z_new)
        if new_norm >= rnorm * (1 - 1e-12) and it > 1:
            break
        z, rnorm = z_new, new_norm
    return (z, it) if full_output else z


def sp(A, y, cfg: BaselineConfig, full_output: bool = False):
    """Subspace pursuit: merge k proxy indices, refit, prune back to k."""
    A = np.asarray(A, dtype=float)
    _check_k(A, cfg)
    n = A.shape[1]
    k = cfg.k
    ynorm = np.linalg.norm(y)
    if ynorm == 0:
        return (np.zeros(n), 0) if full_output else np.zeros(n)
    S = _top(A.T @ y, k)
    z = _dense(n, S, _lstsq_on(A, y, S))
    rnorm = np.linalg.norm(y - A @ z)
    it = 1
    while it < cfg.max_iters and rnorm > cfg.residual_tol * ynorm:
        it += 1
        r = y - A @ z
        cand = np.union1d(S, _top(A.T @ r, k))
        b = _dense(n, cand, _lstsq_on(A, y, cand))
        S_new = _top(b, k)
        z_new = _dense(n, S_new, _lstsq_on(A, y, S_new))
        new_norm = np.linalg.norm(y - A @ z_new)
        if new_norm >= rnorm:
            break
        S, z, rnorm = S_new, z_new, new_norm
    return (z, it) if full_output else z


def htp(A, y, cfg: BaselineConfig, full_output: bool = False):
    """Hard thresholding pursuit: gradient step, keep k largest, least-squares debias."""
    A = np.asarray(A, dtype=float)
    _check_k(A, cfg)
    n = A.shape[1]
    ynorm = np.linalg.norm(y)
    z = np.zeros(n)
    S = np.zeros(0, dtype=np.intp)
    it = 0
    while it < cfg.max_iters and np.linalg.norm(y - A @ z) > cfg.residual_tol * ynorm:
        it += 1
        S_new = _top(z + cfg.step * (A.T @ (y - A @ z)), cfg.k)
        if np.array_equal(S_new, S):
            break
        S = S_new
        z = _dense(n, S, _lstsq_on(A, y, S))
    return (z, it) if full_output else z


# ---------------------------------------------------------------------------
# Hadamard-parametrized baselines

def hpp(A, y, lam: float, cfg: PhppConfig, w0=None, seed: int = 0, full_output: bool = False):
    """Plain lasso through the Hadamard factorization (empty estimated support)."""
    return tail_hpp(A, y, lam, (), cfg, w0=w0, seed=seed, full_output=full_output)


def tail_hpp(A, y, lam: float, T_fixed, cfg: PhppConfig, w0=None, seed: int = 0,
             full_output: bool = False):
    """Proximal alternating minimization with a fixed estimated support."""
    if cfg.lam != lam:
        cfg = PhppConfig(**{**cfg.__dict__, "lam": lam})
    w, trace = solve_phpp(TailProblem(A, y, lam, T_fixed), cfg, w0, seed=seed)
    return (w.z, trace) if full_output else w.z


def tail_objective_gap(p: TailProblem, z, z_ref) -> float:
    """Relative objective gap ``(f(z) - f(z_ref)) / (1 + f(z_ref))``."""
    fr = f_value(p, z_ref)
    return (f_value(p, z) - fr) / (1.0 + fr)

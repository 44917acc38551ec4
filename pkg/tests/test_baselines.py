import itertools
import warnings

import numpy as np
import pytest

from tailcs.baselines import (BaselineConfig, InfeasibleError, cosamp, hpp, htp, omp,
                              power_iteration, soft_threshold, sp, tail_hpp, tail_l1_constrained,
                              tail_lasso_oracle, tail_objective_gap)
from tailcs.objective import TailProblem, f_value, kkt_report
from tailcs.phpp import PhppConfig, solve_phpp
from tailcs.problem_gen import NoiseModel, make_instance

GREEDY = [omp, cosamp, sp, htp]


def test_power_iteration_and_soft_threshold():
    A = np.random.default_rng(0).standard_normal((7, 5))
    assert power_iteration(A) == pytest.approx(np.linalg.norm(A, 2) ** 2, rel=1e-8)
    assert soft_threshold(np.array([-3.0, 0.5, 2.0]), 1.0).tolist() == [-2.0, 0.0, 1.0]


def test_oracle_zero_data():
    p = TailProblem(np.ones((3, 4)), np.zeros(3), 0.1)
    assert not np.any(tail_lasso_oracle(p))


def test_oracle_empty_tail_is_least_squares():
    rng = np.random.default_rng(1)
    A, y = rng.standard_normal((8, 5)), rng.standard_normal(8)
    z = tail_lasso_oracle(TailProblem(A, y, 0.3, range(5)))
    assert np.allclose(z, np.linalg.solve(A.T @ A, A.T @ y), atol=1e-8)


def test_oracle_kkt_and_lower_bound(instance_20x40):
    inst = instance_20x40
    p = TailProblem(inst.A, inst.y, 0.02, inst.truth.support[:1])
    z = tail_lasso_oracle(p, tol=1e-10)
    assert kkt_report(p, z).overall <= 1e-10
    cfg = PhppConfig(lam=0.02, alpha=500.0, max_iters=200)
    others = [solve_phpp(p, cfg, seed=0)[0].z, omp(inst.A, inst.y, BaselineConfig(4)), np.zeros(40)]
    for other in others:
        assert f_value(p, z) <= f_value(p, other) + 1e-9
        assert tail_objective_gap(p, other, z) >= -1e-9


def _vertex_min(A, y):
    """min ||z||_1 s.t. Az = y via every basis of [A, -A] with z = p - q, p, q >= 0."""
    m, n = A.shape
    B = np.hstack([A, -A])
    best, arg = np.inf, None
    for cols in itertools.combinations(range(2 * n), m):
        M = B[:, cols]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        xb = np.linalg.solve(M, y)
        if np.any(xb < -1e-12):
            continue
        if xb.sum() < best:
            pq = np.zeros(2 * n)
            pq[list(cols)] = xb
            best, arg = xb.sum(), pq[:n] - pq[n:]
    return best, arg


def test_lp_against_vertex_enumeration():
    for seed in range(3):
        inst = make_instance(4, 6, 1, seed)
        best, _ = _vertex_min(inst.A, inst.y)
        z = tail_l1_constrained(inst.A, inst.y, ())
        assert np.allclose(inst.A @ z, inst.y, atol=1e-9)
        assert np.abs(z).sum() == pytest.approx(best, abs=1e-6)


def test_lp_zero_and_infeasible():
    assert not np.any(tail_l1_constrained(np.ones((2, 3)), np.zeros(2), ()))
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(InfeasibleError):
        tail_l1_constrained(A, np.array([1.0, 2.0]), ())
    with pytest.raises(InfeasibleError):
        tail_l1_constrained(A, np.array([1.0, 2.0]), (), eps=0.1)


def test_lp_recovers_with_true_support():
    inst = make_instance(16, 64, 8, seed=3)
    z = tail_l1_constrained(inst.A, inst.y, inst.truth.support)
    assert np.linalg.norm(z - inst.x) <= 1e-5


@pytest.mark.parametrize("eps", [0.01, 0.05])
def test_continuation_meets_residual(eps):
    inst = make_instance(32, 64, 4, seed=9, noise=NoiseModel("gaussian", 0.05))
    z = tail_l1_constrained(inst.A, inst.y, inst.truth.support[:2], eps=eps)
    res = np.linalg.norm(inst.A @ z - inst.y)
    assert res <= eps * (1 + 1e-6)
    assert res >= 0.9 * eps


def test_omp_single_column():
    A = np.random.default_rng(2).standard_normal((10, 12))
    A /= np.linalg.norm(A, axis=0)
    z = omp(A, 3 * A[:, 5], BaselineConfig(1))
    assert np.flatnonzero(z).tolist() == [5] and z[5] == pytest.approx(3.0)


@pytest.mark.parametrize("solver", GREEDY)
def test_greedy_zero_data(solver):
    assert not np.any(solver(np.eye(4)[:3], np.zeros(3), BaselineConfig(2)))


@pytest.mark.parametrize("solver", GREEDY)
def test_greedy_exact_regime(solver):
    hits = 0
    for t in range(200):
        inst = make_instance(32, 64, 4, seed=1000 + t)
        hits += np.linalg.norm(solver(inst.A, inst.y, BaselineConfig(4)) - inst.x) <= 1e-8
    assert hits >= 180


@pytest.mark.parametrize("solver", GREEDY)
def test_greedy_k_equals_m(solver):
    inst = make_instance(6, 12, 2, seed=4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        z, iters = solver(inst.A, inst.y, BaselineConfig(6), full_output=True)
    assert z.shape == (12,) and np.all(np.isfinite(z)) and iters >= 1
    assert np.count_nonzero(z) <= 6


def test_greedy_config_validation():
    with pytest.raises(ValueError):
        BaselineConfig(0)
    with pytest.raises(ValueError):
        omp(np.eye(3), np.ones(3), BaselineConfig(4))


def test_hpp_delegation(instance_20x40):
    inst = instance_20x40
    cfg = PhppConfig(lam=0.05, alpha=100.0, max_iters=3000, step_tol=1e-12)
    z = hpp(inst.A, inst.y, 0.05, cfg, seed=7)
    w, _ = solve_phpp(TailProblem(inst.A, inst.y, 0.05), cfg, seed=7)
    assert np.array_equal(z, w.z)
    p = TailProblem(inst.A, inst.y, 0.05)
    fo = f_value(p, tail_lasso_oracle(p))
    assert abs(f_value(p, z) - fo) <= 1e-7 * (1 + fo)
    assert not np.any(hpp(inst.A, np.zeros(20), 0.05, cfg))


def test_tail_hpp(instance_20x40):
    inst = instance_20x40
    T = inst.truth.support[:2]
    cfg = PhppConfig(lam=0.01, alpha=1000.0, max_iters=3000, step_tol=1e-12)
    z, trace = tail_hpp(inst.A, inst.y, 0.01, T, cfg, seed=1, full_output=True)
    assert np.all(trace.descent_gaps(cfg.alpha) <= 1e-12)
    p = TailProblem(inst.A, inst.y, 0.01, T)
    fo = f_value(p, tail_lasso_oracle(p))
    assert abs(f_value(p, z) - fo) <= 1e-7 * (1 + fo)

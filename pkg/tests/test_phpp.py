import numpy as np
import pytest

from tailcs.baselines import tail_lasso_oracle
from tailcs.objective import FactorPair, TailProblem, f_value, g_gradient, g_hessian, kkt_report
from tailcs.phpp import (PhppConfig, default_init, hard_threshold_support,
                         phpp_update_u, phpp_update_v, restricted_update_u, restricted_update_v,
                         solve_phpp, solve_phpp_improved)
from tailcs.problem_gen import make_instance


def scalar_problem(T=()):
    return TailProblem(np.array([[1.0]]), np.array([2.0]), 1.0, T)


def test_scalar_updates():
    cfg = PhppConfig(lam=1.0, alpha=1.0)
    p = scalar_problem()
    assert phpp_update_u(p, cfg, np.array([0.0]), np.array([1.0]))[0] == pytest.approx(2 / 3)
    assert phpp_update_v(p, cfg, np.array([1.0]), np.array([0.0]))[0] == pytest.approx(2 / 3)


def test_zero_partner_on_full_support():
    rng = np.random.default_rng(0)
    p = TailProblem(rng.standard_normal((4, 5)), rng.standard_normal(4), 0.2, range(5))
    cfg = PhppConfig(lam=0.2, alpha=3.0)
    u = rng.standard_normal(5)
    assert np.allclose(phpp_update_u(p, cfg, u, np.zeros(5)), u)
    assert np.allclose(phpp_update_v(p, cfg, np.zeros(5), u), u)


def test_prox_subproblem_stationary(small_problem):
    p = small_problem
    cfg = PhppConfig(lam=p.lam, alpha=2.0)
    rng = np.random.default_rng(1)
    for _ in range(10):
        u, v = rng.standard_normal(8), rng.standard_normal(8)
        u1 = phpp_update_u(p, cfg, u, v)
        gu = g_gradient(p, FactorPair(u1, v)).u + (u1 - u) / cfg.alpha
        assert np.linalg.norm(gu) < 1e-10 * (1 + np.linalg.norm(u1))
        v1 = phpp_update_v(p, cfg, u1, v)
        gv = g_gradient(p, FactorPair(u1, v1)).v + (v1 - v) / cfg.alpha
        assert np.linalg.norm(gv) < 1e-10 * (1 + np.linalg.norm(v1))


def test_config_validation():
    with pytest.raises(ValueError):
        PhppConfig(lam=0.0, alpha=1.0)
    with pytest.raises(ValueError):
        PhppConfig(lam=1.0, alpha=1.0, max_iters=0)
    cfg = PhppConfig.noiseless_defaults(64)
    assert cfg.lam == pytest.approx(0.1 / 64) and cfg.alpha == pytest.approx(10 / cfg.lam)
    assert cfg.tau == 1e-5


def test_zero_data_fixed_point():
    p = TailProblem(np.ones((2, 3)), np.zeros(2), 0.1)
    w, trace = solve_phpp(p, PhppConfig(lam=0.1, alpha=1.0))
    assert trace.iterations == 1 and not np.any(w.z)


def test_default_init():
    A = np.eye(3)
    w = default_init(A, np.array([4.0, 0.0, 0.0]), seed=2)
    assert np.array_equal(w.u, w.v)
    assert np.all((w.u >= 1.0) & (w.u <= 3.0))
    assert np.array_equal(default_init(A, np.ones(3), 5).u, default_init(A, np.ones(3), 5).u)


def test_matches_oracle_and_descends():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((6, 8))
    y = rng.standard_normal(6)
    p = TailProblem(A, y, 0.05)
    cfg = PhppConfig(lam=0.05, alpha=20.0, max_iters=20000, step_tol=1e-13, kkt_tol=1e-12)
    w, trace = solve_phpp(p, cfg, seed=1)
    fo = f_value(p, tail_lasso_oracle(p, tol=1e-12))
    assert abs(f_value(p, w.z) - fo) <= 1e-8 * (1 + fo)
    assert np.all(trace.descent_gaps(cfg.alpha) <= 1e-12)
    assert np.linalg.norm(g_gradient(p, w).stacked()) < 1e-8


def _minimizer(T):
    inst = make_instance(20, 40, 3, seed=8)
    p = TailProblem(inst.A, inst.y, 0.01, T)
    cfg = PhppConfig(lam=0.01, alpha=100.0, max_iters=50000, step_tol=1e-14, kkt_tol=1e-13)
    w, _ = solve_phpp(p, cfg, seed=3)
    assert kkt_report(p, w.z).overall < 1e-8
    return p, w


def test_hessian_positive_definite_without_support():
    p, w = _minimizer(())
    assert np.linalg.eigvalsh(g_hessian(p, w))[0] > 1e-8


def test_hessian_flat_along_unpenalized_rescaling():
    # (u_j t, v_j / t) leaves g unchanged for j in T, so the Hessian is singular there
    p, w = _minimizer([int(np.argmax(np.abs(_minimizer(())[1].z)))])
    j = p.T[0]
    d = np.zeros(2 * p.n)
    d[j], d[p.n + j] = w.u[j], -w.v[j]
    H = g_hessian(p, w)
    assert abs(d @ H @ d) <= 1e-10 * (d @ d) * np.linalg.norm(H, 2)


def test_hard_threshold():
    assert hard_threshold_support(np.array([3.0, -5.0, 1.0]), 2).tolist() == [0, 1]
    assert hard_threshold_support(np.ones(4), 4).tolist() == [0, 1, 2, 3]
    assert hard_threshold_support(np.ones(4), 0).size == 0
    with pytest.raises(ValueError):
        hard_threshold_support(np.ones(3), 4)


def test_hard_threshold_ties_against_stable_sort():
    rng = np.random.default_rng(2)
    for _ in range(200):
        z = rng.integers(-3, 4, size=9).astype(float)
        s = int(rng.integers(0, 10))
        ranked = sorted(range(9), key=lambda i: (-abs(z[i]), i))
        assert hard_threshold_support(z, s).tolist() == sorted(ranked[:s])


def test_restricted_updates(small_problem):
    p = small_problem
    cfg = PhppConfig(lam=p.lam, alpha=2.0)
    rng = np.random.default_rng(3)
    u, v = rng.standard_normal(8), rng.standard_normal(8)
    everything = np.arange(8)
    assert np.allclose(restricted_update_u(p, cfg, u, v, everything, p.T),
                       phpp_update_u(p, cfg, u, v), atol=1e-12)
    assert np.allclose(restricted_update_v(p, cfg, u, v, everything, p.T),
                       phpp_update_v(p, cfg, u, v), atol=1e-12)
    # partner vanishes off S: the restricted system is exact
    S = np.array([0, 2, 3, 6])
    v_s = np.where(np.isin(np.arange(8), S), v, 0.0)
    assert np.allclose(restricted_update_u(p, cfg, u, v_s, S, p.T),
                       phpp_update_u(p, cfg, u, v_s), atol=1e-10)
    assert np.allclose(restricted_update_v(p, cfg, v_s, u, S, p.T),
                       phpp_update_v(p, cfg, v_s, u), atol=1e-10)


def test_restricted_empty_set_halves():
    rng = np.random.default_rng(0)
    p = TailProblem(rng.standard_normal((3, 4)), rng.standard_normal(3), 0.5)
    cfg = PhppConfig(lam=0.5, alpha=2.0)
    u = rng.standard_normal(4)
    assert np.allclose(restricted_update_u(p, cfg, u, u, [], []), u / 2)
    assert np.allclose(restricted_update_v(p, cfg, u, u, [], []), u / 2)
    # coordinates on T are kept
    assert np.allclose(restricted_update_u(p, cfg, u, u, [], [1])[1], u[1])


def test_improved_with_zero_threshold_matches_full():
    inst = make_instance(16, 16, 3, seed=2)
    lam = 0.05
    cfg = PhppConfig(lam=lam, alpha=5.0, tau=0.0, k0=16, kp=0, max_iters=5)
    w0 = default_init(inst.A, inst.y, 1)
    z2, _ = solve_phpp_improved(inst.A, inst.y, cfg, w0)
    w1, _ = solve_phpp(TailProblem(inst.A, inst.y, lam, np.arange(16)), cfg, w0)
    assert np.allclose(z2, w1.z, atol=1e-10)


def test_improved_support_schedule():
    inst = make_instance(12, 30, 2, seed=5)
    cfg = PhppConfig(lam=0.01, alpha=1000.0, k0=2, kp=3, max_iters=8, step_tol=0, kkt_tol=0)
    _, trace = solve_phpp_improved(inst.A, inst.y, cfg, seed=1)
    sizes = trace.column("t_size")
    assert sizes[0] == 2
    assert np.all(sizes[1:] == np.minimum(2 + 3 * np.arange(1, sizes.size), 12))
    _, trace = solve_phpp_improved(inst.A, inst.y, cfg, seed=1, T0=inst.truth.support)
    assert trace.column("t_size")[0] == 2


def test_improved_recovers_moderate_instance():
    inst = make_instance(64, 256, 12, seed=21)
    z, trace = solve_phpp_improved(inst.A, inst.y, PhppConfig.noiseless_defaults(64), seed=21)
    assert np.linalg.norm(z - inst.x) <= 1e-4
    assert np.all(trace.column("s_size") <= 256)

"""Seeded experiment runner: success-rate sweeps, timing, RIP curves, traces.

Each trial seed is ``derive_seed(master_seed, grid_id, trial)``, so results do
not depend on worker count or scheduling. Records are sorted by
``(grid_id, trial, solver)`` before they are written.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import baselines
from .analysis import InsufficientTraceError, rip_estimate, rate_estimate
from .objective import TailProblem, kkt_report
from .phpp import PhppConfig, hard_threshold_support, solve_phpp, solve_phpp_improved
from .problem_gen import ENSEMBLES, NoiseModel, derive_seed, gen_matrix, make_instance

log = logging.getLogger(__name__)

KINDS = ("sweep_k", "sweep_m", "noisy_sweep", "timing", "rip_curve", "convergence_trace")
SOLVERS = ("phpp", "tail_hpp", "hpp", "cosamp", "omp", "sp", "htp", "tail_l1", "tail_lasso")
RECORD_FIELDS = ("grid_id", "n", "m", "k", "trial", "solver", "seed", "error", "success",
                 "wall_time_s", "iters")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SolverSpec:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    ensemble: str = "gaussian"
    n: int | None = None
    m: int | None = None
    k: int | None = None
    n_grid: tuple = ()
    m_grid: tuple = ()
    k_grid: tuple = ()
    m_ratio: float | None = None
    k_ratio: float | None = None
    trials: int = 1
    noise: NoiseModel = NoiseModel()
    solvers: tuple = ()
    success_threshold: float = 1e-4
    seed: int = 0
    record_wall_time: bool | None = None
    # rip_curve
    budget: int = 10**6
    mc_trials: int = 10_000
    # convergence_trace
    t_size: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.ensemble not in ENSEMBLES:
            raise ConfigError(f"unknown ensemble {self.ensemble!r}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.success_threshold > 0:
            raise ConfigError("success_threshold must be positive")
        if self.kind == "noisy_sweep" and (self.noise.kind == "none" or self.noise.sigma == 0):
            raise ConfigError("noisy_sweep needs a non-zero noise model")
        for s in self.solvers:
            if s.name not in SOLVERS:
                raise ConfigError(f"unknown solver {s.name!r}; expected one of {SOLVERS}")
        if self.kind != "rip_curve" and not self.grid():
            raise ConfigError("empty experiment grid")
        for n, m, k in self.grid():
            if not (1 <= k <= n and m >= 1):
                raise ConfigError(f"invalid grid point n={n}, m={m}, k={k}")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        try:
            noise = NoiseModel(**d.pop("noise", {}) or {})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad noise model: {exc}") from exc
        solvers = tuple(SolverSpec(s["name"], dict(s.get("params", {})))
                        for s in d.pop("solvers", [])) or tuple(SolverSpec(s) for s in SOLVERS[:7])
        for key in ("n_grid", "m_grid", "k_grid"):
            d[key] = tuple(int(v) for v in d.get(key, ()))
        return cls(noise=noise, solvers=solvers, **d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def replace(self, **changes) -> "ExperimentConfig":
        return type(self)(**{**self.__dict__, **changes})

    def grid(self) -> list[tuple[int, int, int]]:
        """Ordered (n, m, k) grid points."""
        points = []
        for n in self.n_grid or ((self.n,) if self.n is not None else ()):
            if self.m_grid:
                ms = self.m_grid
            elif self.m is not None:
                ms = (self.m,)
            elif self.m_ratio is not None:
                ms = (max(1, round(self.m_ratio * n)),)
            else:
                ms = ()
            if self.k_grid:
                ks = self.k_grid
            elif self.k is not None:
                ks = (self.k,)
            elif self.k_ratio is not None:
                ks = (max(1, round(self.k_ratio * n)),)
            else:
                ks = ()
            points.extend((int(n), int(m), int(k)) for m in ms for k in ks)
        return points

    @property
    def wall_time_in_records(self) -> bool:
        if self.record_wall_time is None:
            return self.kind == "timing"
        return self.record_wall_time


@dataclass(frozen=True)
class TrialRecord:
    grid_id: int
    n: int
    m: int
    k: int
    trial: int
    solver: str
    seed: int
    error: float
    success: bool
    wall_time_s: float
    iters: int


def default_lambda(noise: NoiseModel, m: int, n: int) -> float:
    """``sigma * sqrt(log n / m)`` with noise, ``0.1 / m`` without."""
    if noise.kind != "none" and noise.sigma > 0:
        return noise.sigma * math.sqrt(math.log(n) / m)
    return 0.1 / m


def _phpp_config(params, lam, m):
    lam = params.get("lambda", lam)
    return PhppConfig(
        lam=lam,
        alpha=params.get("alpha", 10.0 / lam),
        tau=params.get("tau", 1e-5),
        k0=params.get("k0", 1),
        kp=params.get("kp", 1),
        max_iters=params.get("max_iters", 1000),
        step_tol=params.get("step_tol", 1e-10),
        kkt_tol=params.get("kkt_tol", 1e-8),
    )


def run_solver(spec: SolverSpec, inst, noise: NoiseModel, seed: int):
    """Run one solver on one instance; returns ``(z_hat, iterations)``."""
    A, y = inst.A, inst.y
    m, n = A.shape
    k = int(spec.params.get("k", inst.truth.k))
    lam = default_lambda(noise, m, n)
    name = spec.name
    if name in ("phpp", "hpp", "tail_hpp"):
        cfg = _phpp_config(spec.params, lam, m)
        if name == "phpp":
            z, trace = solve_phpp_improved(A, y, cfg, seed=seed)
        else:
            T = () if name == "hpp" else hard_threshold_support(A.T @ y, min(k, n))
            w, trace = solve_phpp(TailProblem(A, y, cfg.lam, T), cfg, seed=seed)
            z = w.z
        return z, trace.iterations
    if name in ("omp", "cosamp", "sp", "htp"):
        bcfg = baselines.BaselineConfig(k=min(k, m), max_iters=spec.params.get("max_iters", 100),
                                        residual_tol=spec.params.get("residual_tol", 1e-10))
        return getattr(baselines, name)(A, y, bcfg, full_output=True)
    if name == "tail_lasso":
        T = inst.truth.support if spec.params.get("oracle_support", True) else ()
        z = baselines.tail_lasso_oracle(TailProblem(A, y, spec.params.get("lambda", lam), T))
        return z, 0
    if name == "tail_l1":
        T = inst.truth.support if spec.params.get("oracle_support", True) else ()
        eps = spec.params.get("eps", float(np.linalg.norm(inst.noise)))
        return baselines.tail_l1_constrained(A, y, T, eps=eps), 0
    raise ConfigError(f"unknown solver {name!r}")


def run_trial(cfg: ExperimentConfig, grid_id: int, point, trial: int, keep_solutions=False):
    n, m, k = point
    seed = derive_seed(cfg.seed, grid_id, trial)
    inst = make_instance(m, n, k, seed, cfg.ensemble, cfg.noise)
    records, solutions = [], {}
    x = inst.x
    for spec in cfg.solvers:
        t0 = time.perf_counter()
        z, iters = run_solver(spec, inst, cfg.noise, seed)
        elapsed = time.perf_counter() - t0
        err = float(np.linalg.norm(z - x))
        records.append(TrialRecord(grid_id, n, m, k, trial, spec.name, seed, err,
                                   err <= cfg.success_threshold, elapsed, int(iters)))
        if keep_solutions:
            solutions[f"g{grid_id}_t{trial}_{spec.name}"] = z
    if keep_solutions:
        solutions[f"g{grid_id}_t{trial}_truth"] = x
    return records, solutions


def _single_thread_init():
    threadpool_limits(1)


def _run_trial_packed(args):
    with threadpool_limits(1):
        return run_trial(*args)


def _iter_trials(cfg, jobs, keep_solutions):
    tasks = [(cfg, g, point, t, keep_solutions)
             for g, point in enumerate(cfg.grid()) for t in range(cfg.trials)]
    if jobs <= 1:
        for task in tasks:
            yield _run_trial_packed(task)
    else:
        with ProcessPoolExecutor(jobs, initializer=_single_thread_init) as pool:
            yield from pool.map(_run_trial_packed, tasks, chunksize=max(1, len(tasks) // (8 * jobs)))


def _order(cfg):
    rank = {s.name: i for i, s in enumerate(cfg.solvers)}
    return lambda r: (r.grid_id, r.trial, rank[r.solver])


def summarize(records) -> dict:
    """Per grid point and solver: success rate, mean error, mean solver time."""
    out: dict = {}
    for r in records:
        point = out.setdefault(str(r.grid_id), {"n": r.n, "m": r.m, "k": r.k, "solvers": {}})
        acc = point["solvers"].setdefault(r.solver, {"_s": 0, "_e": [], "_t": []})
        acc["_s"] += int(r.success)
        acc["_e"].append(r.error)
        acc["_t"].append(r.wall_time_s)
    for point in out.values():
        for name, acc in point["solvers"].items():
            cnt = len(acc["_e"])
            point["solvers"][name] = {
                "success_rate": acc["_s"] / cnt,
                "mean_error": float(np.mean(acc["_e"])),
                "mean_time_s": float(np.mean(acc["_t"])),
                "trials": cnt,
            }
    return out


def write_records(path, records, with_time: bool):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([r.grid_id, r.n, r.m, r.k, r.trial, r.solver, r.seed, repr(r.error),
                        int(r.success), repr(r.wall_time_s) if with_time else "", r.iters])


def read_records(path) -> list[TrialRecord]:
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [TrialRecord(int(r["grid_id"]), int(r["n"]), int(r["m"]), int(r["k"]), int(r["trial"]),
                        r["solver"], int(r["seed"]), float(r["error"]), r["success"] == "1",
                        float(r["wall_time_s"]) if r["wall_time_s"] else math.nan, int(r["iters"]))
            for r in rows]


def _persist(out_dir, cfg, records, solutions):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = sorted(records, key=_order(cfg))
    write_records(out / "records.csv", records, cfg.wall_time_in_records)
    summary = summarize(records)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    if solutions:
        np.savez_compressed(out / "solutions.npz", **solutions)
    return records, summary


def run_sweep(cfg: ExperimentConfig, out_dir=None, jobs: int = 1, dump_solutions: bool = False):
    """Run every (grid point, trial, solver) combination.

    Returns ``(records, summary)``; with ``out_dir`` writes ``records.csv``,
    ``summary.json`` and optionally ``solutions.npz``. On interruption the
    trials finished so far are written before re-raising.
    """
    records, solutions = [], {}
    try:
        for recs, sols in _iter_trials(cfg, jobs, dump_solutions):
            records.extend(recs)
            solutions.update(sols)
    except KeyboardInterrupt:
        if out_dir is not None:
            log.warning("interrupted; writing %d partial records", len(records))
            _persist(out_dir, cfg, records, solutions)
        raise
    if out_dir is not None:
        return _persist(out_dir, cfg, records, solutions)
    records.sort(key=_order(cfg))
    return records, summarize(records)


def run_timing(cfg: ExperimentConfig, out_dir=None, jobs: int = 1):
    """Mean solver wall time per grid point; informational, hardware dependent."""
    if cfg.record_wall_time is None:
        cfg = cfg.replace(record_wall_time=True)
    records, summary = run_sweep(cfg, out_dir, jobs)
    rows = []
    for g, point in summary.items():
        for name, s in point["solvers"].items():
            rows.append({"grid_id": int(g), "n": point["n"], "m": point["m"], "k": point["k"],
                         "solver": name, "mean_time_s": s["mean_time_s"],
                         "success_rate": s["success_rate"], "trials": s["trials"]})
    rows.sort(key=lambda r: (r["grid_id"], [s.name for s in cfg.solvers].index(r["solver"])))
    if out_dir is not None:
        with open(Path(out_dir) / "timing.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return rows


def run_rip_curve(cfg: ExperimentConfig, out_dir=None, A=None):
    """RIP constants per order in ``k_grid``; exact within ``budget``, Monte-Carlo beyond."""
    if A is None:
        if cfg.n is None or cfg.m is None:
            raise ConfigError("rip_curve needs n and m")
        A = gen_matrix(cfg.ensemble, cfg.m, cfg.n, derive_seed(cfg.seed, 0, 0))
    ks = cfg.k_grid or ((cfg.k,) if cfg.k else ())
    if not ks:
        raise ConfigError("rip_curve needs k or k_grid")
    rows = []
    for i, k in enumerate(ks):
        est = rip_estimate(A, k, budget=cfg.budget, trials=cfg.mc_trials,
                           seed=derive_seed(cfg.seed, 1, i))
        rows.append({"k": est.order, "delta_l": est.lower, "delta_u": est.upper,
                     "method": est.method, "samples": est.samples})
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "rip_curve.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
    return rows


def run_convergence_trace(cfg: ExperimentConfig, out_dir=None, instance=None):
    """Deep fixed-support run of the alternating solver plus its empirical rate.

    ``T`` holds the ``t_size`` largest true coefficients. The run stops when
    the step falls to ``step_tol`` (default 1e-13).
    """
    n, m, k = cfg.grid()[0]
    inst = instance or make_instance(m, n, k, derive_seed(cfg.seed, 0, 0), cfg.ensemble, cfg.noise)
    m, n = inst.A.shape
    params = cfg.solvers[0].params if cfg.solvers else {}
    lam = params.get("lambda", default_lambda(cfg.noise, m, n))
    base = _phpp_config({"step_tol": 1e-13, "kkt_tol": 0.0, "max_iters": 50_000, **params}, lam, m)
    pcfg = PhppConfig(**{**base.__dict__, "keep_iterates": True})
    order = np.argsort(-np.abs(inst.truth.values), kind="stable")
    T = inst.truth.support[order[:min(cfg.t_size, inst.truth.k)]]
    p = TailProblem(inst.A, inst.y, pcfg.lam, T)
    w_star, trace = solve_phpp(p, pcfg, seed=derive_seed(cfg.seed, 0, 1))
    r = [w.distance(w_star) for w in trace.iterates[1:]]
    try:
        tau, window = rate_estimate(trace, w_star)
    except InsufficientTraceError as exc:
        tau, window = None, 0
        log.info("no rate estimate: %s", exc)
    rows = [{"iter": rec.iter, "g": rec.g, "f": rec.f, "step": rec.step, "kkt": rec.kkt,
             "r": dist} for rec, dist in zip(trace.records, r)]
    report = {"tau_rate": tau, "window": window, "linear": tau is not None and tau < 1,
              "status": trace.status, "iterations": trace.iterations,
              "final_kkt": kkt_report(p, w_star.z).overall, "lambda": pcfg.lam,
              "alpha": pcfg.alpha, "T": [int(t) for t in T]}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=["iter", "g", "f", "step", "kkt", "r"],
                               lineterminator="\n")
            w.writeheader()
            w.writerows(rows)
        with open(out / "rate.json", "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
    return rows, report


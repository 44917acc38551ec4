"""Seeded generation of sensing matrices, sparse signals and noise.

Every generator is a pure function of its arguments. Randomness comes from
``numpy.random.SeedSequence`` keyed by ``(seed, stream role)`` so the matrix,
signal, noise and solver-initialization streams of one trial never overlap.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# stream roles, appended to the seed as a spawn key
MATRIX_STREAM = 0
SIGNAL_STREAM = 1
NOISE_STREAM = 2
INIT_STREAM = 3

ENSEMBLES = ("gaussian", "partial_dct")
NOISE_KINDS = ("none", "gaussian", "student_t")


def stream(seed: int, role: int) -> np.random.Generator:
    """Return the generator for one stream role of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(role,)))


def derive_seed(*keys: int) -> int:
    """Hash an ordered tuple of non-negative integers to a 63-bit seed."""
    state = np.random.SeedSequence([int(k) for k in keys]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


@dataclass(frozen=True)
class SparseSignal:
    n: int
    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.support.shape != self.values.shape:
            raise ValueError("support and values must have equal length")
        if self.support.size and (
            np.any(np.diff(self.support) <= 0) or self.support[0] < 0 or self.support[-1] >= self.n
        ):
            raise ValueError("support must be strictly increasing inside [0, n)")

    @property
    def k(self) -> int:
        return int(self.support.size)

    @property
    def dense(self) -> np.ndarray:
        x = np.zeros(self.n)
        x[self.support] = self.values
        return x

    @classmethod
    def from_dense(cls, x) -> "SparseSignal":
        x = np.asarray(x, dtype=float)
        support = np.flatnonzero(x)
        return cls(x.size, support, x[support].copy())


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    sigma: float = 0.0
    dof: float = 5.0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")
        if self.kind == "student_t" and not self.dof > 0:
            raise ValueError("dof must be positive for student_t noise")


@dataclass(frozen=True)
class ProblemInstance:
    A: np.ndarray
    truth: SparseSignal
    noise: np.ndarray
    y: np.ndarray
    seed: int = 0
    ensemble: str = "gaussian"
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return self.truth.dense

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


def _check_dims(m, n):
    if int(m) < 1 or int(n) < 1:
        raise ValueError(f"matrix dimensions must be positive, got m={m}, n={n}")


def _normalize_columns(A):
    norms = np.linalg.norm(A, axis=0)
    return A / norms, norms


def gen_gaussian_matrix(m: int, n: int, seed: int) -> np.ndarray:
    """Standard normal entries, each column scaled to unit Euclidean norm."""
    _check_dims(m, n)
    rng = stream(seed, MATRIX_STREAM)
    while True:
        A, norms = _normalize_columns(rng.standard_normal((m, n)))
        if np.all(norms > 0):
            return np.ascontiguousarray(A)


def gen_partial_dct(m: int, n: int, seed: int, psi=None) -> np.ndarray:
    """Random partial cosine matrix ``cos(2*pi*(j-1)*psi_i)`` with unit columns.

    ``psi`` may be given explicitly (length ``m``); otherwise it is drawn
    uniformly on [0, 1] from the matrix stream of ``seed``. A zero column
    (probability zero) triggers a redraw of ``psi``.
    """
    _check_dims(m, n)
    rng = stream(seed, MATRIX_STREAM)
    cols = np.arange(n)
    while True:
        p = rng.uniform(0.0, 1.0, size=m) if psi is None else np.asarray(psi, dtype=float)
        if p.shape != (m,):
            raise ValueError("psi must have length m")
        A, norms = _normalize_columns(np.cos(2.0 * np.pi * np.outer(p, cols)))
        if np.all(norms > 0):
            return np.ascontiguousarray(A)
        if psi is not None:
            raise ValueError("psi produces a zero column")


def gen_matrix(ensemble: str, m: int, n: int, seed: int) -> np.ndarray:
    if ensemble == "gaussian":
        return gen_gaussian_matrix(m, n, seed)
    if ensemble == "partial_dct":
        return gen_partial_dct(m, n, seed)
    raise ValueError(f"unknown ensemble {ensemble!r}")


def gen_sparse_signal(n: int, k: int, seed: int) -> SparseSignal:
    """Uniform random ``k``-subset support with i.i.d. standard normal values."""
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = stream(seed, SIGNAL_STREAM)
    support = np.sort(rng.choice(n, size=k, replace=False))
    values = rng.standard_normal(k)
    return SparseSignal(int(n), support.astype(np.intp), values)


def gen_noise(model: NoiseModel, m: int, seed: int) -> np.ndarray:
    """Noise vector with entries ``sigma * xi / sqrt(m)``.

    ``xi`` is standard normal for the gaussian kind and Student-t for the
    student_t kind, sampled as a normal over ``sqrt(chi2(dof) / dof)``.
    """
    if m < 1:
        raise ValueError("m must be positive")
    if model.kind == "none" or model.sigma == 0:
        return np.zeros(m)
    rng = stream(seed, NOISE_STREAM)
    g = rng.standard_normal(m)
    if model.kind == "student_t":
        g = g / np.sqrt(rng.chisquare(model.dof, size=m) / model.dof)
    return model.sigma * g / np.sqrt(m)


def assemble_instance(A, truth: SparseSignal, noise, seed: int = 0,
                      ensemble: str = "gaussian", **meta) -> ProblemInstance:
    A = np.asarray(A, dtype=float)
    noise = np.asarray(noise, dtype=float)
    m, n = A.shape
    if truth.n != n or noise.shape != (m,):
        raise ValueError(
            f"dimension mismatch: A is {m}x{n}, signal has n={truth.n}, noise has {noise.shape}"
        )
    y = A @ truth.dense + noise
    return ProblemInstance(A, truth, noise, y, int(seed), ensemble, dict(meta))


def make_instance(m: int, n: int, k: int, seed: int, ensemble: str = "gaussian",
                  noise: NoiseModel | None = None) -> ProblemInstance:
    """Generate a full trial instance from one trial seed."""
    noise = noise or NoiseModel()
    A = gen_matrix(ensemble, m, n, seed)
    truth = gen_sparse_signal(n, k, seed)
    w = gen_noise(noise, m, seed)
    return assemble_instance(A, truth, w, seed=seed, ensemble=ensemble, noise_model=noise)

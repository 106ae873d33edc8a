"""Mutation models and populations.

A mutation model is a K x K row-stochastic per-event transition matrix P
(entry P[j][i] is the probability that a mutating ancestor of type j
produces an offspring of type i) together with a scaled mutation rate mu.
Two built-in generators produce matrices over K = 2^L bit-string types;
arbitrary dense matrices can be supplied directly, so any published
parent-dependent model is reproducible by providing its matrix.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .rng import Stream

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10
DEFAULT_MAX_LOCI = 15

# Levels with at most this many types use a direct linear solve for the
# stationary distribution; larger matrices use (lazy-chain) power iteration.
_DIRECT_SOLVE_MAX_TYPES = 64
_POWER_ITERATION_CAP = 1_000_000


def _validate_transition(P: np.ndarray) -> np.ndarray:
    P = np.ascontiguousarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 1:
        raise InputError("transition matrix must be square and non-empty")
    if np.any(P < 0.0) or np.any(P > 1.0):
        raise InputError("transition matrix entries must lie in [0, 1]")
    rows = P.sum(axis=1)
    if np.max(np.abs(rows - 1.0)) > ROW_SUM_TOL:
        worst = int(np.argmax(np.abs(rows - 1.0)))
        raise InputError(
            f"transition matrix row {worst} sums to {rows[worst]!r}, not 1"
        )
    return P


@dataclass
class MutationModel:
    """Per-event transition matrix plus scaled mutation rate."""

    num_types: int
    transition: np.ndarray
    mu: float

    def __post_init__(self):
        self.transition = _validate_transition(self.transition)
        if self.num_types != self.transition.shape[0]:
            raise InputError("num_types does not match transition matrix size")
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise InputError("mu must be positive and finite")
        self.transition.setflags(write=False)

    @classmethod
    def from_matrix(cls, transition, mu: float) -> "MutationModel":
        transition = np.asarray(transition, dtype=np.float64)
        return cls(num_types=transition.shape[0], transition=transition, mu=mu)

    def with_mu(self, mu: float) -> "MutationModel":
        return MutationModel(self.num_types, self.transition, mu)


@dataclass
class Configuration:
    """Counts of individuals per type; the simulator's state."""

    counts: np.ndarray
    total: int = field(init=False)

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size < 1:
            raise InputError("counts must be a non-empty 1-d vector")
        if np.any(counts < 0) or not np.issubdtype(counts.dtype, np.integer):
            counts_f = np.asarray(counts, dtype=np.float64)
            if np.any(counts_f < 0) or np.any(counts_f != np.floor(counts_f)):
                raise InputError("counts must be non-negative integers")
        self.counts = np.ascontiguousarray(counts, dtype=np.int64)
        self.total = int(self.counts.sum())
        if self.total < 1:
            raise InputError("total population size must be at least 1")

    @classmethod
    def _trusted(cls, counts: np.ndarray, total: int) -> "Configuration":
        # fast path for already-validated kernel output
        obj = cls.__new__(cls)
        obj.counts = counts
        obj.total = total
        return obj


@dataclass
class StationaryDistribution:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.ascontiguousarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.size < 1:
            raise InputError("stationary probabilities must be a 1-d vector")
        if np.any(probs < 0.0):
            raise InputError("stationary probabilities must be non-negative")
        if abs(probs.sum() - 1.0) > STATIONARY_TOL:
            raise InputError("stationary probabilities must sum to 1")
        probs.setflags(write=False)
        self.probs = probs


def _guard_loci(L: int, max_loci: int) -> None:
    if L < 1:
        raise InputError("number of loci must be at least 1")
    if L > max_loci:
        k = 2**L
        gib = k * k * 8 / 2**30
        raise InputError(
            f"L={L} loci would need a dense {k}x{k} matrix "
            f"(about {gib:,.1f} GiB); the guard refuses L > {max_loci}. "
            "Raise max_loci explicitly to override."
        )


def build_flip_model(L: int, a, b, max_loci: int = DEFAULT_MAX_LOCI) -> np.ndarray:
    """Tensor product of per-locus 2x2 flip kernels [[1-a, a], [b, 1-b]].

    Bit l of the type index holds locus l's allele.  The model is
    parent-dependent whenever some a[l] != b[l].
    """
    _guard_loci(L, max_loci)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (L,) or b.shape != (L,):
        raise InputError("a and b must both have one entry per locus")
    if np.any(a <= 0.0) or np.any(a >= 1.0) or np.any(b <= 0.0) or np.any(b >= 1.0):
        raise InputError("per-locus flip probabilities must lie in (0, 1)")
    P = np.array([[1.0]])
    for al, bl in zip(a, b):
        kernel = np.array([[1.0 - al, al], [bl, 1.0 - bl]])
        # new locus becomes the most significant bit so far, keeping
        # locus l at bit position l
        P = np.kron(kernel, P)
    return P


def build_single_site_model(L: int, max_loci: int = DEFAULT_MAX_LOCI) -> np.ndarray:
    """One mutation flips exactly one locus: P[j][i] = 1/L iff i, j differ in one bit."""
    _guard_loci(L, max_loci)
    K = 2**L
    P = np.zeros((K, K))
    idx = np.arange(K)
    for l in range(L):
        P[idx, idx ^ (1 << l)] = 1.0 / L
    return P


def stationary(
    model: MutationModel,
    tol: float = STATIONARY_TOL,
    max_iterations: int = _POWER_ITERATION_CAP,
) -> StationaryDistribution:
    """Left fixed point pi of the transition matrix, pi P = pi, sum(pi) = 1."""
    P = model.transition
    K = P.shape[0]
    pi = None
    if K <= _DIRECT_SOLVE_MAX_TYPES:
        A = P.T - np.eye(K)
        A[-1, :] = 1.0
        rhs = np.zeros(K)
        rhs[-1] = 1.0
        try:
            cand = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            cand = None
        if cand is not None and cand.min() > -1e-9:
            cand = np.clip(cand, 0.0, None)
            cand /= cand.sum()
            if np.max(np.abs(cand @ P - cand)) <= tol:
                pi = cand
    if pi is None:
        # lazy chain (P + I)/2 has the same fixed point and no periodicity
        pi = np.full(K, 1.0 / K)
        residual = np.inf
        for it in range(max_iterations):
            new = 0.5 * (pi @ P + pi)
            new /= new.sum()
            pi = new
            if it % 64 == 0:
                residual = np.max(np.abs(pi @ P - pi))
                if residual <= tol:
                    break
        else:
            residual = np.max(np.abs(pi @ P - pi))
        if residual > tol:
            raise NumericalError(
                f"stationary distribution did not converge: residual {residual:.3e} "
                f"after {max_iterations} iterations (target {tol:.1e})"
            )
    return StationaryDistribution(pi)


def sample_population(
    dist: StationaryDistribution, size: int, stream: Stream
) -> Configuration:
    """Multinomial(size, pi) population sample."""
    if size < 1:
        raise InputError("population size must be at least 1")
    cum = np.cumsum(dist.probs)
    u = stream.floats(size) * cum[-1]
    idx = np.minimum(
        np.searchsorted(cum, u, side="right"), dist.probs.size - 1
    )
    counts = np.bincount(idx, minlength=dist.probs.size).astype(np.int64)
    return Configuration(counts)


# ---------------------------------------------------------------------------
# model/population file schemas (JSON)

MODEL_KINDS = ("dense", "flip", "single-site")


def build_from_spec(spec: dict, max_loci: int = DEFAULT_MAX_LOCI) -> np.ndarray:
    """Materialise a transition matrix from a model spec dictionary.

    Spec forms: {"kind": "dense", "matrix": [[...]]},
    {"kind": "flip", "loci": L, "a": [...], "b": [...]},
    {"kind": "single-site", "loci": L}.
    """
    kind = spec.get("kind")
    if kind == "dense":
        if "matrix" not in spec or spec["matrix"] is None:
            raise InputError("dense model spec requires a 'matrix' field")
        return _validate_transition(np.asarray(spec["matrix"], dtype=np.float64))
    if kind == "flip":
        for key in ("loci", "a", "b"):
            if spec.get(key) is None:
                raise InputError(f"flip model spec requires a '{key}' field")
        return build_flip_model(int(spec["loci"]), spec["a"], spec["b"], max_loci)
    if kind == "single-site":
        if spec.get("loci") is None:
            raise InputError("single-site model spec requires a 'loci' field")
        return build_single_site_model(int(spec["loci"]), max_loci)
    raise InputError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


def population_to_dict(config: Configuration) -> dict:
    return {"num_types": int(config.counts.size), "counts": config.counts.tolist()}


def population_from_dict(data: dict) -> Configuration:
    if "num_types" not in data or "counts" not in data:
        raise InputError("population file requires 'num_types' and 'counts'")
    counts = np.asarray(data["counts"])
    if counts.size != int(data["num_types"]):
        raise InputError("population counts length does not match num_types")
    return Configuration(counts)

"""Monte Carlo driver: estimates, mu surfaces, MLE and trajectory summaries.

Simulation index m always uses random stream (master_seed, stream_offset + m),
so every estimate is a pure function of its inputs and the master seed, and
results are bit-identical for any worker count.
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .engine import EngineOptions, SimulationRecord, make_context, run_in_context
from .errors import InputError, NumericalError
from .model import Configuration, MutationModel, StationaryDistribution
from .rng import derive_stream

DEFAULT_MLE_BOUNDS = (0.1, 30.1)
DEFAULT_MLE_TOL = 1e-2


@dataclass
class SurfacePoint:
    mu: float
    log_likelihood: float
    std_error: float
    num_sims: int
    mean_sim_seconds: float
    degenerate_count: int


@dataclass
class MleResult:
    mu_hat: float
    log_likelihood_at_hat: float
    evaluations: int
    bounds: tuple[float, float]


@dataclass
class TrajectorySummary:
    """Population size across records as a function of the SEN."""

    sen: np.ndarray
    median_size: np.ndarray
    min_size: np.ndarray
    max_size: np.ndarray


def _run_chunk(payload) -> list[SimulationRecord]:
    (counts, transition, probs, mu, options, master_seed, start, stop, offset) = payload
    initial = Configuration(counts)
    model = MutationModel.from_matrix(transition, mu)
    dist = StationaryDistribution(probs)
    ctx = make_context(initial, model, dist, options)
    records = []
    for index in range(start, stop):
        stream = derive_stream(master_seed, offset + index)
        records.append(run_in_context(ctx, stream))
    return records


def run_simulations(
    initial: Configuration,
    model: MutationModel,
    dist: StationaryDistribution,
    options: EngineOptions,
    num_sims: int,
    master_seed: int,
    workers: int = 1,
    stream_offset: int = 0,
) -> list[SimulationRecord]:
    """num_sims independent simulations on streams offset..offset+num_sims-1,
    returned in stream-index order regardless of worker count."""
    if num_sims < 1:
        raise InputError("num_sims must be at least 1")
    base = (
        initial.counts,
        model.transition,
        dist.probs,
        model.mu,
        options,
        master_seed,
    )
    if workers <= 1 or num_sims == 1:
        return _run_chunk(base + (0, num_sims, stream_offset))

    nchunks = min(workers, num_sims)
    bounds = np.linspace(0, num_sims, nchunks + 1).astype(int)
    payloads = [
        base + (int(bounds[k]), int(bounds[k + 1]), stream_offset)
        for k in range(nchunks)
    ]
    records: list[SimulationRecord] = []
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for chunk in pool.map(_run_chunk, payloads):
            records.extend(chunk)
    return records


def aggregate(records: list[SimulationRecord], mu: float) -> SurfacePoint:
    """Log-likelihood and standard error from simulation records.

    Works on max-shifted weights u_m = exp(log_w_m - max) so raw weights are
    never formed; degenerate (-inf) records contribute zero and are counted.
    """
    m = len(records)
    log_weights = np.array([r.log_weight for r in records])
    degenerate = int(np.sum(np.isneginf(log_weights)))
    if degenerate == m:
        raise NumericalError("all simulation weights are degenerate (-inf)")
    shift = float(np.max(log_weights))
    u = np.exp(log_weights - shift)
    u_bar = float(u.mean())
    log_likelihood = math.log(u_bar) + shift
    if m > 1:
        std_error = float(u.std(ddof=1)) / (u_bar * math.sqrt(m))
    else:
        std_error = 0.0
    return SurfacePoint(
        mu=mu,
        log_likelihood=log_likelihood,
        std_error=std_error,
        num_sims=m,
        mean_sim_seconds=float(np.mean([r.elapsed_seconds for r in records])),
        degenerate_count=degenerate,
    )


def estimate(
    initial: Configuration,
    model: MutationModel,
    dist: StationaryDistribution,
    options: EngineOptions,
    num_sims: int,
    master_seed: int,
    workers: int = 1,
    stream_offset: int = 0,
) -> tuple[SurfacePoint, list[SimulationRecord]]:
    records = run_simulations(
        initial, model, dist, options, num_sims, master_seed, workers, stream_offset
    )
    return aggregate(records, model.mu), records


def surface(
    initial: Configuration,
    model: MutationModel,
    dist: StationaryDistribution,
    options: EngineOptions,
    mu_grid,
    num_sims: int,
    master_seed: int,
    workers: int = 1,
    crn: bool = True,
) -> list[SurfacePoint]:
    """One estimate per grid value of mu.

    With common random numbers (crn, the default) every grid point reuses
    stream indices 0..num_sims-1 under the same master seed, so the surface
    is a smooth deterministic function of mu; otherwise each point gets its
    own disjoint block of stream indices.
    """
    grid = np.asarray(mu_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("mu grid must be a non-empty 1-d sequence")
    if np.any(grid <= 0.0):
        raise InputError("mu grid values must be positive")
    if grid.size > 1 and np.any(np.diff(grid) <= 0.0):
        raise InputError("mu grid values must be strictly increasing")
    points = []
    for p, mu in enumerate(grid):
        offset = 0 if crn else p * num_sims
        point, _ = estimate(
            initial,
            model.with_mu(float(mu)),
            dist,
            options,
            num_sims,
            master_seed,
            workers,
            stream_offset=offset,
        )
        points.append(point)
    return points


def mle(
    initial: Configuration,
    transition: np.ndarray,
    dist: StationaryDistribution,
    options: EngineOptions,
    bounds: tuple[float, float] = DEFAULT_MLE_BOUNDS,
    num_sims: int = 1000,
    master_seed: int = 0,
    workers: int = 1,
    tol: float = DEFAULT_MLE_TOL,
) -> MleResult:
    """Maximise mu -> estimated log-likelihood over a bounded interval.

    Bounded scalar maximisation (golden section with parabolic steps).
    Every evaluation reuses the identical random streams, so the objective
    is a deterministic function of mu and the optimiser never chases
    Monte Carlo noise.
    """
    lo, hi = float(bounds[0]), float(bounds[1])
    if not (0.0 < lo < hi):
        raise InputError("bounds must satisfy 0 < lo < hi")
    if not tol > 0.0:
        raise InputError("tol must be positive")
    base_model = MutationModel.from_matrix(transition, lo)

    cache: dict[float, float] = {}

    def objective(mu: float) -> float:
        mu = float(mu)
        if mu not in cache:
            point, _ = estimate(
                initial,
                base_model.with_mu(mu),
                dist,
                options,
                num_sims,
                master_seed,
                workers,
            )
            cache[mu] = point.log_likelihood
        return cache[mu]

    minimize_scalar(
        lambda mu: -objective(mu),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": tol},
    )
    finite = {mu: ll for mu, ll in cache.items() if math.isfinite(ll)}
    if not finite:
        raise NumericalError("objective was non-finite at every probed mu")
    mu_hat = max(finite, key=finite.get)
    return MleResult(
        mu_hat=mu_hat,
        log_likelihood_at_hat=finite[mu_hat],
        evaluations=len(cache),
        bounds=(lo, hi),
    )


def trajectory_summary(
    records: list[SimulationRecord], initial_total: int
) -> TrajectorySummary:
    """Median/min/max population size per SEN across records.

    A record's size at SEN s is initial_total minus its number of
    coalescences at SENs <= s, carried at its final value past its end.
    """
    if not records:
        raise InputError("trajectory summary requires at least one record")
    max_events = max(r.event_count for r in records)
    sen = np.arange(max_events + 1, dtype=np.int64)
    sizes = np.empty((len(records), max_events + 1), dtype=np.int32)
    for k, record in enumerate(records):
        sens = np.asarray(record.coalescent_sens, dtype=np.int64)
        sizes[k] = initial_total - np.searchsorted(sens, sen, side="right")
    return TrajectorySummary(
        sen=sen,
        median_size=np.median(sizes, axis=0),
        min_size=sizes.min(axis=0),
        max_size=sizes.max(axis=0),
    )


def default_workers() -> int:
    return os.cpu_count() or 1

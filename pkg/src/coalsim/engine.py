"""One backward simulation: proposals, state updates, weights, stopping.

Backward events are either a coalescence within a type (true coefficient
nu = n_i * (n_i - 1)) or an ancestor j -> offspring i mutation
(nu = mu * n_i * P[j][i]); the total backward rate at population size n is
D(n) = n * (n - 1 + mu).  Each simulated event contributes
log(nu) - log(D) - log(q) to the importance weight, q being the proposal
probability actually used for the draw.
"""

import math
import time
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernel
from .errors import InputError, NumericalError
from .model import Configuration, MutationModel, StationaryDistribution
from .rng import Stream, categorical

DEFAULT_MAX_EVENTS = 10_000_000

PROPOSALS = ("two-stage", "joint")
FINAL_COALESCENCE_MODES = ("natural", "forced")
CORRECTIONS = ("stationary-product", "none")


class MoveKind(Enum):
    COALESCENCE = "coalescence"
    MUTATION = "mutation"


@dataclass(frozen=True)
class Move:
    """One backward event; ancestor_type is set for mutations only."""

    kind: MoveKind
    offspring_type: int
    ancestor_type: int | None = None


@dataclass
class EngineOptions:
    stop_size: int = 1
    proposal: str = "two-stage"
    final_coalescence: str = "natural"
    correction: str = "stationary-product"
    max_events: int = DEFAULT_MAX_EVENTS

    def __post_init__(self):
        if self.stop_size < 1:
            raise InputError("stop_size must be at least 1")
        if self.proposal not in PROPOSALS:
            raise InputError(f"proposal must be one of {PROPOSALS}")
        if self.final_coalescence not in FINAL_COALESCENCE_MODES:
            raise InputError(
                f"final_coalescence must be one of {FINAL_COALESCENCE_MODES}"
            )
        if self.correction not in CORRECTIONS:
            raise InputError(f"correction must be one of {CORRECTIONS}")
        if self.max_events < 1:
            raise InputError("max_events must be at least 1")


@dataclass
class SimulationRecord:
    """Outcome of one simulation; log_weight includes any correction term."""

    log_weight: float
    log_correction: float
    coalescent_sens: np.ndarray
    final_config: Configuration
    event_count: int
    elapsed_seconds: float

    @property
    def degenerate(self) -> bool:
        return self.log_weight == -math.inf


@dataclass
class TransitionTables:
    """Per-matrix lookups reused across simulations (read-only)."""

    colsum: np.ndarray
    colcum: np.ndarray  # colcum[i, j] = sum_{j' <= j} P[j'][i]


def prepare_tables(transition: np.ndarray) -> TransitionTables:
    colsum = np.ascontiguousarray(transition.sum(axis=0))
    colcum = np.ascontiguousarray(np.cumsum(transition, axis=0).T)
    return TransitionTables(colsum=colsum, colcum=colcum)


def total_rate(config: Configuration, mu: float) -> float:
    """Total backward event rate D(n) = n (n - 1 + mu)."""
    n = config.total
    if n < 2:
        raise InputError("no backward event is defined for fewer than 2 individuals")
    if not (mu > 0.0 and math.isfinite(mu)):
        raise InputError("mu must be positive and finite")
    return float(n) * (float(n - 1) + mu)


def move_coefficients(
    config: Configuration, model: MutationModel
) -> list[tuple[Move, float]]:
    """All moves with positive true coefficient, in normative scan order:
    coalescences by type, then mutations offspring-major/ancestor-minor."""
    if config.total < 2:
        raise InputError("no backward event is defined for fewer than 2 individuals")
    counts = config.counts
    P = model.transition
    mu = model.mu
    moves: list[tuple[Move, float]] = []
    for i in range(counts.size):
        ni = int(counts[i])
        if ni >= 2:
            moves.append((Move(MoveKind.COALESCENCE, i), float(ni * (ni - 1))))
    for i in range(counts.size):
        ni = int(counts[i])
        if ni < 1:
            continue
        for j in range(counts.size):
            pji = P[j, i]
            if pji > 0.0:
                moves.append(
                    (Move(MoveKind.MUTATION, i, j), float(mu * ni * pji))
                )
    if not moves:
        raise NumericalError("no admissible backward move from this configuration")
    return moves


def propose_move(
    config: Configuration,
    model: MutationModel,
    options: EngineOptions,
    stream: Stream,
    tables: TransitionTables | None = None,
) -> tuple[Move, float]:
    """Draw one backward event and return it with its proposal probability."""
    counts = config.counts
    n = config.total
    if n < 2:
        raise InputError("no backward event is defined for fewer than 2 individuals")
    P = model.transition
    mu = model.mu
    K = counts.size

    if options.proposal == "joint":
        moves = move_coefficients(config, model)
        nus = np.array([nu for _, nu in moves])
        total = float(np.cumsum(nus)[-1])
        k = categorical(stream, nus)
        return moves[k][0], float(nus[k]) / total

    if tables is None:
        tables = prepare_tables(P)
    Z = (counts - 1).astype(np.float64) + mu * tables.colsum

    # stage one draws proportional to counts; a type with a zero stage-two
    # normaliser (a singleton whose column is all zero) is resampled among
    # the remaining types, again proportional to counts.  The marginal
    # probability of landing on an eligible type i is then counts[i] / S,
    # with S the total count over eligible types.
    eligible = np.where((counts > 0) & (Z > 0.0), counts.astype(np.float64), 0.0)
    s_total = eligible.sum()
    if s_total <= 0.0:
        raise NumericalError("no admissible backward move from this configuration")
    i = categorical(stream, counts.astype(np.float64))
    if Z[i] <= 0.0:
        i = categorical(stream, eligible)
    q1 = counts[i] / s_total

    w2 = np.empty(K + 1)
    w2[0] = counts[i] - 1
    w2[1:] = mu * P[:, i]
    z_total = float(np.cumsum(w2)[-1])
    k = categorical(stream, w2)
    q2 = float(w2[k]) / z_total
    if k == 0:
        return Move(MoveKind.COALESCENCE, int(i)), float(q1 * q2)
    return Move(MoveKind.MUTATION, int(i), int(k - 1)), float(q1 * q2)


def apply_move(config: Configuration, move: Move) -> Configuration:
    counts = config.counts.copy()
    i = move.offspring_type
    if i < 0 or i >= counts.size:
        raise InputError("move offspring type out of range")
    if move.kind is MoveKind.COALESCENCE:
        if counts[i] < 2:
            raise InputError("coalescence requires at least 2 individuals of the type")
        counts[i] -= 1
    else:
        if counts[i] < 1:
            raise InputError("mutation requires at least 1 individual of the type")
        j = move.ancestor_type
        if j is None or j < 0 or j >= counts.size:
            raise InputError("mutation move requires a valid ancestor type")
        counts[i] -= 1
        counts[j] += 1
    return Configuration(counts)


def step_log_weight(nu: float, D: float, q: float) -> float:
    """log(nu) - log(D) - log(q), computed as one cancellation-free ratio."""
    if not (nu > 0.0 and D > 0.0 and q > 0.0):
        raise InputError("nu, D and q must all be positive")
    if not (math.isfinite(nu) and math.isfinite(D) and math.isfinite(q)):
        raise InputError("nu, D and q must all be finite")
    return math.log(nu / (D * q))


def terminal_log_factor(
    final: Configuration, dist: StationaryDistribution, options: EngineOptions
) -> float:
    """Terminal weight factor: log pi_t in full mode, the stationary-product
    correction sum(n_i log pi_i) on early stop, or 0 with correction off."""
    probs = dist.probs
    if final.counts.size != probs.size:
        raise InputError("configuration and stationary distribution sizes differ")
    if options.stop_size == 1:
        if final.total != 1:
            raise InputError("full mode requires a single remaining individual")
        t = int(np.argmax(final.counts))
        p = probs[t]
        return math.log(p) if p > 0.0 else -math.inf
    if final.total != options.stop_size:
        raise InputError("early-stopped configuration does not match stop_size")
    if options.correction == "none":
        return 0.0
    occupied = final.counts > 0
    if np.any(probs[occupied] == 0.0):
        return -math.inf
    return float(np.dot(final.counts[occupied], np.log(probs[occupied])))


@dataclass
class SimulationContext:
    """Validated, pre-decoded inputs for running many simulations cheaply."""

    counts0: np.ndarray
    transition: np.ndarray
    colsum: np.ndarray
    colcum: np.ndarray
    mu: float
    stop_size: int
    proposal_code: int
    forced: bool
    max_events: int
    log_pi: np.ndarray
    terminal_mode: int
    record_correction: bool


def make_context(
    initial: Configuration,
    model: MutationModel,
    dist: StationaryDistribution,
    options: EngineOptions,
    tables: TransitionTables | None = None,
) -> SimulationContext:
    if initial.total < 2:
        raise InputError("initial population must have at least 2 individuals")
    if initial.counts.size != model.num_types:
        raise InputError("population and model have different numbers of types")
    if dist.probs.size != model.num_types:
        raise InputError("stationary distribution and model sizes differ")
    if options.stop_size > initial.total:
        raise InputError("stop_size exceeds the initial population size")
    if tables is None:
        tables = prepare_tables(model.transition)
    with np.errstate(divide="ignore"):
        log_pi = np.log(dist.probs)
    early_stop = options.stop_size > 1
    if not early_stop:
        terminal_mode = _kernel.TERMINAL_FULL
    elif options.correction == "stationary-product":
        terminal_mode = _kernel.TERMINAL_PRODUCT
    else:
        terminal_mode = _kernel.TERMINAL_NONE
    return SimulationContext(
        counts0=initial.counts,
        transition=model.transition,
        colsum=tables.colsum,
        colcum=tables.colcum,
        mu=model.mu,
        stop_size=options.stop_size,
        proposal_code=_kernel.PROPOSAL_JOINT
        if options.proposal == "joint"
        else _kernel.PROPOSAL_TWO_STAGE,
        forced=options.final_coalescence == "forced",
        max_events=options.max_events,
        log_pi=log_pi,
        terminal_mode=terminal_mode,
        record_correction=early_stop and options.correction == "stationary-product",
    )


def run_in_context(ctx: SimulationContext, stream: Stream) -> SimulationRecord:
    start = time.perf_counter()
    log_steps, sens, nsen, events, final_counts, status = _kernel.simulate(
        ctx.counts0,
        ctx.transition,
        ctx.colsum,
        ctx.colcum,
        ctx.mu,
        ctx.stop_size,
        ctx.proposal_code,
        ctx.forced,
        ctx.max_events,
        stream.state,
    )
    if status != _kernel.STATUS_OK:
        if status == _kernel.STATUS_MAX_EVENTS:
            raise NumericalError(
                f"simulation exceeded the event cap of {ctx.max_events} events"
            )
        raise NumericalError("no admissible backward move from this configuration")
    terminal = _kernel.terminal_factor(final_counts, ctx.log_pi, ctx.terminal_mode)
    return SimulationRecord(
        log_weight=log_steps + terminal,
        log_correction=terminal if ctx.record_correction else 0.0,
        coalescent_sens=sens[:nsen],
        final_config=Configuration._trusted(
            final_counts, ctx.stop_size if ctx.stop_size > 1 else 1
        ),
        event_count=int(events),
        elapsed_seconds=time.perf_counter() - start,
    )


def simulate_once(
    initial: Configuration,
    model: MutationModel,
    dist: StationaryDistribution,
    options: EngineOptions,
    stream: Stream,
    tables: TransitionTables | None = None,
) -> SimulationRecord:
    """Run one backward simulation until the stop condition and weigh it.

    Iterates propose -> weight -> apply, recording the sequential event
    number of every coalescence.  Stops when the population reaches
    stop_size (stop_size = 1 simulates down to the single ancestor).
    """
    ctx = make_context(initial, model, dist, options, tables)
    return run_in_context(ctx, stream)

"""Deterministic, per-simulation random streams.

Streams are xoshiro256** generators (period 2^256 - 1).  The state of
stream ``stream_index`` under ``master_seed`` is derived with splitmix64
mixing:

    base   = mix64(master_seed) XOR mix64((stream_index + 1) * PHI64)
    word_k = mix64(base + (k + 1) * PHI64)      k = 0..3

where ``mix64`` is the splitmix64 finaliser and PHI64 the 64-bit golden
ratio constant.  For a fixed master seed, distinct stream indices are
guaranteed distinct 64-bit bases (the map is injective), so streams are
reproducible across runs and independent of worker scheduling.  Overlap
between two seeded xoshiro sequences is possible in principle but has
probability on the order of S^2 * L / 2^256 for S streams of length L,
i.e. it is negligible.

Simulations consume the state array directly from compiled code; the
Python-facing :class:`Stream` wraps the same state, so draws interleave
consistently.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import InputError

_MASK64 = (1 << 64) - 1
_PHI64 = 0x9E3779B97F4A7C15

_7 = np.uint64(7)
_57 = np.uint64(57)
_17 = np.uint64(17)
_45 = np.uint64(45)
_19 = np.uint64(19)
_11 = np.uint64(11)
_5 = np.uint64(5)
_9 = np.uint64(9)
_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(cache=True)
def _next_uint64(s):
    x = s[1] * _5
    result = ((x << _7) | (x >> _57)) * _9
    t = s[1] << _17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << _45) | (s[3] >> _19)
    return result


@njit(cache=True)
def _next_float(s):
    return np.float64(_next_uint64(s) >> _11) * _INV53


@njit(cache=True)
def _fill_floats(s, out):
    for i in range(out.shape[0]):
        out[i] = _next_float(s)


def _mix64(z: int) -> int:
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class StreamSpec:
    master_seed: int
    stream_index: int

    def __post_init__(self):
        if self.stream_index < 0:
            raise InputError("stream_index must be non-negative")


def derive_state(master_seed: int, stream_index: int) -> np.ndarray:
    """Initial xoshiro256** state for (master_seed, stream_index)."""
    if stream_index < 0:
        raise InputError("stream_index must be non-negative")
    base = _mix64(master_seed) ^ _mix64(((stream_index + 1) * _PHI64) & _MASK64)
    words = [_mix64((base + (k + 1) * _PHI64) & _MASK64) for k in range(4)]
    if not any(words):  # all-zero is a fixed point of xoshiro
        words[0] = 1
    return np.array(words, dtype=np.uint64)


class Stream:
    """One random stream, owned by a single simulation at a time."""

    __slots__ = ("state",)

    def __init__(self, state: np.ndarray):
        self.state = np.ascontiguousarray(state, dtype=np.uint64)

    def next_uint64(self) -> int:
        return int(_next_uint64(self.state))

    def next_float(self) -> float:
        return float(_next_float(self.state))

    def floats(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.float64)
        _fill_floats(self.state, out)
        return out


def derive_stream(master_seed: int, stream_index: int) -> Stream:
    return Stream(derive_state(master_seed, stream_index))


def categorical(stream: Stream, weights) -> int:
    """Draw an index with probability weights[i] / sum(weights).

    Uses a single uniform and a cumulative scan in index order; the scan
    order is part of the contract so results are reproducible.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise InputError("weights must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InputError("weights must be finite and non-negative")
    cum = np.cumsum(w)
    total = cum[-1]
    if total <= 0.0:
        raise InputError("weights must not be all zero")
    r = stream.next_float() * total
    idx = int(np.searchsorted(cum, r, side="right"))
    return min(idx, w.size - 1)

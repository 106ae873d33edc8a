"""Compiled inner loop for one backward simulation.

The per-event importance weight is nu / (D * q) where nu is the true
event coefficient, D = n * (n - 1 + mu) the total backward rate and q the
proposal probability of the drawn event.  Both proposal modes admit a
cancellation-free form of that ratio, which is what the kernel
accumulates:

  two-stage: q = (n_i / S) * (w / Z_i)  ->  nu / (D q) = S * Z_i / (n * dn)
  joint:     q = nu / W                 ->  nu / (D q) = W / (n * dn)

with dn = (n - 1) + mu, Z_i = (n_i - 1) + mu * colsum_i, W = sum_i n_i Z_i
and S the stage-one normaliser (S = n except when resampling around a
zero stage-two normaliser).  For K = 1 both numerator and denominator are
computed from bitwise-identical operands, so the accumulated log weight
telescopes to exactly 0.0.
"""

import numpy as np
from numba import njit

from .rng import _next_float

STATUS_OK = 0
STATUS_MAX_EVENTS = 1
STATUS_STUCK = 2

PROPOSAL_TWO_STAGE = 0
PROPOSAL_JOINT = 1

TERMINAL_FULL = 0
TERMINAL_PRODUCT = 1
TERMINAL_NONE = 2


@njit(cache=True)
def terminal_factor(counts, log_pi, terminal_mode):
    if terminal_mode == TERMINAL_NONE:
        return 0.0
    term = 0.0
    for i in range(counts.shape[0]):
        if counts[i] > 0:
            term += counts[i] * log_pi[i]
    return term


@njit(cache=True)
def simulate(counts0, P, colsum, colcum, mu, stop_size, proposal, forced, max_events, state):
    K = counts0.shape[0]
    counts = counts0.copy()
    n = 0
    for i in range(K):
        n += counts[i]
    n0 = n

    log_w = 0.0
    sens = np.zeros(n0, np.int64)
    nsen = 0
    events = 0

    while n > stop_size:
        dn = np.float64(n - 1) + mu

        if forced and stop_size == 1 and n == 2:
            pair_type = -1
            for i in range(K):
                if counts[i] == 2:
                    pair_type = i
                    break
            if pair_type >= 0:
                # literal final step: coalesce the identical pair with q = 1
                events += 1
                if events > max_events:
                    return log_w, sens, nsen, events, counts, STATUS_MAX_EVENTS
                log_w += np.log(2.0 / (2.0 * dn))
                counts[pair_type] -= 1
                n -= 1
                sens[nsen] = events
                nsen += 1
                continue

        events += 1
        if events > max_events:
            return log_w, sens, nsen, events, counts, STATUS_MAX_EVENTS

        sel = -1
        Zi = 0.0
        if proposal == PROPOSAL_JOINT:
            W = 0.0
            for i in range(K):
                ci = counts[i]
                if ci > 0:
                    W += ci * (np.float64(ci - 1) + mu * colsum[i])
            if W <= 0.0:
                return log_w, sens, nsen, events, counts, STATUS_STUCK
            r = _next_float(state) * W
            acc = 0.0
            for i in range(K):
                ci = counts[i]
                if ci > 0:
                    z = np.float64(ci - 1) + mu * colsum[i]
                    acc += ci * z
                    if r < acc:
                        sel = i
                        Zi = z
                        break
            if sel < 0:  # fp edge at the top of the scan
                for i in range(K - 1, -1, -1):
                    ci = counts[i]
                    if ci > 0:
                        z = np.float64(ci - 1) + mu * colsum[i]
                        if z > 0.0:
                            sel = i
                            Zi = z
                            break
                if sel < 0:
                    return log_w, sens, nsen, events, counts, STATUS_STUCK
            log_w += np.log(W / (np.float64(n) * dn))
        else:
            S = np.float64(n)
            r = _next_float(state) * S
            acc = 0.0
            for i in range(K):
                ci = counts[i]
                if ci > 0:
                    acc += ci
                    if r < acc:
                        sel = i
                        break
            if sel < 0:
                for i in range(K - 1, -1, -1):
                    if counts[i] > 0:
                        sel = i
                        break
            Zi = np.float64(counts[sel] - 1) + mu * colsum[sel]
            if Zi <= 0.0:
                # counts[sel] == 1 and column sel of P is all zero: resample
                # among types with a positive stage-two normaliser
                S = 0.0
                for i in range(K):
                    ci = counts[i]
                    if ci > 0 and (np.float64(ci - 1) + mu * colsum[i]) > 0.0:
                        S += ci
                if S <= 0.0:
                    return log_w, sens, nsen, events, counts, STATUS_STUCK
                r = _next_float(state) * S
                acc = 0.0
                sel = -1
                for i in range(K):
                    ci = counts[i]
                    if ci > 0:
                        z = np.float64(ci - 1) + mu * colsum[i]
                        if z > 0.0:
                            acc += ci
                            if r < acc:
                                sel = i
                                Zi = z
                                break
                if sel < 0:
                    for i in range(K - 1, -1, -1):
                        ci = counts[i]
                        if ci > 0:
                            z = np.float64(ci - 1) + mu * colsum[i]
                            if z > 0.0:
                                sel = i
                                Zi = z
                                break
                if sel < 0:
                    return log_w, sens, nsen, events, counts, STATUS_STUCK
            log_w += np.log((S * Zi) / (np.float64(n) * dn))

        # stage two: coalescence vs ancestor type, shared by both modes
        u2 = _next_float(state) * Zi
        cm1 = np.float64(counts[sel] - 1)
        if u2 < cm1:
            counts[sel] -= 1
            n -= 1
            sens[nsen] = events
            nsen += 1
        else:
            rr = (u2 - cm1) / mu  # in [0, colsum[sel])
            row = colcum[sel]
            j = K - 1
            for jj in range(K):
                if rr < row[jj]:
                    j = jj
                    break
            counts[sel] -= 1
            counts[j] += 1

    return log_w, sens, nsen, events, counts, STATUS_OK

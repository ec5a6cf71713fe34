"""Pure-Python count-level trajectory kernel.

Simulates protocol trajectories on photon counts only, jumping over
waiting passes with geometric sojourn draws (an exact reformulation of
per-pass sampling).  The compiled extension implements this algorithm
line for line; both lanes must consume the random stream identically
and perform floating-point operations in the same order, so any edit
here must be mirrored in _countkern.pyx.

Draw protocol per event: one open uniform for the sojourn length, one
uniform for the event type (CDF inversion over the enumeration
l = 0..c, j = 0..2, a = 0..j, skipping l = j = 0), plus one uniform for
the switch-out binomial when t_out < 1.

Terminated-reason codes: 1 reached-target, 2 max-passes, 3 overshoot.
"""

from __future__ import annotations

import math

import numpy as np

from ._rng import TrialStream

KERNEL_LANE = "python"

REASON_REACHED = 1
REASON_MAXPASS = 2
REASON_OVERSHOOT = 3


def _pow_int(base: float, k: int) -> float:
    out = 1.0
    for _ in range(k):
        out *= base
    return out


def _binom_draw(stream, n: int, p: float) -> int:
    """CDF inversion of Binomial(n, p) with incremental pmf terms."""
    if p >= 1.0:
        return n
    if p <= 0.0:
        return 0
    u = stream.uniform()
    term = _pow_int(1.0 - p, n)
    acc = term
    k = 0
    ratio = p / (1.0 - p)
    while k < n and u >= acc:
        term *= (n - k) / (k + 1.0) * ratio
        k += 1
        acc += term
    return k


def run_addition_batch(
    one_at_a_time: bool,
    n_target: int,
    p0,
    p1,
    p2,
    transmission: float,
    eta: float,
    threshold: bool,
    t_out: float,
    max_passes: int,
    seed: int,
    trial_lo: int,
    trial_hi: int,
    collect_gaps: bool,
):
    """Count trajectories for Fock / one-photon-at-a-time targets.

    p0/p1/p2 are per-pass pair probabilities indexed by the heralded
    count.  Returns (success, passes, heralded, true_created, lost,
    reason, pristine, gaps); gaps has shape (trials, n_target) and holds
    the waiting passes before each accepted addition event.
    """
    n_trials = trial_hi - trial_lo
    success = np.zeros(n_trials, dtype=np.uint8)
    passes_out = np.zeros(n_trials, dtype=np.int64)
    heralded_out = np.zeros(n_trials, dtype=np.int32)
    true_out = np.zeros(n_trials, dtype=np.int32)
    lost_out = np.zeros(n_trials, dtype=np.int32)
    reason_out = np.zeros(n_trials, dtype=np.uint8)
    pristine_out = np.zeros(n_trials, dtype=np.uint8)
    gaps = np.zeros((n_trials, n_target if collect_gaps else 0), dtype=np.int64)

    T = transmission
    for t in range(n_trials):
        stream = TrialStream(seed, trial_lo + t)
        h = 0
        c = 0
        true = 0
        lost = 0
        passes = 0
        pristine = True
        reason = 0
        while True:
            q = p0[h] * _pow_int(T, c)
            u = stream.uniform_open()
            if q >= 1.0:
                k = max_passes - passes
            elif q <= 0.0:
                k = 0
            else:
                k = int(math.log(u) / math.log(q))
            if passes + k + 1 > max_passes:
                passes = max_passes
                reason = REASON_MAXPASS
                break
            passes += k + 1
            # event type: enumerate (l, j, a) conditioned on not-stay
            v = stream.uniform() * (1.0 - q)
            if T >= 1.0:
                l_terms = [1.0] + [0.0] * c
            elif T <= 0.0:
                l_terms = [0.0] * c + [1.0]
            else:
                l_terms = [_pow_int(T, c)]
                ratio = (1.0 - T) / T
                coef = l_terms[0]
                for i in range(c):
                    coef *= (c - i) / (i + 1.0) * ratio
                    l_terms.append(coef)
            if threshold:
                h_tables = (
                    (1.0,),
                    (1.0 - eta, eta),
                    ((1.0 - eta) * (1.0 - eta), 1.0 - (1.0 - eta) * (1.0 - eta)),
                )
            else:
                h_tables = (
                    (1.0,),
                    (1.0 - eta, eta),
                    (
                        (1.0 - eta) * (1.0 - eta),
                        2.0 * eta * (1.0 - eta),
                        eta * eta,
                    ),
                )
            p_j = (p0[h], p1[h], p2[h])
            acc = 0.0
            el = ej = ea = 0
            done = False
            for l in range(c + 1):
                for j in range(3):
                    if l == 0 and j == 0:
                        continue
                    for a in range(len(h_tables[j])):
                        w = l_terms[l] * p_j[j] * h_tables[j][a]
                        acc += w
                        if v < acc:
                            el, ej, ea = l, j, a
                            done = True
                            break
                    if done:
                        break
                if done:
                    break
            if not done:
                el, ej, ea = c, 2, len(h_tables[2]) - 1
            c += ej - el
            true += ej
            lost += el
            if el > 0 or ej != ea:
                pristine = False
            if ea > 0:
                if collect_gaps and ea == 1 and h < n_target:
                    gaps[t, h] = k
                h += ea
                if (one_at_a_time and ea >= 2) or h > n_target:
                    reason = REASON_OVERSHOOT
                    break
                if h == n_target:
                    reason = REASON_REACHED
                    break
        if reason == REASON_REACHED:
            if t_out >= 1.0:
                emitted = c
            else:
                emitted = _binom_draw(stream, c, t_out)
            lost += c - emitted
            if one_at_a_time:
                ok = pristine and emitted == n_target
            else:
                ok = emitted == n_target
            success[t] = 1 if ok else 0
        passes_out[t] = passes
        heralded_out[t] = h
        true_out[t] = true
        lost_out[t] = lost
        reason_out[t] = reason
        pristine_out[t] = 1 if pristine else 0
    return success, passes_out, heralded_out, true_out, lost_out, reason_out, pristine_out, gaps


def run_subtract_batch(
    n_initial: int,
    count: int,
    reflectivity: float,
    transmission: float,
    eta: float,
    t_out: float,
    max_passes: int,
    seed: int,
    trial_lo: int,
    trial_hi: int,
    collect_gaps: bool,
):
    """Count trajectories for the weak-beam-splitter subtraction mode.

    Per pass: round-trip loss, then each surviving tapped-mode photon
    reflects with the given probability, then the click detector
    announces.  Returns (success, passes, announced, removed, lost,
    reason, pristine, gaps, clicks); gaps/clicks are per click event.
    """
    n_trials = trial_hi - trial_lo
    success = np.zeros(n_trials, dtype=np.uint8)
    passes_out = np.zeros(n_trials, dtype=np.int64)
    announced_out = np.zeros(n_trials, dtype=np.int32)
    removed_out = np.zeros(n_trials, dtype=np.int32)
    lost_out = np.zeros(n_trials, dtype=np.int32)
    reason_out = np.zeros(n_trials, dtype=np.uint8)
    pristine_out = np.zeros(n_trials, dtype=np.uint8)
    gaps = np.zeros((n_trials, count if collect_gaps else 0), dtype=np.int64)
    clicks = np.zeros((n_trials, count if collect_gaps else 0), dtype=np.int32)

    T = transmission
    r = reflectivity
    for t in range(n_trials):
        stream = TrialStream(seed, trial_lo + t)
        n = n_initial
        announced = 0
        removed = 0
        lost = 0
        passes = 0
        pristine = True
        reason = 0
        event_idx = 0
        while True:
            q = _pow_int(T, n) * _pow_int(1.0 - r, n)
            u = stream.uniform_open()
            if q >= 1.0:
                k = max_passes - passes
            elif q <= 0.0:
                k = 0
            else:
                k = int(math.log(u) / math.log(q))
            if passes + k + 1 > max_passes:
                passes = max_passes
                reason = REASON_MAXPASS
                break
            passes += k + 1
            v = stream.uniform() * (1.0 - q)
            acc = 0.0
            el = ek = eb = 0
            done = False
            for l in range(n + 1):
                if T >= 1.0:
                    wl = 1.0 if l == 0 else 0.0
                elif T <= 0.0:
                    wl = 1.0 if l == n else 0.0
                else:
                    wl = _binom_pmf(n, l, 1.0 - T)
                if wl == 0.0:
                    continue
                for kk in range(n - l + 1):
                    if l == 0 and kk == 0:
                        continue
                    wk = _binom_pmf(n - l, kk, r)
                    if wk == 0.0:
                        continue
                    for b in range(kk + 1):
                        w = wl * wk * _binom_pmf(kk, b, eta)
                        acc += w
                        if v < acc:
                            el, ek, eb = l, kk, b
                            done = True
                            break
                    if done:
                        break
                if done:
                    break
            if not done:
                el, ek, eb = n, 0, 0
            n -= el + ek
            removed += ek
            lost += el
            if el > 0 or ek != eb:
                pristine = False
            if eb > 0:
                if collect_gaps and event_idx < count:
                    gaps[t, event_idx] = k
                    clicks[t, event_idx] = eb
                event_idx += 1
                announced += eb
                if announced > count:
                    reason = REASON_OVERSHOOT
                    break
                if announced == count:
                    reason = REASON_REACHED
                    break
        if reason == REASON_REACHED:
            if t_out >= 1.0:
                emitted = n
            else:
                emitted = _binom_draw(stream, n, t_out)
            lost += n - emitted
            success[t] = 1 if (pristine and emitted == n_initial - count) else 0
        passes_out[t] = passes
        announced_out[t] = announced
        removed_out[t] = removed
        lost_out[t] = lost
        reason_out[t] = reason
        pristine_out[t] = 1 if pristine else 0
    return success, passes_out, announced_out, removed_out, lost_out, reason_out, pristine_out, gaps, clicks


def _binom_pmf(n: int, k: int, p: float) -> float:
    if p <= 0.0:
        return 1.0 if k == 0 else 0.0
    if p >= 1.0:
        return 1.0 if k == n else 0.0
    coef = 1.0
    for i in range(k):
        coef *= (n - i) / (i + 1.0)
    return coef * _pow_int(p, k) * _pow_int(1.0 - p, n - k)

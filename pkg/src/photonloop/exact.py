"""Exact success probabilities by count-level Markov recursion.

The per-pass law on (heralded, in-cavity) counts is closed once the
pair-outcome probabilities are occupation independent (the pump-set
weight model): binomial round-trip loss, pair creation with the
per-remaining pump strengths, binomial herald thinning, and the
acceptance rules of the protocol.  Absorption happens at the target
herald count (scored through the switch-out) or at overshoot; the
finite pass horizon and the in-cavity truncation are reported with the
result as accounting bounds.

One-at-a-time targets track a "pristine" lane (every pair announced,
nothing lost) alongside the general count lattice, because their
success requires a perfect history, not just matching final counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import ConfigError, ProtocolSpec

__all__ = [
    "ExactResult",
    "solve_counts",
    "fock_success_exact",
    "noon_success_exact",
    "mean_passes",
]


@dataclass(frozen=True)
class ExactResult:
    """Deterministic protocol statistics.

    p_success/p_fail are exact up to truncated_mass (probability that
    the in-cavity count left the tracked lattice; those paths are not
    followed and could contain successes).  horizon_mass is the
    probability of terminating by the pass cap, already counted as
    failure.  mean_passes is E[min(termination pass, horizon)].
    """

    p_success: float
    p_fail: float
    mean_passes: float
    horizon_mass: float
    truncated_mass: float
    horizon: int

    @property
    def truncation_bound(self) -> float:
        return self.truncated_mass


def _binom_pmf_table(n: int, p: float) -> np.ndarray:
    out = np.zeros(n + 1)
    if p <= 0.0:
        out[0] = 1.0
        return out
    if p >= 1.0:
        out[n] = 1.0
        return out
    for k in range(n + 1):
        out[k] = math.comb(n, k) * p ** k * (1.0 - p) ** (n - k)
    return out


def _herald_tables(eta: float, threshold: bool):
    if threshold:
        return (
            np.array([1.0]),
            np.array([1.0 - eta, eta]),
            np.array([(1.0 - eta) ** 2, 1.0 - (1.0 - eta) ** 2]),
        )
    return (
        np.array([1.0]),
        np.array([1.0 - eta, eta]),
        np.array([(1.0 - eta) ** 2, 2.0 * eta * (1.0 - eta), eta ** 2]),
    )


def _switchout_success(c: int, n: int, t_out: float) -> float:
    """Probability that exactly n of c stored photons survive switch-out."""
    if c < n:
        return 0.0
    return math.comb(c, n) * t_out ** n * (1.0 - t_out) ** (c - n)


def _check_solvable(spec: ProtocolSpec):
    if spec.target.kind == "subtract":
        raise ConfigError("target", "the exact solver covers addition protocols only")
    if spec.weight_model != "pump-set":
        raise ConfigError(
            "weight_model",
            "count recursion requires the pump-set outcome weights",
        )
    if spec.detector.dark_rate != 0.0:
        raise ConfigError("detector.dark_rate", "exact solver requires dark_rate = 0")


def _build_counts_chain(spec: ProtocolSpec):
    """Transition matrix and absorption vectors for one pass.

    States: pristine lane k = 0..N-1 (one-at-a-time targets only),
    then the general (h, c) lattice with h = 0..N-1, c = 0..N+2.
    Returns (M, succ, fail, trunc, v0).
    """
    n = spec.n_additions()
    cmax = n + 2
    one = spec.one_at_a_time()
    pristine_lane = one and spec.target.kind in ("noon", "mm")
    eta = spec.detector.efficiency
    threshold = spec.detector.mode == "threshold"
    T = spec.cavity.transmission
    t_out = spec.cavity.t_out

    n_pris = n if pristine_lane else 0
    width = cmax + 1
    size = n_pris + n * width
    idx_gen = lambda h, c: n_pris + h * width + c

    M = np.zeros((size, size))
    succ = np.zeros(size)
    fail = np.zeros(size)
    trunc = np.zeros(size)

    htab = _herald_tables(eta, threshold)
    p_by_h = []
    for h in range(n):
        e = spec.pump_policy.epsilon_for(n - h)
        p_by_h.append((1.0 - e ** 2 - e ** 4 / 4.0, e ** 2, e ** 4 / 4.0))

    def route(src: int, h: int, c: int, w: float, pristine_src: bool):
        """Distribute weight w for a pass starting at (h, c)."""
        loss = _binom_pmf_table(c, 1.0 - T)
        pj = p_by_h[h]
        for l in range(c + 1):
            wl = loss[l]
            if wl == 0.0:
                continue
            for j in range(3):
                wj = pj[j]
                if wj == 0.0:
                    continue
                table = htab[j]
                for a in range(len(table)):
                    wa = table[a]
                    if wa == 0.0:
                        continue
                    weight = w * wl * wj * wa
                    h2 = h + a
                    c2 = c - l + j
                    still_pristine = pristine_src and l == 0 and j == a
                    if (one and a >= 2) or h2 > n:
                        fail[src] += weight
                    elif h2 == n:
                        if spec.target.kind == "fock":
                            ps = _switchout_success(c2, n, t_out)
                        else:
                            ps = t_out ** n if still_pristine else 0.0
                        succ[src] += weight * ps
                        fail[src] += weight * (1.0 - ps)
                    elif c2 > cmax:
                        trunc[src] += weight
                    elif still_pristine:
                        M[src, h2] += weight  # pristine lane index == h2 == c2
                    else:
                        M[src, idx_gen(h2, c2)] += weight

    if pristine_lane:
        for k in range(n):
            route(k, k, k, 1.0, True)
    for h in range(n):
        for c in range(cmax + 1):
            route(idx_gen(h, c), h, c, 1.0, False)

    v0 = np.zeros(size)
    v0[0 if pristine_lane else idx_gen(0, 0)] = 1.0
    return M, succ, fail, trunc, v0


def solve_counts(spec: ProtocolSpec) -> ExactResult:
    """Exact statistics under the count-level pass law."""
    _check_solvable(spec)
    M, succ, fail, trunc, v0 = _build_counts_chain(spec)
    horizon = spec.max_passes()
    mh_v = np.linalg.matrix_power(M.T, 0) @ v0 if horizon == 0 else None
    mh_v = np.linalg.matrix_power(M.T, horizon) @ v0
    rhs = v0 - mh_v
    s_v = np.linalg.solve(np.eye(len(v0)) - M.T, rhs)
    p_succ = float(succ @ s_v)
    p_fail = float(fail @ s_v)
    p_trunc = float(trunc @ s_v)
    horizon_mass = float(mh_v.sum())
    mean = float(s_v.sum())
    # runs alive at the horizon terminate there as failures
    return ExactResult(
        p_success=p_succ,
        p_fail=p_fail + horizon_mass + p_trunc,
        mean_passes=mean,
        horizon_mass=horizon_mass,
        truncated_mass=p_trunc,
        horizon=horizon,
    )


def fock_success_exact(spec: ProtocolSpec) -> float:
    if spec.target.kind != "fock":
        raise ConfigError("target", "fock_success_exact needs a Fock target")
    return solve_counts(spec).p_success


def noon_success_exact(spec: ProtocolSpec) -> float:
    if spec.target.kind not in ("noon", "mm"):
        raise ConfigError("target", "noon_success_exact needs a one-at-a-time target")
    return solve_counts(spec).p_success


def mean_passes(spec: ProtocolSpec) -> float:
    return solve_counts(spec).mean_passes

"""Per-pass physical channels of the storage cavity.

Each pass through the loop a stored state sees, in order: round-trip
loss, the truncated downconversion interaction resolved by the signal
outcome (no pair / one pair / two pairs), herald detection of the
signal, and optionally a polarization rotation.  A weak-beam-splitter
tap provides the photon-subtraction variant.  Channel objects are
read-only after construction and all maps are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Tuple

import numpy as np

from .states import (
    H_AXIS,
    JonesUnitary,
    PolarizationCoefficients,
    PolarizedFockState,
    apply_creation,
    apply_rotation,
    lattice_index,
    lattice_tables,
)

MAX_EPSILON = 0.5


@dataclass(frozen=True)
class SpdcCoupling:
    """Effective interaction strength and the polarization mode the new
    idler photon is created into."""

    epsilon: float
    pump_axis: PolarizationCoefficients = H_AXIS

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= MAX_EPSILON:
            raise ValueError(
                f"epsilon must be in [0, {MAX_EPSILON}], got {self.epsilon}"
            )


@dataclass(frozen=True)
class DetectorModel:
    """Signal-arm detector: efficiency, number resolution, dark counts."""

    efficiency: float = 1.0
    mode: Literal["number-resolving", "threshold"] = "number-resolving"
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError(f"efficiency must be in [0, 1], got {self.efficiency}")
        if self.dark_rate < 0.0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")
        if self.mode not in ("number-resolving", "threshold"):
            raise ValueError(f"unknown detector mode {self.mode!r}")


@dataclass(frozen=True)
class CavityModel:
    """Round-trip transmission per photon, switch-out transmission, and
    the hard cap on loop passes."""

    transmission: float = 1.0
    t_out: float = 1.0
    max_passes: int = 1

    def __post_init__(self):
        if not 0.0 <= self.transmission <= 1.0:
            raise ValueError(f"transmission must be in [0, 1], got {self.transmission}")
        if not 0.0 <= self.t_out <= 1.0:
            raise ValueError(f"t_out must be in [0, 1], got {self.t_out}")
        if self.max_passes < 1:
            raise ValueError(f"max_passes must be >= 1, got {self.max_passes}")


@dataclass(frozen=True)
class OutcomeBranch:
    """One resolved measurement branch: descriptor, probability weight,
    and the conditional (unnormalized) post-branch state."""

    label: object
    weight: float
    state: PolarizedFockState


def pair_outcome_probabilities(epsilon: float) -> Tuple[float, float, float]:
    """Pump-set per-pass probabilities of creating 0, 1 or 2 pairs.

    The interaction truncated at second order gives pair weights eps^2
    and eps^4/4; the no-pair weight absorbs the remainder so the three
    sum to one exactly.  These weights are set by the pump intensity and
    deliberately carry no dependence on the cavity occupation, keeping
    trajectory statistics identical to the count-level recursion.
    """
    p1 = epsilon ** 2
    p2 = epsilon ** 4 / 4.0
    return 1.0 - p1 - p2, p1, p2


def _aligned_nh(s: PolarizedFockState, axis: PolarizationCoefficients):
    """Occupation table along an arbitrary axis: returns (state in the
    aligned frame, per-index occupation array, unitary used)."""
    _, nh, _ = lattice_tables(s.cutoff)
    if axis.alpha == 1.0 and axis.beta == 0.0:
        return s, nh, None
    u = JonesUnitary.align_from_h(axis)
    back = JonesUnitary(u.matrix.conj().T)
    return apply_rotation(s, back), nh, u


@dataclass(frozen=True)
class SpdcOutcomeOperators:
    """Signal-resolved maps of one pass of the truncated interaction.

    On signal vacuum the interaction resolves into
      K0 = 1 - (eps^2/2) a_p a+_p      (no pair; diagonal distortion)
      K1 = -eps a+_p                   (one pair)
      K2 = (eps^2/2) (a+_p)^2          (two pairs)
    with p the pump axis.  K1/K2 raise CapacityError rather than
    truncate when the state cannot hold the new photons.
    """

    coupling: SpdcCoupling

    def k0(self, s: PolarizedFockState) -> PolarizedFockState:
        eps = self.coupling.epsilon
        aligned, nh, u = _aligned_nh(s, self.coupling.pump_axis)
        damped = aligned.amp * (1.0 - (eps ** 2 / 2.0) * (nh + 1.0))
        out = PolarizedFockState(cutoff=s.cutoff, amp=damped)
        if u is not None:
            out = apply_rotation(out, u)
        return out

    def k1(self, s: PolarizedFockState) -> PolarizedFockState:
        created = apply_creation(s, self.coupling.pump_axis)
        return PolarizedFockState(cutoff=s.cutoff, amp=-self.coupling.epsilon * created.amp)

    def k2(self, s: PolarizedFockState) -> PolarizedFockState:
        eps = self.coupling.epsilon
        twice = apply_creation(apply_creation(s, self.coupling.pump_axis), self.coupling.pump_axis)
        return PolarizedFockState(cutoff=s.cutoff, amp=(eps ** 2 / 2.0) * twice.amp)

    def outcomes(
        self, s: PolarizedFockState, weight_model: str = "born"
    ) -> List[OutcomeBranch]:
        """The three branches with probabilities summing to one.

        born: weights are the squared norms of K_i|s>, renormalized
        (they exhaust unity up to fourth order before renormalization).
        pump-set: the occupation-independent probabilities of
        pair_outcome_probabilities, matching the count-level solver.
        """
        states = [self.k0(s), self.k1(s), self.k2(s)]
        nrm = s.squared_norm
        if nrm <= 0.0:
            raise ValueError("outcome resolution of a zero-norm state")
        if weight_model == "born":
            raw = [st.squared_norm / nrm for st in states]
            total = sum(raw)
            weights = [r / total for r in raw]
        elif weight_model == "pump-set":
            weights = list(pair_outcome_probabilities(self.coupling.epsilon))
        else:
            raise ValueError(f"unknown weight model {weight_model!r}")
        labels = ["pairs-0", "pairs-1", "pairs-2"]
        return [OutcomeBranch(l, w, st) for l, w, st in zip(labels, weights, states)]


def spdc_outcome_operators(c: SpdcCoupling) -> SpdcOutcomeOperators:
    return SpdcOutcomeOperators(c)


def _loss_branch(s: PolarizedFockState, lh: int, lv: int, T: float) -> Tuple[float, PolarizedFockState]:
    dim, nh, nv = lattice_tables(s.cutoff)
    out = np.zeros(dim, dtype=np.complex128)
    rt = math.sqrt(T) if T > 0 else 0.0
    rl = math.sqrt(1.0 - T)
    for i in np.nonzero(s.amp)[0]:
        h, v = int(nh[i]), int(nv[i])
        if h < lh or v < lv:
            continue
        coef = math.sqrt(math.comb(h, lh) * math.comb(v, lv))
        coef *= rt ** (h + v - lh - lv) * rl ** (lh + lv)
        out[lattice_index(h - lh, v - lv)] += coef * s.amp[i]
    st = PolarizedFockState(cutoff=s.cutoff, amp=out)
    return st.squared_norm, st


def apply_loss(s: PolarizedFockState, transmission: float) -> List[OutcomeBranch]:
    """Exhaustive loss resolution: each photon independently survives
    with the given probability; branches are labeled (lost_H, lost_V).

    Polarization independent: the same transmission applies to both
    modes.  Branch weights sum to 1 for a normalized input.
    """
    if not 0.0 <= transmission <= 1.0:
        raise ValueError(f"transmission must be in [0, 1], got {transmission}")
    _, nh, nv = lattice_tables(s.cutoff)
    occ = np.nonzero(s.amp)[0]
    max_h = int(nh[occ].max()) if occ.size else 0
    max_v = int(nv[occ].max()) if occ.size else 0
    nrm = s.squared_norm
    if transmission == 1.0:
        return [OutcomeBranch((0, 0), 1.0, s)]
    branches = []
    for lh in range(max_h + 1):
        for lv in range(max_v + 1):
            w, st = _loss_branch(s, lh, lv, transmission)
            if w == 0.0 and (lh, lv) != (0, 0):
                continue
            branches.append(OutcomeBranch((lh, lv), w / nrm if nrm else 0.0, st))
    return branches


def herald_distribution(true_pairs: int, d: DetectorModel) -> Dict[int, float]:
    """Announced-count distribution given the number of true pairs.

    number-resolving: Binomial(true_pairs, efficiency) plus independent
    Poisson dark counts (tail folded into the last bin so the table sums
    to one exactly).  threshold: keys {0, 1} with 1 meaning any click.
    """
    if true_pairs < 0:
        raise ValueError("true_pairs must be >= 0")
    eta = d.efficiency
    if d.mode == "threshold":
        p0 = (1.0 - eta) ** true_pairs * math.exp(-d.dark_rate)
        return {0: p0, 1: 1.0 - p0}
    det = {
        k: math.comb(true_pairs, k) * eta ** k * (1.0 - eta) ** (true_pairs - k)
        for k in range(true_pairs + 1)
    }
    if d.dark_rate == 0.0:
        return det
    lam = d.dark_rate
    dark = []
    acc = 0.0
    k = 0
    while acc < 1.0 - 1e-15:
        p = math.exp(-lam) * lam ** k / math.factorial(k)
        dark.append(p)
        acc += p
        k += 1
    dark[-1] += 1.0 - acc
    out: Dict[int, float] = {}
    for a, pa in det.items():
        for b, pb in enumerate(dark):
            out[a + b] = out.get(a + b, 0.0) + pa * pb
    return out


def rotate_cavity(
    s: PolarizedFockState, angle: float, variant: str = "linear"
) -> PolarizedFockState:
    """Rotate all stored photons: physical linear rotation, or the
    equivalent step about the +-45 axis of the Poincare sphere."""
    v = variant.lower()
    if v == "linear":
        u = JonesUnitary.rotation(angle)
    elif v == "poincare-45-axis":
        u = JonesUnitary.poincare_45_rotation(angle)
    else:
        raise ValueError(f"unknown rotation variant {variant!r}")
    return apply_rotation(s, u)


def subtract_attempt(
    s: PolarizedFockState,
    reflectivity: float,
    axis: PolarizationCoefficients = H_AXIS,
) -> List[OutcomeBranch]:
    """Weak-beam-splitter tap on one polarization mode.

    Branch k reflects exactly k photons of the tapped mode toward the
    click detector: amplitude sqrt(C(n,k)) r^(k/2) (1-r)^((n-k)/2) and
    k annihilations.  k=0 is the no-click damping branch; multi-photon
    reflection branches are included exactly, so weights always sum to 1.
    """
    r = reflectivity
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"reflectivity must be in [0, 1], got {r}")
    aligned, nh, u = _aligned_nh(s, axis)
    dim, nh_t, nv_t = lattice_tables(s.cutoff)
    occ = np.nonzero(aligned.amp)[0]
    max_n = int(nh_t[occ].max()) if occ.size else 0
    nrm = s.squared_norm
    branches = []
    sq_r = math.sqrt(r)
    sq_t = math.sqrt(1.0 - r)
    for k in range(max_n + 1):
        out = np.zeros(dim, dtype=np.complex128)
        for i in occ:
            h, v = int(nh_t[i]), int(nv_t[i])
            if h < k:
                continue
            coef = math.sqrt(math.comb(h, k)) * sq_r ** k * sq_t ** (h - k)
            out[lattice_index(h - k, v)] += coef * aligned.amp[i]
        st = PolarizedFockState(cutoff=s.cutoff, amp=out)
        if u is not None:
            st = apply_rotation(st, u)
        w = st.squared_norm / nrm if nrm else 0.0
        if w == 0.0 and k > 0:
            continue
        branches.append(OutcomeBranch(k, w, st))
    return branches

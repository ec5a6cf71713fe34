"""Cavity-loop protocol state machine.

One pass composes round-trip loss, the signal-resolved downconversion
outcome, herald detection, and (for one-at-a-time targets) a rotation
of the stored photons after each confirmed addition.  This module is
the literal per-pass reference implementation; the batch sampler
reproduces the same trajectory law through sojourn jumps.

Success accounting follows the source's bookkeeping, not the
controller's: the hidden true pair count and loss count decide success,
while the controller only ever sees announced heralds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ._rng import TrialStream
from .channels import (
    CavityModel,
    DetectorModel,
    SpdcCoupling,
    SpdcOutcomeOperators,
    apply_loss,
    herald_distribution,
    subtract_attempt,
)
from .states import (
    H_AXIS,
    CapacityError,
    CreationSpec,
    JonesUnitary,
    PolarizedFockState,
    apply_annihilation,
    apply_creation,
    apply_rotation,
    build_product_state,
    fidelity,
    grow_cutoff,
    mm_factors,
    mm_target,
    noon_spec,
    normalize,
    vacuum,
)

REASON_REACHED = "reached-target"
REASON_MAXPASS = "max-passes"
REASON_OVERSHOOT = "overshoot"


class ConfigError(ValueError):
    """Invalid protocol configuration; carries the offending field."""

    def __init__(self, fieldname: str, message: str):
        super().__init__(f"{fieldname}: {message}")
        self.fieldname = fieldname


@dataclass(frozen=True)
class FockTarget:
    n: int

    kind = "fock"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("target.n", f"must be >= 1, got {self.n}")


@dataclass(frozen=True)
class NoonTarget:
    n: int
    variant: str = "linear-hv"

    kind = "noon"

    def __post_init__(self):
        if self.n < 1:
            raise ConfigError("target.n", f"must be >= 1, got {self.n}")
        if self.variant not in ("linear-hv", "diagonal-45"):
            raise ConfigError("target.variant", f"unknown variant {self.variant!r}")


@dataclass(frozen=True)
class MnmTarget:
    m: int
    mp: int

    kind = "mm"

    def __post_init__(self):
        if self.mp < 0 or self.m <= self.mp:
            raise ConfigError("target", f"need m > m' >= 0, got m={self.m}, m'={self.mp}")


@dataclass(frozen=True)
class SubtractTarget:
    initial: PolarizedFockState
    count: int
    reflectivity: float

    kind = "subtract"

    def __post_init__(self):
        if self.count < 1:
            raise ConfigError("target.count", f"must be >= 1, got {self.count}")
        if not 0.0 < self.reflectivity <= 1.0:
            raise ConfigError(
                "target.reflectivity", f"must be in (0, 1], got {self.reflectivity}"
            )


@dataclass(frozen=True)
class PumpPolicy:
    """Pump intensity schedule: a fixed interaction strength, or one
    strength per count of photons still needed.  Multi-photon addition
    (accepting announced double pairs) is a Fock-only option."""

    kind: str = "fixed-epsilon"
    epsilon: float = 0.05
    schedule: Tuple[float, ...] = ()
    multi_add_allowed: bool = False

    def __post_init__(self):
        if self.kind not in ("fixed-epsilon", "per-remaining", "optimized"):
            raise ConfigError("pump_policy.kind", f"unknown kind {self.kind!r}")
        if self.kind != "fixed-epsilon" and not self.schedule:
            raise ConfigError("pump_policy.schedule", "schedule required for this kind")

    def epsilon_for(self, remaining: int) -> float:
        if self.kind == "fixed-epsilon":
            return self.epsilon
        if remaining < 1:
            return self.schedule[0]
        return self.schedule[min(remaining, len(self.schedule)) - 1]

    def min_epsilon(self) -> float:
        if self.kind == "fixed-epsilon":
            return self.epsilon
        return min(self.schedule)

    def describe(self) -> str:
        if self.kind == "fixed-epsilon":
            base = f"fixed(eps={self.epsilon:g})"
        else:
            base = f"{self.kind}({','.join(f'{e:g}' for e in self.schedule)})"
        return base + ("+multi" if self.multi_add_allowed else "")


@dataclass(frozen=True)
class ProtocolSpec:
    """Everything one run needs: target, pump schedule, detector and
    cavity models, the realization order of the target's factors, and
    which outcome-weight model drives the trajectory measure."""

    target: object
    pump_policy: PumpPolicy = PumpPolicy()
    detector: DetectorModel = DetectorModel()
    cavity: CavityModel = CavityModel()
    ordering: Optional[Tuple[int, ...]] = None
    coupling_bounds: Tuple[float, float] = (0.0, 0.3)
    weight_model: str = "pump-set"
    max_passes_override: Optional[int] = None

    def __post_init__(self):
        self.validate()

    # -- derived quantities ------------------------------------------------

    def n_additions(self) -> int:
        t = self.target
        if t.kind == "fock":
            return t.n
        if t.kind == "noon":
            return t.n
        if t.kind == "mm":
            return t.m + t.mp
        return t.count

    def cutoff(self) -> int:
        if self.target.kind == "subtract":
            return self.target.initial.cutoff
        return self.n_additions() + 2

    def max_passes(self) -> int:
        if self.max_passes_override is not None:
            return self.max_passes_override
        n = self.n_additions()
        if self.target.kind == "subtract":
            return math.ceil(20.0 * n / self.target.reflectivity)
        eps = self.pump_policy.min_epsilon()
        if eps <= 0.0:
            return 1
        return math.ceil(20.0 * n / eps ** 2)

    def one_at_a_time(self) -> bool:
        if self.target.kind == "fock":
            return not self.pump_policy.multi_add_allowed
        return True

    def validate(self):
        t = self.target
        if t.kind not in ("fock", "noon", "mm", "subtract"):
            raise ConfigError("target", f"unknown target kind {t.kind!r}")
        if self.weight_model not in ("pump-set", "born"):
            raise ConfigError("weight_model", f"unknown model {self.weight_model!r}")
        if t.kind != "subtract":
            lo, hi = self.coupling_bounds
            for rem in range(1, self.n_additions() + 1):
                eps = self.pump_policy.epsilon_for(rem)
                if not lo <= eps <= hi:
                    raise ConfigError(
                        "pump_policy",
                        f"epsilon {eps} for remaining={rem} outside bounds [{lo}, {hi}]",
                    )
        if self.detector.mode == "threshold" and self.n_additions() >= 2:
            raise ConfigError(
                "detector.mode",
                "threshold detectors are only valid for single-photon targets; "
                "multi-photon accounting needs number resolution",
            )
        if t.kind in ("noon", "mm") and self.pump_policy.multi_add_allowed:
            raise ConfigError(
                "pump_policy.multi_add_allowed",
                "one-at-a-time targets cannot accept multi-photon addition",
            )
        if self.ordering is not None:
            n = self.n_additions()
            if sorted(self.ordering) != list(range(n)):
                raise ConfigError(
                    "ordering", f"must be a permutation of 0..{n - 1}, got {self.ordering}"
                )
            if t.kind not in ("noon",):
                raise ConfigError("ordering", "ordering applies to N00N targets only")

    # -- construction helpers ----------------------------------------------

    def creation_factors(self) -> Optional[CreationSpec]:
        t = self.target
        if t.kind == "fock":
            return CreationSpec(tuple([H_AXIS] * t.n))
        if t.kind == "noon":
            spec = noon_spec(t.n, t.variant)
            if self.ordering is not None:
                spec = CreationSpec(tuple(spec.factors[i] for i in self.ordering))
            return spec
        if t.kind == "mm":
            return mm_factors(t.m, t.mp)
        return None

    def rotation_schedule(self) -> List[JonesUnitary]:
        """Post-addition rotations V_1..V_M so that the j-th added photon
        (created along H) ends on the j-th realized factor axis."""
        factors = self.creation_factors()
        if factors is None:
            return []
        aligns = [JonesUnitary.align_from_h(f) for f in factors.factors]
        out = []
        m = len(aligns)
        for j in range(m):
            if j + 1 < m:
                nxt = aligns[j + 1]
                v = JonesUnitary(nxt.matrix.conj().T @ aligns[j].matrix)
            else:
                v = aligns[j]
            out.append(v)
        return out

    def target_state(self) -> PolarizedFockState:
        t = self.target
        cut = self.cutoff()
        if t.kind == "fock":
            s = vacuum(cut)
            for _ in range(t.n):
                s = apply_creation(s, H_AXIS)
            return normalize(s)
        if t.kind == "noon":
            return build_product_state(noon_spec(t.n, t.variant), cut)
        if t.kind == "mm":
            return mm_target(t.m, t.mp, cut)
        out = t.initial
        for _ in range(t.count):
            out = apply_annihilation(out, H_AXIS)
        if out.squared_norm == 0.0:
            raise ConfigError(
                "target.count", "initial state cannot supply that many photons"
            )
        return normalize(out)


@dataclass
class PassOutcome:
    pass_index: int
    pairs_true: int
    pairs_announced: int
    photons_lost: int
    rotation_applied: bool
    epsilon_used: float


@dataclass
class EngineContext:
    """Mutable per-trajectory state: the cavity amplitudes plus the
    visible (heralded) and hidden (true/lost) counters.  The rotation
    schedule is protocol-fixed and cached here to keep passes cheap."""

    cavity_state: PolarizedFockState
    heralded_total: int = 0
    true_total: int = 0
    lost_total: int = 0
    pass_index: int = 0
    pristine: bool = True
    terminated: Optional[str] = None
    photons_added_events: List[Tuple[int, int]] = field(default_factory=list)
    rotations: Optional[List[JonesUnitary]] = None

    def check_counters(self):
        n = self.cavity_state.total_photon_number()
        stored = self.true_total - self.lost_total
        assert n is None or n == stored, (
            f"cavity support {n} inconsistent with true-lost {stored}"
        )


@dataclass
class TrajectoryRecord:
    outcomes: List[PassOutcome]
    final_state: Optional[PolarizedFockState]
    success: bool
    fidelity_to_target: Optional[float]
    terminated_reason: str
    heralded_total: int
    true_total: int
    lost_total: int
    pristine: bool
    passes: int


def new_context(spec: ProtocolSpec) -> EngineContext:
    if spec.target.kind == "subtract":
        state = normalize(spec.target.initial)
        rotations = []
    else:
        state = vacuum(spec.cutoff())
        rotations = spec.rotation_schedule()
    return EngineContext(cavity_state=state, rotations=rotations)


def _sample_branches(branches, stream) -> int:
    u = stream.uniform()
    acc = 0.0
    for i, b in enumerate(branches):
        acc += b.weight
        if u < acc:
            return i
    return len(branches) - 1


def _sample_dict(dist, stream) -> int:
    u = stream.uniform()
    acc = 0.0
    last = 0
    for k in sorted(dist):
        acc += dist[k]
        last = k
        if u < acc:
            return k
    return last


def _ensure_capacity(state: PolarizedFockState, extra: int) -> PolarizedFockState:
    top = state.total_photon_number()
    if top is None:
        # superpositions over shells do not occur for stored states, but
        # find the highest populated shell anyway
        from .states import lattice_tables

        _, nh, nv = lattice_tables(state.cutoff)
        occ = np.nonzero(state.amp)[0]
        top = int((nh[occ] + nv[occ]).max()) if occ.size else 0
    if top + extra > state.cutoff:
        return grow_cutoff(state, top + extra + 2)
    return state


def run_pass(ctx: EngineContext, spec: ProtocolSpec, stream: TrialStream, debug: bool = False):
    """Advance one pass: loss, interaction outcome, herald, rotation.

    Mutates and returns (PassOutcome, ctx).  Addition targets only; the
    subtraction variant lives in run_subtract_pass.
    """
    if ctx.terminated is not None:
        raise RuntimeError("protocol already terminated")
    n_target = spec.n_additions()
    remaining = n_target - ctx.heralded_total
    eps = spec.pump_policy.epsilon_for(max(remaining, 1))
    ops = SpdcOutcomeOperators(SpdcCoupling(eps))

    # 1. round-trip loss on stored photons
    state = ctx.cavity_state
    lost_here = 0
    if spec.cavity.transmission < 1.0:
        branches = apply_loss(state, spec.cavity.transmission)
        pick = branches[_sample_branches(branches, stream)]
        lh, lv = pick.label
        lost_here = lh + lv
        state = normalize(pick.state) if pick.state.squared_norm > 0 else pick.state

    # 2. interaction outcome
    state = _ensure_capacity(state, 2)
    outcome_branches = ops.outcomes(state, spec.weight_model)
    j = _sample_branches(outcome_branches, stream)
    state = outcome_branches[j].state
    state = normalize(state) if state.squared_norm > 0 else state

    # 3. herald
    announced = _sample_dict(herald_distribution(j, spec.detector), stream)

    # 4. rotation after confirmed single additions
    rotated = False
    schedule = ctx.rotations if ctx.rotations is not None else spec.rotation_schedule()
    if announced == 1 and schedule and ctx.heralded_total < len(schedule):
        state = apply_rotation(state, schedule[ctx.heralded_total])
        rotated = True

    ctx.pass_index += 1
    ctx.true_total += j
    ctx.lost_total += lost_here
    if lost_here > 0 or j != announced:
        ctx.pristine = False
    outcome = PassOutcome(
        pass_index=ctx.pass_index,
        pairs_true=j,
        pairs_announced=announced,
        photons_lost=lost_here,
        rotation_applied=rotated,
        epsilon_used=eps,
    )
    ctx.cavity_state = state
    if announced > 0:
        ctx.photons_added_events.append((ctx.pass_index, announced))
        ctx.heralded_total += announced
        if (spec.one_at_a_time() and announced >= 2) or ctx.heralded_total > n_target:
            ctx.terminated = REASON_OVERSHOOT
        elif ctx.heralded_total == n_target:
            ctx.terminated = REASON_REACHED
    if ctx.terminated is None and ctx.pass_index >= spec.max_passes():
        ctx.terminated = REASON_MAXPASS
    if debug:
        ctx.check_counters()
    return outcome, ctx


def run_subtract_pass(ctx: EngineContext, spec: ProtocolSpec, stream: TrialStream):
    """One pass of the weak-beam-splitter subtraction loop."""
    if ctx.terminated is not None:
        raise RuntimeError("protocol already terminated")
    t = spec.target
    state = ctx.cavity_state
    lost_here = 0
    if spec.cavity.transmission < 1.0:
        branches = apply_loss(state, spec.cavity.transmission)
        pick = branches[_sample_branches(branches, stream)]
        lh, lv = pick.label
        lost_here = lh + lv
        state = normalize(pick.state) if pick.state.squared_norm > 0 else pick.state

    branches = subtract_attempt(state, t.reflectivity)
    k = _sample_branches(branches, stream)
    reflected = branches[k].label
    state = branches[k].state
    state = normalize(state) if state.squared_norm > 0 else state
    announced = _sample_dict(herald_distribution(reflected, spec.detector), stream)

    ctx.pass_index += 1
    ctx.true_total += reflected  # photons actually removed
    ctx.lost_total += lost_here
    if lost_here > 0 or reflected != announced:
        ctx.pristine = False
    outcome = PassOutcome(
        pass_index=ctx.pass_index,
        pairs_true=reflected,
        pairs_announced=announced,
        photons_lost=lost_here,
        rotation_applied=False,
        epsilon_used=0.0,
    )
    ctx.cavity_state = state
    if announced > 0:
        ctx.photons_added_events.append((ctx.pass_index, announced))
        ctx.heralded_total += announced
        if ctx.heralded_total > t.count:
            ctx.terminated = REASON_OVERSHOOT
        elif ctx.heralded_total == t.count:
            ctx.terminated = REASON_REACHED
    if ctx.terminated is None and ctx.pass_index >= spec.max_passes():
        ctx.terminated = REASON_MAXPASS
    return outcome, ctx


def success_of(record: TrajectoryRecord, spec: ProtocolSpec) -> bool:
    """Success from the hidden counters.

    Every created pair must be announced and nothing lost, except that
    Fock targets also succeed when losses exactly cancel extras (the
    emitted photon count is then still the target).  Subtraction
    succeeds when exactly the requested photons were removed, all
    announced, with no round-trip loss.
    """
    if record.terminated_reason != REASON_REACHED:
        return False
    t = spec.target
    if t.kind == "fock":
        return record.true_total - record.lost_total == t.n
    if t.kind in ("noon", "mm"):
        n = spec.n_additions()
        return (
            record.true_total == n
            and record.lost_total == 0
            and record.heralded_total == n
        )
    return (
        record.true_total == t.count
        and record.lost_total == 0
        and record.heralded_total == t.count
    )


def output_fidelity(record: TrajectoryRecord, spec: ProtocolSpec) -> float:
    if record.final_state is None or record.final_state.squared_norm == 0.0:
        from .states import UndefinedFidelityError

        raise UndefinedFidelityError("trajectory produced a zero-norm final state")
    return fidelity(record.final_state, spec.target_state())


def run_protocol(spec: ProtocolSpec, seed: int, trial: int = 0, debug: bool = False) -> TrajectoryRecord:
    """Run one full trajectory with the literal per-pass engine."""
    stream = TrialStream(seed, trial)
    ctx = new_context(spec)
    outcomes: List[PassOutcome] = []
    while ctx.terminated is None:
        if spec.target.kind == "subtract":
            out, ctx = run_subtract_pass(ctx, spec, stream)
        else:
            out, ctx = run_pass(ctx, spec, stream, debug=debug)
        outcomes.append(out)

    final = ctx.cavity_state
    if ctx.terminated == REASON_REACHED and spec.cavity.t_out < 1.0:
        branches = apply_loss(final, spec.cavity.t_out)
        pick = branches[_sample_branches(branches, stream)]
        ctx.lost_total += sum(pick.label)
        final = normalize(pick.state) if pick.state.squared_norm > 0 else pick.state

    record = TrajectoryRecord(
        outcomes=outcomes,
        final_state=final,
        success=False,
        fidelity_to_target=None,
        terminated_reason=ctx.terminated,
        heralded_total=ctx.heralded_total,
        true_total=ctx.true_total,
        lost_total=ctx.lost_total,
        pristine=ctx.pristine,
        passes=ctx.pass_index,
    )
    record.success = success_of(record, spec)
    if final is not None and final.squared_norm > 0.0:
        record.fidelity_to_target = output_fidelity(record, spec)
    return record

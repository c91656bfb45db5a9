"""Use-it-or-lose-it (UILI) policy catalog.

Each ``step_*`` function runs at FRM-send time, mutates the source state in
place and returns True when it triggered (i.e. reduced ACR).  ``brm_gate``
decides whether a backward RM cell may raise ACR.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .units import NS_PER_MS, NS_PER_S

if TYPE_CHECKING:
    from .protocol import SourceParams, SourceState


class PolicyKind(str, enum.Enum):
    NONE = "none"
    FEB95 = "feb95"
    APR95 = "apr95"
    AUG95 = "aug95"
    BASELINE = "baseline"
    COUNT_BASED = "count_based"
    TIME_BASED = "time_based"
    JOINT = "joint"
    TM40_TIMEOUT = "tm40_timeout"


class Region(str, enum.Enum):
    A = "A"
    B = "B"
    C = "C"
    D = "D"


# Policies that ignore the first BRM after a reduction (rule 5b).
RULE_5B_KINDS = frozenset({PolicyKind.AUG95, PolicyKind.BASELINE, PolicyKind.JOINT,
                           PolicyKind.TIME_BASED})


@dataclass(frozen=True)
class PolicyVariant:
    kind: PolicyKind = PolicyKind.COUNT_BASED
    time_based_floor: str = "a"
    use_pr5: bool = False
    switch_aging_enabled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.time_based_floor not in ("a", "b"):
            raise ValueError(f"time_based_floor must be 'a' or 'b', got {self.time_based_floor!r}")

    @property
    def uses_atdf(self) -> bool:
        return self.kind is PolicyKind.TM40_TIMEOUT or self.switch_aging_enabled


def classify_region(acr: float, sr: float, headroom: float, delta: float = 0.0) -> Region:
    """Place (ACR, SR) into one of the four count-based operating regions."""
    if acr > sr + headroom:
        return Region.A
    if abs(acr - sr) <= delta:
        return Region.C
    if acr > sr:
        return Region.B
    return Region.D


# -- legacy formulas ---------------------------------------------------------
# T is in milliseconds for all three (see README, "legacy time unit").

def reduce_feb95(acr: float, t_ms: float, rdf: float) -> float:
    return max(0.0, acr * (1.0 - t_ms * acr / rdf))


def reduce_apr95(acr: float, t_ms: float, rdf: float) -> float:
    if acr <= 0:
        raise ValueError("harmonic reduction needs a positive ACR")
    return 1.0 / (1.0 / acr + t_ms / rdf)


def reduce_linear(acr: float, t_ms: float, tdf: float) -> float:
    return max(0.0, acr * (1.0 - t_ms * tdf))


def time_constant_ns(params: SourceParams) -> int:
    """Decay constant of the time-based proposal, Max(ADDF*FRTT, TBE/PCR)."""
    tbe_time = params.tbe / params.pcr * NS_PER_S
    return int(round(max(params.addf * params.frtt, tbe_time)))


def count_based_triggers_to_floor(acr0: float, floor: float, tdf: float) -> int:
    """Closed-form number of count-based reductions from ``acr0`` to ``floor``."""
    if acr0 <= floor:
        return 0
    return math.ceil(math.log(acr0 / floor) / math.log(1.0 / (1.0 - tdf)))


def _set_rule_5b(state: SourceState, params: SourceParams) -> None:
    if not params.pni:
        state.ignore_next_increase = True


def step_feb95(state: SourceState, params: SourceParams, now: int) -> bool:
    # Detection: TOF FRMs went out with no BRM heard and no decrease made.
    state.frms_since_feedback += 1
    if state.frms_since_feedback < params.tof:
        return False
    t_ms = (now - state.last_feedback_at) / NS_PER_MS
    new = max(params.icr, reduce_feb95(state.acr, t_ms, params.rdf))
    state.frms_since_feedback = 0
    state.last_feedback_at = now
    if new < state.acr:
        state.acr = new
        return True
    return False


def step_apr95(state: SourceState, params: SourceParams, t_ns: int) -> bool:
    if t_ns <= params.tof * params.nrm / state.acr * NS_PER_S or state.acr <= params.icr:
        return False
    state.acr = max(params.icr, reduce_apr95(state.acr, t_ns / NS_PER_MS, params.rdf))
    return True


def step_aug95(state: SourceState, params: SourceParams, sr: float, t_ns: int) -> bool:
    """August 1995 rule 5: multiplicative detection, T-proportional cut, ICR floor."""
    threshold_ns = params.tof * params.nrm / state.acr * NS_PER_S
    if t_ns <= threshold_ns or state.acr <= params.icr:
        return False
    state.acr = max(params.icr, reduce_linear(state.acr, t_ns / NS_PER_MS, params.tdf))
    _set_rule_5b(state, params)
    return True


def step_baseline(state: SourceState, params: SourceParams, sr: float) -> bool:
    if state.acr <= sr + params.icr or state.acr <= params.icr:
        return False
    state.acr = max(params.icr, state.acr * (1.0 - params.tdf))
    _set_rule_5b(state, params)
    return True


def step_count_based(state: SourceState, params: SourceParams, sr: float,
                     use_pr5: bool = False) -> bool:
    if use_pr5 and state.pr5:
        state.pr5 = False
        return False
    state.pr5 = False
    floor = sr + params.headroom
    if state.acr > floor:
        state.acr = max(floor, state.acr * (1.0 - params.tdf))
        return True
    return False


def time_based_floor(params: SourceParams, sr: float, option: str) -> float:
    if option == "a":
        return max(params.icr, params.tof * sr)
    return params.icr + sr


def step_time_based(state: SourceState, params: SourceParams, sr: float, t_ns: int,
                    option: str = "a") -> bool:
    acr_max = time_based_floor(params, sr, option)
    if state.acr <= acr_max:
        return False
    decay = 1.0 - t_ns / time_constant_ns(params)
    state.acr = max(state.acr * decay, acr_max)
    _set_rule_5b(state, params)
    return True


def step_joint(state: SourceState, params: SourceParams, sr: float) -> bool:
    floor = sr + params.icr
    if state.acr <= floor:
        return False
    state.acr = max(floor, state.acr * (1.0 - params.tdf))
    _set_rule_5b(state, params)
    return True


def apply_policy(variant: PolicyVariant, state: SourceState, params: SourceParams,
                 sr: float, t_ns: int, now: int) -> bool:
    """Run the FRM-time UILI test for ``variant``; True if ACR was reduced."""
    if params.tdf == 0:
        return False
    kind = variant.kind
    if kind is PolicyKind.COUNT_BASED:
        return step_count_based(state, params, sr, variant.use_pr5)
    if kind is PolicyKind.TIME_BASED:
        return step_time_based(state, params, sr, t_ns, variant.time_based_floor)
    if kind is PolicyKind.AUG95:
        return step_aug95(state, params, sr, t_ns)
    if kind is PolicyKind.BASELINE:
        return step_baseline(state, params, sr)
    if kind is PolicyKind.JOINT:
        return step_joint(state, params, sr)
    if kind is PolicyKind.FEB95:
        return step_feb95(state, params, now)
    if kind is PolicyKind.APR95:
        return step_apr95(state, params, t_ns)
    return False


def brm_gate(variant: PolicyVariant, state: SourceState, ni: bool, pni: bool = False) -> bool:
    """Whether a BRM may raise ACR.  Consumes the rule-5b one-shot flag."""
    kind = variant.kind
    if kind in RULE_5B_KINDS:
        blocked = state.ignore_next_increase and not pni
        state.ignore_next_increase = False
        return not ni and not blocked
    if kind is PolicyKind.COUNT_BASED:
        return not ni and state.acr_ok
    return not ni

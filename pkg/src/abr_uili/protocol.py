"""ABR source (SES) and destination (DES) end-system behavior."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

from . import policies
from .policies import PolicyKind, PolicyVariant
from .units import NS_PER_MS, NS_PER_S, cell_gap_ns, mbps_to_cps


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


class ProtocolError(RuntimeError):
    pass


@dataclass
class SourceParams:
    """Negotiated SES parameters.  Rates in cells/s, durations in ns."""

    pcr: float
    mcr: float
    icr: float
    rif: float = 1.0
    rdf: float = 1 / 512
    nrm: int = 32
    mrm: int = 2
    trm: int = 100 * NS_PER_MS
    tof: float = 2.0
    tdf: float = 0.125
    headroom: float = mbps_to_cps(10.0)
    frtt: int = 30 * NS_PER_MS
    addf: float = 2.0
    tbe: int = 4096
    atdf: int = 500 * NS_PER_MS
    pni: bool = False
    delta: float | None = None
    tcr: float = 10.0  # lowest rate a source may be driven to, cells/s

    def __post_init__(self):
        if self.delta is None:
            # one nanosecond of scheduler resolution, expressed as a rate step at PCR
            self.delta = self.pcr * self.pcr / NS_PER_S
        self.validate()

    def validate(self) -> None:
        if not (self.pcr > 0 and self.icr > 0):
            raise ValueError("PCR and ICR must be positive")
        if self.mcr < 0:
            raise ValueError("MCR must be >= 0")
        if not self.mcr <= self.icr <= self.pcr:
            raise ValueError(f"need MCR <= ICR <= PCR, got {self.mcr}, {self.icr}, {self.pcr}")
        if self.nrm < 2:
            raise ValueError("Nrm must be >= 2")
        if self.tdf < 0:
            raise ValueError("TDF must be >= 0")
        if not 0 < self.rif <= 1:
            raise ValueError("RIF must lie in (0, 1]")
        if not 0 < self.tcr <= self.pcr:
            raise ValueError("TCR must lie in (0, PCR]")

    @property
    def rate_floor(self) -> float:
        return max(self.mcr, self.tcr)

    def with_(self, **changes) -> SourceParams:
        return replace(self, **changes)


@dataclass
class SourceState:
    vc: int
    acr: float
    last_frm_at: int = 0
    cells_since_frm: int = 0
    acr_ok: bool = True
    pr5: bool = False
    ignore_next_increase: bool = False
    last_activity_at: int = 0
    frms_sent: int = 0
    data_sent: int = 0
    uili_triggers: int = 0
    # Feb-95 bookkeeping: FRMs since the last BRM or decrease, and when that was
    frms_since_feedback: int = 0
    last_feedback_at: int = 0
    last_sr: float | None = field(default=None, repr=False)

    @classmethod
    def initial(cls, vc: int, params: SourceParams, now: int = 0) -> SourceState:
        return cls(vc=vc, acr=params.icr, last_frm_at=now, last_activity_at=now,
                   last_feedback_at=now)


@dataclass(slots=True)
class RmCell:
    vc: int
    direction: Direction
    ccr: float
    er: float
    ni: bool = False


def next_cell_departure(state: SourceState, has_data: bool, now: int,
                        cap: float | None = None) -> int | None:
    """Time of the next send opportunity, or None when the traffic is idle."""
    if state.acr <= 0:
        raise ProtocolError(f"VC {state.vc}: ACR must be positive")
    if not has_data:
        return None
    rate = state.acr if cap is None else min(state.acr, cap)
    return now + cell_gap_ns(rate)


def measure_sr(nrm: int, t_ns: int) -> float:
    """Source rate over the last FRM window, cells/s."""
    if t_ns <= 0:
        raise ProtocolError("source-rate window has zero length")
    return nrm * NS_PER_S / t_ns


def on_frm_send(state: SourceState, params: SourceParams, policy: PolicyVariant,
                now: int) -> tuple[bool, RmCell]:
    """Run the FRM-time rule set and build the outgoing forward RM cell.

    Returns (triggered, cell) where ``triggered`` tells whether the policy
    reduced ACR.  The first FRM of a connection has no measurement window and
    skips the UILI test.
    """
    triggered = False
    state.last_sr = None
    if state.frms_sent > 0:
        t_ns = now - state.last_frm_at
        sr = measure_sr(state.cells_since_frm + 1, t_ns)
        state.last_sr = sr
        state.acr_ok = state.acr <= sr + params.delta or params.tdf == 0
        triggered = policies.apply_policy(policy, state, params, sr, t_ns, now)
        if triggered:
            state.uili_triggers += 1
            state.acr = min(max(state.acr, params.rate_floor), params.pcr)
    state.frms_sent += 1
    state.cells_since_frm = 0
    state.last_frm_at = now
    state.last_activity_at = now
    return triggered, RmCell(state.vc, Direction.FORWARD, ccr=state.acr, er=params.pcr)


def on_brm_receive(state: SourceState, params: SourceParams, policy: PolicyVariant,
                   rm: RmCell, now: int | None = None) -> SourceState:
    if rm.direction is not Direction.BACKWARD:
        raise ProtocolError("on_brm_receive expects a backward RM cell")
    if rm.vc != state.vc:
        raise ProtocolError(f"BRM for VC {rm.vc} delivered to VC {state.vc}")
    if policies.brm_gate(policy, state, rm.ni, params.pni):
        state.pr5 = state.acr < rm.er
        state.acr = min(state.acr + params.rif * params.pcr, params.pcr)
    state.acr = min(state.acr, rm.er)
    state.acr = max(state.acr, params.rate_floor)
    if policy.kind is PolicyKind.FEB95:
        state.frms_since_feedback = 0
        if now is not None:
            state.last_feedback_at = now
    return state


def des_turnaround(rm: RmCell) -> RmCell:
    if rm.direction is not Direction.FORWARD:
        raise ProtocolError("DES can only turn around forward RM cells")
    return RmCell(rm.vc, Direction.BACKWARD, rm.ccr, rm.er, rm.ni)


def atdf_check(state: SourceState, params: SourceParams, now: int) -> bool:
    """Reset ACR to ICR after an idle period longer than ATDF.  Never raises ACR."""
    if now - state.last_activity_at > params.atdf and state.acr > params.icr:
        state.acr = params.icr
        return True
    return False

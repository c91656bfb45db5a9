"""Output-queued switch ports: FIFO service, ERICA-style explicit rate, aging."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .units import NS_PER_S, PROP_NS_PER_KM, cell_gap_ns, mbps_to_cps


@dataclass(frozen=True)
class LinkParams:
    rate: float  # cells/s
    length_km: float

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("link rate must be positive")
        if self.length_km < 0:
            raise ValueError("link length must be >= 0")

    @property
    def prop_delay(self) -> int:
        return int(round(self.length_km * PROP_NS_PER_KM))

    @classmethod
    def from_mbps(cls, mbps: float, length_km: float) -> LinkParams:
        return cls(mbps_to_cps(mbps), length_km)


@dataclass
class EricaState:
    link_rate: float
    target_utilization: float = 0.9
    interval_len: int = 1_000_000
    interval_cells: int = 100
    interval_start: int = 0
    abr_cells_this_interval: int = 0
    active_vcs_this_interval: set = field(default_factory=set)
    overload_z: float = 1.0
    fair_share: float = 0.0
    n_active: int = 0
    intervals: int = 0

    def __post_init__(self):
        if not self.fair_share:
            self.fair_share = self.target_rate

    @property
    def target_rate(self) -> float:
        return self.target_utilization * self.link_rate


@dataclass
class VcAccounting:
    ccr_seen: float = 0.0
    rate_estimate: float = 0.0
    cells_this_interval: int = 0
    aging_alpha: float = 1.0
    aging_delta: float = 1.0
    smoothing_weight: float = 0.5


def erica_interval_end(state: EricaState, measured_input: int, elapsed: int) -> EricaState:
    """Close an averaging interval: update load factor, active count, fair share."""
    if elapsed <= 0:
        return state
    target = state.target_rate
    if measured_input > 0:
        input_rate = measured_input * NS_PER_S / elapsed
        state.overload_z = input_rate / target
        state.n_active = len(state.active_vcs_this_interval)
        state.fair_share = target / max(1, state.n_active)
    state.abr_cells_this_interval = 0
    state.active_vcs_this_interval = set()
    state.intervals += 1
    return state


def er_feedback(state: EricaState, vc: VcAccounting) -> float:
    vc_share = vc.ccr_seen / state.overload_z if state.overload_z > 0 else state.link_rate
    return min(max(state.fair_share, vc_share), state.link_rate)


def aging_factor(u: float, alpha: float, delta: float) -> float:
    try:
        return math.exp(alpha * u) - math.exp(alpha * delta)
    except OverflowError:  # an idle VC claiming a rate: u grows without bound
        return math.inf


def switch_uili_er(vc: VcAccounting, base_er: float, eps: float = 1e-9) -> float:
    """Shrink the allocation of a VC whose claimed rate exceeds its measured rate."""
    u = vc.ccr_seen / max(eps, vc.rate_estimate)
    if u <= vc.aging_delta:
        return base_er
    if vc.rate_estimate >= base_er:
        return base_er
    aged = base_er / (1.0 + aging_factor(u, vc.aging_alpha, vc.aging_delta))
    return max(vc.rate_estimate, aged)


class Port:
    """One output port: infinite FIFO drained at link rate.

    Departure times are fixed at enqueue time (deterministic service), so
    the queue is kept as the list of pending departure instants.
    """

    def __init__(self, name: str, link: LinkParams, erica: EricaState | None = None,
                 aging: bool = False, aging_alpha: float = 1.0, aging_delta: float = 1.0,
                 smoothing_weight: float = 0.5):
        self.name = name
        self.link = link
        self.service_ns = cell_gap_ns(link.rate)
        self.prop_ns = link.prop_delay
        self.erica = erica
        self.aging = aging
        self.aging_alpha = aging_alpha
        self.aging_delta = aging_delta
        self.smoothing_weight = smoothing_weight
        self.vcs: dict[int, VcAccounting] = {}
        self._pending: deque[int] = deque()
        self.busy_until = 0
        self.enqueued_total = 0
        self.max_qlen = 0
        self.last_departure_start = -1
        self.min_departure_spacing: int | None = None

    def accounting(self, vc: int) -> VcAccounting:
        acct = self.vcs.get(vc)
        if acct is None:
            acct = VcAccounting(aging_alpha=self.aging_alpha, aging_delta=self.aging_delta,
                                smoothing_weight=self.smoothing_weight)
            self.vcs[vc] = acct
        return acct

    def qlen(self, now: int) -> int:
        pending = self._pending
        while pending and pending[0] <= now:
            pending.popleft()
        return len(pending)

    def dequeued_total(self, now: int) -> int:
        return self.enqueued_total - self.qlen(now)

    def enqueue(self, now: int, vc: int, counts_active: bool, ccr: float | None = None) -> int:
        """Queue one cell; return the instant its last bit leaves the port."""
        if self.erica is not None:
            self._erica_arrival(now, vc, counts_active, ccr)
        start = now if now > self.busy_until else self.busy_until
        if self.last_departure_start >= 0:
            gap = start - self.last_departure_start
            if self.min_departure_spacing is None or gap < self.min_departure_spacing:
                self.min_departure_spacing = gap
        self.last_departure_start = start
        done = start + self.service_ns
        self.busy_until = done
        pending = self._pending
        while pending and pending[0] <= now:
            pending.popleft()
        pending.append(done)
        self.enqueued_total += 1
        if len(pending) > self.max_qlen:
            self.max_qlen = len(pending)
        return done

    def _erica_arrival(self, now: int, vc: int, counts_active: bool, ccr: float | None) -> None:
        erica = self.erica
        if now - erica.interval_start >= erica.interval_len:
            self._close_interval(now)
        erica.abr_cells_this_interval += 1
        acct = self.vcs.get(vc)
        if acct is None:
            acct = self.accounting(vc)
        acct.cells_this_interval += 1
        if counts_active:
            erica.active_vcs_this_interval.add(vc)
        if ccr is not None:
            acct.ccr_seen = ccr
        if erica.abr_cells_this_interval >= erica.interval_cells:
            self._close_interval(now)

    def _close_interval(self, now: int) -> None:
        erica = self.erica
        elapsed = now - erica.interval_start
        if elapsed <= 0:
            return
        if self.aging:
            for acct in self.vcs.values():
                measured = acct.cells_this_interval * NS_PER_S / elapsed
                w = acct.smoothing_weight
                acct.rate_estimate = (1 - w) * acct.rate_estimate + w * measured
                acct.cells_this_interval = 0
        else:
            for acct in self.vcs.values():
                acct.cells_this_interval = 0
        erica_interval_end(erica, erica.abr_cells_this_interval, elapsed)
        erica.interval_start = now

    def explicit_rate(self, vc: int) -> float:
        acct = self.accounting(vc)
        er = er_feedback(self.erica, acct)
        if self.aging:
            er = switch_uili_er(acct, er)
        return er

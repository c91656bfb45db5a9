"""Application traffic above the SES and per-burst metrics."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Optional

from .units import CELL_BITS, NS_PER_S


def greedy_has_data() -> bool:
    return True


@dataclass
class BottleneckSchedule:
    """Piecewise rate cap.  Segment i covers [until[i-1], until[i]); None = unbounded."""

    segments: list[tuple[Optional[int], Optional[float]]] = field(default_factory=list)

    def __post_init__(self):
        untils = [u for u, _ in self.segments if u is not None]
        if untils != sorted(untils):
            raise ValueError("bottleneck segments must be sorted by end time")
        if any(u is None for u, _ in self.segments[:-1]):
            raise ValueError("only the last bottleneck segment may be open-ended")
        self._untils = untils

    def cap(self, now: int) -> Optional[float]:
        if not self.segments:
            return None
        i = bisect.bisect_right(self._untils, now)
        if i >= len(self.segments):
            return None
        return self.segments[i][1]


def bottleneck_rate_cap(schedule: BottleneckSchedule, now: int) -> Optional[float]:
    return schedule.cap(now)


@dataclass
class ClosedLoopParams:
    request_cells: int = 256
    response_cells: int = 16
    inter_cycle: int = 1_000_000
    inter_request: int = 0
    requests_per_cycle: int = 1

    def __post_init__(self):
        if self.request_cells < 1 or self.response_cells < 1:
            raise ValueError("request and response sizes must be >= 1 cell")
        if self.requests_per_cycle < 1:
            raise ValueError("requests_per_cycle must be >= 1")


@dataclass
class BurstRecord:
    vc: str
    burst_index: int
    size: int
    first_cell_at: int
    last_cell_at: int
    response_time: int
    effective_throughput: float  # bits/s
    cells_on_wire: int = 0  # data plus interleaved RM cells
    cell_times: tuple = field(default=(), repr=False, compare=False)

    @property
    def send_rate_cps(self) -> float:
        """Rate implied by the cell spacing inside the burst."""
        span = self.last_cell_at - self.first_cell_at
        cells = max(self.cells_on_wire, self.size)
        if span <= 0 or cells < 2:
            return math.inf
        return (cells - 1) * NS_PER_S / span

    def fraction_faster_than(self, rate_cps: float) -> float:
        """Share of intra-burst cell gaps shorter than one gap at ``rate_cps``."""
        times = self.cell_times
        if len(times) < 2:
            return 0.0
        limit = NS_PER_S / rate_cps
        fast = sum(1 for a, b in zip(times, times[1:]) if b - a < limit)
        return fast / (len(times) - 1)


def record_burst(vc, burst_index: int, size: int, first_cell_at: int, last_cell_at: int,
                 cell_service_ns: int, cells_on_wire: int = 0, cell_times=()) -> BurstRecord:
    if size >= 2 and last_cell_at <= first_cell_at:
        raise ValueError("a multi-cell burst must end after it starts")
    response = last_cell_at - first_cell_at + cell_service_ns
    throughput = size * CELL_BITS * NS_PER_S / response
    return BurstRecord(vc, burst_index, size, first_cell_at, last_cell_at, response, throughput,
                       cells_on_wire or size, tuple(cell_times))


class Traffic:
    """Backlog feeding one SES.  Subclasses decide how data appears."""

    infinite = False

    def __init__(self):
        self.backlog = 0

    def has_data(self) -> bool:
        return self.infinite or self.backlog > 0

    def cap(self, now: int) -> Optional[float]:
        return None

    def take(self) -> None:
        if not self.infinite:
            self.backlog -= 1


class Greedy(Traffic):
    infinite = True

    def has_data(self) -> bool:
        return greedy_has_data()


class CappedGreedy(Greedy):
    def __init__(self, schedule: BottleneckSchedule):
        super().__init__()
        self.schedule = schedule

    def cap(self, now: int) -> Optional[float]:
        return self.schedule.cap(now)


class BurstTraffic(Traffic):
    """Finite bursts pushed by an application; tracks each burst's timing."""

    def __init__(self, vc, cell_service_ns: int):
        super().__init__()
        self.vc = vc
        self.cell_service_ns = cell_service_ns
        self._bursts: list[list] = []  # [size, remaining, first_at, cells_on_wire, times]
        self.records: list[BurstRecord] = []
        self._next_index = 0

    def push(self, size: int) -> None:
        self._bursts.append([size, size, None, 0, []])
        self.backlog += size

    def on_cell(self, now: int, is_data: bool) -> Optional[BurstRecord]:
        if not self._bursts:
            return None
        burst = self._bursts[0]
        if burst[2] is None:
            burst[2] = now
        burst[3] += 1
        burst[4].append(now)
        if not is_data:
            return None
        burst[1] -= 1
        self.backlog -= 1
        if burst[1] > 0:
            return None
        self._bursts.pop(0)
        rec = record_burst(self.vc, self._next_index, burst[0], burst[2], now,
                           self.cell_service_ns, burst[3], burst[4])
        self._next_index += 1
        self.records.append(rec)
        return rec

    def take(self) -> None:  # backlog is consumed in on_cell
        pass


@dataclass
class ClientState:
    cycle: int = 0
    requests_issued: int = 0
    responses_expected: int = 0
    response_cells_pending: int = 0
    waiting: bool = False


def client_cycle_step(state: ClientState, params: ClosedLoopParams, event: str,
                      now: int) -> list[tuple]:
    """Advance the closed-loop client.

    ``event`` is ``"cycle_start"``, ``"request_due"`` or ``"response_cell"``.
    Returns actions: ``("send_request", cells)``, ``("schedule_request", t)``,
    ``("schedule_cycle", t)``.
    """
    actions: list[tuple] = []
    if event == "cycle_start":
        if state.waiting:
            raise RuntimeError("cycle started while the previous one is outstanding")
        state.cycle += 1
        state.waiting = True
        state.requests_issued = 0
        state.responses_expected = params.requests_per_cycle
        state.response_cells_pending = params.requests_per_cycle * params.response_cells
        event = "request_due"
    if event == "request_due":
        state.requests_issued += 1
        actions.append(("send_request", params.request_cells))
        if state.requests_issued < params.requests_per_cycle:
            actions.append(("schedule_request", now + params.inter_request))
        return actions
    if event == "response_cell":
        if not state.waiting or state.response_cells_pending <= 0:
            raise RuntimeError("response cell arrived with no outstanding request")
        state.response_cells_pending -= 1
        if state.response_cells_pending == 0:
            state.waiting = False
            actions.append(("schedule_cycle", now + params.inter_cycle))
        return actions
    raise ValueError(f"unknown client event {event!r}")


@dataclass
class ServerState:
    request_cells_received: int = 0
    responses_sent: int = 0


def server_step(state: ServerState, params: ClosedLoopParams) -> list[tuple]:
    """Called per request cell received; emits a response once a request is complete."""
    state.request_cells_received += 1
    if state.request_cells_received % params.request_cells == 0:
        state.responses_sent += 1
        return [("send_response", params.response_cells)]
    return []

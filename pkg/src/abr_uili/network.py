"""Cell-level wiring of end systems, links and switches on top of the kernel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from . import protocol
from .kernel import EventKind, Simulator
from .policies import PolicyVariant, classify_region
from .protocol import Direction, RmCell, SourceParams, SourceState
from .switch import EricaState, LinkParams, Port
from .traffic import BurstTraffic, Traffic
from .units import cell_gap_ns

ARRIVAL = EventKind.CELL_ARRIVAL
DEPARTURE = EventKind.CELL_DEPARTURE


@dataclass
class EricaSettings:
    target_utilization: float = 0.9
    interval_ms: float = 1.0
    interval_cells: int = 100
    aging_alpha: float = 1.0
    aging_delta: float = 1.0
    smoothing_weight: float = 0.5


@dataclass
class VirtualCircuit:
    id: int
    name: str
    path: list[str]
    params: SourceParams
    traffic: Traffic
    start_at: int = 0
    state: SourceState = None
    fwd_ports: list[Port] = field(default_factory=list)
    bwd_ports: list[Port] = field(default_factory=list)
    send_pending: bool = False
    next_allowed: int = 0
    data_delivered: int = 0
    brms_received: int = 0
    on_deliver: Optional[Callable[[int], None]] = None

    def __post_init__(self):
        if self.state is None:
            self.state = SourceState.initial(self.id, self.params, self.start_at)


class Network:
    """Hosts, switches and VCs driven by one :class:`Simulator`."""

    def __init__(self, policy: PolicyVariant, erica: EricaSettings | None = None,
                 queue_sample_ns: int = 100_000, record_digest: bool = False):
        self.sim = Simulator(record_digest=record_digest)
        self.policy = policy
        self.erica = erica or EricaSettings()
        self.queue_sample_ns = queue_sample_ns
        self.node_kind: dict[str, str] = {}
        self.ports: dict[tuple[str, str], Port] = {}
        self.vcs: list[VirtualCircuit] = []
        self.vc_by_name: dict[str, VirtualCircuit] = {}
        # (time_ns, vc_name, acr, sr, region, event)
        self.acr_trace: list[tuple] = []
        # (time_ns, switch, port, qlen)
        self.queue_trace: list[tuple] = []
        self._qbucket: dict[tuple[str, str], list] = {}
        self.misrouted_brms = 0
        self._uses_atdf = policy.uses_atdf

    # -- construction --------------------------------------------------------

    def add_node(self, name: str, kind: str) -> None:
        if kind not in ("host", "switch"):
            raise ValueError(f"node kind must be host or switch, got {kind!r}")
        if name in self.node_kind:
            raise ValueError(f"duplicate node {name!r}")
        self.node_kind[name] = kind

    def add_link(self, a: str, b: str, link: LinkParams) -> None:
        for src, dst in ((a, b), (b, a)):
            if src not in self.node_kind or dst not in self.node_kind:
                raise ValueError(f"link {a}-{b} references an unknown node")
            erica = None
            if self.node_kind[src] == "switch":
                e = self.erica
                erica = EricaState(link.rate, e.target_utilization,
                                   int(round(e.interval_ms * 1e6)), e.interval_cells)
            self.ports[(src, dst)] = Port(
                f"{src}->{dst}", link, erica, aging=self.policy.switch_aging_enabled,
                aging_alpha=self.erica.aging_alpha, aging_delta=self.erica.aging_delta,
                smoothing_weight=self.erica.smoothing_weight)

    def add_vc(self, name: str, path: list[str], params: SourceParams, traffic: Traffic,
               start_at: int = 0) -> VirtualCircuit:
        if len(path) < 2:
            raise ValueError(f"VC {name}: path needs at least two nodes")
        if self.node_kind.get(path[0]) != "host" or self.node_kind.get(path[-1]) != "host":
            raise ValueError(f"VC {name}: endpoints must be hosts")
        for mid in path[1:-1]:
            if self.node_kind.get(mid) != "switch":
                raise ValueError(f"VC {name}: intermediate node {mid!r} is not a switch")
        fwd, bwd = [], []
        for a, b in zip(path, path[1:]):
            if (a, b) not in self.ports:
                raise ValueError(f"VC {name}: no link between {a} and {b}")
            fwd.append(self.ports[(a, b)])
            bwd.append(self.ports[(b, a)])
        vc = VirtualCircuit(len(self.vcs), name, list(path), params, traffic, start_at)
        vc.fwd_ports, vc.bwd_ports = fwd, bwd
        self.vcs.append(vc)
        self.vc_by_name[name] = vc
        return vc

    def start(self) -> None:
        for vc in self.vcs:
            self._trace(vc, vc.start_at, None, "start")
            vc.next_allowed = vc.start_at
            if vc.traffic.has_data():
                vc.send_pending = True
                self.sim.schedule(vc.start_at, DEPARTURE, self._send, vc)

    # -- source side ---------------------------------------------------------

    def kick(self, vc: VirtualCircuit) -> None:
        """Wake an idle source after its application queued data."""
        if vc.send_pending or not vc.traffic.has_data():
            return
        vc.send_pending = True
        now = self.sim.now
        self.sim.schedule(max(now, vc.next_allowed), DEPARTURE, self._send, vc)

    def _trace(self, vc: VirtualCircuit, now: int, sr: Optional[float], event: str,
               region: str = "n/a") -> None:
        self.acr_trace.append((now, vc.name, vc.state.acr, sr, region, event))

    def _send(self, vc: VirtualCircuit) -> None:
        now = self.sim.now
        vc.send_pending = False
        traffic = vc.traffic
        if not traffic.has_data():
            return
        state, params = vc.state, vc.params
        if self._uses_atdf and protocol.atdf_check(state, params, now):
            self._trace(vc, now, None, "atdf")
        if (state.frms_sent == 0 or state.cells_since_frm >= params.nrm - 1
                or now - state.last_frm_at > params.trm):
            acr_before = state.acr
            triggered, rm = protocol.on_frm_send(state, params, self.policy, now)
            sr = state.last_sr
            region = "n/a" if sr is None else classify_region(
                acr_before, sr, params.headroom, params.delta).value
            self._trace(vc, now, sr, "frm_uili" if triggered else "frm", region)
            is_data = False
        else:
            rm = None
            state.cells_since_frm += 1
            state.data_sent += 1
            traffic.take()
            is_data = True
        state.last_activity_at = now
        if isinstance(traffic, BurstTraffic):
            traffic.on_cell(now, is_data)

        port = vc.fwd_ports[0]
        done = port.enqueue(now, vc.id, True)
        self.sim.schedule(done + port.prop_ns, ARRIVAL, self._fwd_arrive, vc, 1, rm)

        cap = traffic.cap(now)
        rate = state.acr if cap is None or cap >= state.acr else cap
        vc.next_allowed = now + cell_gap_ns(rate)
        if traffic.has_data():
            vc.send_pending = True
            self.sim.schedule(vc.next_allowed, DEPARTURE, self._send, vc)

    # -- cell movement -------------------------------------------------------

    def _sample_queue(self, key: tuple[str, str], port: Port, now: int, qlen: int) -> None:
        bucket = now // self.queue_sample_ns
        slot = self._qbucket.get(key)
        if slot is None:
            self._qbucket[key] = [bucket, qlen]
            return
        if slot[0] != bucket:
            self.queue_trace.append((slot[0] * self.queue_sample_ns, key[0], port.name, slot[1]))
            slot[0] = bucket
            slot[1] = qlen
        elif qlen > slot[1]:
            slot[1] = qlen

    def _switch_enqueue(self, port: Port, vc: VirtualCircuit, now: int, active: bool,
                        ccr: Optional[float]) -> int:
        done = port.enqueue(now, vc.id, active, ccr)
        self._sample_queue((port.name.split("->")[0], port.name), port, now, len(port._pending))
        return done

    def _fwd_arrive(self, vc: VirtualCircuit, hop: int, rm: Optional[RmCell]) -> None:
        now = self.sim.now
        if hop == len(vc.path) - 1:
            if rm is None:
                vc.data_delivered += 1
                if vc.on_deliver is not None:
                    vc.on_deliver(now)
                return
            brm = protocol.des_turnaround(rm)
            port = vc.bwd_ports[hop - 1]
            done = port.enqueue(now, vc.id, False)
            self.sim.schedule(done + port.prop_ns, ARRIVAL, self._bwd_arrive, vc, hop - 1, brm)
            return
        port = vc.fwd_ports[hop]
        done = self._switch_enqueue(port, vc, now, True, rm.ccr if rm is not None else None)
        self.sim.schedule(done + port.prop_ns, ARRIVAL, self._fwd_arrive, vc, hop + 1, rm)

    def _bwd_arrive(self, vc: VirtualCircuit, hop: int, rm: RmCell) -> None:
        now = self.sim.now
        if hop == 0:
            self._receive_brm(vc, rm, now)
            return
        er = vc.fwd_ports[hop].explicit_rate(vc.id)
        if er < rm.er:
            rm.er = er
        port = vc.bwd_ports[hop - 1]
        done = self._switch_enqueue(port, vc, now, False, None)
        self.sim.schedule(done + port.prop_ns, ARRIVAL, self._bwd_arrive, vc, hop - 1, rm)

    def _receive_brm(self, vc: VirtualCircuit, rm: RmCell, now: int) -> None:
        if rm.vc != vc.id or rm.direction is not Direction.BACKWARD:
            self.misrouted_brms += 1
            return
        vc.brms_received += 1
        before = vc.state.acr
        protocol.on_brm_receive(vc.state, vc.params, self.policy, rm, now)
        if vc.state.acr != before:
            self._trace(vc, now, None, "brm")

    # -- running -------------------------------------------------------------

    def run_until(self, t_end: int) -> int:
        return self.sim.run_until(t_end)

    def flush_queue_trace(self) -> None:
        for key, (bucket, qmax) in sorted(self._qbucket.items()):
            self.queue_trace.append((bucket * self.queue_sample_ns, key[0], key[1], qmax))
        self._qbucket.clear()
        self.queue_trace.sort(key=lambda r: (r[0], r[1], r[2]))

    def switch_ports(self) -> dict[tuple[str, str], Port]:
        return {k: p for k, p in self.ports.items() if p.erica is not None}

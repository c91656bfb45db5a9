"""Scenario construction, execution and output files."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import metrics
from .config import ScenarioConfig, parse_source
from .kernel import EventKind
from .network import EricaSettings, Network, VirtualCircuit
from .switch import LinkParams
from .traffic import (BottleneckSchedule, BurstTraffic, CappedGreedy, ClientState,
                      ClosedLoopParams, Greedy, ServerState, client_cycle_step, server_step)
from .units import CELL_BITS, NS_PER_S, cell_gap_ns, mbps_to_cps, ms

ACR_COLUMNS = ("time_ns", "vc", "acr_cps", "sr_cps", "region", "event")
QUEUE_COLUMNS = ("time_ns", "switch", "port", "qlen_cells")
BURST_COLUMNS = ("vc", "burst_index", "size_cells", "start_ns", "end_ns", "response_ns",
                 "throughput_bps")

FIVE_SOURCE_BOTTLENECK = "SW1->SW2"
SINGLE_CLIENT_BOTTLENECK = "SW1->SW2"


@dataclass
class Scenario:
    cfg: ScenarioConfig
    net: Network
    bottleneck: Optional[str] = None
    client: Optional[VirtualCircuit] = None
    server: Optional[VirtualCircuit] = None
    extras: dict = field(default_factory=dict)

    def burst_records(self) -> list:
        recs = []
        for vc in self.net.vcs:
            if isinstance(vc.traffic, BurstTraffic):
                recs.extend(vc.traffic.records)
        return recs


def _erica(cfg: ScenarioConfig) -> EricaSettings:
    e = cfg.erica
    return EricaSettings(
        target_utilization=e.get("target_utilization", 0.9),
        interval_ms=e.get("interval_ms", 1.0),
        interval_cells=int(e.get("interval_cells", 100)),
        aging_alpha=e.get("aging_alpha", 1.0),
        aging_delta=e.get("aging_delta", 1.0),
        smoothing_weight=e.get("smoothing_weight", 0.5),
    )


def build_scenario(cfg: ScenarioConfig, record_digest: bool = False) -> Scenario:
    net = Network(cfg.policy, _erica(cfg), cfg.queue_sample_ns, record_digest=record_digest)
    link = LinkParams.from_mbps(cfg.link_rate_mbps, cfg.link_length_km)
    if cfg.topology == "five_sources":
        return _build_five_sources(cfg, net, link)
    if cfg.topology == "single_client":
        return _build_single_client(cfg, net, link)
    return _build_custom(cfg, net, link)


def _build_five_sources(cfg: ScenarioConfig, net: Network, link: LinkParams) -> Scenario:
    net.add_node("SW1", "switch")
    net.add_node("SW2", "switch")
    for i in range(1, 6):
        net.add_node(f"S{i}", "host")
        net.add_node(f"D{i}", "host")
    for i in range(1, 6):
        net.add_link(f"S{i}", "SW1", link)
    net.add_link("SW1", "SW2", link)
    for i in range(1, 6):
        net.add_link("SW2", f"D{i}", link)
    t = cfg.traffic
    cap = mbps_to_cps(t["max_source_rate_mbps"])
    until = ms(t["bottleneck_until_ms"])
    for i in range(1, 6):
        path = [f"S{i}", "SW1", "SW2", f"D{i}"]
        net.add_vc(f"S{i}->D{i}", path, cfg.source,
                   CappedGreedy(BottleneckSchedule([(until, cap), (None, None)])))
    for i in range(1, 6):
        path = [f"D{i}", "SW2", "SW1", f"S{i}"]
        net.add_vc(f"D{i}->S{i}", path, cfg.source,
                   CappedGreedy(BottleneckSchedule([(until, cap), (None, None)])))
    return Scenario(cfg, net, bottleneck=FIVE_SOURCE_BOTTLENECK)


def _build_single_client(cfg: ScenarioConfig, net: Network, link: LinkParams) -> Scenario:
    for name in ("C", "SRV", "BG", "BGD"):
        net.add_node(name, "host")
    net.add_node("SW1", "switch")
    net.add_node("SW2", "switch")
    net.add_link("C", "SW1", link)
    net.add_link("BG", "SW1", link)
    net.add_link("SW1", "SW2", link)
    net.add_link("SW2", "SRV", link)
    net.add_link("SW2", "BGD", link)
    t = cfg.traffic
    loop = ClosedLoopParams(
        request_cells=int(t["request_cells"]),
        response_cells=int(t["response_cells"]),
        inter_cycle=ms(t["inter_cycle_ms"]),
        inter_request=ms(t.get("inter_request_ms", 0.0)),
        requests_per_cycle=int(t.get("requests_per_cycle", 1)),
    )
    service = cell_gap_ns(link.rate)
    client = net.add_vc("C->SRV", ["C", "SW1", "SW2", "SRV"], cfg.source,
                        BurstTraffic(0, service))
    client.traffic.vc = client.name
    server = net.add_vc("SRV->C", ["SRV", "SW2", "SW1", "C"], cfg.source,
                        BurstTraffic(1, service))
    server.traffic.vc = server.name
    net.add_vc("BG->BGD", ["BG", "SW1", "SW2", "BGD"], cfg.source, Greedy())

    cstate, sstate = ClientState(), ServerState()
    sim = net.sim

    def run_client(event: str) -> None:
        for action in client_cycle_step(cstate, loop, event, sim.now):
            if action[0] == "send_request":
                client.traffic.push(action[1])
                net.kick(client)
            elif action[0] == "schedule_request":
                sim.schedule(action[1], EventKind.TIMER_EXPIRY, run_client, "request_due")
            elif action[0] == "schedule_cycle":
                sim.schedule(action[1], EventKind.CYCLE_START, run_client, "cycle_start")

    def on_request_cell(now: int) -> None:
        for action in server_step(sstate, loop):
            server.traffic.push(action[1])
            net.kick(server)

    client.on_deliver = on_request_cell
    server.on_deliver = lambda now: run_client("response_cell")
    sim.schedule(0, EventKind.CYCLE_START, run_client, "cycle_start")
    return Scenario(cfg, net, bottleneck=SINGLE_CLIENT_BOTTLENECK, client=client,
                    server=server, extras={"client_state": cstate, "server_state": sstate,
                                           "loop": loop})


def _build_custom(cfg: ScenarioConfig, net: Network, link: LinkParams) -> Scenario:
    custom = cfg.custom
    for node in custom["nodes"]:
        net.add_node(node["name"], node["kind"])
    for entry in custom.get("links", []):
        net.add_link(entry["a"], entry["b"], LinkParams.from_mbps(
            entry.get("rate_mbps", cfg.link_rate_mbps), entry.get("length_km", cfg.link_length_km)))
    source_raw = cfg.raw["source"]
    for i, entry in enumerate(custom["vcs"]):
        params = cfg.source
        if "source" in entry:
            params = parse_source({**source_raw, **entry["source"]}, f"custom.vcs[{i}].source")
        traffic_entry = entry.get("traffic", {"kind": "greedy"})
        kind = traffic_entry["kind"]
        first_link = net.ports[(entry["path"][0], entry["path"][1])].link
        if kind == "greedy":
            traffic = Greedy()
        elif kind == "capped":
            segs = [(None if u is None else ms(u), None if r is None else mbps_to_cps(r))
                    for u, r in traffic_entry["segments"]]
            traffic = CappedGreedy(BottleneckSchedule(segs))
        else:
            traffic = BurstTraffic(i, cell_gap_ns(first_link.rate))
        name = entry.get("name", f"vc{i}")
        vc = net.add_vc(name, entry["path"], params, traffic,
                        start_at=ms(entry.get("start_ms", 0.0)))
        if kind == "bursts":
            traffic.vc = name
            for at_ms, cells in traffic_entry["bursts"]:
                net.sim.schedule(ms(at_ms), EventKind.TIMER_EXPIRY, _push_burst, net, vc,
                                 int(cells))
    return Scenario(cfg, net)


def _push_burst(net: Network, vc: VirtualCircuit, cells: int) -> None:
    vc.traffic.push(cells)
    net.kick(vc)


def execute(scenario: Scenario) -> Scenario:
    net = scenario.net
    net.start()
    net.run_until(scenario.cfg.run_length)
    net.flush_queue_trace()
    return scenario


def summarize(scenario: Scenario) -> dict:
    net = scenario.net
    t_end = scenario.cfg.run_length
    vcs = {}
    for vc in net.vcs:
        series = metrics.acr_series(net.acr_trace, vc.name)
        vcs[vc.name] = {
            "mean_acr_cps": metrics.time_weighted_mean(series, t_end),
            "final_acr_cps": vc.state.acr,
            "frms_sent": vc.state.frms_sent,
            "data_cells_sent": vc.state.data_sent,
            "data_cells_delivered": vc.data_delivered,
            "uili_triggers": vc.state.uili_triggers,
            "brms_received": vc.brms_received,
        }
    ports = {}
    for (src, dst), port in sorted(net.switch_ports().items()):
        departed = port.dequeued_total(t_end)
        busy_ns = departed * port.service_ns
        ports[port.name] = {
            "switch": src,
            "max_qlen_cells": metrics.max_queue(net.queue_trace, port.name),
            "enqueued_cells": port.enqueued_total,
            "dequeued_cells": departed,
            "queued_cells": port.qlen(t_end),
            "utilization": busy_ns / t_end if t_end else 0.0,
        }
    bursts = {}
    for rec in scenario.burst_records():
        bursts.setdefault(rec.vc, []).append(rec)
    return {
        "scenario": scenario.cfg.name,
        "topology": scenario.cfg.topology,
        "policy": scenario.cfg.policy.kind.value,
        "run_length_ns": t_end,
        "events_dispatched": net.sim.dispatched,
        "bottleneck_port": scenario.bottleneck,
        "vcs": vcs,
        "ports": ports,
        "bursts": {name: metrics.burst_stats(recs) for name, recs in sorted(bursts.items())},
    }


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_outputs(scenario: Scenario, out_dir: str | Path, summary: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    net = scenario.net
    with open(out / "acr_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ACR_COLUMNS)
        for row in net.acr_trace:
            w.writerow([_fmt(v) for v in row])
    with open(out / "queue_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(QUEUE_COLUMNS)
        for row in net.queue_trace:
            w.writerow([_fmt(v) for v in row])
    with open(out / "burst_records.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(BURST_COLUMNS)
        for r in scenario.burst_records():
            w.writerow([r.vc, r.burst_index, r.size, r.first_cell_at, r.last_cell_at,
                        r.response_time, _fmt(r.effective_throughput)])
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return out


def run_scenario(scenario: Scenario, out_dir: str | Path | None = None) -> dict:
    execute(scenario)
    summary = summarize(scenario)
    if out_dir is not None:
        write_outputs(scenario, out_dir, summary)
    return summary


def run_config(cfg: ScenarioConfig, out_dir: str | Path | None = None,
               record_digest: bool = False) -> tuple[Scenario, dict]:
    scenario = build_scenario(cfg, record_digest=record_digest)
    return scenario, run_scenario(scenario, out_dir)


def effective_throughput_bps(size: int, response_ns: int) -> float:
    return size * CELL_BITS * NS_PER_S / response_ns

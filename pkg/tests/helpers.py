"""Shared scenario runs; each distinct run executes once per test session."""

import json
import time
from pathlib import Path

from hypothesis import strategies as st

from abr_uili.config import from_dict, preset
from abr_uili.harness import build_scenario, execute, run_config
from abr_uili.policies import PolicyKind


_runs: dict = {}
_elapsed: dict = {}


def _run_key(name, policy, patch):
    return name, policy, json.dumps(patch or {}, sort_keys=True)


def run_preset(name: str, policy: str, patch: dict | None = None):
    """Run a preset once per session; later calls reuse the result."""
    key = _run_key(name, policy, patch)
    if key not in _runs:
        cfg = preset(name, **(patch or {})).with_policy(policy)
        t0 = time.perf_counter()
        _runs[key] = run_config(cfg)
        _elapsed[key] = time.perf_counter() - t0
    return _runs[key]


def run_seconds(name: str, policy: str, patch: dict | None = None) -> float:
    """Wall time of the first (uncached) execution of a preset run."""
    run_preset(name, policy, patch)
    return _elapsed[_run_key(name, policy, patch)]


@st.composite
def small_topologies(draw, max_switches: int = 3, max_vcs: int = 4, policy: str | None = None):
    """Chain of switches with hosts hanging off, VCs routed along the chain."""
    n_sw = draw(st.integers(1, max_switches))
    switches = [f"SW{i}" for i in range(n_sw)]
    nodes = [{"name": s, "kind": "switch"} for s in switches]
    links = []
    for a, b in zip(switches, switches[1:]):
        links.append({"a": a, "b": b, "rate_mbps": draw(st.sampled_from([20.0, 50.0, 155.52])),
                      "length_km": draw(st.integers(1, 300))})
    vcs = []
    n_vc = draw(st.integers(1, max_vcs))
    for i in range(n_vc):
        src, dst = f"H{i}s", f"H{i}d"
        first = draw(st.integers(0, n_sw - 1))
        last = draw(st.integers(first, n_sw - 1))
        nodes += [{"name": src, "kind": "host"}, {"name": dst, "kind": "host"}]
        links.append({"a": src, "b": switches[first], "length_km": draw(st.integers(1, 200))})
        links.append({"a": switches[last], "b": dst, "length_km": draw(st.integers(1, 200))})
        path = [src] + switches[first:last + 1] + [dst]
        if draw(st.booleans()):
            path = path[::-1]
        kind = draw(st.sampled_from(["greedy", "capped", "bursts"]))
        if kind == "greedy":
            traffic = {"kind": "greedy"}
        elif kind == "capped":
            traffic = {"kind": "capped",
                       "segments": [[draw(st.integers(2, 15)), draw(st.sampled_from([1.0, 5.0, 10.0]))],
                                    [None, None]]}
        else:
            traffic = {"kind": "bursts",
                       "bursts": [[draw(st.integers(0, 20)), draw(st.integers(1, 300))]
                                  for _ in range(draw(st.integers(1, 4)))]}
        vc = {"name": f"vc{i}", "path": path, "traffic": traffic,
              "start_ms": draw(st.sampled_from([0.0, 0.5, 3.0]))}
        if draw(st.booleans()):
            vc["source"] = {"icr_mbps": draw(st.sampled_from([1.0, 10.0])),
                            "mcr_mbps": draw(st.sampled_from([0.0, 0.5])),
                            "nrm": draw(st.sampled_from([4, 8, 32]))}
        vcs.append(vc)
    return {
        "topology": "custom",
        "run_length_ms": draw(st.sampled_from([10, 25])),
        "policy": {"kind": policy or draw(st.sampled_from([k.value for k in PolicyKind])),
                   "time_based_floor": draw(st.sampled_from("ab")),
                   "use_pr5": draw(st.booleans()),
                   "switch_aging_enabled": draw(st.booleans())},
        "link": {"rate_mbps": 155.52, "length_km": 50.0},
        "custom": {"nodes": nodes, "links": links, "vcs": vcs},
    }


def check_invariants(doc: dict, drain_ns: int = 2_000_000_000) -> list[str]:
    """Run a config and return every protocol invariant violation found."""
    cfg = from_dict(doc)
    scenario = build_scenario(cfg)
    net = scenario.net
    problems: list[str] = []
    stamps: dict[int, list[float]] = {}
    orig_bwd, orig_recv = net._bwd_arrive, net._receive_brm

    def bwd(vc, hop, rm):
        if hop > 0:
            local = vc.fwd_ports[hop].explicit_rate(vc.id)
            before = rm.er
            orig_bwd(vc, hop, rm)
            stamps.setdefault(id(rm), []).append(local)
            if rm.er != min(before, local) or rm.er > before:
                problems.append(f"{vc.name}: ER {before} -> {rm.er} with local {local}")
        else:
            orig_bwd(vc, hop, rm)

    def recv(vc, rm, now):
        expected = min([vc.params.pcr] + stamps.pop(id(rm), []))
        if rm.er != expected:
            problems.append(f"{vc.name}: delivered ER {rm.er} != min of stamps {expected}")
        orig_recv(vc, rm, now)
        p = vc.params
        if not p.mcr <= vc.state.acr <= p.pcr:
            problems.append(f"{vc.name}: ACR {vc.state.acr} outside [{p.mcr}, {p.pcr}]")

    net._bwd_arrive, net._receive_brm = bwd, recv
    execute(scenario)
    for t, name, acr, *_ in net.acr_trace:
        p = net.vc_by_name[name].params
        if not p.mcr <= acr <= p.pcr:
            problems.append(f"{name}@{t}: ACR {acr} outside [{p.mcr}, {p.pcr}]")
    for vc in net.vcs:
        frms = sum(1 for row in net.acr_trace if row[1] == vc.name and row[5].startswith("frm"))
        if frms != vc.state.frms_sent:
            problems.append(f"{vc.name}: {frms} FRM trace rows vs counter {vc.state.frms_sent}")
    t_end = cfg.run_length
    for port in net.ports.values():
        if port.enqueued_total != port.dequeued_total(t_end) + port.qlen(t_end):
            problems.append(f"{port.name}: conservation broken")
    # stop all sources and let the network empty: nothing may be lost
    for vc in net.vcs:
        vc.traffic.has_data = lambda: False
    net.run_until(t_end + drain_ns)
    for vc in net.vcs:
        if vc.data_delivered != vc.state.data_sent:
            problems.append(f"{vc.name}: sent {vc.state.data_sent}, delivered {vc.data_delivered}")
    for port in net.ports.values():
        if port.qlen(net.sim.now) or port.dequeued_total(net.sim.now) != port.enqueued_total:
            problems.append(f"{port.name}: cells left behind after drain")
    if stamps:
        problems.append(f"{len(stamps)} BRMs never reached their source")
    return problems


def output_bytes(doc: dict, out_dir) -> dict[str, bytes]:
    run_config(from_dict(doc), out_dir)
    return {p.name: p.read_bytes() for p in sorted(Path(out_dir).iterdir())}

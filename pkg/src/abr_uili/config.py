"""Scenario configuration: JSON loading, presets and validation.

Rates are written in Mbps and durations in ms in the JSON document; they
are converted to cells/s and ns when a scenario is built.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .policies import PolicyKind, PolicyVariant
from .protocol import SourceParams
from .units import mbps_to_cps, ms

TOPOLOGIES = ("five_sources", "single_client", "custom")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


# JSON key -> (SourceParams field, converter)
_SOURCE_KEYS = {
    "pcr_mbps": ("pcr", mbps_to_cps),
    "mcr_mbps": ("mcr", mbps_to_cps),
    "icr_mbps": ("icr", mbps_to_cps),
    "rif": ("rif", float),
    "rdf": ("rdf", float),
    "nrm": ("nrm", int),
    "mrm": ("mrm", int),
    "trm_ms": ("trm", ms),
    "tof": ("tof", float),
    "tdf": ("tdf", float),
    "headroom_mbps": ("headroom", mbps_to_cps),
    "frtt_ms": ("frtt", ms),
    "addf": ("addf", float),
    "tbe": ("tbe", int),
    "atdf_ms": ("atdf", ms),
    "pni": ("pni", bool),
    "delta_cps": ("delta", float),
    "tcr_cps": ("tcr", float),
}
# accepted for fidelity with published parameter lists; rule 6 is not modelled
_IGNORED_SOURCE_KEYS = {"crm", "cdf", "xdf"}

_TOP_KEYS = {"topology", "run_length_ms", "policy", "source", "link", "erica", "traffic",
             "custom", "seed", "output_dir", "queue_sample_us", "name"}

FIVE_SOURCES: dict[str, Any] = {
    "name": "five_sources",
    "topology": "five_sources",
    "run_length_ms": 400,
    "policy": {"kind": "count_based", "time_based_floor": "b", "use_pr5": False,
               "switch_aging_enabled": False},
    "source": {
        "pcr_mbps": 155.52, "mcr_mbps": 0.0, "icr_mbps": 1.0, "rif": 1.0, "rdf": 1 / 512,
        "nrm": 32, "mrm": 2, "trm_ms": 100.0, "tof": 2.0, "tdf": 0.125,
        "headroom_mbps": 1.0, "frtt_ms": 30.0, "addf": 2.0, "tbe": 4096, "atdf_ms": 500.0,
        "pni": False, "crm": None, "cdf": 0.5, "tcr_cps": 10.0,
    },
    "link": {"rate_mbps": 155.52, "length_km": 1000.0},
    "erica": {"target_utilization": 0.9, "interval_ms": 1.0, "interval_cells": 100},
    "traffic": {"max_source_rate_mbps": 10.0, "bottleneck_until_ms": 200.0},
    "seed": 0,
    "queue_sample_us": 100,
    "output_dir": "out",
}

SINGLE_CLIENT: dict[str, Any] = {
    "name": "single_client",
    "topology": "single_client",
    "run_length_ms": 1000,
    "policy": {"kind": "count_based", "time_based_floor": "a", "use_pr5": False,
               "switch_aging_enabled": False},
    "source": {
        "pcr_mbps": 155.52, "mcr_mbps": 0.0, "icr_mbps": 10.0, "rif": 1.0, "rdf": 1 / 512,
        "nrm": 32, "mrm": 2, "trm_ms": 100.0, "tof": 2.0, "tdf": 0.125,
        "headroom_mbps": 10.0, "frtt_ms": 15.0, "addf": 2.0, "tbe": 512, "atdf_ms": 500.0,
        "pni": False, "cdf": 0.0, "tcr_cps": 10.0,
    },
    "link": {"rate_mbps": 155.52, "length_km": 500.0},
    "erica": {"target_utilization": 0.9, "interval_ms": 1.0, "interval_cells": 100},
    "traffic": {"request_cells": 256, "response_cells": 16, "inter_cycle_ms": 1.0,
                "inter_request_ms": 0.0, "requests_per_cycle": 1},
    "seed": 0,
    "queue_sample_us": 100,
    "output_dir": "out",
}

PRESETS = {"five_sources": FIVE_SOURCES, "single_client": SINGLE_CLIENT}


@dataclass
class ScenarioConfig:
    topology: str
    run_length: int  # ns
    policy: PolicyVariant
    source: SourceParams
    link_rate_mbps: float
    link_length_km: float
    erica: dict
    traffic: dict
    custom: dict | None = None
    seed: int = 0
    output_dir: str = "out"
    queue_sample_ns: int = 100_000
    name: str = "scenario"
    raw: dict = field(default_factory=dict, repr=False)

    def with_policy(self, kind: str, **overrides) -> ScenarioConfig:
        raw = copy.deepcopy(self.raw)
        raw.setdefault("policy", {})["kind"] = kind
        raw["policy"].update(overrides)
        return from_dict(raw)

    def updated(self, patch: dict) -> ScenarioConfig:
        return from_dict(deep_merge(self.raw, patch))


def deep_merge(base: dict, patch: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in patch.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def preset(name: str, **patch) -> ScenarioConfig:
    if name not in PRESETS:
        raise ConfigError("topology", f"unknown preset {name!r}")
    return from_dict(deep_merge(PRESETS[name], patch))


def _number(section: dict, key: str, path: str, positive: bool = False,
            minimum: float | None = None) -> float:
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}.{key}", f"expected a number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(f"{path}.{key}", f"must be positive, got {value}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}", f"must be >= {minimum}, got {value}")
    return value


def parse_source(section: dict, path: str = "source") -> SourceParams:
    if not isinstance(section, dict):
        raise ConfigError(path, "expected an object")
    kwargs = {}
    for key, value in section.items():
        if key in _IGNORED_SOURCE_KEYS:
            continue
        if key not in _SOURCE_KEYS:
            raise ConfigError(f"{path}.{key}", "unknown source parameter")
        name, conv = _SOURCE_KEYS[key]
        if value is None and key == "delta_cps":
            continue
        if name == "pni":
            if not isinstance(value, (bool, int)):
                raise ConfigError(f"{path}.{key}", f"expected a boolean, got {value!r}")
            kwargs[name] = bool(value)
            continue
        _number(section, key, path)
        kwargs[name] = conv(value)
    for required in ("pcr_mbps", "icr_mbps"):
        if required not in section:
            raise ConfigError(f"{path}.{required}", "missing required parameter")
    kwargs.setdefault("mcr", 0.0)
    # field-level invariants, reported against the JSON key
    if kwargs["mcr"] > kwargs["pcr"]:
        raise ConfigError(f"{path}.mcr_mbps", "MCR must not exceed PCR")
    if kwargs["mcr"] > kwargs["icr"]:
        raise ConfigError(f"{path}.mcr_mbps", "MCR must not exceed ICR")
    if kwargs["icr"] > kwargs["pcr"]:
        raise ConfigError(f"{path}.icr_mbps", "ICR must not exceed PCR")
    for key, name in (("pcr_mbps", "pcr"), ("icr_mbps", "icr")):
        if kwargs[name] <= 0:
            raise ConfigError(f"{path}.{key}", "must be positive")
    if kwargs.get("nrm", 32) < 2:
        raise ConfigError(f"{path}.nrm", "Nrm must be >= 2")
    if kwargs.get("tdf", 0.0) < 0:
        raise ConfigError(f"{path}.tdf", "TDF must be >= 0")
    if "rif" in kwargs and not 0 < kwargs["rif"] <= 1:
        raise ConfigError(f"{path}.rif", "RIF must lie in (0, 1]")
    try:
        return SourceParams(**kwargs)
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


def parse_policy(section: Any, path: str = "policy") -> PolicyVariant:
    if isinstance(section, str):
        section = {"kind": section}
    if not isinstance(section, dict):
        raise ConfigError(path, "expected an object or a policy name")
    kind = section.get("kind")
    valid = [k.value for k in PolicyKind]
    if kind not in valid:
        raise ConfigError(f"{path}.kind", f"unknown policy kind {kind!r}; expected one of {valid}")
    floor = section.get("time_based_floor", "a")
    if floor not in ("a", "b"):
        raise ConfigError(f"{path}.time_based_floor", "must be 'a' or 'b'")
    extra = set(section) - {"kind", "time_based_floor", "use_pr5", "switch_aging_enabled"}
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown policy field")
    return PolicyVariant(PolicyKind(kind), floor, bool(section.get("use_pr5", False)),
                         bool(section.get("switch_aging_enabled", False)))


def _validate_custom(custom: Any, base_source: dict) -> None:
    path = "custom"
    if not isinstance(custom, dict):
        raise ConfigError(path, "custom topology needs a 'custom' object")
    nodes = custom.get("nodes")
    if not isinstance(nodes, list) or not nodes:
        raise ConfigError(f"{path}.nodes", "expected a non-empty list")
    names = {}
    for i, node in enumerate(nodes):
        if not isinstance(node, dict) or "name" not in node:
            raise ConfigError(f"{path}.nodes[{i}]", "each node needs a name")
        if node.get("kind") not in ("host", "switch"):
            raise ConfigError(f"{path}.nodes[{i}].kind", "must be 'host' or 'switch'")
        if node["name"] in names:
            raise ConfigError(f"{path}.nodes[{i}].name", f"duplicate node {node['name']!r}")
        names[node["name"]] = node["kind"]
    links = custom.get("links", [])
    pairs = set()
    for i, link in enumerate(links):
        lp = f"{path}.links[{i}]"
        for end in ("a", "b"):
            if link.get(end) not in names:
                raise ConfigError(f"{lp}.{end}", f"unknown node {link.get(end)!r}")
        if "rate_mbps" in link:
            _number(link, "rate_mbps", lp, positive=True)
        if "length_km" in link:
            _number(link, "length_km", lp, positive=True)
        pairs.add(frozenset((link["a"], link["b"])))
    vcs = custom.get("vcs")
    if not isinstance(vcs, list) or not vcs:
        raise ConfigError(f"{path}.vcs", "expected a non-empty list")
    for i, vc in enumerate(vcs):
        vp = f"{path}.vcs[{i}]"
        route = vc.get("path")
        if not isinstance(route, list) or len(route) < 2:
            raise ConfigError(f"{vp}.path", "expected a list of at least two nodes")
        for j, node in enumerate(route):
            if node not in names:
                raise ConfigError(f"{vp}.path[{j}]", f"unknown node {node!r}")
        if names[route[0]] != "host" or names[route[-1]] != "host":
            raise ConfigError(f"{vp}.path", "VC endpoints must be hosts")
        for j, (a, b) in enumerate(zip(route, route[1:])):
            if frozenset((a, b)) not in pairs:
                raise ConfigError(f"{vp}.path[{j + 1}]", f"no link between {a} and {b}")
        traffic = vc.get("traffic", {"kind": "greedy"})
        if traffic.get("kind") not in ("greedy", "capped", "bursts"):
            raise ConfigError(f"{vp}.traffic.kind", "must be greedy, capped or bursts")
        if "source" in vc:
            if not isinstance(vc["source"], dict):
                raise ConfigError(f"{vp}.source", "expected an object")
            # overrides are partial: they sit on top of the scenario-wide source
            parse_source({**base_source, **vc["source"]}, f"{vp}.source")


def from_dict(doc: dict) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("$", "configuration must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown top-level key")
    topology = doc.get("topology")
    if topology not in TOPOLOGIES:
        raise ConfigError("topology", f"must be one of {list(TOPOLOGIES)}, got {topology!r}")
    # preset defaults fill whatever the document leaves out
    base = PRESETS.get(topology, FIVE_SOURCES if topology == "custom" else {})
    merged = deep_merge(base, doc)
    merged["topology"] = topology
    if topology == "custom" and "traffic" not in doc:
        merged["traffic"] = {}

    run_length = _number(merged, "run_length_ms", "$", positive=True)
    policy = parse_policy(merged.get("policy", "count_based"))
    source = parse_source(merged["source"])
    link = merged.get("link", {})
    rate = _number(link, "rate_mbps", "link", positive=True)
    length = _number(link, "length_km", "link", positive=True)
    erica = merged.get("erica", {})
    target = _number(erica, "target_utilization", "erica", positive=True)
    if target > 1:
        raise ConfigError("erica.target_utilization", "must be <= 1")
    _number(erica, "interval_ms", "erica", positive=True)
    _number(erica, "interval_cells", "erica", positive=True)
    traffic = merged.get("traffic", {})
    if topology == "single_client":
        for key in ("request_cells", "response_cells", "requests_per_cycle"):
            _number(traffic, key, "traffic", positive=True)
        _number(traffic, "inter_cycle_ms", "traffic", minimum=0)
    if topology == "five_sources":
        _number(traffic, "max_source_rate_mbps", "traffic", positive=True)
        _number(traffic, "bottleneck_until_ms", "traffic", minimum=0)
    custom = merged.get("custom")
    if topology == "custom":
        _validate_custom(custom, merged["source"])
    sample = _number(merged, "queue_sample_us", "$", positive=True)
    return ScenarioConfig(
        topology=topology,
        run_length=ms(run_length),
        policy=policy,
        source=source,
        link_rate_mbps=rate,
        link_length_km=length,
        erica=dict(erica),
        traffic=dict(traffic),
        custom=custom,
        seed=int(merged.get("seed", 0)),
        output_dir=str(merged.get("output_dir", "out")),
        queue_sample_ns=int(round(sample * 1000)),
        name=str(merged.get("name", topology)),
        raw=merged,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read file: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return from_dict(doc)

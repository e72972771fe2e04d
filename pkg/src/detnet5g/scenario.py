"""Scenario and topology file schemas, plus the bundled demo scenario.

Everything is plain JSON.  Validation errors carry the offending field
path so a broken file points at its own problem.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .admission import FlowSpec
from .errors import ScenarioInvalid
from .nwtt import RegulatorConfig
from .topology import PortId, SwitchProfile, Topology, make_link
from .transit5g import TddConfig, TransitNode5G, UeRecord

SCHEMA_VERSION = 1

SOURCE_MODES = ("periodic", "burst_periodic", "greedy_token_bucket", "onoff_background")


@dataclass(frozen=True)
class SourceModel:
    """Traffic generator settings for one flow id."""

    flow_id: str
    src: str
    dst: str
    mode: str
    params: dict
    seed: int | None = None


@dataclass(frozen=True)
class FlowEntry:
    spec: FlowSpec
    critical: bool
    source: SourceModel


@dataclass
class Scenario:
    topology: Topology
    flows: list[FlowEntry]
    extra_sources: list[SourceModel]
    class_count: int = 8
    best_effort_class: int = 0
    dejitter: RegulatorConfig | None = None
    duration_ms: int = 1000
    seed: int = 1
    snapshot_schedule: list[dict] = field(default_factory=list)
    name: str = "scenario"


def _fail(path: str, message: str):
    raise ScenarioInvalid(f"{path}: {message}")


def _expect(obj, path: str, kind, *, optional=False, default=None):
    if obj is None and optional:
        return default
    if kind is int and (not isinstance(obj, int) or isinstance(obj, bool)):
        _fail(path, "must be an integer")
    elif kind is not int and not isinstance(obj, kind):
        _fail(path, f"must be {kind.__name__}")
    return obj


def _positive_int(obj, path: str) -> int:
    value = _expect(obj, path, int)
    if value <= 0:
        _fail(path, "must be positive")
    return value


def _port(text, path: str) -> PortId:
    _expect(text, path, str)
    try:
        return PortId.parse(text)
    except ValueError as exc:
        _fail(path, str(exc))


def load_topology(obj: dict, path: str = "topology") -> Topology:
    """Build a Topology from its file schema block."""
    _expect(obj, path, dict)
    topo = Topology()
    switches = _expect(obj.get("switches"), f"{path}.switches", list)
    if not switches:
        _fail(f"{path}.switches", "at least one switch required")
    for i, sw in enumerate(switches):
        p = f"{path}.switches[{i}]"
        _expect(sw, p, dict)
        sid = _expect(sw.get("id"), f"{p}.id", str)
        if sid in topo.switches:
            _fail(f"{p}.id", f"duplicate switch id {sid!r}")
        class_count = _expect(sw.get("class_count"), f"{p}.class_count", int,
                              optional=True, default=8)
        fwd = sw.get("fwd_delay_us", [0] * class_count)
        _expect(fwd, f"{p}.fwd_delay_us", list)
        try:
            topo.switches[sid] = SwitchProfile(
                link_rate_Bps=_positive_int(sw.get("link_rate_Bps"), f"{p}.link_rate_Bps"),
                fwd_delay_us=tuple(int(d) for d in fwd),
                port_buffer_B=_positive_int(sw.get("port_buffer_B"), f"{p}.port_buffer_B"),
                class_count=class_count,
            )
        except (TypeError, ValueError) as exc:
            _fail(p, str(exc))

    used_ports: dict = {}

    def claim(port: PortId, p: str):
        if port in used_ports:
            _fail(p, f"port {port} already used by {used_ports[port]}")
        used_ports[port] = p

    for i, pair in enumerate(_expect(obj.get("links"), f"{path}.links", list)):
        p = f"{path}.links[{i}]"
        if not isinstance(pair, list) or len(pair) != 2:
            _fail(p, "must be a two-element list of port ids")
        a, b = (_port(pair[0], f"{p}[0]"), _port(pair[1], f"{p}[1]"))
        for end in (a, b):
            if end.node not in topo.switches:
                _fail(p, f"unknown switch {end.node!r}")
            claim(end, p)
        topo.links.add(make_link(a, b))

    for i, host in enumerate(_expect(obj.get("hosts"), f"{path}.hosts", list,
                                     optional=True, default=[])):
        p = f"{path}.hosts[{i}]"
        _expect(host, p, dict)
        hid = _expect(host.get("id"), f"{p}.id", str)
        attach = _port(host.get("attach"), f"{p}.attach")
        if attach.node not in topo.switches:
            _fail(f"{p}.attach", f"unknown switch {attach.node!r}")
        if hid in topo.hosts or hid in topo.switches:
            _fail(f"{p}.id", f"duplicate node id {hid!r}")
        claim(attach, f"{p}.attach")
        topo.hosts[hid] = attach

    t5g = obj.get("transit5g")
    if t5g is not None:
        p = f"{path}.transit5g"
        _expect(t5g, p, dict)
        pattern = _expect(t5g.get("tdd_pattern"), f"{p}.tdd_pattern", str)
        try:
            tdd = TddConfig(
                pattern=pattern,
                numerology_mu=_expect(t5g.get("numerology"), f"{p}.numerology", int,
                                      optional=True, default=1),
                grant_delay_slots=_expect(t5g.get("grant_delay_slots"),
                                          f"{p}.grant_delay_slots", int,
                                          optional=True, default=0),
                s_slot_usable_ul=bool(t5g.get("s_slot_usable_ul", False)),
                s_slot_usable_dl=bool(t5g.get("s_slot_usable_dl", True)),
            )
        except ValueError as exc:
            _fail(p, str(exc))
        attach = _port(t5g.get("attach"), f"{p}.attach")
        if attach.node not in topo.switches:
            _fail(f"{p}.attach", f"unknown switch {attach.node!r}")
        claim(attach, f"{p}.attach")
        ues = {}
        for i, ue in enumerate(_expect(t5g.get("ues"), f"{p}.ues", list,
                                       optional=True, default=[])):
            q = f"{p}.ues[{i}]"
            _expect(ue, q, dict)
            uid = _expect(ue.get("id"), f"{q}.id", str)
            try:
                ues[uid] = UeRecord(
                    ue_id=uid,
                    tbs_ul_B=_positive_int(ue.get("tbs_ul_B"), f"{q}.tbs_ul_B"),
                    tbs_dl_B=_positive_int(ue.get("tbs_dl_B"), f"{q}.tbs_dl_B"),
                    mcs_index=_expect(ue.get("mcs_index"), f"{q}.mcs_index", int,
                                      optional=True, default=0),
                )
            except ValueError as exc:
                _fail(q, str(exc))
        topo.transit = TransitNode5G(tdd=tdd, ues=ues, attach=attach)

    topo.fixed_poll_interval_s = _expect(obj.get("fixed_poll_interval_s"),
                                         f"{path}.fixed_poll_interval_s", int,
                                         optional=True, default=200)
    topo.fiveg_poll_interval_s = _expect(obj.get("fiveg_poll_interval_s"),
                                         f"{path}.fiveg_poll_interval_s", int,
                                         optional=True, default=5)
    return topo


def _load_regulator(obj, path: str) -> RegulatorConfig:
    _expect(obj, path, dict)
    try:
        return RegulatorConfig(
            hold_us=_expect(obj.get("hold_us"), f"{path}.hold_us", int),
            release_period_us=_positive_int(obj.get("release_period_us"),
                                            f"{path}.release_period_us"),
            queue_cap_pkts=_expect(obj.get("queue_cap_pkts"), f"{path}.queue_cap_pkts",
                                   int, optional=True, default=64),
            per_class=bool(obj.get("per_class", False)),
        )
    except ValueError as exc:
        _fail(path, str(exc))


def _load_source(obj, path: str, *, flow_id: str, src: str, dst: str) -> SourceModel:
    _expect(obj, path, dict)
    mode = _expect(obj.get("mode"), f"{path}.mode", str)
    if mode not in SOURCE_MODES:
        _fail(f"{path}.mode", f"must be one of {SOURCE_MODES}")
    params = {k: v for k, v in obj.items() if k not in ("mode", "seed")}
    required = {
        "periodic": ("period_us", "pkt_B"),
        "burst_periodic": ("period_us", "pkt_B", "count"),
        "greedy_token_bucket": ("pkt_B", "burst_B", "rate_Bps"),
        "onoff_background": ("pkt_B", "rate_Bps", "on_ms", "off_ms"),
    }[mode]
    for key in required:
        _positive_int(obj.get(key), f"{path}.{key}")
    if mode == "onoff_background" and obj.get("start", "on") not in ("on", "off"):
        _fail(f"{path}.start", "must be 'on' or 'off'")
    seed = _expect(obj.get("seed"), f"{path}.seed", int, optional=True)
    return SourceModel(flow_id=flow_id, src=src, dst=dst, mode=mode,
                       params=params, seed=seed)


def load_scenario(obj: dict, *, name: str = "scenario") -> Scenario:
    """Parse and validate a scenario document."""
    _expect(obj, "scenario", dict)
    version = obj.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version!r}")
    topo = load_topology(_expect(obj.get("topology"), "topology", dict))

    classes = obj.get("classes", {})
    _expect(classes, "classes", dict)
    class_count = _expect(classes.get("count"), "classes.count", int,
                          optional=True, default=8)
    best_effort = _expect(classes.get("best_effort_class"), "classes.best_effort_class",
                          int, optional=True, default=0)
    if class_count < 2:
        _fail("classes.count", "need at least two classes")
    if best_effort != 0:
        _fail("classes.best_effort_class", "class 0 is the best-effort class")

    dejitter = None
    nwtt = obj.get("nwtt", {})
    _expect(nwtt, "nwtt", dict)
    if nwtt.get("dejitter") is not None:
        dejitter = _load_regulator(nwtt["dejitter"], "nwtt.dejitter")

    known = set(topo.hosts) | set(topo.switches)
    if topo.transit is not None:
        known |= set(topo.transit.ues)

    flows: list[FlowEntry] = []
    seen_flow_ids: set[str] = set()
    uses_ue = False
    for i, fl in enumerate(_expect(obj.get("flows"), "flows", list,
                                   optional=True, default=[])):
        p = f"flows[{i}]"
        _expect(fl, p, dict)
        fid = _expect(fl.get("flow_id"), f"{p}.flow_id", str)
        if fid in seen_flow_ids:
            _fail(f"{p}.flow_id", f"duplicate flow id {fid!r}")
        seen_flow_ids.add(fid)
        src = _expect(fl.get("src"), f"{p}.src", str)
        dst = _expect(fl.get("dst"), f"{p}.dst", str)
        for ep, label in ((src, "src"), (dst, "dst")):
            if ep not in known:
                _fail(f"{p}.{label}", f"unknown node {ep!r}")
        spec = FlowSpec(
            flow_id=fid,
            src=src,
            dst=dst,
            rate_Bps=_positive_int(fl.get("rate_Bps"), f"{p}.rate_Bps"),
            burst_B=_positive_int(fl.get("burst_B"), f"{p}.burst_B"),
            max_pkt_B=_positive_int(fl.get("max_pkt_B"), f"{p}.max_pkt_B"),
            deadline_us=_positive_int(fl.get("deadline_us"), f"{p}.deadline_us"),
            dejitter=bool(fl.get("dejitter", False)),
        )
        source = _load_source(_expect(fl.get("source"), f"{p}.source", dict),
                              f"{p}.source", flow_id=fid, src=src, dst=dst)
        flows.append(FlowEntry(spec=spec, critical=bool(fl.get("critical", False)),
                               source=source))
        if topo.transit is not None and (src in topo.transit.ues or dst in topo.transit.ues):
            uses_ue = True

    sim = obj.get("sim", {})
    _expect(sim, "sim", dict)
    extra_sources: list[SourceModel] = []
    for i, src_obj in enumerate(_expect(sim.get("sources"), "sim.sources", list,
                                        optional=True, default=[])):
        p = f"sim.sources[{i}]"
        _expect(src_obj, p, dict)
        fid = _expect(src_obj.get("flow_id"), f"{p}.flow_id", str)
        if fid in seen_flow_ids:
            _fail(f"{p}.flow_id", f"duplicate flow id {fid!r}")
        seen_flow_ids.add(fid)
        src = _expect(src_obj.get("src"), f"{p}.src", str)
        dst = _expect(src_obj.get("dst"), f"{p}.dst", str)
        for ep, label in ((src, "src"), (dst, "dst")):
            if ep not in known:
                _fail(f"{p}.{label}", f"unknown node {ep!r}")
        body = {k: v for k, v in src_obj.items() if k not in ("flow_id", "src", "dst")}
        extra_sources.append(_load_source(body, p, flow_id=fid, src=src, dst=dst))
        if topo.transit is not None and (src in topo.transit.ues or dst in topo.transit.ues):
            uses_ue = True

    if uses_ue and topo.transit is None:
        _fail("topology.transit5g", "UE traffic declared but no transit node present")

    schedule = _expect(sim.get("snapshot_schedule"), "sim.snapshot_schedule", list,
                       optional=True, default=[])
    for i, item in enumerate(schedule):
        p = f"sim.snapshot_schedule[{i}]"
        _expect(item, p, dict)
        _positive_int(item.get("t_ms"), f"{p}.t_ms")
        if item.get("kind") not in ("fixed", "5g"):
            _fail(f"{p}.kind", "must be 'fixed' or '5g'")
    return Scenario(
        topology=topo,
        flows=flows,
        extra_sources=extra_sources,
        class_count=class_count,
        best_effort_class=best_effort,
        dejitter=dejitter,
        duration_ms=_positive_int(sim.get("duration_ms", 1000), "sim.duration_ms"),
        seed=_expect(sim.get("seed"), "sim.seed", int, optional=True, default=1),
        snapshot_schedule=schedule,
        name=name,
    )


def load_scenario_file(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioInvalid(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return load_scenario(obj, name=path.stem)


def load_topology_file(path) -> Topology:
    path = Path(path)
    try:
        obj = json.loads(path.read_text())
    except OSError as exc:
        raise ScenarioInvalid(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioInvalid(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from exc
    return load_topology(obj)


def canonical_topology() -> dict:
    """Demo fabric: 3-switch ring, two hosts, 5G segment with two UEs."""
    return {
        "switches": [
            {"id": sid, "link_rate_Bps": 125_000,
             "fwd_delay_us": [0] * 8, "port_buffer_B": 32_768}
            for sid in ("S1", "S2", "S3")
        ],
        "links": [["S1.1", "S2.1"], ["S1.2", "S3.1"], ["S2.2", "S3.2"]],
        "hosts": [{"id": "D", "attach": "S3.3"}, {"id": "G", "attach": "S2.3"}],
        "transit5g": {
            "tdd_pattern": "DDDSU",
            "numerology": 1,
            "grant_delay_slots": 0,
            "ues": [
                {"id": "UE1", "tbs_ul_B": 1500, "tbs_dl_B": 3000},
                {"id": "UE2", "tbs_ul_B": 1500, "tbs_dl_B": 3000},
            ],
            "attach": "S1.3",
        },
    }


def canonical_scenario() -> dict:
    """The demo scenario: one critical UE flow, one best-effort UE flow,
    and on/off background traffic crossing the best-effort path."""
    return {
        "schema_version": SCHEMA_VERSION,
        "topology": canonical_topology(),
        "classes": {"count": 8, "best_effort_class": 0},
        "flows": [
            {
                "flow_id": "orange",
                "src": "UE1",
                "dst": "D",
                "rate_Bps": 12_500,
                "burst_B": 25,
                "max_pkt_B": 25,
                "deadline_us": 100_000,
                "critical": True,
                "dejitter": False,
                "source": {"mode": "periodic", "period_us": 2_000, "pkt_B": 25},
            }
        ],
        "nwtt": {
            "dejitter": {
                "hold_us": 5_000,
                "release_period_us": 2_000,
                "queue_cap_pkts": 64,
                "per_class": False,
            }
        },
        "sim": {
            "duration_ms": 4_000,
            "seed": 1,
            "sources": [
                {
                    "flow_id": "green",
                    "src": "UE2",
                    "dst": "G",
                    "mode": "periodic",
                    "period_us": 9_900,
                    "pkt_B": 250,
                },
                {
                    "flow_id": "bg",
                    "src": "D",
                    "dst": "G",
                    "mode": "onoff_background",
                    "pkt_B": 1_500,
                    "rate_Bps": 150_000,
                    "on_ms": 1_000,
                    "off_ms": 1_000,
                    "start": "off",
                },
            ],
        },
    }

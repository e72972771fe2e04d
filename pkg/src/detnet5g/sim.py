"""Deterministic discrete-event simulator of the data plane.

Models the pieces the admission math makes promises about: hosts with
per-flow policers, switches with non-preemptive strict-priority egress
ports, the TDD-gated 5G segment draining per-UE queues one transport
block per usable slot, and the NW-TT with tagging and the optional
hold-and-forward regulator.  Every packet of an admitted flow is checked
against its end-to-end, per-hop and transit bounds, and per-class queue
occupancy is checked against the backlog bounds; the run report carries
the violation counts (all zero for a sound pipeline).

Internal time is integer nanoseconds.  Simultaneous events are ordered by
a global sequence number assigned at scheduling time, so a (scenario,
seed) pair always produces byte-identical traces.
"""

from __future__ import annotations

import csv
import heapq
import json
import logging
import random
from collections import deque
from dataclasses import dataclass, replace

from .admission import NetworkState
from .errors import AdmissionMissing, ScenarioInvalid
from .nwtt import (
    BEST_EFFORT,
    NwttConfig,
    RegulatorState,
    classify_and_tag,
    regulator_offer,
    regulator_release,
)
from .scenario import Scenario, SourceModel
from .topology import PortId, path_in_tree
from .transit5g import DOWNLINK, UPLINK, transit_contract
from .units import NS_PER_S, NS_PER_US, ceil_div

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("flow_id", "seq", "size_B", "t_send_us", "t_recv_us", "latency_us", "dropped")


class _Packet:
    __slots__ = (
        "flow_id", "seq", "size_B", "src", "dst", "pcp", "vlan_id", "route",
        "hop_idx", "t_send", "t_recv", "hop_log", "remaining_B", "eligible_slot",
        "transit_in", "transit_out", "reg_out", "dl_in", "dropped",
    )

    def __init__(self, flow_id, seq, size_B, src, dst, pcp, vlan_id, route, t_send):
        self.flow_id = flow_id
        self.seq = seq
        self.size_B = size_B
        self.src = src
        self.dst = dst
        self.pcp = pcp
        self.vlan_id = vlan_id
        self.route = route
        self.hop_idx = 0
        self.t_send = t_send
        self.t_recv = None
        self.hop_log = []
        self.remaining_B = size_B
        self.eligible_slot = None
        self.transit_in = None
        self.transit_out = None
        self.reg_out = None
        self.dl_in = None
        self.dropped = None


class _Port:
    __slots__ = ("port", "profile", "queues", "occupancy", "max_occupancy", "busy")

    def __init__(self, port, profile):
        self.port = port
        self.profile = profile
        self.queues = [deque() for _ in range(profile.class_count)]
        self.occupancy = [0] * profile.class_count
        self.max_occupancy = [0] * profile.class_count
        self.busy = None


class _FlowCtx:
    __slots__ = (
        "flow_id", "src", "dst", "critical", "registered", "pcp", "vlan_id",
        "route", "per_hop_us", "e2e_us", "ul_bound_us", "ul_best_us",
        "dl_bound_us", "dl_best_us", "reg_bound_us", "regulator", "policer",
        "sent", "received", "seq", "drops", "latencies", "last_recv", "reorders",
        "violations",
    )

    def __init__(self, flow_id, src, dst):
        self.flow_id = flow_id
        self.src = src
        self.dst = dst
        self.critical = False
        self.registered = False
        self.pcp = 0
        self.vlan_id = None
        self.route = ()
        self.per_hop_us = ()
        self.e2e_us = None
        self.ul_bound_us = None
        self.ul_best_us = None
        self.dl_bound_us = None
        self.dl_best_us = None
        self.reg_bound_us = 0
        self.regulator = None
        self.policer = None
        self.sent = 0
        self.received = 0
        self.seq = 0
        self.drops = {}
        self.latencies = []
        self.last_recv = -1
        self.reorders = 0
        self.violations = {
            "e2e": 0, "per_hop": 0, "transit": 0,
            "transit_best": 0, "transit_regulator": 0,
        }


class _Policer:
    """Exact-integer token bucket; drops non-conforming packets."""

    __slots__ = ("burst_B", "rate_Bps", "tokens", "carry", "last_ns")

    def __init__(self, burst_B, rate_Bps):
        self.burst_B = burst_B
        self.rate_Bps = rate_Bps
        self.tokens = burst_B
        self.carry = 0
        self.last_ns = 0

    def allow(self, size_B: int, t_ns: int) -> bool:
        grown = self.rate_Bps * (t_ns - self.last_ns) + self.carry
        add, self.carry = divmod(grown, NS_PER_S)
        self.tokens += add
        if self.tokens >= self.burst_B:
            self.tokens = self.burst_B
            self.carry = 0
        self.last_ns = t_ns
        if size_B <= self.tokens:
            self.tokens -= size_B
            return True
        return False


@dataclass
class RunResult:
    scenario_name: str
    seed: int
    dejitter_mode: str
    decisions: list
    report: dict
    trace_rows: list
    state: NetworkState


class _Engine:
    def __init__(self, scenario: Scenario, state: NetworkState, flows: dict, seed: int):
        self.scn = scenario
        self.state = state
        self.flows = flows
        self.seed = seed
        self.end_ns = scenario.duration_ms * 1_000_000
        self.t = 0
        self.heap = []
        self.counter = 0
        self.packets: list[_Packet] = []
        self.ports: dict[PortId, _Port] = {}
        self.transit = state.topology.transit
        self.ue_ul: dict[str, deque] = {}
        self.ue_dl: dict[str, deque] = {}
        self.regulators: dict = {}
        self.nwtt_cfg: NwttConfig = state.nwtt_rules()
        self.polls = {"fixed": 0, "5g": 0}
        if self.transit is not None:
            for ue in self.transit.ues:
                self.ue_ul[ue] = deque()
                self.ue_dl[ue] = deque()

    # ------------------------------------------------------------- scheduling

    def _push(self, t_ns: int, kind: str, payload=None):
        self.counter += 1
        heapq.heappush(self.heap, (t_ns, self.counter, kind, payload))

    def _port(self, port: PortId) -> _Port:
        sim_port = self.ports.get(port)
        if sim_port is None:
            sim_port = _Port(port, self.state.topology.profile(port.node))
            self.ports[port] = sim_port
        return sim_port

    # ------------------------------------------------------------- sources

    def _source_rng(self, flow_id: str, source_seed) -> random.Random:
        key = f"{self.seed}:{flow_id}" if source_seed is None else f"{source_seed}:{flow_id}"
        return random.Random(key)

    def _init_sources(self, sources: list[SourceModel]):
        for model in sources:
            ctx = self.flows[model.flow_id]
            rng = self._source_rng(model.flow_id, model.seed)
            params = model.params
            st = {"ctx": ctx, "mode": model.mode, "pkt_B": params["pkt_B"]}
            if model.mode in ("periodic", "burst_periodic"):
                st["interval"] = params["period_us"] * NS_PER_US
                st["count"] = params.get("count", 1)
                offset = params.get("offset_us")
                start = (rng.randrange(params["period_us"]) if offset is None else offset)
                st["next"] = start * NS_PER_US
            elif model.mode == "greedy_token_bucket":
                st["interval"] = ceil_div(params["pkt_B"] * NS_PER_S, params["rate_Bps"])
                st["initial"] = max(1, params["burst_B"] // params["pkt_B"])
                st["count"] = 1
                st["next"] = params.get("offset_us", 0) * NS_PER_US
                st["first"] = True
            elif model.mode == "onoff_background":
                st["interval"] = ceil_div(params["pkt_B"] * NS_PER_S, params["rate_Bps"])
                st["count"] = 1
                on_ns = params["on_ms"] * 1_000_000
                off_ns = params["off_ms"] * 1_000_000
                st["on_ns"] = on_ns
                st["off_ns"] = off_ns
                first_on = 0 if params.get("start", "on") == "on" else off_ns
                st["window_start"] = first_on
                st["window_end"] = first_on + on_ns
                st["next"] = first_on
            if st["next"] <= self.end_ns:
                self._push(st["next"], "emit", st)

    def _handle_emit(self, st):
        ctx = st["ctx"]
        burst = st["initial"] if st.get("first") else st["count"]
        st["first"] = False
        for _ in range(burst):
            self._emit_packet(ctx, st["pkt_B"])
        nxt = self.t + st["interval"]
        if st["mode"] == "onoff_background" and nxt >= st["window_end"]:
            st["window_start"] = st["window_end"] + st["off_ns"]
            st["window_end"] = st["window_start"] + st["on_ns"]
            nxt = st["window_start"]
        if nxt <= self.end_ns:
            self._push(nxt, "emit", st)

    def _emit_packet(self, ctx: _FlowCtx, size_B: int):
        pkt = _Packet(
            ctx.flow_id, ctx.seq, size_B, ctx.src, ctx.dst,
            ctx.pcp, ctx.vlan_id, ctx.route, self.t,
        )
        ctx.seq += 1
        ctx.sent += 1
        self.packets.append(pkt)
        if self.transit is not None and ctx.src in self.transit.ues:
            tdd = self.transit.tdd
            pkt.eligible_slot = self.t // tdd.slot_ns + 1 + tdd.grant_delay_slots
            pkt.transit_in = self.t
            self.ue_ul[ctx.src].append(pkt)
        else:
            if ctx.policer is not None and not ctx.policer.allow(size_B, self.t):
                self._drop(pkt, "policer")
                return
            self._fabric_in(pkt)

    # ------------------------------------------------------------- 5G segment

    def _handle_slot(self, slot_index: int):
        tdd = self.transit.tdd
        ues = sorted(self.ue_ul)
        if ues:
            pivot = slot_index % len(ues)
            order = ues[pivot:] + ues[:pivot]
        else:
            order = []
        if tdd.slot_usable(slot_index, UPLINK):
            for ue in order:
                self._drain_ue(self.ue_ul[ue], self.transit.ues[ue].tbs_ul_B,
                               slot_index, uplink=True)
        if tdd.slot_usable(slot_index, DOWNLINK):
            for ue in order:
                self._drain_ue(self.ue_dl[ue], self.transit.ues[ue].tbs_dl_B,
                               slot_index, uplink=False)
        nxt = (slot_index + 2) * tdd.slot_ns
        if nxt <= self.end_ns:
            self._push(nxt, "slot", slot_index + 1)

    def _drain_ue(self, queue: deque, tbs_B: int, slot_index: int, *, uplink: bool):
        budget = tbs_B
        while queue and budget > 0:
            pkt = queue[0]
            if pkt.eligible_slot > slot_index:
                break
            take = min(budget, pkt.remaining_B)
            pkt.remaining_B -= take
            budget -= take
            if pkt.remaining_B > 0:
                break
            queue.popleft()
            if uplink:
                pkt.transit_out = self.t
                self._nwtt_ingress(pkt)
            else:
                self._deliver(pkt)

    def _nwtt_ingress(self, pkt: _Packet):
        ctx = self.flows[pkt.flow_id]
        rule = classify_and_tag(self.nwtt_cfg, pkt.src, pkt.dst)
        if rule is not BEST_EFFORT:
            pkt.pcp = rule.pcp
            pkt.vlan_id = rule.vlan_id
        if ctx.regulator is not None:
            cfg = ctx.regulator
            key = f"pcp:{pkt.pcp}" if cfg.per_class else f"flow:{pkt.flow_id}"
            entry = self.regulators.get(key)
            if entry is None:
                entry = (RegulatorState(), cfg)
                self.regulators[key] = entry
            reg, cfg = entry
            was_idle = reg.next_release_ns is None
            if regulator_offer(reg, cfg, pkt, self.t):
                if was_idle:
                    self._push(reg.next_release_ns, "regrel", key)
            else:
                self._drop(pkt, "regulator")
            return
        self._fabric_in(pkt)

    def _handle_regrel(self, key):
        reg, cfg = self.regulators[key]
        for pkt, t_depart in regulator_release(reg, cfg, self.t):
            pkt.reg_out = t_depart
            self._fabric_in(pkt)
        if reg.next_release_ns is not None:
            self._push(reg.next_release_ns, "regrel", key)

    # ------------------------------------------------------------- fabric

    def _fabric_in(self, pkt: _Packet):
        pkt.hop_idx = 0
        self._arrive_hop(pkt)

    def _arrive_hop(self, pkt: _Packet):
        port = pkt.route[pkt.hop_idx]
        profile = self.state.topology.profile(port.node)
        pkt.hop_log.append([port, self.t, None])
        # per-class forwarding delay happens before the egress queue
        delay = profile.fwd_delay_us[pkt.pcp] * NS_PER_US
        self._push(self.t + delay, "portin", pkt)

    def _handle_portin(self, pkt: _Packet):
        port = pkt.route[pkt.hop_idx]
        sim_port = self._port(port)
        cls = pkt.pcp
        if sim_port.occupancy[cls] + pkt.size_B > sim_port.profile.port_buffer_B:
            self._drop(pkt, f"queue:{port}")
            return
        sim_port.occupancy[cls] += pkt.size_B
        if sim_port.occupancy[cls] > sim_port.max_occupancy[cls]:
            sim_port.max_occupancy[cls] = sim_port.occupancy[cls]
        sim_port.queues[cls].append(pkt)
        if sim_port.busy is None:
            self._start_tx(sim_port)

    def _start_tx(self, sim_port: _Port):
        # non-preemptive strict priority: highest non-empty class next
        for cls in range(sim_port.profile.class_count - 1, -1, -1):
            queue = sim_port.queues[cls]
            if queue:
                pkt = queue.popleft()
                sim_port.busy = pkt
                tx = ceil_div(pkt.size_B * NS_PER_S, sim_port.profile.link_rate_Bps)
                self._push(self.t + tx, "txdone", sim_port.port)
                return

    def _handle_txdone(self, port: PortId):
        sim_port = self.ports[port]
        pkt = sim_port.busy
        sim_port.busy = None
        sim_port.occupancy[pkt.pcp] -= pkt.size_B
        pkt.hop_log[-1][2] = self.t
        pkt.hop_idx += 1
        if pkt.hop_idx < len(pkt.route):
            self._arrive_hop(pkt)
        elif self.transit is not None and pkt.dst in self.transit.ues:
            tdd = self.transit.tdd
            pkt.dl_in = self.t
            pkt.remaining_B = pkt.size_B
            pkt.eligible_slot = self.t // tdd.slot_ns + 1 + tdd.grant_delay_slots
            self.ue_dl[pkt.dst].append(pkt)
        else:
            self._deliver(pkt)
        if any(sim_port.queues):
            self._start_tx(sim_port)

    # ------------------------------------------------------------- bookkeeping

    def _drop(self, pkt: _Packet, stage: str):
        pkt.dropped = stage
        ctx = self.flows[pkt.flow_id]
        ctx.drops[stage] = ctx.drops.get(stage, 0) + 1

    def _deliver(self, pkt: _Packet):
        pkt.t_recv = self.t
        ctx = self.flows[pkt.flow_id]
        ctx.received += 1
        ctx.latencies.append(pkt.t_recv - pkt.t_send)
        if pkt.t_recv < ctx.last_recv:
            ctx.reorders += 1
        ctx.last_recv = pkt.t_recv
        if ctx.registered:
            self._check_bounds(pkt, ctx)

    def _check_bounds(self, pkt: _Packet, ctx: _FlowCtx):
        v = ctx.violations
        if pkt.t_recv - pkt.t_send > ctx.e2e_us * NS_PER_US:
            v["e2e"] += 1
        for (port, t_arr, t_done), bound_us in zip(pkt.hop_log, ctx.per_hop_us):
            if t_done - t_arr > bound_us * NS_PER_US:
                v["per_hop"] += 1
        if pkt.transit_out is not None:
            transit = pkt.transit_out - pkt.transit_in
            if transit > ctx.ul_bound_us * NS_PER_US:
                v["transit"] += 1
            if transit < ctx.ul_best_us * NS_PER_US:
                v["transit_best"] += 1
            if pkt.reg_out is not None:
                combined = pkt.reg_out - pkt.transit_in
                if combined > (ctx.ul_bound_us + ctx.reg_bound_us) * NS_PER_US:
                    v["transit_regulator"] += 1
        if pkt.dl_in is not None and pkt.t_recv is not None:
            transit = pkt.t_recv - pkt.dl_in
            if transit > ctx.dl_bound_us * NS_PER_US:
                v["transit"] += 1
            if transit < ctx.dl_best_us * NS_PER_US:
                v["transit_best"] += 1

    # ------------------------------------------------------------- polls

    def _init_polls(self):
        topo = self.state.topology
        fixed_ns = topo.fixed_poll_interval_s * NS_PER_S
        if fixed_ns <= self.end_ns:
            self._push(fixed_ns, "poll", ("fixed", fixed_ns))
        if self.transit is not None:
            fg_ns = topo.fiveg_poll_interval_s * NS_PER_S
            if fg_ns <= self.end_ns:
                self._push(fg_ns, "poll", ("5g", fg_ns))
        for item in self.scn.snapshot_schedule:
            t_ns = item["t_ms"] * 1_000_000
            if t_ns <= self.end_ns:
                self._push(t_ns, "poll", (item["kind"], None))

    def _handle_poll(self, payload):
        kind, interval = payload
        self.polls[kind] += 1
        if interval is not None and self.t + interval <= self.end_ns:
            self._push(self.t + interval, "poll", payload)

    # ------------------------------------------------------------- main loop

    def run(self):
        sources = [entry.source for entry in self.scn.flows
                   if entry.spec.flow_id in self.flows]
        sources += list(self.scn.extra_sources)
        self._init_sources(sources)
        self._init_polls()
        if self.transit is not None and (self.ue_ul or self.ue_dl):
            if self.transit.tdd.slot_ns <= self.end_ns:
                self._push(self.transit.tdd.slot_ns, "slot", 0)

        handlers = {
            "emit": self._handle_emit,
            "slot": self._handle_slot,
            "portin": self._handle_portin,
            "txdone": self._handle_txdone,
            "regrel": self._handle_regrel,
            "poll": self._handle_poll,
        }
        while self.heap:
            t, _, kind, payload = heapq.heappop(self.heap)
            if t > self.end_ns:
                break
            self.t = t
            handlers[kind](payload)


def _percentile_99(sorted_ns: list[int]) -> float:
    idx = ceil_div(99 * len(sorted_ns), 100) - 1
    return sorted_ns[idx] / NS_PER_US


def _flow_report(ctx: _FlowCtx) -> dict:
    dropped = sum(ctx.drops.values())
    entry = {
        "admitted": ctx.registered,
        "critical": ctx.critical,
        "pcp": ctx.pcp,
        "vlan_id": ctx.vlan_id,
        "e2e_bound_us": ctx.e2e_us,
        "sent": ctx.sent,
        "received": ctx.received,
        "dropped": dropped,
        "in_flight": ctx.sent - ctx.received - dropped,
        "drops": dict(sorted(ctx.drops.items())),
        "reorders": ctx.reorders,
        "latency_us": None,
        "jitter_us": None,
        "bound_violations": sum(ctx.violations.values()),
        "violations": dict(ctx.violations),
    }
    if ctx.latencies:
        lats = sorted(ctx.latencies)
        entry["latency_us"] = {
            "min": lats[0] / NS_PER_US,
            "mean": round(sum(lats) / len(lats) / NS_PER_US, 3),
            "max": lats[-1] / NS_PER_US,
            "p99": _percentile_99(lats),
        }
        entry["jitter_us"] = (lats[-1] - lats[0]) / NS_PER_US
    return entry


def _format_us(ns) -> str:
    if ns is None:
        return ""
    return f"{ns // NS_PER_US}.{ns % NS_PER_US:03d}"


def _build_result(scenario, state, engine, decisions, seed, dejitter_mode) -> RunResult:
    flow_reports = {}
    total = {"e2e": 0, "per_hop": 0, "transit": 0, "transit_best": 0,
             "transit_regulator": 0, "backlog": 0}
    for fid, ctx in sorted(engine.flows.items()):
        flow_reports[fid] = _flow_report(ctx)
        for key, count in ctx.violations.items():
            total[key] += count

    bounds = state.backlog_bounds()
    port_reports = {}
    for port, sim_port in sorted(engine.ports.items()):
        per_class = {}
        for cls in range(sim_port.profile.class_count):
            occ = sim_port.max_occupancy[cls]
            bound = bounds.get(port, {}).get(cls)
            if occ == 0 and bound is None:
                continue
            ok = bound is None or occ <= bound
            if not ok:
                total["backlog"] += 1
            per_class[str(cls)] = {"max_occupancy_B": occ, "bound_B": bound, "ok": ok}
        if per_class:
            port_reports[str(port)] = per_class

    report = {
        "schema_version": 1,
        "scenario": scenario.name,
        "seed": seed,
        "dejitter": dejitter_mode,
        "duration_ms": scenario.duration_ms,
        "flows": flow_reports,
        "ports": port_reports,
        "violations": {**total, "total": sum(total.values())},
        "polls": dict(engine.polls),
    }

    rows = []
    for pkt in sorted(engine.packets, key=lambda p: (p.t_send, p.flow_id, p.seq)):
        latency = None if pkt.t_recv is None else pkt.t_recv - pkt.t_send
        rows.append((
            pkt.flow_id,
            pkt.seq,
            pkt.size_B,
            _format_us(pkt.t_send),
            _format_us(pkt.t_recv),
            _format_us(latency),
            1 if pkt.dropped else 0,
        ))
    return RunResult(
        scenario_name=scenario.name,
        seed=seed,
        dejitter_mode=dejitter_mode,
        decisions=decisions,
        report=report,
        trace_rows=rows,
        state=state,
    )


def _admit_flows(scenario: Scenario, dejitter_mode: str) -> tuple[NetworkState, list]:
    state = NetworkState(
        scenario.topology.copy(),
        class_count=scenario.class_count,
        best_effort_class=scenario.best_effort_class,
        default_regulator=scenario.dejitter,
    )
    decisions = []
    for entry in scenario.flows:
        spec = entry.spec
        if dejitter_mode == "on" and state.topology.is_ue(spec.src):
            spec = replace(spec, dejitter=True)
        elif dejitter_mode == "off":
            spec = replace(spec, dejitter=False)
        decision = state.register_flow(spec)
        decisions.append({
            "flow_id": spec.flow_id,
            "accepted": decision.accepted,
            "reason": decision.reason,
            "detail": decision.detail,
            "vlan_id": decision.assignment.vlan_id if decision.accepted else None,
            "pcp": decision.assignment.priority_class if decision.accepted else None,
            "e2e_bound_us": decision.assignment.e2e_bound_us if decision.accepted else None,
            "reconfigured": list(decision.reconfigured),
        })
        if not decision.accepted and entry.critical:
            raise AdmissionMissing(
                f"critical flow {spec.flow_id!r} rejected: {decision.reason} ({decision.detail})"
            )
    return state, decisions


def _build_flow_ctxs(scenario: Scenario, state: NetworkState) -> dict:
    topo = state.topology
    flows: dict[str, _FlowCtx] = {}
    admitted = state.flows()
    for entry in scenario.flows:
        fid = entry.spec.flow_id
        if fid not in admitted:
            continue
        assignment = admitted[fid]
        spec = state.spec_of(fid)
        ctx = _FlowCtx(fid, spec.src, spec.dst)
        ctx.critical = entry.critical
        ctx.registered = True
        ctx.pcp = assignment.priority_class
        ctx.vlan_id = assignment.vlan_id
        ctx.route = assignment.hop_ports
        ctx.per_hop_us = assignment.per_hop_bounds_us
        ctx.e2e_us = assignment.e2e_bound_us
        ctx.reg_bound_us = assignment.regulator_bound_us
        if topo.is_ue(spec.src):
            contract = transit_contract(topo.transit, spec.src, UPLINK,
                                        spec.burst_B, spec.rate_Bps)
            ctx.ul_bound_us = contract.delay_bound_us
            ctx.ul_best_us = contract.best_case_us
            if spec.dejitter:
                ctx.regulator = state.regulator_of(fid)
        else:
            ctx.policer = _Policer(spec.burst_B, spec.rate_Bps)
        if topo.is_ue(spec.dst):
            contract = transit_contract(topo.transit, spec.dst, DOWNLINK,
                                        spec.burst_B, spec.rate_Bps)
            ctx.dl_bound_us = contract.delay_bound_us
            ctx.dl_best_us = contract.best_case_us
        flows[fid] = ctx

    trees = state.trees
    for model in scenario.extra_sources:
        ctx = _FlowCtx(model.flow_id, model.src, model.dst)
        ctx.pcp = 0
        ctx.vlan_id = trees[0].vlan_id
        ctx.route = tuple(path_in_tree(topo, trees[0], model.src, model.dst))
        flows[model.flow_id] = ctx
    return flows


def run(scenario: Scenario, *, seed: int | None = None, dejitter: str = "scenario") -> RunResult:
    """Admit the scenario's flows, simulate, and report.

    `dejitter` forces the regulator for all 5G-sourced registered flows
    ("on"), disables it ("off"), or honors per-flow flags ("scenario").
    Raises AdmissionMissing when a critical flow is rejected.
    """
    if dejitter not in ("scenario", "on", "off"):
        raise ScenarioInvalid(f"dejitter mode must be scenario/on/off, got {dejitter!r}")
    if dejitter == "on" and scenario.dejitter is None:
        raise ScenarioInvalid("dejitter forced on but scenario has no nwtt.dejitter block")
    run_seed = scenario.seed if seed is None else seed
    state, decisions = _admit_flows(scenario, dejitter)
    flows = _build_flow_ctxs(scenario, state)
    engine = _Engine(scenario, state, flows, run_seed)
    engine.run()
    result = _build_result(scenario, state, engine, decisions, run_seed, dejitter)
    for fid, ctx in sorted(flows.items()):
        lost = ctx.drops.get("regulator", 0)
        if lost:
            log.warning("flow %s: regulator queue dropped %d packet(s); "
                        "hold/queue capacity is undersized", fid, lost)
    log.info(
        "run %s seed %d dejitter=%s: %d violations",
        scenario.name, run_seed, dejitter, result.report["violations"]["total"],
    )
    return result


def compare_dejitter(scenario: Scenario, *, seed: int | None = None) -> tuple[RunResult, RunResult]:
    """Paired runs with the regulator off and on, same seed."""
    off = run(scenario, seed=seed, dejitter="off")
    on = run(scenario, seed=seed, dejitter="on")
    return off, on


def dejitter_summary(off: RunResult, on: RunResult) -> dict:
    """Per-regulated-flow jitter/latency comparison of a paired run."""
    summary = {"schema_version": 1, "seed": off.seed, "flows": {}}
    for fid, report_on in on.report["flows"].items():
        report_off = off.report["flows"][fid]
        if not report_on["admitted"] or report_on["latency_us"] is None:
            continue
        if report_off["latency_us"] is None:
            continue
        if on.state.topology.is_ue(on.state.spec_of(fid).src):
            summary["flows"][fid] = {
                "jitter_off_us": report_off["jitter_us"],
                "jitter_on_us": report_on["jitter_us"],
                "min_latency_off_us": report_off["latency_us"]["min"],
                "min_latency_on_us": report_on["latency_us"]["min"],
                "max_latency_off_us": report_off["latency_us"]["max"],
                "max_latency_on_us": report_on["latency_us"]["max"],
                "regulator_drops": report_on["drops"].get("regulator", 0),
            }
    return summary


def write_trace(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        writer.writerows(rows)


def write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

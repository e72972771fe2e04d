"""Network-side translator: per-flow tagging/routing and de-jittering.

Packets leaving the 5G segment are matched exactly on (source, destination);
a hit yields the VLAN/priority tag and the egress toward the fabric,
anything else falls through to best effort.  The optional hold-and-forward
regulator retains the first packet of a busy period for a configured hold
time and then releases queued packets strictly one release period apart,
which absorbs the slot-pattern jitter upstream at the price of added
latency.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .topology import PortId
from .units import NS_PER_US


class BestEffort:
    """Sentinel decision for unmatched packets: class 0 on the default route."""

    def __repr__(self) -> str:
        return "BestEffort"


BEST_EFFORT = BestEffort()


@dataclass(frozen=True)
class RegulatorConfig:
    hold_us: int
    release_period_us: int
    queue_cap_pkts: int = 64
    per_class: bool = False

    def __post_init__(self):
        if self.release_period_us <= 0:
            raise ValueError("release period must be positive")
        if self.queue_cap_pkts < 1:
            raise ValueError("queue capacity must be at least one packet")
        if self.hold_us < 0:
            raise ValueError("hold time must be non-negative")


@dataclass(frozen=True)
class NwttRule:
    """Route + tag entry for one admitted 5G flow."""

    flow_id: str
    src: str
    dst: str
    egress: PortId
    vlan_id: int
    pcp: int
    regulator: RegulatorConfig | None = None


@dataclass
class NwttConfig:
    rules: dict[tuple[str, str], NwttRule] = field(default_factory=dict)

    def add_rule(self, rule: NwttRule) -> None:
        key = (rule.src, rule.dst)
        existing = self.rules.get(key)
        if existing is not None and existing.flow_id != rule.flow_id:
            raise ValueError(
                f"match {key} already bound to flow {existing.flow_id!r}"
            )
        self.rules[key] = rule

    def remove_flow(self, flow_id: str) -> None:
        self.rules = {k: r for k, r in self.rules.items() if r.flow_id != flow_id}


def classify_and_tag(cfg: NwttConfig, src: str, dst: str):
    """Exact-match lookup; unmatched packets are best effort, never an error."""
    return cfg.rules.get((src, dst), BEST_EFFORT)


@dataclass
class RegulatorState:
    """Mutable queue state; times are integer nanoseconds."""

    queue: deque = field(default_factory=deque)
    anchor_ns: int | None = None
    next_release_ns: int | None = None
    last_release_ns: int | None = None
    drops: int = 0
    accepted: int = 0
    released: int = 0


def regulator_offer(state: RegulatorState, cfg: RegulatorConfig, packet, t_arrival_ns: int) -> bool:
    """Enqueue a packet; returns False (and counts a drop) when full.

    The first packet of a busy period anchors the release schedule at
    arrival + hold; spacing to the previous busy period's last departure
    is still kept >= the release period.
    """
    if len(state.queue) >= cfg.queue_cap_pkts:
        state.drops += 1
        return False
    state.queue.append((packet, t_arrival_ns))
    state.accepted += 1
    if state.next_release_ns is None:
        state.anchor_ns = t_arrival_ns
        release = t_arrival_ns + cfg.hold_us * NS_PER_US
        if state.last_release_ns is not None:
            release = max(release, state.last_release_ns + cfg.release_period_us * NS_PER_US)
        state.next_release_ns = release
    return True


def regulator_release(state: RegulatorState, cfg: RegulatorConfig, t_now_ns: int) -> list:
    """Pop every packet whose scheduled release is due at or before t_now.

    While the queue stays backlogged consecutive departures are exactly
    one release period apart; when it drains the busy period ends and the
    next arrival re-anchors.
    """
    out = []
    period_ns = cfg.release_period_us * NS_PER_US
    while state.queue and state.next_release_ns is not None and state.next_release_ns <= t_now_ns:
        packet, _ = state.queue.popleft()
        t_depart = state.next_release_ns
        out.append((packet, t_depart))
        state.last_release_ns = t_depart
        state.released += 1
        state.next_release_ns = t_depart + period_ns if state.queue else None
    return out

"""The 5G segment as a transit node: TDD-limited worst-case latency per UE.

The radio system is reduced to what a DetNet controller can rely on: a
slot pattern, a numerology, and per-UE transport block sizes.  A burst of
B bytes needs n = ceil(B / tbs) usable slots; a packet arriving during
slot k may first be served in slot k + 1 + grant_delay.  Worst and best
case latencies come from sweeping the arrival slot over one pattern
period: the worst case takes the arrival just after a slot start, the
best case just before the slot ends.

Internally everything is integer nanoseconds (a mu=4 slot is 62.5 us);
reported bounds are microseconds, rounded up for the worst case and down
for the best case so both stay conservative.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field

from .errors import (
    NoDownlinkSlots,
    NoUplinkSlots,
    RateExceedsCapacity,
    UnknownUe,
)
from .units import NS_PER_S, ceil_div, ns_to_us_ceil, ns_to_us_floor

SLOT_KINDS = "DUSF"
UPLINK = "ul"
DOWNLINK = "dl"


@dataclass(frozen=True)
class TddConfig:
    """Periodic slot pattern plus the knobs that shape latency.

    ``grant_delay_slots`` models the scheduling-request round trip; the
    S-slot usability flags decide whether special slots carry payload.
    """

    pattern: str
    numerology_mu: int = 1
    grant_delay_slots: int = 0
    s_slot_usable_ul: bool = False
    s_slot_usable_dl: bool = True

    def __post_init__(self):
        if not self.pattern:
            raise ValueError("TDD pattern must be non-empty")
        bad = set(self.pattern) - set(SLOT_KINDS)
        if bad:
            raise ValueError(f"unknown slot kinds {sorted(bad)} in pattern")
        if not 0 <= self.numerology_mu <= 4:
            raise ValueError("numerology must be in 0..4")
        if self.grant_delay_slots < 0:
            raise ValueError("grant delay must be non-negative")

    @property
    def slot_ns(self) -> int:
        # 1 ms / 2^mu; exact in nanoseconds for every numerology 0..4.
        return 1_000_000 // (2 ** self.numerology_mu)

    @property
    def period_ns(self) -> int:
        return len(self.pattern) * self.slot_ns

    def usable(self, kind: str, direction: str) -> bool:
        if direction == UPLINK:
            return kind == "U" or (kind == "S" and self.s_slot_usable_ul)
        return kind == "D" or (kind == "S" and self.s_slot_usable_dl)

    def usable_slots(self, direction: str) -> tuple[int, ...]:
        return tuple(
            i for i, kind in enumerate(self.pattern) if self.usable(kind, direction)
        )

    def slot_usable(self, index: int, direction: str) -> bool:
        return self.usable(self.pattern[index % len(self.pattern)], direction)


@dataclass(frozen=True)
class UeRecord:
    """Reported state of one attached UE; TBS values come from live MCS."""

    ue_id: str
    tbs_ul_B: int
    tbs_dl_B: int
    mcs_index: int = 0

    def __post_init__(self):
        if self.tbs_ul_B <= 0 or self.tbs_dl_B <= 0:
            raise ValueError("TBS must be positive")


@dataclass
class TransitNode5G:
    """The whole 5G system folded into one forwarding device."""

    tdd: TddConfig
    ues: dict[str, UeRecord] = field(default_factory=dict)
    attach: tuple | None = None  # PortId of the switch port the NW-TT feeds

    def ue(self, ue_id: str) -> UeRecord:
        try:
            return self.ues[ue_id]
        except KeyError:
            raise UnknownUe(ue_id) from None


@dataclass(frozen=True)
class TransitContract:
    """What the 5G segment promises the controller for one flow direction."""

    delay_bound_us: int
    best_case_us: int
    jitter_us: int


def _capacity_Bps(tdd: TddConfig, tbs_B: int, direction: str) -> int:
    usable = len(tdd.usable_slots(direction))
    if usable == 0:
        return 0
    # floor keeps the admission test rate <= capacity conservative
    return usable * tbs_B * NS_PER_S // tdd.period_ns


def ul_capacity(tdd: TddConfig, ue: UeRecord) -> int:
    """Sustainable uplink rate: usable slots per period times TBS."""
    return _capacity_Bps(tdd, ue.tbs_ul_B, UPLINK)


def dl_capacity(tdd: TddConfig, ue: UeRecord) -> int:
    return _capacity_Bps(tdd, ue.tbs_dl_B, DOWNLINK)


def _sweep_ns(tdd: TddConfig, direction: str, tbs_B: int, burst_B: int) -> tuple[int, int]:
    """(worst, best) latency in ns over all arrival slot offsets.

    For arrival slot k the n-th usable slot at index >= k+1+grant_delay is
    found by counting through the per-period usable slot list; the burst
    completes at that slot's end boundary.  Worst case measures from the
    slot start (supremum within the slot), best case from the slot end.
    """
    usable = tdd.usable_slots(direction)
    if not usable:
        raise NoUplinkSlots(tdd.pattern) if direction == UPLINK else NoDownlinkSlots(tdd.pattern)
    n = ceil_div(burst_B, tbs_B)
    period = len(tdd.pattern)
    per_period = len(usable)
    worst = 0
    best = None
    for k in range(period):
        grant_from = k + 1 + tdd.grant_delay_slots
        wraps, offset = divmod(grant_from, period)
        pos = bisect_left(usable, offset)
        nth = pos + n - 1
        extra_wraps, within = divmod(nth, per_period)
        end_slot = (wraps + extra_wraps) * period + usable[within]
        worst = max(worst, (end_slot + 1 - k) * tdd.slot_ns)
        span = (end_slot - k) * tdd.slot_ns
        best = span if best is None else min(best, span)
    return worst, best


def worst_case_ul_latency(tdd: TddConfig, ue: UeRecord, burst_B: int, rate_Bps: int) -> int:
    """Worst-case uplink latency (us) for a (burst, rate) flow of this UE."""
    if burst_B <= 0:
        raise ValueError("burst must be positive")
    cap = ul_capacity(tdd, ue)
    if cap == 0:
        raise NoUplinkSlots(tdd.pattern)
    if rate_Bps > cap:
        raise RateExceedsCapacity(f"rate {rate_Bps} B/s > uplink capacity {cap} B/s")
    worst, _ = _sweep_ns(tdd, UPLINK, ue.tbs_ul_B, burst_B)
    return ns_to_us_ceil(worst)


def worst_case_dl_latency(tdd: TddConfig, ue: UeRecord, burst_B: int, rate_Bps: int) -> int:
    """Worst-case downlink latency (us); mirror of the uplink model."""
    if burst_B <= 0:
        raise ValueError("burst must be positive")
    cap = dl_capacity(tdd, ue)
    if cap == 0:
        raise NoDownlinkSlots(tdd.pattern)
    if rate_Bps > cap:
        raise RateExceedsCapacity(f"rate {rate_Bps} B/s > downlink capacity {cap} B/s")
    worst, _ = _sweep_ns(tdd, DOWNLINK, ue.tbs_dl_B, burst_B)
    return ns_to_us_ceil(worst)


def transit_contract(
    node: TransitNode5G, ue_id: str, direction: str, burst_B: int, rate_Bps: int
) -> TransitContract:
    """Delay bound and jitter the 5G segment reports for one flow.

    The jitter is worst minus best case of the same arrival sweep; the
    best case is the infimum, so simulated latencies always fall inside
    [best_case_us, delay_bound_us].
    """
    ue = node.ue(ue_id)
    if direction == UPLINK:
        delay_us = worst_case_ul_latency(node.tdd, ue, burst_B, rate_Bps)
        tbs = ue.tbs_ul_B
    elif direction == DOWNLINK:
        delay_us = worst_case_dl_latency(node.tdd, ue, burst_B, rate_Bps)
        tbs = ue.tbs_dl_B
    else:
        raise ValueError(f"direction must be '{UPLINK}' or '{DOWNLINK}'")
    _, best_ns = _sweep_ns(node.tdd, direction, tbs, burst_B)
    best_us = ns_to_us_floor(best_ns)
    return TransitContract(
        delay_bound_us=delay_us,
        best_case_us=best_us,
        jitter_us=delay_us - best_us,
    )

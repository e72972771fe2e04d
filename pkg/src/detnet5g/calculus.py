"""Worst-case delay and backlog bounds for non-preemptive strict-priority ports.

The model is the classic token-bucket / rate-latency pair: each priority
class at an egress port aggregates its member flows into one (burst, rate)
envelope and receives a residual rate-latency service curve

    R = C - sum(rates of higher classes)
    T = (sum(bursts of higher classes) + l_max) / R

where ``l_max`` is the largest packet of equal-or-lower priority that can
block the link non-preemptively.  From (R, T) follow the per-hop delay
bound T + b/R + d_proc, the backlog bound b + r*T, and the output burst
b + r*D used to propagate a flow's envelope to the next hop.

All quantities are integers (bytes, bytes/second, microseconds) and every
division rounds up, so computed bounds never undercut the true worst case.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import RateOverload, Unschedulable
from .units import US_PER_S, ceil_div


@dataclass(frozen=True)
class TokenBucket:
    """Arrival envelope: cumulative bytes in any window t <= burst_B + rate_Bps*t."""

    burst_B: int
    rate_Bps: int

    def __post_init__(self):
        if self.burst_B <= 0:
            raise ValueError("token bucket burst must be positive")
        if self.rate_Bps <= 0:
            raise ValueError("token bucket rate must be positive")


@dataclass(frozen=True)
class RateLatency:
    """Service guarantee of at least rate_Bps * (t - latency_us)+ bytes."""

    rate_Bps: int
    latency_us: int


@dataclass(frozen=True)
class ClassAggregate:
    """Sum of the member flows' envelopes for one class at one port."""

    burst_B: int = 0
    rate_Bps: int = 0
    max_pkt_B: int = 0
    flows: tuple[str, ...] = ()


@dataclass
class PortClassState:
    """Aggregate arrival state of one egress port, per priority class.

    Higher class index means higher priority; class 0 is best effort and
    never carries registered flows.  ``lmax_floor_B`` accounts for
    unannounced lower-priority traffic (e.g. background frames) that can
    occupy the link when a higher-class packet arrives.
    """

    link_rate_Bps: int
    class_count: int = 8
    classes: dict[int, ClassAggregate] = field(default_factory=dict)
    fwd_delay_us: tuple[int, ...] | None = None
    lmax_floor_B: int = 0

    def __post_init__(self):
        if self.fwd_delay_us is None:
            self.fwd_delay_us = (0,) * self.class_count
        if self.link_rate_Bps <= 0:
            raise ValueError("link rate must be positive")
        if self.class_count < 2:
            raise ValueError("need at least two classes (best effort + one)")
        if len(self.fwd_delay_us) < self.class_count:
            raise ValueError("forwarding delay table shorter than class count")

    def aggregate(self, priority: int) -> ClassAggregate:
        return self.classes.get(priority, ClassAggregate())

    def blocking_pkt_B(self, priority: int) -> int:
        """Largest packet that can block `priority` non-preemptively.

        Only strictly lower classes block; same-class packets are already
        inside the class's own burst term.  The floor models unregistered
        (best-effort) traffic.
        """
        lmax = self.lmax_floor_B
        for cls, agg in self.classes.items():
            if cls < priority and agg.max_pkt_B > lmax:
                lmax = agg.max_pkt_B
        return lmax


def sp_residual_service(state: PortClassState, priority: int) -> RateLatency:
    """Residual rate-latency service left for `priority` after higher classes.

    Raises Unschedulable when the higher classes claim the whole link.
    """
    rate_hi = 0
    burst_hi = 0
    for cls, agg in state.classes.items():
        if cls > priority:
            rate_hi += agg.rate_Bps
            burst_hi += agg.burst_B
    if rate_hi >= state.link_rate_Bps:
        raise Unschedulable(
            f"higher-priority rate {rate_hi} B/s >= link rate {state.link_rate_Bps} B/s"
        )
    residual = state.link_rate_Bps - rate_hi
    lmax = state.blocking_pkt_B(priority)
    latency_us = ceil_div((burst_hi + lmax) * US_PER_S, residual)
    return RateLatency(rate_Bps=residual, latency_us=latency_us)


def hop_delay_bound(state: PortClassState, priority: int) -> int:
    """Delay bound (us) for any class-`priority` packet at this port.

    D = T + b_p/R + d_proc with (R, T) the residual service and b_p the
    class aggregate burst.  FIFO within the class, so every member flow
    inherits the aggregate bound.
    """
    service = sp_residual_service(state, priority)
    agg = state.aggregate(priority)
    if agg.rate_Bps > service.rate_Bps:
        raise RateOverload(
            f"class {priority} rate {agg.rate_Bps} B/s exceeds residual "
            f"{service.rate_Bps} B/s"
        )
    queueing_us = ceil_div(agg.burst_B * US_PER_S, service.rate_Bps)
    return service.latency_us + queueing_us + state.fwd_delay_us[priority]


def backlog_bound(state: PortClassState, priority: int) -> int:
    """Backlog bound (bytes) for class `priority`: q = b_p + r_p * T."""
    service = sp_residual_service(state, priority)
    agg = state.aggregate(priority)
    if agg.rate_Bps > service.rate_Bps:
        raise RateOverload(
            f"class {priority} rate {agg.rate_Bps} B/s exceeds residual "
            f"{service.rate_Bps} B/s"
        )
    return agg.burst_B + ceil_div(agg.rate_Bps * service.latency_us, US_PER_S)


def propagate_burst(tb: TokenBucket, hop_delay_us: int) -> TokenBucket:
    """Output envelope after a hop with delay bound D: burst' = b + r*D."""
    if hop_delay_us < 0:
        raise ValueError("hop delay must be non-negative")
    grown = tb.burst_B + ceil_div(tb.rate_Bps * hop_delay_us, US_PER_S)
    return TokenBucket(burst_B=grown, rate_Bps=tb.rate_Bps)


def e2e_delay(per_hop_us, transit_us: int = 0, regulator_us: int = 0) -> int:
    """Sum the path-ordered hop bounds with the transit and regulator terms."""
    if transit_us < 0 or regulator_us < 0:
        raise ValueError("delay components must be non-negative")
    total = transit_us + regulator_us
    for d in per_hop_us:
        if d < 0:
            raise ValueError("delay components must be non-negative")
        total += d
    return total

"""Device/link graph of the fixed network plus the attached 5G segment.

Switches form the fabric; hosts and the 5G transit node hang off switch
ports as leaves.  VLAN trees partition the switch fabric for source
routing: every spanning tree of the switch graph gets a VLAN id, and a
flow's path is the unique tree path between its endpoints' attachment
switches, expressed as the ordered egress ports it queues at.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

from .errors import ConflictingPort, Disconnected, NoTransitNode, Unreachable
from .transit5g import TransitNode5G, UeRecord


class PortId(NamedTuple):
    node: str
    port: int

    def __str__(self) -> str:
        return f"{self.node}.{self.port}"

    @classmethod
    def parse(cls, text: str) -> "PortId":
        node, _, port = text.rpartition(".")
        if not node or not port.isdigit():
            raise ValueError(f"port id must look like 'S1.1', got {text!r}")
        return cls(node, int(port))


Link = tuple[PortId, PortId]


def make_link(a: PortId, b: PortId) -> Link:
    """Canonical undirected link: endpoints in sorted order."""
    if a == b:
        raise ValueError(f"link endpoints must differ, got {a}")
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class SwitchProfile:
    """Known per-device properties the controller relies on."""

    link_rate_Bps: int = 125_000
    fwd_delay_us: tuple[int, ...] = (0,) * 8
    port_buffer_B: int = 32_768
    class_count: int = 8

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("switch needs at least two priority classes")
        if self.link_rate_Bps <= 0 or self.port_buffer_B <= 0:
            raise ValueError("link rate and buffer must be positive")
        if len(self.fwd_delay_us) < self.class_count:
            raise ValueError("forwarding delay table shorter than class count")
        if any(d < 0 for d in self.fwd_delay_us):
            raise ValueError("forwarding delays must be non-negative")


DEFAULT_PROFILE = SwitchProfile()


@dataclass(frozen=True)
class VlanTree:
    """One spanning tree of the switch fabric, bound to a VLAN id."""

    vlan_id: int
    tree_index: int
    edges: tuple[Link, ...]

    def __post_init__(self):
        if not 1 <= self.vlan_id <= 4094:
            raise ValueError("VLAN id must be in 1..4094")


@dataclass
class TopologySnapshot:
    """Neighbor records as polled from devices: (node, port, peer, peer_port)."""

    records: list[tuple[str, int, str, int]]
    timestamp: float = 0.0
    polled: set[str] | None = None

    def polled_nodes(self) -> set[str]:
        if self.polled is not None:
            return set(self.polled)
        return {rec[0] for rec in self.records}


@dataclass
class Topology:
    switches: dict[str, SwitchProfile] = field(default_factory=dict)
    links: set[Link] = field(default_factory=set)
    hosts: dict[str, PortId] = field(default_factory=dict)
    transit: TransitNode5G | None = None
    fixed_poll_interval_s: int = 200
    fiveg_poll_interval_s: int = 5
    default_profile: SwitchProfile = DEFAULT_PROFILE

    def copy(self) -> "Topology":
        clone = Topology(
            switches=dict(self.switches),
            links=set(self.links),
            hosts=dict(self.hosts),
            transit=None,
            fixed_poll_interval_s=self.fixed_poll_interval_s,
            fiveg_poll_interval_s=self.fiveg_poll_interval_s,
            default_profile=self.default_profile,
        )
        if self.transit is not None:
            clone.transit = TransitNode5G(
                tdd=self.transit.tdd,
                ues=dict(self.transit.ues),
                attach=self.transit.attach,
            )
        return clone

    def switch_links(self) -> list[Link]:
        """Fabric links (switch-to-switch), sorted canonically."""
        return sorted(
            link
            for link in self.links
            if link[0].node in self.switches and link[1].node in self.switches
        )

    def profile(self, node: str) -> SwitchProfile:
        return self.switches[node]

    def attachment(self, node_id: str) -> tuple[str, PortId | None]:
        """Resolve an endpoint to (attachment switch, final egress port).

        Hosts and UEs attach via a switch port; a switch resolves to
        itself with no final hop.
        """
        if node_id in self.hosts:
            port = self.hosts[node_id]
            return port.node, port
        if self.transit is not None and node_id in self.transit.ues:
            port = self.transit.attach
            if port is None or port.node not in self.switches:
                raise Unreachable(f"transit node attachment missing for {node_id}")
            return port.node, port
        if node_id in self.switches:
            return node_id, None
        raise Unreachable(f"unknown endpoint {node_id!r}")

    def is_ue(self, node_id: str) -> bool:
        return self.transit is not None and node_id in self.transit.ues


def merge_snapshot(topo: Topology, snap: TopologySnapshot) -> Topology:
    """Fold one poll round into the topology.

    Reported links are unioned in; links touching a polled device that the
    snapshot no longer reports are pruned.  Unknown switch ids get the
    topology's default profile.  Applying the same snapshot twice is a
    no-op.
    """
    reported: set[Link] = set()
    ports_seen: dict[PortId, Link] = {}
    for node, port, peer, peer_port in snap.records:
        link = make_link(PortId(node, port), PortId(peer, peer_port))
        for end in link:
            prior = ports_seen.get(end)
            if prior is not None and prior != link:
                raise ConflictingPort(f"port {end} reported in {prior} and {link}")
            ports_seen[end] = link
        reported.add(link)

    merged = topo.copy()
    polled = snap.polled_nodes()
    kept = {
        link
        for link in merged.links
        if (link[0].node not in polled and link[1].node not in polled)
        or link in reported
    }
    merged.links = kept | reported
    for link in reported:
        for end in link:
            if end.node not in merged.switches and end.node not in merged.hosts:
                merged.switches[end.node] = merged.default_profile
    return merged


def merge_5g_snapshot(topo: Topology, ues: list[UeRecord]) -> Topology:
    """Replace the transit node's UE set with the reported one."""
    if topo.transit is None:
        raise NoTransitNode("topology has no 5G segment")
    merged = topo.copy()
    merged.transit.ues = {ue.ue_id: ue for ue in ues}
    return merged


def _spans(edge_subset: tuple[Link, ...], nodes: list[str]) -> bool:
    """Union-find acyclicity + coverage check for a candidate edge set."""
    parent = {n: n for n in nodes}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edge_subset:
        ra, rb = find(a.node), find(b.node)
        if ra == rb:
            return False
        parent[ra] = rb
    root = find(nodes[0])
    return all(find(n) == root for n in nodes)


def enumerate_spanning_trees(
    topo: Topology, *, base_vlan: int = 100, cap: int = 64
) -> tuple[list[VlanTree], bool]:
    """All spanning trees of the switch fabric, in deterministic order.

    Trees are emitted lexicographically by their sorted edge lists and
    assigned vlan_id = base_vlan + tree_index.  At most `cap` trees are
    returned; the second element reports whether the enumeration was
    truncated.
    """
    nodes = sorted(topo.switches)
    if not nodes:
        raise Disconnected("no switches")
    edges = topo.switch_links()
    adj: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in edges:
        adj[a.node].append(b.node)
        adj[b.node].append(a.node)
    reach = {nodes[0]}
    frontier = [nodes[0]]
    while frontier:
        for nxt in adj[frontier.pop()]:
            if nxt not in reach:
                reach.add(nxt)
                frontier.append(nxt)
    if reach != set(nodes):
        raise Disconnected(f"switch graph not connected: reached {sorted(reach)}")

    want = len(nodes) - 1
    trees: list[VlanTree] = []
    truncated = False
    for subset in combinations(edges, want):
        if not _spans(subset, nodes):
            continue
        if len(trees) >= cap:
            truncated = True
            break
        trees.append(
            VlanTree(vlan_id=base_vlan + len(trees), tree_index=len(trees), edges=subset)
        )
    return trees, truncated


def path_in_tree(topo: Topology, tree: VlanTree, src: str, dst: str) -> list[PortId]:
    """Ordered egress ports a packet queues at along the unique tree path.

    One entry per switch-to-switch hop (the upstream switch's port), plus
    the destination's attachment port as the final hop.  An empty list
    means src and dst are the same endpoint.
    """
    if src == dst:
        return []
    src_switch, _ = topo.attachment(src)
    dst_switch, dst_port = topo.attachment(dst)
    if src_switch not in topo.switches or dst_switch not in topo.switches:
        raise Unreachable(f"attachment switch missing for {src!r} or {dst!r}")

    hops: list[PortId] = []
    if src_switch != dst_switch:
        adj: dict[str, list[tuple[str, PortId]]] = {}
        for a, b in tree.edges:
            adj.setdefault(a.node, []).append((b.node, a))
            adj.setdefault(b.node, []).append((a.node, b))
        # BFS parent pointers; the path is unique in a tree
        parent: dict[str, tuple[str, PortId | None]] = {src_switch: (src_switch, None)}
        frontier = [src_switch]
        while frontier and dst_switch not in parent:
            nxt_frontier = []
            for node in frontier:
                for peer, egress in sorted(adj.get(node, [])):
                    if peer not in parent:
                        parent[peer] = (node, egress)
                        nxt_frontier.append(peer)
            frontier = nxt_frontier
        if dst_switch not in parent:
            raise Unreachable(f"{dst!r} not reachable from {src!r} in tree {tree.vlan_id}")
        rev: list[PortId] = []
        node = dst_switch
        while node != src_switch:
            prev, egress = parent[node]
            rev.append(egress)
            node = prev
        hops.extend(reversed(rev))
    if dst_port is not None:
        hops.append(dst_port)
    return hops

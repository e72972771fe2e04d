import pytest

from detnet5g.topology import PortId, SwitchProfile, Topology, make_link
from detnet5g.transit5g import TddConfig, TransitNode5G, UeRecord


def ring_topology(*, with_transit=True, profile=None) -> Topology:
    """Demo fabric: S1-S2-S3 ring, hosts D (S3.3) and G (S2.3), NW-TT at S1.3."""
    profile = profile or SwitchProfile()
    topo = Topology()
    for sid in ("S1", "S2", "S3"):
        topo.switches[sid] = profile
    topo.links = {
        make_link(PortId("S1", 1), PortId("S2", 1)),
        make_link(PortId("S1", 2), PortId("S3", 1)),
        make_link(PortId("S2", 2), PortId("S3", 2)),
    }
    topo.hosts = {"D": PortId("S3", 3), "G": PortId("S2", 3)}
    if with_transit:
        topo.transit = TransitNode5G(
            tdd=TddConfig("DDDSU", numerology_mu=1),
            ues={
                "UE1": UeRecord("UE1", tbs_ul_B=1500, tbs_dl_B=3000),
                "UE2": UeRecord("UE2", tbs_ul_B=1500, tbs_dl_B=3000),
            },
            attach=PortId("S1", 3),
        )
    return topo


def line_topology() -> Topology:
    topo = Topology()
    profile = SwitchProfile()
    for sid in ("S1", "S2", "S3"):
        topo.switches[sid] = profile
    topo.links = {
        make_link(PortId("S1", 1), PortId("S2", 1)),
        make_link(PortId("S2", 2), PortId("S3", 1)),
    }
    topo.hosts = {"A": PortId("S1", 2), "B": PortId("S3", 2)}
    return topo


@pytest.fixture
def ring():
    return ring_topology()


@pytest.fixture
def line():
    return line_topology()

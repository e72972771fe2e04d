import random

import pytest

from detnet5g.admission import FlowSpec, NetworkState
from detnet5g.errors import MalformedRequest, NotA5GFlow, UnknownFlow
from detnet5g.nwtt import RegulatorConfig
from detnet5g.topology import PortId, SwitchProfile
from detnet5g.transit5g import DOWNLINK, UeRecord, transit_contract

from conftest import ring_topology


def spec(fid="f1", src="UE1", dst="D", rate=12_500, burst=1_250, pkt=1_250,
         deadline=100_000, dejitter=False):
    return FlowSpec(flow_id=fid, src=src, dst=dst, rate_Bps=rate, burst_B=burst,
                    max_pkt_B=pkt, deadline_us=deadline, dejitter=dejitter)


def reconfig_topology():
    """Ring with two sources at S1 and two sinks at S3."""
    topo = ring_topology(with_transit=False)
    topo.hosts = {
        "A_src": PortId("S1", 4),
        "B_src": PortId("S1", 5),
        "D": PortId("S3", 3),
        "E": PortId("S3", 4),
    }
    return topo


class TestRegisterFlow:
    def test_demo_flow_accepted_with_pinned_bound(self, ring):
        state = NetworkState(ring)
        decision = state.register_flow(spec())
        assert decision.accepted
        a = decision.assignment
        assert a.priority_class == 7
        assert a.vlan_id == 100
        assert a.hop_ports == (PortId("S1", 2), PortId("S3", 3))
        assert a.per_hop_bounds_us == (22_000, 24_200)
        assert a.transit_bound_us == 3_000
        assert a.regulator_bound_us == 0
        assert a.e2e_bound_us == 49_200

    def test_impossible_deadline_rejected_atomically(self, ring):
        state = NetworkState(ring)
        before = state.snapshot()
        decision = state.register_flow(spec(deadline=1))
        assert not decision.accepted
        assert decision.reason == "DeadlineInfeasible"
        assert state.snapshot() == before

    def test_invalid_spec(self, ring):
        state = NetworkState(ring)
        decision = state.register_flow(spec(burst=100, pkt=1_250))
        assert (decision.accepted, decision.reason) == (False, "InvalidSpec")

    def test_unknown_endpoint_unreachable(self, ring):
        state = NetworkState(ring)
        decision = state.register_flow(spec(dst="nowhere"))
        assert (decision.accepted, decision.reason) == (False, "Unreachable")

    def test_duplicate_flow_id(self, ring):
        state = NetworkState(ring)
        assert state.register_flow(spec()).accepted
        dup = state.register_flow(spec())
        assert (dup.accepted, dup.reason) == (False, "InvalidSpec")

    def test_uplink_capacity_aggregated_per_ue(self):
        topo = ring_topology(profile=SwitchProfile(link_rate_Bps=10_000_000))
        state = NetworkState(topo)
        ok = state.register_flow(spec(fid="f1", rate=350_000, burst=1_500, pkt=1_500))
        assert ok.accepted
        over = state.register_flow(spec(fid="f2", rate=350_000, burst=1_500, pkt=1_500))
        assert not over.accepted
        assert over.reason == "Unschedulable"

    def test_downlink_flow_uses_dl_transit_as_last_hop(self, ring):
        state = NetworkState(ring)
        decision = state.register_flow(spec(fid="dl", src="G", dst="UE2",
                                            burst=1_500, pkt=1_500))
        assert decision.accepted
        a = decision.assignment
        assert a.hop_ports[-1] == PortId("S1", 3)  # egress toward the NW-TT
        expected = transit_contract(ring.transit, "UE2", DOWNLINK, 1_500, 12_500)
        assert a.transit_bound_us == expected.delay_bound_us
        assert a.e2e_bound_us == sum(a.per_hop_bounds_us) + a.transit_bound_us

    def test_contender_lands_on_disjoint_tree(self):
        topo = reconfig_topology()
        state = NetworkState(topo)
        first = state.register_flow(
            spec(fid="A", src="A_src", dst="E", rate=25_000, burst=5_000,
                 pkt=1_500, deadline=114_400))
        assert first.accepted
        assert first.assignment.e2e_bound_us == 114_400  # exactly at deadline
        second = state.register_flow(
            spec(fid="B", src="B_src", dst="D", rate=12_500, burst=1_250,
                 pkt=1_250, deadline=500_000))
        assert second.accepted
        # sharing S1.2 would push A past its deadline, so B detours via S2
        assert second.assignment.vlan_id == 101
        assert second.reconfigured == ()
        assert state.flows()["A"].vlan_id == first.assignment.vlan_id

    def test_reconfiguration_moves_existing_flow(self):
        topo = reconfig_topology()
        state = NetworkState(topo)
        a = state.register_flow(
            spec(fid="A", src="A_src", dst="E", rate=25_000, burst=5_000,
                 pkt=1_500, deadline=500_000))
        assert a.accepted
        assert a.assignment.vlan_id == 100
        b = state.register_flow(
            spec(fid="B", src="B_src", dst="D", rate=12_500, burst=1_250,
                 pkt=1_250, deadline=50_000))
        assert b.accepted
        assert b.reconfigured == ("A",)
        assert state.flows()["B"].vlan_id == 100
        assert state.flows()["A"].vlan_id == 101
        # every admitted flow still meets its deadline
        assert state.flows()["A"].e2e_bound_us <= 500_000
        assert state.flows()["B"].e2e_bound_us <= 50_000

    def test_reject_when_reconfiguration_disabled(self):
        topo = reconfig_topology()
        state = NetworkState(topo, enable_reconfig=False)
        state.register_flow(spec(fid="A", src="A_src", dst="E", rate=25_000,
                                 burst=5_000, pkt=1_500, deadline=500_000))
        before = state.snapshot()
        b = state.register_flow(spec(fid="B", src="B_src", dst="D", rate=12_500,
                                     burst=1_250, pkt=1_250, deadline=50_000))
        assert not b.accepted
        assert b.reason == "DeadlineInfeasible"
        assert state.snapshot() == before

    def test_buffer_exceeded_reason(self):
        topo = ring_topology(
            with_transit=False,
            profile=SwitchProfile(link_rate_Bps=125_000, port_buffer_B=2_000),
        )
        topo.hosts = {"A": PortId("S1", 4), "D": PortId("S3", 3)}
        state = NetworkState(topo)
        decision = state.register_flow(
            spec(fid="big", src="A", dst="D", rate=12_500, burst=1_900,
                 pkt=1_500, deadline=10_000_000))
        assert not decision.accepted
        assert decision.reason == "BufferExceeded"

    def test_dejitter_adds_regulator_bound(self, ring):
        reg = RegulatorConfig(hold_us=5_000, release_period_us=2_000)
        state = NetworkState(ring, default_regulator=reg)
        plain = NetworkState(ring).register_flow(spec(burst=2_500, pkt=1_250))
        withreg = state.register_flow(spec(burst=2_500, pkt=1_250, dejitter=True))
        assert withreg.accepted
        a = withreg.assignment
        assert a.regulator_bound_us == 5_000 + (2 - 1) * 2_000
        assert a.e2e_bound_us == plain.assignment.e2e_bound_us + 7_000

    def test_dejitter_without_config_rejected(self, ring):
        state = NetworkState(ring)
        decision = state.register_flow(spec(dejitter=True))
        assert (decision.accepted, decision.reason) == (False, "InvalidSpec")


class TestRemoveFlow:
    def test_add_remove_roundtrip(self, ring):
        state = NetworkState(ring)
        before = state.snapshot()
        state.register_flow(spec())
        state.remove_flow("f1")
        assert state.snapshot() == before

    def test_survivor_bound_shrinks(self, ring):
        state = NetworkState(ring)
        state.register_flow(spec(fid="f1"))
        state.register_flow(spec(fid="f2", src="UE2"))
        with_both = state.flows()["f1"].e2e_bound_us
        state.remove_flow("f2")
        assert state.flows()["f1"].e2e_bound_us <= with_both

    def test_unknown_flow(self, ring):
        state = NetworkState(ring)
        with pytest.raises(UnknownFlow):
            state.remove_flow("ghost")


class TestFlowRequests:
    def request(self, **overrides):
        base = {
            "flow_id": "f1", "src": "UE1", "dst": "D", "rate_Bps": 12_500,
            "burst_B": 1_250, "max_pkt_B": 1_250, "deadline_us": 100_000,
            "dejitter": False,
        }
        base.update(overrides)
        return base

    def test_wellformed_accepted_with_configs(self, ring):
        state = NetworkState(ring)
        response = state.handle_flow_request(self.request())
        assert response["accepted"] is True
        assert response["vlan_id"] == 100
        assert response["pcp"] == 7
        assert response["e2e_bound_us"] == 49_200
        assert response["nwtt_config"]["match"] == {"src": "UE1", "dst": "D"}
        assert response["reconfigured"] == []

    def test_host_flow_gets_policer_config(self, ring):
        state = NetworkState(ring)
        response = state.handle_flow_request(
            self.request(src="G", burst_B=1_500, max_pkt_B=1_500))
        assert response["accepted"] is True
        assert response["host_config"]["policer"] == {"burst_B": 1_500, "rate_Bps": 12_500}

    def test_missing_burst_is_malformed(self, ring):
        state = NetworkState(ring)
        request = self.request()
        del request["burst_B"]
        with pytest.raises(MalformedRequest):
            state.handle_flow_request(request)

    def test_wrong_type_is_malformed(self, ring):
        state = NetworkState(ring)
        with pytest.raises(MalformedRequest):
            state.handle_flow_request(self.request(rate_Bps="fast"))

    def test_unknown_destination_is_reject_not_error(self, ring):
        state = NetworkState(ring)
        response = state.handle_flow_request(self.request(dst="Z"))
        assert response["accepted"] is False
        assert response["reason"] == "Unreachable"


class TestNwttConfig:
    def test_admitted_ue_flow(self, ring):
        state = NetworkState(ring)
        state.register_flow(spec())
        cfg = state.config_for_nwtt("f1")
        assert cfg["egress"] == "S1.3"
        assert cfg["vlan_id"] == 100
        assert cfg["pcp"] == 7

    def test_host_flow_is_not_5g(self, ring):
        state = NetworkState(ring)
        state.register_flow(spec(fid="h", src="G", burst=1_500, pkt=1_500))
        with pytest.raises(NotA5GFlow):
            state.config_for_nwtt("h")

    def test_two_ue_flows_two_rules(self, ring):
        state = NetworkState(ring)
        state.register_flow(spec(fid="f1", src="UE1", dst="D"))
        state.register_flow(spec(fid="f2", src="UE2", dst="G"))
        rules = state.nwtt_rules().rules
        assert set(rules) == {("UE1", "D"), ("UE2", "G")}


class TestUeSnapshots:
    def test_orphaned_flow_flagged(self, ring):
        state = NetworkState(ring)
        state.register_flow(spec())
        orphans = state.apply_5g_snapshot([UeRecord("UE2", 1_500, 3_000)])
        assert orphans == ["f1"]
        assert state.orphaned_flows() == ["f1"]
        assert set(state.topology.transit.ues) == {"UE2"}

    def test_reappearing_ue_clears_flag(self, ring):
        state = NetworkState(ring)
        state.register_flow(spec())
        state.apply_5g_snapshot([])
        orphans = state.apply_5g_snapshot(
            [UeRecord("UE1", 1_500, 3_000), UeRecord("UE2", 1_500, 3_000)])
        assert orphans == []
        assert state.orphaned_flows() == []


def make_ops(seed: int, count: int):
    """Deterministic register/remove op list, independent of any state."""
    rng = random.Random(seed)
    ops = []
    fids = []
    for i in range(count):
        if fids and rng.random() < 0.3:
            ops.append(("remove", rng.choice(fids)))
            continue
        fid = f"f{i}"
        fids.append(fid)
        src, dst = rng.sample(["UE1", "UE2", "D", "G"], 2)
        pkt = rng.choice([100, 500, 1_250, 1_500])
        ops.append(("register", FlowSpec(
            flow_id=fid, src=src, dst=dst,
            rate_Bps=rng.choice([1_000, 5_000, 12_500, 40_000]),
            burst_B=pkt * rng.randrange(1, 4), max_pkt_B=pkt,
            deadline_us=rng.choice([1_000, 60_000, 200_000, 2_000_000]))))
    return ops


def apply_op(state, op):
    if op[0] == "remove":
        try:
            state.remove_flow(op[1])
            return ("removed", op[1])
        except UnknownFlow:
            return ("unknown", op[1])
    decision = state.register_flow(op[1])
    return ("register", op[1].flow_id, decision.accepted, decision.reason,
            decision.assignment)


class TestStateInvariants:
    def test_atomicity_coherence_and_replay(self):
        rng = random.Random(1234)
        for _ in range(40):
            ops = make_ops(rng.randrange(1 << 30), 6)
            state = NetworkState(ring_topology())
            trail = []
            for op in ops:
                snap = state.snapshot()
                outcome = apply_op(state, op)
                trail.append(outcome)
                if outcome[0] == "register" and not outcome[2]:
                    assert state.snapshot() == snap  # reject is atomic
                assert state.aggregates() == state.recompute_aggregates()
                for assignment in state.flows().values():
                    spec_d = state.spec_of(assignment.flow_id)
                    assert assignment.e2e_bound_us <= spec_d.deadline_us
            # replay from scratch: identical decisions and final state
            state2 = NetworkState(ring_topology())
            trail2 = [apply_op(state2, op) for op in ops]
            assert trail2 == trail
            assert state2.snapshot() == state.snapshot()

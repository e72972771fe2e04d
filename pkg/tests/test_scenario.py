import json
from pathlib import Path

import pytest

from detnet5g.errors import ScenarioInvalid
from detnet5g.scenario import (
    canonical_scenario,
    canonical_topology,
    load_scenario,
    load_scenario_file,
    load_topology,
)

REPO = Path(__file__).resolve().parents[1]


def test_canonical_scenario_parses():
    scn = load_scenario(canonical_scenario())
    assert {e.spec.flow_id for e in scn.flows} == {"orange"}
    assert {s.flow_id for s in scn.extra_sources} == {"green", "bg"}
    assert scn.dejitter.hold_us == 5_000
    assert scn.duration_ms == 4_000


def test_bundled_file_matches_builder():
    with open(REPO / "scenarios" / "canonical.json") as fh:
        assert json.load(fh) == canonical_scenario()


def test_canonical_topology_block():
    topo = load_topology(canonical_topology())
    assert set(topo.switches) == {"S1", "S2", "S3"}
    assert set(topo.hosts) == {"D", "G"}
    assert set(topo.transit.ues) == {"UE1", "UE2"}
    assert str(topo.transit.attach) == "S1.3"


def test_missing_field_names_path():
    doc = canonical_scenario()
    del doc["flows"][0]["rate_Bps"]
    with pytest.raises(ScenarioInvalid, match=r"flows\[0\].rate_Bps"):
        load_scenario(doc)


def test_unknown_node_reference():
    doc = canonical_scenario()
    doc["flows"][0]["dst"] = "Mars"
    with pytest.raises(ScenarioInvalid, match=r"flows\[0\].dst"):
        load_scenario(doc)


def test_unknown_switch_in_link():
    doc = canonical_topology()
    doc["links"].append(["S9.1", "S1.4"])
    with pytest.raises(ScenarioInvalid, match="S9"):
        load_topology(doc)


def test_port_reuse_rejected():
    doc = canonical_topology()
    doc["links"].append(["S1.1", "S3.4"])  # S1.1 already linked to S2.1
    with pytest.raises(ScenarioInvalid, match="already used"):
        load_topology(doc)
    doc = canonical_topology()
    doc["hosts"].append({"id": "H9", "attach": "S1.3"})  # transit port
    with pytest.raises(ScenarioInvalid, match="already used"):
        load_topology(doc)


def test_bad_schema_version():
    doc = canonical_scenario()
    doc["schema_version"] = 99
    with pytest.raises(ScenarioInvalid, match="schema_version"):
        load_scenario(doc)


def test_duplicate_flow_ids_rejected():
    doc = canonical_scenario()
    doc["sim"]["sources"].append(dict(doc["sim"]["sources"][0]))
    with pytest.raises(ScenarioInvalid, match="duplicate"):
        load_scenario(doc)


def test_ue_traffic_requires_transit():
    doc = canonical_scenario()
    del doc["topology"]["transit5g"]
    with pytest.raises(ScenarioInvalid):
        load_scenario(doc)


def test_bad_source_mode():
    doc = canonical_scenario()
    doc["flows"][0]["source"]["mode"] = "warp"
    with pytest.raises(ScenarioInvalid, match="mode"):
        load_scenario(doc)


def test_snapshot_schedule_validated():
    doc = canonical_scenario()
    doc["sim"]["snapshot_schedule"] = [{"t_ms": 10, "kind": "carrier-pigeon"}]
    with pytest.raises(ScenarioInvalid, match="kind"):
        load_scenario(doc)


def test_json_parse_error_reports_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{\n  \"schema_version\": 1,\n")
    with pytest.raises(ScenarioInvalid, match="line"):
        load_scenario_file(path)

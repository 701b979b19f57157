import json
import math
from pathlib import Path

import numpy as np
import pytest

from softnav.dynamics import LinearDS, LpvDS
from softnav.errors import ScenarioError
from softnav.scenario import (
    canonical_json,
    load_ds_file,
    load_scenario,
    load_scenario_dict,
    scenario_digest,
)

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def minimal_doc(**overrides):
    doc = {
        "ds": {"kind": "linear", "attractor": [0.0, 0.0],
               "gain_matrix": [[-1.0, 0.0], [0.0, -1.0]]},
        "obstacles": [],
    }
    doc.update(overrides)
    return doc


class TestLoadScenario:
    def test_table_case_derives_stiffness(self):
        loaded = load_scenario(FIXTURES / "table1" / "A1.json")
        assert len(loaded.obstacles) == 1
        obs = loaded.obstacles[0]
        assert obs.hard_semi_axes == pytest.approx([0.04, 0.04])
        assert obs.soft_ratio == 1.5
        assert obs.stiffness == pytest.approx(math.exp(0.5))

    def test_soft_ratio_below_one_cites_field(self):
        doc = minimal_doc(obstacles=[{
            "center": [0.0, 0.0], "hard_semi_axes": [1.0, 1.0], "soft_ratio": 0.9,
        }])
        with pytest.raises(ScenarioError) as excinfo:
            load_scenario_dict(doc)
        assert excinfo.value.field_path == "obstacles[0].soft_ratio"

    def test_empty_obstacle_list_is_valid(self):
        loaded = load_scenario_dict(minimal_doc())
        assert loaded.obstacles == ()
        assert isinstance(loaded.ds, LinearDS)

    def test_unknown_fields_rejected(self):
        with pytest.raises(ScenarioError) as excinfo:
            load_scenario_dict(minimal_doc(extra_knob=1))
        assert "extra_knob" in excinfo.value.field_path
        doc = minimal_doc(obstacles=[{
            "center": [0.0, 0.0], "hard_semi_axes": [1.0, 1.0], "radius": 2.0,
        }])
        with pytest.raises(ScenarioError) as excinfo:
            load_scenario_dict(doc)
        assert excinfo.value.field_path == "obstacles[0].radius"

    def test_dangling_ds_reference(self, tmp_path):
        doc = minimal_doc(ds={"file": "missing.json"})
        path = tmp_path / "scene.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ScenarioError) as excinfo:
            load_scenario(path)
        assert excinfo.value.field_path == "ds"

    def test_grid_starts_expand(self):
        doc = minimal_doc(starts={"grid": {"min": [0.0, 0.0], "max": [1.0, 1.0],
                                           "counts": [3, 3]}})
        loaded = load_scenario_dict(doc)
        assert len(loaded.starts) == 9
        assert loaded.provenance["starts"]["points"][0] == [0.0, 0.0]

    def test_auto_c_is_fraction_of_peak_speed(self):
        doc = minimal_doc(starts={"points": [[2.0, 0.0]]})
        loaded = load_scenario_dict(doc)
        # linear unit-gain field: fastest corner of the padded box
        assert loaded.strategy.c > 0.0
        assert loaded.strategy.c == pytest.approx(
            0.05 * max(np.linalg.norm(np.array(p))
                       for p in [loaded.provenance["starts"]["points"][0]]),
            rel=0.5,
        )

    def test_auto_pairs_detect_overlap(self):
        doc = minimal_doc(obstacles=[
            {"center": [-1.0, 0.0], "hard_semi_axes": [1.0, 1.0], "soft_ratio": 1.5},
            {"center": [1.0, 0.0], "hard_semi_axes": [1.0, 1.0], "soft_ratio": 1.5},
            {"center": [8.0, 0.0], "hard_semi_axes": [1.0, 1.0], "soft_ratio": 1.5},
        ])
        loaded = load_scenario_dict(doc)
        assert loaded.strategy.intersection_pairs == ((0, 1),)

    def test_invalid_pair_index_rejected(self):
        doc = minimal_doc(
            obstacles=[{"center": [3.0, 0.0], "hard_semi_axes": [1.0, 1.0]}],
            strategy={"intersection_pairs": [[0, 5]]},
        )
        with pytest.raises(ScenarioError) as excinfo:
            load_scenario_dict(doc)
        assert "intersection_pairs" in excinfo.value.field_path

    def test_motion_script_index_checked(self):
        doc = minimal_doc(
            obstacles=[{"center": [3.0, 0.0], "hard_semi_axes": [1.0, 1.0]}],
            motion_scripts={"4": [{"time": 0.0, "center": [3.0, 0.0]}]},
        )
        with pytest.raises(ScenarioError) as excinfo:
            load_scenario_dict(doc)
        assert excinfo.value.field_path == "motion_scripts.4"

    def test_round_trip_through_provenance(self):
        for name in ("bench/headon.json", "table1/B1.json", "table1/D1.json"):
            loaded = load_scenario(FIXTURES / name)
            again = load_scenario_dict(loaded.provenance)
            assert again.provenance == loaded.provenance
            assert again.scenario_hash == loaded.scenario_hash

    def test_hash_changes_with_content(self):
        base = load_scenario_dict(minimal_doc(strategy={"c": 0.1}))
        other = load_scenario_dict(minimal_doc(strategy={"c": 0.2}))
        assert base.scenario_hash != other.scenario_hash
        assert scenario_digest(base.provenance) == base.scenario_hash

    def test_all_shipped_fixtures_load(self):
        names = [p for p in (FIXTURES / "table1").glob("*.json")]
        assert len(names) == 9
        for path in names:
            loaded = load_scenario(path)
            assert loaded.starts
        for path in (FIXTURES / "bench").glob("*.json"):
            load_scenario(path)


class TestDsFiles:
    def test_linear_file(self):
        ds, normalized = load_ds_file(FIXTURES / "ds" / "linear.json")
        assert isinstance(ds, LinearDS)
        assert normalized["kind"] == "linear"

    def test_lpv_file(self):
        ds, _ = load_ds_file(FIXTURES / "ds" / "lpv2.json")
        assert isinstance(ds, LpvDS)
        assert ds.n_components == 2

    def test_unknown_kind(self, tmp_path):
        path = tmp_path / "ds.json"
        path.write_text(json.dumps({"kind": "spline", "attractor": [0, 0]}))
        with pytest.raises(ScenarioError) as excinfo:
            load_ds_file(path)
        assert excinfo.value.field_path == "ds.kind"

    def test_component_field_paths(self, tmp_path):
        doc = {
            "kind": "lpv", "attractor": [0.0, 0.0],
            "P": [[1.0, 0.0], [0.0, 1.0]],
            "components": [{
                "prior": 1.0, "mean": [0.0, 0.0],
                "covariance": [[1.0, 0.0], [0.0, 1.0]],
                "A": [[-1.0, 0.0], [0.0, -1.0]],
                "b": [0.0, "oops"],
            }],
        }
        path = tmp_path / "ds.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(ScenarioError) as excinfo:
            load_ds_file(path)
        assert excinfo.value.field_path == "ds.components[0].b[1]"


class TestCanonicalJson:
    def test_key_order_independent(self):
        a = canonical_json({"b": 1, "a": [1.5, 2.0]})
        b = canonical_json({"a": [1.5, 2.0], "b": 1})
        assert a == b

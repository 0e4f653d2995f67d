from __future__ import annotations

import pytest

from avrsim.belief import hiding_slots, min_steps_to_see
from avrsim.generate import (
    CATEGORIES,
    COMPOSITE_COVERS,
    COMPOSITE_OCCLUDED,
    DEPTH_CALIBRATED_TYPES,
    HIDDEN_COUNT,
    SceneGenerationError,
    generate_scene,
    hidden_ids,
)
from avrsim.world import visible_set


class TestCategoryContracts:
    def test_occlusion_type0(self):
        scene = generate_scene("occlusion", 0, 7)
        assert scene.cover_relations == ()
        assert len(hidden_ids(scene)) == 1

    def test_stack_type0(self):
        scene = generate_scene("stack", 0, 7)
        assert len(scene.cover_relations) == 1
        hidden = hidden_ids(scene)
        assert hidden == scene.covered_ids()  # no sight-line hiding

    def test_composite_has_both_kinds(self):
        scene = generate_scene("composite", 9, 1)
        covered = scene.covered_ids()
        hidden = hidden_ids(scene)
        assert covered and hidden - covered

    def test_composite_depth_calibration_example(self):
        scene = generate_scene("composite", 9, 1)
        depth = min_steps_to_see(scene, hidden_ids(scene), t_max=8)
        assert 4 <= depth <= 6

    @pytest.mark.parametrize("scenario_type", range(10))
    def test_hidden_counts_match_table(self, scenario_type):
        for category in ("occlusion", "stack"):
            scene = generate_scene(category, scenario_type, 3)
            assert len(hidden_ids(scene)) == HIDDEN_COUNT[scenario_type]
        scene = generate_scene("composite", scenario_type, 3)
        expected = COMPOSITE_COVERS[scenario_type] + COMPOSITE_OCCLUDED[scenario_type]
        assert len(hidden_ids(scene)) == expected
        assert len(scene.cover_relations) == COMPOSITE_COVERS[scenario_type]

    def test_at_least_one_object_hidden_everywhere(self):
        for category in CATEGORIES:
            for scenario_type in range(10):
                scene = generate_scene(category, scenario_type, 11)
                assert hidden_ids(scene)

    def test_stack_depth_equals_cover_count(self):
        for scenario_type in (0, 4, 9):
            scene = generate_scene("stack", scenario_type, 5)
            depth = min_steps_to_see(scene, hidden_ids(scene), t_max=8)
            assert depth == len(scene.cover_relations)

    @pytest.mark.parametrize("scenario_type", DEPTH_CALIBRATED_TYPES)
    def test_calibrated_composite_depth(self, scenario_type):
        for seed in range(5):
            scene = generate_scene("composite", scenario_type, seed)
            depth = min_steps_to_see(scene, hidden_ids(scene), t_max=8)
            assert 4 <= depth <= 6


class TestSlots:
    def test_one_slot_per_hidden_object(self):
        for category in CATEGORIES:
            for scenario_type in (0, 5, 9):
                for seed in (1, 2):
                    scene = generate_scene(category, scenario_type, seed)
                    slots = hiding_slots(visible_set(scene))
                    assert len(slots) == len(hidden_ids(scene))
                    assert len(slots) <= 6

    def test_slot_kinds_match_category(self):
        occ = hiding_slots(visible_set(generate_scene("occlusion", 5, 2)))
        assert all(slot.kind == "occlusion_shadow" for slot in occ)
        stk = hiding_slots(visible_set(generate_scene("stack", 5, 2)))
        assert all(slot.kind == "covered" for slot in stk)


class TestDeterminismAndErrors:
    def test_identical_inputs_identical_scenes(self):
        assert generate_scene("occlusion", 3, 42) == generate_scene("occlusion", 3, 42)

    def test_distinct_seeds_differ(self):
        assert generate_scene("occlusion", 3, 1) != generate_scene("occlusion", 3, 2)

    def test_bad_category_rejected(self):
        with pytest.raises(ValueError):
            generate_scene("floating", 0, 0)

    def test_bad_type_rejected(self):
        with pytest.raises(ValueError):
            generate_scene("occlusion", 10, 0)

    def test_generation_error_names_inputs(self, monkeypatch):
        import avrsim.generate as gen
        monkeypatch.setattr(gen, "MAX_LAYOUT_ATTEMPTS", 0)
        with pytest.raises(SceneGenerationError) as excinfo:
            generate_scene("occlusion", 0, 123)
        assert "123" in str(excinfo.value)
        assert "occlusion" in str(excinfo.value)

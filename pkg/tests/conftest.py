from __future__ import annotations

import pytest

from avrsim.world import CameraState, ObjectSpec, SceneSpec


def make_scene(objects, covers=(), held=(), azimuth=270, elevation="low",
               category="occlusion", scenario_type=0, seed=0) -> SceneSpec:
    return SceneSpec(
        objects=tuple(objects),
        cover_relations=tuple(covers),
        held=tuple(held),
        camera=CameraState(azimuth=azimuth, elevation=elevation),
        category=category,
        scenario_type=scenario_type,
        seed=seed,
    )


def obj(object_id, x, y, size="small", shape="cube", color="red",
        material="rubber") -> ObjectSpec:
    return ObjectSpec(id=object_id, shape=shape, color=color, size=size,
                      material=material, x=x, y=y)


@pytest.fixture
def simple_occlusion_scene():
    # A large blocker in front of a small target, camera due south.
    blocker = obj(1, 50, 20, size="large", color="gray")
    target = obj(2, 50, 60, shape="sphere", color="blue")
    return make_scene([blocker, target])

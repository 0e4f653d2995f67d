"""avrsim: deterministic tabletop simulator and harness for active visual reasoning."""

from avrsim.world import (
    Action,
    ActionOutcome,
    CameraState,
    ObjectSpec,
    Observation,
    SceneSpec,
    apply_action,
    visible_set,
)

__all__ = [
    "Action",
    "ActionOutcome",
    "CameraState",
    "ObjectSpec",
    "Observation",
    "SceneSpec",
    "apply_action",
    "visible_set",
]

__version__ = "0.1.0"

"""Deterministic 2.5-D tabletop world: object model, visibility, and action kinematics.

The table is a 100 x 100 plane. A camera orbits the table center (50, 50) at a
fixed radius of 80, at one of eight azimuths (multiples of 45 degrees) and two
elevations. Objects are upright solids with a circular footprint; an object is
hidden either by a cover relation (it sits beneath another object) or by
geometric occlusion along the line of sight. All values are immutable and all
operations are pure functions, so scenes can be shared freely and replayed
byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from statistics import median

SHAPES = ("cube", "sphere", "cylinder")
COLORS = ("gray", "red", "blue", "green", "brown", "purple", "cyan", "yellow")
SIZES = ("small", "large")
MATERIALS = ("rubber", "metal")

TABLE_SIZE = 100.0
TABLE_CENTER = (50.0, 50.0)
ORBIT_RADIUS = 80.0

FOOTPRINT_RADIUS = {"small": 4.0, "large": 7.0}
HEIGHT = {"small": 6.0, "large": 10.0}

# Lateral clearance multiplier per elevation: a high camera sees over
# occluders that are not tightly aligned with the line of sight.
ELEVATION_CLEARANCE = {"low": 1.0, "high": 0.5}

MOVE_DELTA = 15.0
MOVE_SLIDE_STEP = 5.0

LATERAL_TAG_THRESHOLD = 10.0

# Exact unit vectors for the eight legal azimuths. Hard-coded literals (not
# cos/sin calls) so serialized geometry is bit-identical across platforms.
_SQ = 0.7071067811865476
AZIMUTH_UNIT = {
    0: (1.0, 0.0),
    45: (_SQ, _SQ),
    90: (0.0, 1.0),
    135: (-_SQ, _SQ),
    180: (-1.0, 0.0),
    225: (-_SQ, -_SQ),
    270: (0.0, -1.0),
    315: (_SQ, -_SQ),
}

ACTION_KINDS = ("Pick", "MoveObject", "MoveViewer", "RotateViewer")
MOVE_DIRECTIONS = {
    "left": (-1.0, 0.0),
    "right": (1.0, 0.0),
    "forward": (0.0, 1.0),
    "back": (0.0, -1.0),
}
VIEWER_DIRECTIONS = ("left", "right")
ROTATE_DIRECTIONS = ("up", "down")

SCENE_SCHEMA = "scene/1"


class WorldError(Exception):
    """Base class for world-model errors."""


class ValidationError(WorldError):
    """A value violates a structural invariant."""


class PreconditionError(WorldError):
    """An action was applied in a state where its precondition fails."""


def derive_seed(*parts: object) -> int:
    """Stable 64-bit seed derived from arbitrary labelled parts."""
    text = "::".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class ObjectSpec:
    id: int
    shape: str
    color: str
    size: str
    material: str
    x: float
    y: float

    @property
    def footprint_radius(self) -> float:
        return FOOTPRINT_RADIUS[self.size]

    @property
    def height(self) -> float:
        return HEIGHT[self.size]

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def validate(self) -> None:
        if self.shape not in SHAPES:
            raise ValidationError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise ValidationError(f"unknown color {self.color!r}")
        if self.size not in SIZES:
            raise ValidationError(f"unknown size {self.size!r}")
        if self.material not in MATERIALS:
            raise ValidationError(f"unknown material {self.material!r}")
        r = self.footprint_radius
        if not (r <= self.x <= TABLE_SIZE - r and r <= self.y <= TABLE_SIZE - r):
            raise ValidationError(
                f"object {self.id} at ({self.x}, {self.y}) is off the table"
            )


@dataclass(frozen=True)
class CameraState:
    azimuth: int
    elevation: str

    def validate(self) -> None:
        if self.azimuth not in AZIMUTH_UNIT:
            raise ValidationError(f"azimuth {self.azimuth} is not a multiple of 45 in [0, 315]")
        if self.elevation not in ELEVATION_CLEARANCE:
            raise ValidationError(f"unknown elevation {self.elevation!r}")

    @property
    def position(self) -> tuple[float, float]:
        ux, uy = AZIMUTH_UNIT[self.azimuth]
        return (TABLE_CENTER[0] + ORBIT_RADIUS * ux, TABLE_CENTER[1] + ORBIT_RADIUS * uy)

    @property
    def clearance_factor(self) -> float:
        return ELEVATION_CLEARANCE[self.elevation]


@dataclass(frozen=True)
class Action:
    kind: str
    target_id: int | None = None
    direction: str | None = None

    def validate(self) -> None:
        if self.kind not in ACTION_KINDS:
            raise ValidationError(f"unknown action kind {self.kind!r}")
        needs_target = self.kind in ("Pick", "MoveObject")
        if needs_target != (self.target_id is not None):
            raise ValidationError(f"{self.kind} target_id mismatch")
        if self.kind == "Pick":
            if self.direction is not None:
                raise ValidationError("Pick takes no direction")
        elif self.kind == "MoveObject":
            if self.direction not in MOVE_DIRECTIONS:
                raise ValidationError(f"bad MoveObject direction {self.direction!r}")
        elif self.kind == "MoveViewer":
            if self.direction not in VIEWER_DIRECTIONS:
                raise ValidationError(f"bad MoveViewer direction {self.direction!r}")
        elif self.kind == "RotateViewer":
            if self.direction not in ROTATE_DIRECTIONS:
                raise ValidationError(f"bad RotateViewer direction {self.direction!r}")

    def key(self) -> tuple:
        # RotateViewer is an elevation toggle either way, so its two direction
        # labels name the same action.
        direction = "" if self.kind == "RotateViewer" else (self.direction or "")
        return (self.kind, self.target_id if self.target_id is not None else -1, direction)


@dataclass(frozen=True)
class SceneSpec:
    objects: tuple[ObjectSpec, ...]
    cover_relations: tuple[tuple[int, int], ...]
    held: tuple[int, ...]
    camera: CameraState
    category: str
    scenario_type: int
    seed: int

    def object_by_id(self, object_id: int) -> ObjectSpec:
        for obj in self.objects:
            if obj.id == object_id:
                return obj
        raise ValidationError(f"unknown object id {object_id}")

    def covered_ids(self) -> set[int]:
        return {covered for _, covered in self.cover_relations}

    def on_table(self) -> tuple[ObjectSpec, ...]:
        held = set(self.held)
        return tuple(obj for obj in self.objects if obj.id not in held)

    def validate(self) -> None:
        self.camera.validate()
        ids = [obj.id for obj in self.objects]
        if len(ids) != len(set(ids)):
            raise ValidationError("duplicate object ids")
        id_set = set(ids)
        for obj in self.objects:
            obj.validate()
        if not set(self.held) <= id_set:
            raise ValidationError("held references unknown ids")
        coverers = [c for c, _ in self.cover_relations]
        covereds = [v for _, v in self.cover_relations]
        if len(covereds) != len(set(covereds)):
            raise ValidationError("an object is covered by more than one coverer")
        covered_set = set(covereds)
        held_set = set(self.held)
        for coverer, covered in self.cover_relations:
            if coverer not in id_set or covered not in id_set:
                raise ValidationError("cover relation references unknown ids")
            if coverer in covered_set:
                raise ValidationError("cover relations deeper than one level")
            if coverer in held_set or covered in held_set:
                raise ValidationError("cover relation references a held object")
            a = self.object_by_id(coverer)
            b = self.object_by_id(covered)
            if (a.x, a.y) != (b.x, b.y):
                raise ValidationError("covered object does not share its coverer's position")
        # Pairwise footprint separation among on-table, non-covered objects.
        free = [o for o in self.on_table() if o.id not in covered_set]
        for i, a in enumerate(free):
            for b in free[i + 1:]:
                min_dist = a.footprint_radius + b.footprint_radius
                if _dist(a.position, b.position) < min_dist - 1e-9:
                    raise ValidationError(f"objects {a.id} and {b.id} overlap")


@dataclass(frozen=True)
class Observation:
    step_index: int
    camera: CameraState
    visible: tuple[tuple[ObjectSpec, tuple[str, str]], ...]

    def visible_ids(self) -> set[int]:
        return {obj.id for obj, _ in self.visible}

    def visible_objects(self) -> tuple[ObjectSpec, ...]:
        return tuple(obj for obj, _ in self.visible)


@dataclass(frozen=True)
class ActionOutcome:
    displaced_ids: tuple[int, ...]
    revealed_ids: tuple[int, ...]
    blocked: bool = False


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2)


def _point_segment_distance(p: tuple[float, float], a: tuple[float, float],
                            b: tuple[float, float]) -> float:
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    seg_sq = dx * dx + dy * dy
    if seg_sq == 0.0:
        return _dist(p, a)
    t = ((px - ax) * dx + (py - ay) * dy) / seg_sq
    if t <= 0.0:
        return _dist(p, a)
    if t >= 1.0:
        return _dist(p, b)
    return _dist(p, (ax + t * dx, ay + t * dy))


def blocks(blocker: ObjectSpec, target: ObjectSpec, camera: CameraState) -> bool:
    """True if `blocker` occludes `target` from `camera`.

    The blocker must sit strictly nearer the camera, be at least as tall as the
    target, and lie within its own footprint radius (scaled by the elevation
    clearance factor) of the sight line to the target's center.
    """
    cam = camera.position
    if _dist(cam, blocker.position) >= _dist(cam, target.position):
        return False
    if blocker.height < target.height:
        return False
    clearance = blocker.footprint_radius * camera.clearance_factor
    return _point_segment_distance(blocker.position, cam, target.position) < clearance


def is_visible(scene: SceneSpec, target: ObjectSpec) -> bool:
    if target.id in set(scene.held) or target.id in scene.covered_ids():
        return False
    covered = scene.covered_ids()
    for other in scene.on_table():
        if other.id == target.id or other.id in covered:
            continue
        if blocks(other, target, scene.camera):
            return False
    return True


def location_tags(camera: CameraState, obj: ObjectSpec,
                  range_threshold: float) -> tuple[str, str]:
    cam = camera.position
    fx, fy = TABLE_CENTER[0] - cam[0], TABLE_CENTER[1] - cam[1]
    norm = math.sqrt(fx * fx + fy * fy)
    fx, fy = fx / norm, fy / norm
    # Camera-frame left vector: forward rotated 90 degrees counterclockwise.
    lx, ly = -fy, fx
    lateral = (obj.x - cam[0]) * lx + (obj.y - cam[1]) * ly
    if lateral > LATERAL_TAG_THRESHOLD:
        side = "left"
    elif lateral < -LATERAL_TAG_THRESHOLD:
        side = "right"
    else:
        side = "center"
    depth = "near" if _dist(cam, obj.position) <= range_threshold else "far"
    return (side, depth)


def visible_set(scene: SceneSpec, step_index: int = 0) -> Observation:
    """Camera-dependent visible subset of the scene, with coarse location tags."""
    cam = scene.camera.position
    vis = sorted((o for o in scene.on_table() if is_visible(scene, o)),
                 key=lambda o: o.id)
    if vis:
        range_threshold = median(_dist(cam, o.position) for o in vis)
    else:
        range_threshold = 0.0
    tagged = tuple((obj, location_tags(scene.camera, obj, range_threshold)) for obj in vis)
    return Observation(step_index=step_index, camera=scene.camera, visible=tagged)


def _free_position(scene: SceneSpec, moving: ObjectSpec,
                   pos: tuple[float, float]) -> bool:
    covered = scene.covered_ids()
    for other in scene.on_table():
        if other.id == moving.id or other.id in covered:
            continue
        if _dist(pos, other.position) < moving.footprint_radius + other.footprint_radius - 1e-9:
            return False
    return True


def apply_action(scene: SceneSpec, action: Action) -> tuple[SceneSpec, ActionOutcome]:
    """Apply an action, returning a new scene value and an outcome summary.

    Pick and MoveObject require a currently visible target (PreconditionError
    otherwise). A MoveObject that finds no free slot up to the table edge is
    reported as blocked with the scene unchanged. Inputs are never mutated.
    """
    action.validate()
    before_visible = visible_set(scene).visible_ids()

    if action.kind == "RotateViewer":
        new_elev = "high" if scene.camera.elevation == "low" else "low"
        new_scene = replace(scene, camera=replace(scene.camera, elevation=new_elev))
    elif action.kind == "MoveViewer":
        delta = 45 if action.direction == "right" else -45
        new_az = (scene.camera.azimuth + delta) % 360
        new_scene = replace(scene, camera=replace(scene.camera, azimuth=new_az))
    else:
        target = scene.object_by_id(action.target_id)
        if target.id not in before_visible:
            raise PreconditionError(
                f"{action.kind} target {target.id} is not visible"
            )
        if action.kind == "Pick":
            covers = tuple(rel for rel in scene.cover_relations if rel[0] != target.id)
            new_scene = replace(scene, cover_relations=covers,
                                held=scene.held + (target.id,))
        else:  # MoveObject
            # Breaking the target's own cover relations first lets its former
            # cargo act as an obstacle at the original position.
            covers = tuple(rel for rel in scene.cover_relations if rel[0] != target.id)
            trial = replace(scene, cover_relations=covers)
            dx, dy = MOVE_DIRECTIONS[action.direction]
            r = target.footprint_radius
            lo, hi = r, TABLE_SIZE - r
            step = MOVE_DELTA
            placed = None
            while True:
                nx = min(max(target.x + dx * step, lo), hi)
                ny = min(max(target.y + dy * step, lo), hi)
                at_edge = (nx, ny) != (target.x + dx * step, target.y + dy * step)
                if _free_position(trial, target, (nx, ny)):
                    placed = (nx, ny)
                    break
                if at_edge:
                    break
                step += MOVE_SLIDE_STEP
            if placed is None:
                return scene, ActionOutcome(displaced_ids=(), revealed_ids=(), blocked=True)
            moved = replace(target, x=placed[0], y=placed[1])
            objects = tuple(moved if o.id == target.id else o for o in scene.objects)
            new_scene = replace(trial, objects=objects)

    after_visible = visible_set(new_scene).visible_ids()
    revealed = tuple(sorted(after_visible - before_visible))
    displaced = (action.target_id,) if action.target_id is not None else ()
    return new_scene, ActionOutcome(displaced_ids=displaced, revealed_ids=revealed)


def valid_actions(scene: SceneSpec) -> list[Action]:
    """Every action whose precondition holds in the given scene, in canonical order."""
    obs = visible_set(scene)
    actions: list[Action] = []
    for obj in obs.visible_objects():
        actions.append(Action("Pick", target_id=obj.id))
    for obj in obs.visible_objects():
        for direction in ("left", "right", "forward", "back"):
            actions.append(Action("MoveObject", target_id=obj.id, direction=direction))
    actions.append(Action("MoveViewer", direction="left"))
    actions.append(Action("MoveViewer", direction="right"))
    up = scene.camera.elevation == "low"
    actions.append(Action("RotateViewer", direction="up" if up else "down"))
    return actions


# --- canonical JSON serialization -------------------------------------------

def object_to_json(obj: ObjectSpec) -> dict:
    return {"id": obj.id, "shape": obj.shape, "color": obj.color,
            "size": obj.size, "material": obj.material, "x": obj.x, "y": obj.y}


def object_from_json(doc: dict) -> ObjectSpec:
    return ObjectSpec(id=doc["id"], shape=doc["shape"], color=doc["color"],
                      size=doc["size"], material=doc["material"],
                      x=doc["x"], y=doc["y"])


def scene_to_json(scene: SceneSpec) -> dict:
    return {
        "schema": SCENE_SCHEMA,
        "seed": scene.seed,
        "category": scene.category,
        "scenario_type": scene.scenario_type,
        "camera": {"azimuth": scene.camera.azimuth, "elevation": scene.camera.elevation},
        "objects": [object_to_json(o) for o in sorted(scene.objects, key=lambda o: o.id)],
        "cover_relations": [list(rel) for rel in sorted(scene.cover_relations)],
        "held": list(scene.held),
    }


def scene_from_json(doc: dict) -> SceneSpec:
    if doc.get("schema") != SCENE_SCHEMA:
        raise ValidationError(f"unsupported scene schema {doc.get('schema')!r}")
    return SceneSpec(
        objects=tuple(object_from_json(d) for d in doc["objects"]),
        cover_relations=tuple((rel[0], rel[1]) for rel in doc["cover_relations"]),
        held=tuple(doc["held"]),
        camera=CameraState(azimuth=doc["camera"]["azimuth"],
                           elevation=doc["camera"]["elevation"]),
        category=doc["category"],
        scenario_type=doc["scenario_type"],
        seed=doc["seed"],
    )


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def action_to_json(action: Action) -> dict:
    doc: dict = {"kind": action.kind}
    if action.target_id is not None:
        doc["target_id"] = action.target_id
    if action.direction is not None:
        doc["direction"] = action.direction
    return doc


def action_from_json(doc: dict) -> Action:
    return Action(kind=doc["kind"], target_id=doc.get("target_id"),
                  direction=doc.get("direction"))


def observation_to_json(obs: Observation) -> dict:
    return {
        "step_index": obs.step_index,
        "camera": {"azimuth": obs.camera.azimuth, "elevation": obs.camera.elevation},
        "visible": [
            {"object": object_to_json(o), "location": list(tags)}
            for o, tags in obs.visible
        ],
    }


def observation_from_json(doc: dict) -> Observation:
    return Observation(
        step_index=doc["step_index"],
        camera=CameraState(azimuth=doc["camera"]["azimuth"],
                           elevation=doc["camera"]["elevation"]),
        visible=tuple(
            (object_from_json(entry["object"]), (entry["location"][0], entry["location"][1]))
            for entry in doc["visible"]
        ),
    )

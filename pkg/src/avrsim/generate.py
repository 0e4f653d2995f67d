"""Procedural scene generation for the three scenario categories.

Every scene starts from the same viewpoint (azimuth 270, low) and hides between
one and six objects. The scenario-type table (README, "Scenario types") fixes
the hidden-object count and arrangement for each of the ten types per category:

* occlusion types hide 1,1,2,2,2,3,3,3,4,4 objects behind small occluders,
  aligned with the sight line for even types and laterally staggered for odd;
* stack types place the same counts beneath large coverers, one row for even
  types and two alternating rows for odd;
* composite types combine 1..3 covers with 1..3 occlusions; types 7-9 are
  calibrated so that reaching full knowledge needs four to six actions.

Hidden objects share a shape and a material and use one of two scene colors,
while every visible object avoids all four of those attribute values. Hidden
objects sit at a fixed anchor behind their occluder (occluder center plus
footprint radius + 6 along the sight line), which keeps reveal geometry exact.
Generation is a pure function of (category, scenario_type, seed); a bounded
number of layout attempts guards against pathological seeds.
"""

from __future__ import annotations

import math
import random

from avrsim.world import (
    COLORS,
    MATERIALS,
    SHAPES,
    Action,
    CameraState,
    ObjectSpec,
    SceneSpec,
    blocks,
    derive_seed,
    visible_set,
)

CATEGORIES = ("occlusion", "stack", "composite")

HIDDEN_COUNT = (1, 1, 2, 2, 2, 3, 3, 3, 4, 4)
COMPOSITE_COVERS = (1, 1, 1, 2, 2, 2, 2, 3, 3, 3)
COMPOSITE_OCCLUDED = (1, 1, 2, 1, 2, 2, 3, 2, 2, 3)
# Composite types whose minimum solution depth is calibrated to land in [4, 6].
DEPTH_CALIBRATED_TYPES = (7, 8, 9)

ANCHOR_GAP = 6.0  # clearance between occluder and hidden footprints
STAGGER_OFFSET = 3.0

INITIAL_CAMERA = CameraState(azimuth=270, elevation="low")

MAX_LAYOUT_ATTEMPTS = 64

DECOR_SPOTS = ((8.0, 6.0), (92.0, 6.0), (6.0, 18.0), (94.0, 18.0))


class SceneGenerationError(Exception):
    """Layout sampling failed within the retry budget."""

    def __init__(self, category: str, scenario_type: int, seed: int, reason: str):
        super().__init__(
            f"could not generate {category} type {scenario_type} scene for seed "
            f"{seed}: {reason}"
        )
        self.category = category
        self.scenario_type = scenario_type
        self.seed = seed


class _LayoutFailure(Exception):
    pass


def shadow_anchor(occluder: ObjectSpec, camera: CameraState) -> tuple[float, float]:
    """Canonical hiding spot directly behind an object along the sight line."""
    cx, cy = camera.position
    dx, dy = occluder.x - cx, occluder.y - cy
    norm = math.sqrt(dx * dx + dy * dy)
    gap = occluder.footprint_radius + ANCHOR_GAP
    return (occluder.x + gap * dx / norm, occluder.y + gap * dy / norm)


def lateral_unit(occluder: ObjectSpec, camera: CameraState) -> tuple[float, float]:
    cx, cy = camera.position
    dx, dy = occluder.x - cx, occluder.y - cy
    norm = math.sqrt(dx * dx + dy * dy)
    return (-dy / norm, dx / norm)


def _probe(position: tuple[float, float], probe_id: int = -1) -> ObjectSpec:
    return ObjectSpec(id=probe_id, shape="cube", color="gray", size="small",
                      material="rubber", x=position[0], y=position[1])


def _dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class _Layout:
    """Accumulates placed objects while enforcing separation and sight lines."""

    def __init__(self, camera: CameraState):
        self.camera = camera
        self.objects: list[ObjectSpec] = []
        self.visible_ids: set[int] = set()
        self.anchors: list[tuple[float, float]] = []
        self.anchor_regions: list[tuple[int, list[ObjectSpec]]] = []

    def _clear_of(self, pos: tuple[float, float], radius: float,
                  margin: float = 1.0) -> bool:
        for obj in self.objects:
            if _dist(pos, obj.position) < radius + obj.footprint_radius + margin:
                return False
        for anchor in self.anchors:
            # Region radius covers the lateral stagger around the anchor.
            if _dist(pos, anchor) < radius + 4.0 + STAGGER_OFFSET + margin:
                return False
        return True

    def _sight_lines_ok(self, candidate: ObjectSpec) -> bool:
        for obj in self.objects:
            if obj.id in self.visible_ids and blocks(candidate, obj, self.camera):
                return False
            if blocks(obj, candidate, self.camera):
                return False
        # Reserved hiding regions must stay blocked only by their own occluder,
        # and probes standing in them must not shadow the candidate.
        for occluder_id, probes in self.anchor_regions:
            if occluder_id == candidate.id:
                continue
            for probe in probes:
                if blocks(candidate, probe, self.camera):
                    return False
                if blocks(probe, candidate, self.camera):
                    return False
        return True

    def add_visible(self, obj: ObjectSpec) -> bool:
        if not self._clear_of(obj.position, obj.footprint_radius):
            return False
        if not self._sight_lines_ok(obj):
            return False
        self.objects.append(obj)
        self.visible_ids.add(obj.id)
        return True

    def reserve_anchor(self, occluder: ObjectSpec,
                       offsets: tuple[float, ...]) -> tuple[float, float] | None:
        """Claim the hiding spot behind `occluder` if its whole region is valid."""
        anchor = shadow_anchor(occluder, self.camera)
        lat = lateral_unit(occluder, self.camera)
        region = [(anchor[0] + o * lat[0], anchor[1] + o * lat[1]) for o in offsets]
        probes = []
        for pos in region:
            if not (4.0 <= pos[0] <= 96.0 and 4.0 <= pos[1] <= 96.0):
                return None
            if not self._clear_of(pos, 4.0):
                return None
            probe = _probe(pos)
            # The occluder alone must hide the whole region, and the probe must
            # not disturb any other sight line.
            if not blocks(occluder, probe, self.camera):
                return None
            for obj in self.objects:
                if obj.id != occluder.id and blocks(obj, probe, self.camera):
                    return None
                if obj.id in self.visible_ids and blocks(probe, obj, self.camera):
                    return None
            for _, other_probes in self.anchor_regions:
                for other in other_probes:
                    if blocks(other, probe, self.camera) or blocks(probe, other, self.camera):
                        return None
            probes.append(probe)
        self.anchors.append(anchor)
        self.anchor_regions.append((occluder.id, probes))
        return anchor


def _spread_positions(rng: random.Random, count: int, lo: int, hi: int,
                      spacing: int) -> list[int]:
    """`count` integer x positions in [lo, hi], pairwise at least `spacing` apart."""
    slack = (hi - lo) - spacing * (count - 1)
    if slack < 0:
        raise _LayoutFailure(f"band [{lo}, {hi}] too narrow for {count} objects")
    budget = slack
    lead = rng.randint(0, budget)
    budget -= lead
    xs = [lo + lead]
    for _ in range(count - 1):
        extra = rng.randint(0, budget)
        budget -= extra
        xs.append(xs[-1] + spacing + extra)
    return xs


def _place_row(layout: _Layout, rng: random.Random, count: int, *, size: str,
               x_range: tuple[int, int], y_choices: tuple[int, ...],
               make_obj, single_row: bool, spacing: int, accept=None) -> list[ObjectSpec]:
    xs = _spread_positions(rng, count, x_range[0], x_range[1], spacing)
    row_y = rng.choice(y_choices)
    phase = rng.randrange(len(y_choices))
    placed: list[ObjectSpec] = []
    for index, x in enumerate(xs):
        y = row_y if single_row else y_choices[(index + phase) % len(y_choices)]
        obj = make_obj(float(x), float(y))
        if not layout.add_visible(obj):
            raise _LayoutFailure(f"no room for {size} object {index}")
        if accept is not None and not accept(obj):
            layout.objects.pop()
            layout.visible_ids.discard(obj.id)
            raise _LayoutFailure(f"hiding spot unusable behind {size} object {index}")
        placed.append(obj)
    return placed


def _attribute_plan(rng: random.Random) -> dict:
    hidden_shape = rng.choice(SHAPES)
    hidden_material = rng.choice(MATERIALS)
    color_a, color_b = rng.sample(COLORS, 2)
    other_shapes = tuple(s for s in SHAPES if s != hidden_shape)
    other_material = next(m for m in MATERIALS if m != hidden_material)
    other_colors = tuple(c for c in COLORS if c not in (color_a, color_b))
    return {
        "hidden_shape": hidden_shape,
        "hidden_material": hidden_material,
        "hidden_colors": (color_a, color_b),
        "visible_shapes": other_shapes,
        "visible_material": other_material,
        "visible_colors": other_colors,
    }


def _hidden_color(plan: dict, index: int, total: int) -> str:
    color_a, color_b = plan["hidden_colors"]
    split = (total + 1) // 2
    return color_a if index < split else color_b


def _visible_obj(plan: dict, rng: random.Random, obj_id: int, size: str,
                 x: float, y: float) -> ObjectSpec:
    return ObjectSpec(
        id=obj_id,
        shape=rng.choice(plan["visible_shapes"]),
        color=rng.choice(plan["visible_colors"]),
        size=size,
        material=plan["visible_material"],
        x=x,
        y=y,
    )


def _layout_scene(category: str, scenario_type: int, rng: random.Random) -> tuple[
        list[ObjectSpec], list[tuple[int, int]], dict]:
    plan = _attribute_plan(rng)
    layout = _Layout(INITIAL_CAMERA)
    objects: list[ObjectSpec] = []
    covers: list[tuple[int, int]] = []
    hidden_ids: list[int] = []
    next_id = 0

    def take_id() -> int:
        nonlocal next_id
        next_id += 1
        return next_id - 1

    staggered = scenario_type % 2 == 1

    def add_occluded(count: int, x_range: tuple[int, int],
                     y_choices: tuple[int, ...]) -> None:
        nonlocal objects
        offsets = (0.0, STAGGER_OFFSET, -STAGGER_OFFSET)
        anchors: dict[int, tuple[float, float]] = {}

        def claim(obj: ObjectSpec) -> bool:
            anchor = layout.reserve_anchor(obj, offsets)
            if anchor is not None:
                anchors[obj.id] = anchor
            return anchor is not None

        occluders = _place_row(
            layout, rng, count, size="small", x_range=x_range, y_choices=y_choices,
            make_obj=lambda x, y: _visible_obj(plan, rng, take_id(), "small", x, y),
            single_row=not staggered, spacing=14, accept=claim)
        objects.extend(occluders)
        for index, occ in enumerate(occluders):
            anchor = anchors[occ.id]
            if staggered:
                lat = lateral_unit(occ, layout.camera)
                sign = 1.0 if index % 2 == 0 else -1.0
                pos = (anchor[0] + sign * STAGGER_OFFSET * lat[0],
                       anchor[1] + sign * STAGGER_OFFSET * lat[1])
            else:
                pos = anchor
            hid = ObjectSpec(
                id=take_id(), shape=plan["hidden_shape"],
                color=_hidden_color(plan, len(hidden_ids), total_hidden),
                size="small", material=plan["hidden_material"], x=pos[0], y=pos[1])
            objects.append(hid)
            hidden_ids.append(hid.id)

    def add_covered(count: int, x_range: tuple[int, int],
                    y_choices: tuple[int, ...]) -> None:
        nonlocal objects
        coverers = _place_row(
            layout, rng, count, size="large", x_range=x_range, y_choices=y_choices,
            make_obj=lambda x, y: _visible_obj(plan, rng, take_id(), "large", x, y),
            single_row=not staggered, spacing=16)
        objects.extend(coverers)
        for coverer in coverers:
            content = ObjectSpec(
                id=take_id(), shape=plan["hidden_shape"],
                color=_hidden_color(plan, len(hidden_ids), total_hidden),
                size="small", material=plan["hidden_material"],
                x=coverer.x, y=coverer.y)
            objects.append(content)
            covers.append((coverer.id, content.id))
            hidden_ids.append(content.id)

    if category == "occlusion":
        total_hidden = HIDDEN_COUNT[scenario_type]
        add_occluded(total_hidden, (18, 82), (38, 42, 46, 50))
    elif category == "stack":
        total_hidden = HIDDEN_COUNT[scenario_type]
        add_covered(total_hidden, (16, 84), (44, 48, 52, 56))
    else:
        n_cov = COMPOSITE_COVERS[scenario_type]
        n_occ = COMPOSITE_OCCLUDED[scenario_type]
        total_hidden = n_cov + n_occ
        add_covered(n_cov, (8, 40), (50, 54, 58))
        add_occluded(n_occ, (56, 86), (34, 38, 42))

    # Front-corner distractor objects: their own hiding spots fall off the
    # table, so they never contribute hypothesis slots.
    n_decor = rng.choice((2, 3))
    spots = list(DECOR_SPOTS)
    rng.shuffle(spots)
    for pos in spots[:n_decor]:
        decor = _visible_obj(plan, rng, take_id(), "small", pos[0], pos[1])
        if not layout.add_visible(decor):
            raise _LayoutFailure("decor spot blocked")
        objects.append(decor)

    meta = {"hidden_ids": hidden_ids, "plan": plan}
    return objects, covers, meta


def _check_scene(scene: SceneSpec, category: str, hidden_ids: list[int]) -> None:
    from avrsim.belief import min_steps_to_see

    scene.validate()
    obs = visible_set(scene)
    all_ids = {o.id for o in scene.objects}
    hidden_now = all_ids - obs.visible_ids()
    if hidden_now != set(hidden_ids):
        raise _LayoutFailure(f"hidden set {hidden_now} != intended {set(hidden_ids)}")
    covered = scene.covered_ids()
    occluded = hidden_now - covered
    if category == "occlusion" and (covered or not occluded):
        raise _LayoutFailure("occlusion scene must hide by sight lines only")
    if category == "stack" and (occluded or not covered):
        raise _LayoutFailure("stack scene must hide by covers only")
    if category == "composite" and (not covered or not occluded):
        raise _LayoutFailure("composite scene needs both hiding kinds")
    # Hiding must not depend on which other hidden objects are present, so
    # reveal prediction from visible geometry alone stays exact.
    visible_objs = tuple(o for o in scene.objects if o.id in obs.visible_ids())
    for hid in occluded:
        obj = scene.object_by_id(hid)
        reduced = SceneSpec(objects=visible_objs + (obj,), cover_relations=(),
                            held=(), camera=scene.camera, category=scene.category,
                            scenario_type=scene.scenario_type, seed=scene.seed)
        if hid in visible_set(reduced).visible_ids():
            raise _LayoutFailure(f"object {hid} hidden only via other hidden objects")
    reduced = SceneSpec(objects=visible_objs, cover_relations=(), held=(),
                        camera=scene.camera, category=scene.category,
                        scenario_type=scene.scenario_type, seed=scene.seed)
    if visible_set(reduced).visible_ids() != obs.visible_ids():
        raise _LayoutFailure("hidden objects disturb visible sight lines")
    if category == "composite" and scene.scenario_type in DEPTH_CALIBRATED_TYPES:
        depth = min_steps_to_see(scene, hidden_ids, t_max=8)
        if depth is None or not 4 <= depth <= 6:
            raise _LayoutFailure(f"calibrated depth {depth} outside [4, 6]")


def generate_scene(category: str, scenario_type: int, seed: int) -> SceneSpec:
    """Deterministically build a scene for (category, scenario_type, seed)."""
    if category not in CATEGORIES:
        raise ValueError(f"unknown category {category!r}")
    if not 0 <= scenario_type <= 9:
        raise ValueError(f"scenario_type must be in [0, 9], got {scenario_type}")
    last_reason = "no attempt"
    for attempt in range(MAX_LAYOUT_ATTEMPTS):
        rng = random.Random(derive_seed("scene", category, scenario_type, seed, attempt))
        try:
            objects, covers, meta = _layout_scene(category, scenario_type, rng)
            scene = SceneSpec(
                objects=tuple(objects),
                cover_relations=tuple(sorted(covers)),
                held=(),
                camera=INITIAL_CAMERA,
                category=category,
                scenario_type=scenario_type,
                seed=seed,
            )
            _check_scene(scene, category, meta["hidden_ids"])
            return scene
        except _LayoutFailure as exc:
            last_reason = str(exc)
    raise SceneGenerationError(category, scenario_type, seed, last_reason)


def hidden_ids(scene: SceneSpec) -> set[int]:
    obs = visible_set(scene)
    return {o.id for o in scene.objects} - obs.visible_ids() - set(scene.held)

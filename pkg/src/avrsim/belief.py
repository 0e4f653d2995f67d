"""Hypothesis slots over hidden content, exact answer posteriors, and
expected information gain, plus a breadth-first minimum-depth oracle.

Hidden content is tracked per *slot*: one slot beneath every visible large
object (something could sit under it) and one in the shadow region behind
every visible small object (something could hide behind it, at the canonical
anchor up to a +/-3 lateral stagger). Slot contents are quotiented to
{empty, relevant-to-class-i, irrelevant}: the answer distribution depends on
hidden attributes only through class membership (README, "Hypothesis
quotient"), with one exception: a hidden Query referent's queried attribute is
modelled as uniform over the answer domain until the object is actually seen.

Slots carry independent uniform priors. A Query question additionally promises
a unique referent, which is conditioned into the joint support (exactly one
relevant occupant across slots when no visible object matches, none
otherwise). Everything here reads only visible geometry, never hidden ground
truth; reveal prediction is conservative, treating every unresolved slot as
potentially occupied.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

from avrsim.questions import PublicQuestion, Question, is_relevant, matches
from avrsim.world import (
    Action,
    CameraState,
    ObjectSpec,
    Observation,
    SceneSpec,
    apply_action,
    blocks,
    visible_set,
)

SLOT_CAP = 6
STATE_EMPTY = "empty"
STATE_IRRELEVANT = "irrelevant"

ANCHOR_GAP = 6.0
STAGGER_OFFSET = 3.0
SLOT_MATCH_RADIUS = 6.0

PHANTOM_ID_BASE = 10_000


class BeliefError(Exception):
    pass


class CapacityError(BeliefError):
    """Joint hypothesis support would exceed the exact-enumeration cap."""


class ConsistencyError(BeliefError):
    """An observation has zero probability under the current support."""


def relevant_state(class_index: int) -> str:
    return f"relevant:{class_index}"


@dataclass(frozen=True)
class HiddenSlot:
    slot_id: int
    kind: str          # "covered" | "occlusion_shadow"
    source_id: int     # coverer or occluder object id
    anchor: tuple[float, float]
    region: tuple[tuple[float, float], ...]
    azimuth: int | None = None  # camera azimuth the shadow was derived from


@dataclass(frozen=True)
class BeliefState:
    slots: tuple[HiddenSlot, ...]
    state_space: tuple[str, ...]
    weights: tuple[tuple[float, ...], ...]
    conditioned_history: tuple[tuple[int, str], ...] = ()

    def slot_by_id(self, slot_id: int) -> HiddenSlot:
        for slot in self.slots:
            if slot.slot_id == slot_id:
                return slot
        raise BeliefError(f"unknown slot {slot_id}")

    def resolved_state(self, slot_index: int) -> str | None:
        row = self.weights[slot_index]
        live = [s for s, w in zip(self.state_space, row) if w > 0.0]
        return live[0] if len(live) == 1 else None

    def unresolved_ids(self) -> tuple[int, ...]:
        return tuple(slot.slot_id for i, slot in enumerate(self.slots)
                     if self.resolved_state(i) is None)


def shadow_anchor(obj: ObjectSpec, camera: CameraState) -> tuple[float, float]:
    cx, cy = camera.position
    dx, dy = obj.x - cx, obj.y - cy
    norm = math.sqrt(dx * dx + dy * dy)
    gap = obj.footprint_radius + ANCHOR_GAP
    return (obj.x + gap * dx / norm, obj.y + gap * dy / norm)


def shadow_region(obj: ObjectSpec, camera: CameraState) -> tuple[tuple[float, float], ...]:
    anchor = shadow_anchor(obj, camera)
    cx, cy = camera.position
    dx, dy = obj.x - cx, obj.y - cy
    norm = math.sqrt(dx * dx + dy * dy)
    lat = (-dy / norm, dx / norm)
    return (
        anchor,
        (anchor[0] + STAGGER_OFFSET * lat[0], anchor[1] + STAGGER_OFFSET * lat[1]),
        (anchor[0] - STAGGER_OFFSET * lat[0], anchor[1] - STAGGER_OFFSET * lat[1]),
    )


def _probe_at(pos: tuple[float, float], probe_id: int = -1) -> ObjectSpec:
    return ObjectSpec(id=probe_id, shape="cube", color="gray", size="small",
                      material="rubber", x=pos[0], y=pos[1])


def _point_hidden(point: tuple[float, float], visible_objects, camera: CameraState) -> bool:
    probe = _probe_at(point)
    return any(blocks(obj, probe, camera) for obj in visible_objects)


def hiding_slots(observation: Observation) -> tuple[HiddenSlot, ...]:
    """Geometric hypothesis slots derivable from one observation.

    Every visible large object could conceal a small one beneath it; every
    visible small object could conceal one in its shadow region, provided the
    whole region lies on the table, is unoccupied, and is actually hidden.
    """
    camera = observation.camera
    visible = observation.visible_objects()
    slots: list[HiddenSlot] = []
    next_id = 0
    for obj in visible:
        if obj.size == "large":
            slots.append(HiddenSlot(
                slot_id=next_id, kind="covered", source_id=obj.id,
                anchor=obj.position, region=(obj.position,)))
            next_id += 1
    for obj in visible:
        if obj.size != "small":
            continue
        region = shadow_region(obj, camera)
        usable = True
        for point in region:
            if not (4.0 <= point[0] <= 96.0 and 4.0 <= point[1] <= 96.0):
                usable = False
                break
            if any(math.dist(point, o.position) < o.footprint_radius + 4.0
                   for o in visible):
                usable = False
                break
            if not _point_hidden(point, visible, camera):
                usable = False
                break
        if usable:
            slots.append(HiddenSlot(
                slot_id=next_id, kind="occlusion_shadow", source_id=obj.id,
                anchor=region[0], region=region, azimuth=camera.azimuth))
            next_id += 1
    return tuple(slots)


def init_belief(observation: Observation, question: Question | PublicQuestion) -> BeliefState:
    """Uniform prior over quotient states for every hiding slot in view."""
    slots = hiding_slots(observation)
    if len(slots) > SLOT_CAP:
        raise CapacityError(f"{len(slots)} slots exceed the cap of {SLOT_CAP}")
    n_classes = len(question.restriction_classes)
    state_space = (STATE_EMPTY,) + tuple(
        relevant_state(i) for i in range(n_classes)) + (STATE_IRRELEVANT,)
    uniform = tuple(1.0 / len(state_space) for _ in state_space)
    return BeliefState(slots=slots, state_space=state_space,
                       weights=tuple(uniform for _ in slots))


# --- exact posterior and information gain ------------------------------------

def _known_class_counts(known_objects, question) -> list[int]:
    return [sum(1 for o in known_objects if matches(o, rc))
            for rc in question.restriction_classes]


def _query_known_referent(known_objects, question) -> ObjectSpec | None:
    found = [o for o in known_objects if matches(o, question.restriction_classes[0])]
    return found[0] if len(found) == 1 else None


def _hypothesis_answer(question, known_counts, known_referent, states) -> object | None:
    """Answer under one joint hypothesis; None means 'hidden Query referent'."""
    counts = list(known_counts)
    for state in states:
        if state.startswith("relevant:"):
            counts[int(state.split(":")[1])] += 1
    qt = question.qtype
    if qt == "Query":
        if known_referent is not None:
            return getattr(known_referent, question.queried_attribute)
        return None
    if qt == "Exist":
        return "yes" if counts[0] > 0 else "no"
    if qt == "Counting":
        return counts[0]
    if qt == "Compare":
        if counts[0] > counts[1]:
            return "more"
        if counts[0] < counts[1]:
            return "fewer"
        return "equal"
    if qt == "MathCounting":
        return counts[0] + counts[1] if question.op == "sum" else abs(counts[0] - counts[1])
    if qt == "MathCompare":
        return "yes" if counts[0] + counts[1] > question.constant else "no"
    raise BeliefError(f"unknown question type {qt!r}")


def _enumerate_branches(belief: BeliefState, known_objects, question):
    """Joint hypothesis branches over the unresolved slots.

    Returns (branches, unresolved_slot_ids) where each branch is
    (weight, states, answer, referent_position); states align with
    unresolved_slot_ids. Resolved slots contribute nothing here: their
    contents, once revealed, are part of the known objects. For a Query with
    a hidden referent, each hypothesis expands into one branch per
    answer-domain value.
    """
    unresolved_ids: list[int] = []
    supports: list[list[tuple[str, float]]] = []
    size = 1
    for index, slot in enumerate(belief.slots):
        if belief.resolved_state(index) is not None:
            continue
        unresolved_ids.append(slot.slot_id)
        row = belief.weights[index]
        live = [(s, w) for s, w in zip(belief.state_space, row) if w > 0.0]
        supports.append(live)
        size *= max(len(live), 1)
    n = len(unresolved_ids)
    if size > (len(belief.state_space)) ** SLOT_CAP:
        raise CapacityError("joint support too large for exact enumeration")

    is_query = question.qtype == "Query"
    known_referent = _query_known_referent(known_objects, question) if is_query else None
    required_rel = None
    if is_query:
        required_rel = 0 if known_referent is not None else 1
    known_counts = _known_class_counts(known_objects, question)
    rel0 = relevant_state(0)

    domain = set(question.answer_domain)
    branches: list[tuple[float, tuple[str, ...], object, int | None]] = []
    total = 0.0

    def rec(index: int, weight: float, states: list[str]) -> None:
        nonlocal total
        if index == n:
            tup = tuple(states)
            if required_rel is not None and tup.count(rel0) != required_rel:
                return
            answer = _hypothesis_answer(question, known_counts, known_referent, tup)
            if answer is None:
                ref_slot = tup.index(rel0)
                share = weight / len(question.answer_domain)
                for value in question.answer_domain:
                    branches.append((share, tup, value, ref_slot))
            else:
                # The offered answer domain always contains the truth, so an
                # out-of-domain hypothesis is public counter-evidence.
                if answer not in domain:
                    return
                branches.append((weight, tup, answer, None))
            total += weight
            return
        for state, w in supports[index]:
            states.append(state)
            rec(index + 1, weight * w, states)
            states.pop()

    rec(0, 1.0, [])
    if total <= 0.0:
        raise ConsistencyError("empty joint support")
    normalized = [(w / total, states, answer, ref)
                  for w, states, answer, ref in branches]
    return normalized, unresolved_ids


def answer_posterior(belief: BeliefState, known_objects,
                     question: Question | PublicQuestion) -> dict:
    """Exact posterior over the answer domain, by joint enumeration."""
    posterior = {value: 0.0 for value in question.answer_domain}
    branches, _ = _enumerate_branches(belief, known_objects, question)
    for weight, _, answer, _ in branches:
        if answer not in posterior:
            raise ConsistencyError(
                f"hypothesis answer {answer!r} outside the answer domain")
        posterior[answer] += weight
    return posterior


def entropy(distribution: dict) -> float:
    return -sum(p * math.log2(p) for p in distribution.values() if p > 0.0)


def expected_information_gain(belief: BeliefState, known_objects,
                              question: Question | PublicQuestion,
                              revealed_slot_ids) -> float:
    """Expected entropy drop of the answer posterior after revealing the slots.

    Exactly zero when the reveal set touches no unresolved slot. Revealing a
    hidden Query referent also reveals its queried attribute.
    """
    unresolved = set(belief.unresolved_ids())
    if not unresolved & set(revealed_slot_ids):
        return 0.0
    branches, unresolved_ids = _enumerate_branches(belief, known_objects, question)
    touched = [i for i, slot_id in enumerate(unresolved_ids)
               if slot_id in set(revealed_slot_ids)]
    if not touched:
        return 0.0

    prior: dict = {}
    for weight, _, answer, _ in branches:
        prior[answer] = prior.get(answer, 0.0) + weight
    prior_entropy = entropy(prior)

    groups: dict[tuple, dict] = {}
    touched_set = set(touched)
    for weight, states, answer, ref_slot in branches:
        seen_value = answer if (ref_slot is not None and ref_slot in touched_set) else None
        key = (tuple(states[i] for i in touched), seen_value)
        group = groups.setdefault(key, {})
        group[answer] = group.get(answer, 0.0) + weight

    expected = 0.0
    for group in groups.values():
        p_obs = sum(group.values())
        conditional = {a: w / p_obs for a, w in group.items()}
        expected += p_obs * entropy(conditional)
    return max(prior_entropy - expected, 0.0)


def condition(belief: BeliefState, observed: dict[int, str]) -> BeliefState:
    """Collapse the observed slots to point masses on their revealed states.

    A slot resolved to a relevant/irrelevant state implies its occupant was
    seen; callers must add that object to the known set they later pass to
    answer_posterior, since resolved slots no longer contribute hypotheses.
    """
    id_to_index = {slot.slot_id: i for i, slot in enumerate(belief.slots)}
    new_weights = [list(row) for row in belief.weights]
    for slot_id, state in observed.items():
        if slot_id not in id_to_index:
            raise BeliefError(f"unknown slot {slot_id}")
        if state not in belief.state_space:
            raise ConsistencyError(f"state {state!r} outside the state space")
        index = id_to_index[slot_id]
        if belief.weights[index][belief.state_space.index(state)] <= 0.0:
            raise ConsistencyError(
                f"slot {slot_id} observed in state {state!r} with zero prior")
        new_weights[index] = [1.0 if s == state else 0.0 for s in belief.state_space]
    history = belief.conditioned_history + tuple(sorted(observed.items()))
    return replace(belief, weights=tuple(tuple(row) for row in new_weights),
                   conditioned_history=history)


# --- reveal geometry ----------------------------------------------------------

def _phantom_ids(slot: HiddenSlot) -> tuple[int, ...]:
    base = PHANTOM_ID_BASE + slot.slot_id * 10
    return tuple(base + k for k in range(len(slot.region)))


def _probe_scene(known_scene: SceneSpec, slots, unresolved_ids) -> SceneSpec:
    """Known objects plus phantom occupants in every unresolved slot.

    A shadow slot gets one phantom per region point, so any position its real
    occupant could take is covered; a predicted reveal therefore can never be
    suppressed by the true occupancy pattern.
    """
    extras: list[ObjectSpec] = []
    covers = list(known_scene.cover_relations)
    on_table_ids = {o.id for o in known_scene.on_table()}
    unresolved = set(unresolved_ids)
    for slot in slots:
        if slot.slot_id not in unresolved:
            continue
        for pid, point in zip(_phantom_ids(slot), slot.region):
            phantom = _probe_at(point, pid)
            extras.append(phantom)
            if slot.kind == "covered" and slot.source_id in on_table_ids:
                source = known_scene.object_by_id(slot.source_id)
                if source.position == slot.anchor:
                    covers.append((slot.source_id, phantom.id))
    return replace(known_scene, objects=known_scene.objects + tuple(extras),
                   cover_relations=tuple(covers))


def _slot_region_visible(scene_with_phantoms: SceneSpec, slot: HiddenSlot) -> bool:
    """True if every point of the slot region is in plain view.

    The slot's own phantoms are removed first; remaining objects (including the
    other slots' phantoms, conservatively assumed present) must not hide any
    region point, and the under-slot position must no longer be covered.
    """
    own = set(_phantom_ids(slot))
    objects = tuple(o for o in scene_with_phantoms.objects if o.id not in own)
    covers = tuple(rel for rel in scene_with_phantoms.cover_relations
                   if rel[1] not in own)
    scene = replace(scene_with_phantoms, objects=objects, cover_relations=covers)
    if slot.kind == "covered":
        for obj in scene.on_table():
            if obj.position == slot.anchor:
                return False
    camera = scene.camera
    visible_objs = [o for o in scene.on_table() if o.id not in scene.covered_ids()]
    for point in slot.region:
        if _point_hidden(point, visible_objs, camera):
            return False
    return True


def predict_revealed_slots(known_scene: SceneSpec, slots, unresolved_ids,
                           action: Action) -> set[int]:
    """Slots whose whole region becomes visible after the action.

    Computed on the known-object scene with phantom occupants in all other
    unresolved slots, so the prediction never depends on hidden content and
    never claims a reveal that occupancy elsewhere could suppress.
    """
    probe = _probe_scene(known_scene, slots, unresolved_ids)
    try:
        after, _ = apply_action(probe, action)
    except Exception:
        return set()
    unresolved = set(unresolved_ids)
    revealed: set[int] = set()
    for slot in slots:
        if slot.slot_id in unresolved and _slot_region_visible(after, slot):
            revealed.add(slot.slot_id)
    return revealed


def currently_visible_slots(known_scene: SceneSpec, slots, unresolved_ids) -> set[int]:
    """Unresolved slots whose region is already in plain view of the camera."""
    probe = _probe_scene(known_scene, slots, unresolved_ids)
    visible: set[int] = set()
    unresolved = set(unresolved_ids)
    for slot in slots:
        if slot.slot_id in unresolved and _slot_region_visible(probe, slot):
            visible.add(slot.slot_id)
    return visible


def classify_content(obj: ObjectSpec, question: Question | PublicQuestion) -> str:
    for i, rclass in enumerate(question.restriction_classes):
        if matches(obj, rclass):
            return relevant_state(i)
    return STATE_IRRELEVANT


# --- minimum interaction depth ------------------------------------------------

def min_steps_to_see(scene: SceneSpec, target_ids, t_max: int = 8) -> int | None:
    """Fewest actions after which every target object has been observed.

    Breadth-first search over pick and viewer actions using full ground truth.
    Object repositioning is never needed to reveal something a removal or a
    viewpoint change could not, so the search space stays small. Returns None
    when the targets cannot all be seen within `t_max` actions.
    """
    if t_max > 10:
        raise ValueError("t_max above 10 is outside the search budget")
    targets = frozenset(target_ids)
    vis_cache: dict[tuple, frozenset[int]] = {}
    act_cache: dict[tuple, list[Action]] = {}

    def cam_key(state_scene: SceneSpec) -> tuple:
        return (frozenset(state_scene.held), state_scene.camera.azimuth,
                state_scene.camera.elevation)

    def visible_ids(state_scene: SceneSpec) -> frozenset[int]:
        key = cam_key(state_scene)
        if key not in vis_cache:
            vis_cache[key] = frozenset(visible_set(state_scene).visible_ids())
        return vis_cache[key]

    def useful_actions(state_scene: SceneSpec, seen: frozenset[int]) -> list[Action]:
        # Only removing something that conceals an unseen target (directly, or
        # through a chain of hidden blockers) can reveal it; other picks are
        # deferrable, so the search skips them.
        key = (cam_key(state_scene), seen)
        if key in act_cache:
            return act_cache[key]
        vis = visible_ids(state_scene)
        covered = state_scene.covered_ids()
        on_table = [o for o in state_scene.on_table() if o.id not in covered]
        unseen = [state_scene.object_by_id(t) for t in targets - seen
                  if t not in set(state_scene.held)]
        coverer_of = {covered_id: coverer_id
                      for coverer_id, covered_id in state_scene.cover_relations}
        useful: set[int] = set()
        frontier_objs = list(unseen)
        examined: set[int] = set()
        while frontier_objs:
            obj = frontier_objs.pop()
            if obj.id in examined:
                continue
            examined.add(obj.id)
            if obj.id in coverer_of:
                useful.add(coverer_of[obj.id])
            for other in on_table:
                if other.id != obj.id and blocks(other, obj, state_scene.camera):
                    useful.add(other.id)
                    if other.id not in vis:
                        frontier_objs.append(other)
        acts = [Action("Pick", target_id=i) for i in sorted(useful & vis)]
        acts.append(Action("MoveViewer", direction="left"))
        acts.append(Action("MoveViewer", direction="right"))
        up = state_scene.camera.elevation == "low"
        acts.append(Action("RotateViewer", direction="up" if up else "down"))
        act_cache[key] = acts
        return acts

    seen0 = frozenset(visible_ids(scene) & targets)
    if targets <= seen0:
        return 0
    frontier = deque([(scene, seen0, 0)])
    visited = {cam_key(scene) + (seen0,)}
    while frontier:
        current, seen, depth = frontier.popleft()
        if depth >= t_max:
            continue
        for action in useful_actions(current, seen):
            after, _ = apply_action(current, action)
            new_seen = frozenset(seen | (visible_ids(after) & targets))
            if targets <= new_seen:
                return depth + 1
            key = cam_key(after) + (new_seen,)
            if key not in visited:
                visited.add(key)
                frontier.append((after, new_seen, depth + 1))
    return None


def min_steps(scene: SceneSpec, question: Question, t_max: int = 8) -> int | None:
    """Fewest actions until every question-relevant object has been observed."""
    targets = {o.id for o in scene.objects if is_relevant(o, question)}
    return min_steps_to_see(scene, targets, t_max=t_max)

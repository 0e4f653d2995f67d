"""Closed-loop episode engine: candidate options, prompts, response parsing,
step execution, record logging, and canonical serialization.

Each step offers lettered options mixing final answers (always including the
ground truth) with three or four candidate actions. While the agent still
lacks question-relevant information, exactly one offered action is verified to
reveal a relevant hidden object; the remaining action options are distractors,
verified to reveal none. Distractors are drawn from a per-episode menu so the
set of distinct distractor actions an episode ever offers stays between three
and five.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

from avrsim.belief import hiding_slots
from avrsim.generate import generate_scene
from avrsim.questions import (
    Question,
    is_relevant,
    question_from_json,
    question_to_json,
    sufficiency_flags,
)
from avrsim.world import (
    Action,
    Observation,
    PreconditionError,
    SceneSpec,
    action_from_json,
    action_to_json,
    apply_action,
    canonical_json,
    derive_seed,
    observation_from_json,
    observation_to_json,
    valid_actions,
    visible_set,
)

import random

EPISODE_SCHEMA = "episode/1"
AVRCORE_SCHEMA = "avrcore/1"

LETTERS = "ABCDEFGH"

DEFAULT_T_MAX = 8

TASK_INSTRUCTION = (
    "You are required to perform active visual reasoning: when the information "
    "obtained from image observations is insufficient to answer the question, "
    "you need to make action decisions to interact with the environment in "
    "order to acquire additional visual information relevant to the question. "
    "You should continue gathering new observations until you can infer and "
    "summarize a reliable answer based on the accumulated visual history. "
    "Choose either an answer to the question or an action decision option from "
    "the options above. Final option choice follow this format: (your "
    "analysis)...<answer>A/B/C/D/E/F...</answer>"
)

PHASE_HEADERS = (
    "Assessing Current Understanding",
    "Evaluating Potential Actions",
    "Strategic Decision-Making",
)

_TAG_PATTERN = re.compile(
    r"<(answer|action)>\s*([A-Za-z])\s*</(answer|action)>")


class EpisodeError(Exception):
    pass


class OptionGenerationError(EpisodeError):
    """No information-gaining action exists although the episode lacks
    information; the scene/question pair must be regenerated upstream."""


class EpisodeAborted(EpisodeError):
    """Agent transport failed; the episode is excluded from metrics."""


@dataclass(frozen=True)
class Option:
    letter: str
    kind: str                      # "answer" | "action"
    payload: object                # Answer value or Action
    text: str
    is_distractor: bool | None = None  # actions only

    def to_json(self) -> dict:
        doc: dict = {"letter": self.letter, "kind": self.kind, "text": self.text}
        if self.kind == "answer":
            doc["answer"] = self.payload
        else:
            doc["action"] = action_to_json(self.payload)
            doc["is_distractor"] = self.is_distractor
        return doc

    @staticmethod
    def from_json(doc: dict) -> "Option":
        if doc["kind"] == "answer":
            return Option(doc["letter"], "answer", doc["answer"], doc["text"])
        return Option(doc["letter"], "action", action_from_json(doc["action"]),
                      doc["text"], doc["is_distractor"])


@dataclass(frozen=True)
class OptionSet:
    options: tuple[Option, ...]

    def by_letter(self, letter: str) -> Option | None:
        for option in self.options:
            if option.letter == letter:
                return option
        return None

    def answers(self) -> tuple[Option, ...]:
        return tuple(o for o in self.options if o.kind == "answer")

    def actions(self) -> tuple[Option, ...]:
        return tuple(o for o in self.options if o.kind == "action")


@dataclass(frozen=True)
class Outcome:
    kind: str                   # "answer" | "action" | "malformed"
    letter: str | None = None
    value: object = None        # answer value or Action

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind}
        if self.letter is not None:
            doc["letter"] = self.letter
        if self.kind == "answer":
            doc["answer"] = self.value
        elif self.kind == "action":
            doc["action"] = action_to_json(self.value)
        return doc

    @staticmethod
    def from_json(doc: dict) -> "Outcome":
        if doc["kind"] == "answer":
            return Outcome("answer", doc["letter"], doc["answer"])
        if doc["kind"] == "action":
            return Outcome("action", doc["letter"], action_from_json(doc["action"]))
        return Outcome("malformed")


@dataclass(frozen=True)
class StepRecord:
    step_index: int
    options: OptionSet
    raw_text: str
    trace_report: dict
    outcome: Outcome
    info_gain: bool | None = None      # actions only
    next_observation: int | None = None  # index into EpisodeRecord.observations
    gainless_state: bool = False       # no gaining action existed this step


@dataclass(frozen=True)
class EpisodeRecord:
    episode_id: str
    category: str
    scenario_type: int
    scene_seed: int
    option_seed: int
    question: Question
    t_max: int
    hidden_all_irrelevant: bool
    visible_answer_matches: bool
    observations: tuple[Observation, ...]
    steps: tuple[StepRecord, ...]
    final_answer: object | None
    terminated_by: str            # "answered" | "step_cap" | "malformed"
    source: str = "agent"

    @property
    def initial_sufficient(self) -> bool:
        return self.hidden_all_irrelevant and self.visible_answer_matches


# --- option generation ---------------------------------------------------------


def action_text(action: Action, scene: SceneSpec) -> str:
    if action.kind == "MoveViewer":
        return f"Move the viewer {action.direction} around the table"
    if action.kind == "RotateViewer":
        return f"Rotate the viewer {action.direction}"
    obj = scene.object_by_id(action.target_id)
    desc = f"the {obj.size} {obj.color} {obj.material} {obj.shape} (id {obj.id})"
    if action.kind == "Pick":
        return f"Pick up {desc}"
    return f"Move {desc} {action.direction}"


_KIND_PRIORITY = {"Pick": 0, "MoveObject": 1, "MoveViewer": 2, "RotateViewer": 3}


def _action_sort_key(action: Action) -> tuple:
    return (_KIND_PRIORITY[action.kind],
            action.target_id if action.target_id is not None else -1,
            action.direction or "")


class OptionEngine:
    """Per-episode option generator with a stable distractor menu.

    Candidate actions are re-validated in every state: an action is a
    distractor only if executing it right now reveals no question-relevant
    hidden object (checked against ground truth). MoveObject candidates whose
    slide corridor approaches any initial hiding region are dropped, which
    keeps observable kinematics independent of hidden content.
    """

    def __init__(self, question: Question, option_seed: int, slots):
        self.question = question
        self.option_seed = option_seed
        self.slot_regions = tuple(point for slot in slots for point in slot.region)
        self.slot_sources = {slot.source_id for slot in slots}
        self.menu: list[tuple] = []          # distractor keys, insertion order
        self.offered_distractors: set[tuple] = set()

    def _corridor_clear(self, scene: SceneSpec, action: Action) -> bool:
        if action.kind != "MoveObject":
            return True
        target = scene.object_by_id(action.target_id)
        from avrsim.world import MOVE_DIRECTIONS, MOVE_DELTA, MOVE_SLIDE_STEP, TABLE_SIZE
        dx, dy = MOVE_DIRECTIONS[action.direction]
        r = target.footprint_radius
        clearance = r + 4.0 + 1.0
        step = MOVE_DELTA
        lo, hi = r, TABLE_SIZE - r
        while True:
            nx = min(max(target.x + dx * step, lo), hi)
            ny = min(max(target.y + dy * step, lo), hi)
            for point in self.slot_regions:
                if (nx - point[0]) ** 2 + (ny - point[1]) ** 2 < clearance ** 2:
                    return False
            at_edge = (nx, ny) != (target.x + dx * step, target.y + dy * step)
            if at_edge:
                return True
            step += MOVE_SLIDE_STEP
            if step > 2 * TABLE_SIZE:
                return True

    def options_for(self, scene: SceneSpec, seen_ids: set[int], step: int,
                    strict: bool = False) -> tuple["OptionSet", bool]:
        """Build the option set for this state.

        Returns (options, gainless_state): gainless_state is True when the
        episode still lacks relevant information but no single action can gain
        any; with strict=True that state raises OptionGenerationError instead.
        """
        rng = random.Random(derive_seed("options", self.option_seed, step))
        insufficient = any(
            is_relevant(obj, self.question) and obj.id not in seen_ids
            for obj in scene.objects)

        gainful: list[Action] = []
        distractor_pool: list[Action] = []
        reveals: dict[tuple, bool] = {}
        for action in valid_actions(scene):
            if not self._corridor_clear(scene, action):
                continue
            after, outcome = apply_action(scene, action)
            reveals[action.key()] = bool(outcome.revealed_ids) and not outcome.blocked
            gains = not outcome.blocked and any(
                is_relevant(after.object_by_id(i), self.question)
                for i in outcome.revealed_ids)
            (gainful if gains else distractor_pool).append(action)

        chosen_gainful: Action | None = None
        gainless_state = False
        if insufficient:
            if gainful:
                chosen_gainful = sorted(gainful, key=_action_sort_key)[0]
            else:
                if strict:
                    raise OptionGenerationError(
                        "no information-gaining action exists in an "
                        "information-lacking state")
                gainless_state = True

        want = 3 if chosen_gainful is not None else 4

        # Distractor selection keeps the per-episode union of distinct
        # distractors within [3, 5]: reuse menu entries first, admit at most
        # one new "lure" (a zero-gain action that still uncovers something)
        # per step, and fill the rest with durable non-revealing actions,
        # preferring targets that conceal nothing so later execution cannot
        # invalidate the menu.
        def stable_rank(action: Action) -> tuple:
            # Repositioning an object that conceals nothing stays offerable
            # and zero-gain whatever the agent does; viewer actions flip to
            # gainful whenever the camera wander re-hides something relevant.
            if action.kind == "RotateViewer":
                kind_rank = 2
            elif action.kind == "MoveViewer":
                kind_rank = 3
            else:
                on_source = action.target_id in self.slot_sources
                kind_rank = {("MoveObject", False): 0, ("Pick", False): 1,
                             ("MoveObject", True): 4, ("Pick", True): 5}[
                    (action.kind, on_source)]
            return (kind_rank,) + _action_sort_key(action)

        chosen_distractors: list[Action] = []
        chosen_keys: set[tuple] = set()

        def admit(action: Action) -> None:
            chosen_distractors.append(action)
            chosen_keys.add(action.key())

        for key in self.menu:
            if len(chosen_distractors) == want:
                break
            for action in distractor_pool:
                if action.key() == key and key not in chosen_keys:
                    admit(action)
                    break

        budget_new = max(0, 5 - len(self.offered_distractors))
        fresh = [a for a in distractor_pool
                 if a.key() not in self.offered_distractors
                 and a.key() not in chosen_keys]
        lures = sorted((a for a in fresh if reveals[a.key()]),
                       key=_action_sort_key)
        stables = sorted((a for a in fresh if not reveals[a.key()]),
                         key=stable_rank)
        ordered_fresh = lures[:1] + stables + lures[1:]
        for action in ordered_fresh:
            if len(chosen_distractors) == want or budget_new == 0:
                break
            admit(action)
            budget_new -= 1
        minimum = 2 if chosen_gainful is not None else 3
        if len(chosen_distractors) < minimum:
            # Defensive overflow past the menu budget: per-step counts take
            # precedence over the per-episode distractor union.
            for action in sorted(distractor_pool, key=stable_rank):
                if len(chosen_distractors) >= minimum:
                    break
                if action.key() not in chosen_keys:
                    admit(action)

        actions = list(chosen_distractors[:want])
        if chosen_gainful is not None:
            actions.append(chosen_gainful)
        rng.shuffle(actions)

        for action in actions:
            key = action.key()
            if action in chosen_distractors:
                self.offered_distractors.add(key)
                if key not in self.menu:
                    self.menu.append(key)

        options: list[Option] = []
        for value in self.question.answer_domain:
            options.append(Option(LETTERS[len(options)], "answer", value, str(value)))
        distractor_keys = {a.key() for a in chosen_distractors}
        for action in actions:
            options.append(Option(
                LETTERS[len(options)], "action", action,
                action_text(action, scene),
                is_distractor=action.key() in distractor_keys))
        return OptionSet(tuple(options)), gainless_state


# --- prompt rendering and response parsing --------------------------------------


def describe_observation(observation: Observation) -> str:
    if not observation.visible:
        return "No objects are visible."
    parts = []
    for obj, (side, depth) in observation.visible:
        parts.append(f"a {obj.size} {obj.color} {obj.material} {obj.shape} "
                     f"(id {obj.id}) at {side}-{depth}")
    camera = observation.camera
    head = (f"From azimuth {camera.azimuth} at {camera.elevation} elevation, "
            f"{len(observation.visible)} object(s) are visible: ")
    return head + "; ".join(parts) + "."


def render_prompt(question: Question, option_set: OptionSet,
                  observation: Observation, history_lines) -> str:
    lines = [f"Question: {question.text}", ""]
    lines.append("Current observation: " + describe_observation(observation))
    if history_lines:
        lines.append("History:")
        lines.extend(f"  {entry}" for entry in history_lines)
    else:
        lines.append("History: this is the first observation.")
    lines.append("")
    lines.append("Options:")
    for option in option_set.options:
        lines.append(f"{option.letter}. {option.text}")
    lines.append("")
    lines.append(TASK_INSTRUCTION)
    return "\n".join(lines)


def parse_response(raw_text: str, option_set: OptionSet) -> Outcome:
    """Take the last well-formed answer/action tag; mismatches are malformed."""
    last = None
    for match in _TAG_PATTERN.finditer(raw_text):
        if match.group(1) == match.group(3):
            last = match
    if last is None:
        return Outcome("malformed")
    tag_kind = last.group(1)
    letter = last.group(2).upper()
    option = option_set.by_letter(letter)
    if option is None:
        return Outcome("malformed")
    if (tag_kind == "answer") != (option.kind == "answer"):
        return Outcome("malformed")
    if option.kind == "answer":
        return Outcome("answer", letter, option.payload)
    return Outcome("action", letter, option.payload)


def validate_reasoning_trace(text: str, headers=PHASE_HEADERS) -> dict:
    """Presence and ordering of the three reasoning-phase headers. Diagnostic only."""
    lowered = text.lower()
    positions = {}
    missing = []
    for header in headers:
        index = lowered.find(header.lower())
        if index < 0:
            missing.append(header)
        else:
            positions[header] = index
    order_violation = False
    found = [positions[h] for h in headers if h in positions]
    if found != sorted(found):
        order_violation = True
    return {
        "complete": not missing and not order_violation,
        "present": [h for h in headers if h in positions],
        "missing": missing,
        "order_violation": order_violation,
    }


# --- episode execution -----------------------------------------------------------


@dataclass(frozen=True)
class EpisodeSpec:
    episode_id: str
    category: str
    scenario_type: int
    scene_seed: int
    question: Question
    option_seed: int
    t_max: int = DEFAULT_T_MAX

    def build_scene(self) -> SceneSpec:
        return generate_scene(self.category, self.scenario_type, self.scene_seed)


@dataclass
class AgentContext:
    """Everything a (non-privileged) agent may see at one step."""

    episode_id: str
    step: int
    question: object              # PublicQuestion
    observations: tuple[Observation, ...]
    past_actions: tuple[Action, ...]
    options: OptionSet
    prompt: str
    image_b64: str | None = None


def _history_lines(observations, steps, scene_lookup) -> list[str]:
    lines = []
    for record in steps:
        if record.outcome.kind != "action":
            continue
        action = record.outcome.value
        after = observations[record.next_observation]
        before = observations[record.next_observation - 1]
        newly = sorted(after.visible_ids() - before.visible_ids())
        suffix = (f"{len(newly)} new object(s) came into view"
                  if newly else "nothing new came into view")
        lines.append(f"Step {record.step_index}: chose {record.outcome.letter} "
                     f"({scene_lookup[record.step_index]}); {suffix}.")
    return lines


def run_episode(spec: EpisodeSpec, agent, *, render_image=None,
                strict_options: bool = False) -> EpisodeRecord:
    """Run the perception-reasoning-action loop until an answer, a malformed
    reply, or the action-step cap."""
    scene = spec.build_scene()
    question = spec.question
    hidden_irrelevant, answer_matches = sufficiency_flags(scene, question)

    obs0 = visible_set(scene, step_index=0)
    observations: list[Observation] = [obs0]
    seen_ids: set[int] = set(obs0.visible_ids())
    engine = OptionEngine(question, spec.option_seed, hiding_slots(obs0))

    steps: list[StepRecord] = []
    action_texts: dict[int, str] = {}
    final_answer = None
    terminated_by = "step_cap"
    action_steps = 0

    step = 0
    while True:
        if action_steps >= spec.t_max:
            terminated_by = "step_cap"
            break
        options, gainless = engine.options_for(
            scene, seen_ids, step, strict=strict_options and step == 0)
        prompt = render_prompt(question, options, observations[-1],
                               _history_lines(observations, steps, action_texts))
        image_b64 = render_image(observations[-1]) if render_image else None
        context = AgentContext(
            episode_id=spec.episode_id, step=step,
            question=question.public_view(),
            observations=tuple(observations),
            past_actions=tuple(s.outcome.value for s in steps
                               if s.outcome.kind == "action"),
            options=options, prompt=prompt, image_b64=image_b64)
        try:
            raw_text = agent.respond(context)
        except Exception as exc:
            raise EpisodeAborted(f"agent transport failure: {exc}") from exc

        outcome = parse_response(raw_text, options)
        trace_report = validate_reasoning_trace(raw_text)

        if outcome.kind == "malformed":
            steps.append(StepRecord(step, options, raw_text, trace_report,
                                    outcome, gainless_state=gainless))
            terminated_by = "malformed"
            break
        if outcome.kind == "answer":
            steps.append(StepRecord(step, options, raw_text, trace_report,
                                    outcome, gainless_state=gainless))
            final_answer = outcome.value
            terminated_by = "answered"
            break

        action = outcome.value
        action_texts[step] = options.by_letter(outcome.letter).text
        before = observations[-1]
        try:
            scene, _ = apply_action(scene, action)
            after = visible_set(scene, step_index=len(observations))
        except PreconditionError:
            after = replace(before, step_index=len(observations))
        newly = after.visible_ids() - before.visible_ids()
        gain = any(is_relevant(next(o for o, _ in after.visible if o.id == i),
                               question) for i in newly)
        observations.append(after)
        seen_ids |= after.visible_ids()
        steps.append(StepRecord(step, options, raw_text, trace_report, outcome,
                                info_gain=gain,
                                next_observation=len(observations) - 1,
                                gainless_state=gainless))
        action_steps += 1
        step += 1

    return EpisodeRecord(
        episode_id=spec.episode_id,
        category=spec.category,
        scenario_type=spec.scenario_type,
        scene_seed=spec.scene_seed,
        option_seed=spec.option_seed,
        question=question,
        t_max=spec.t_max,
        hidden_all_irrelevant=hidden_irrelevant,
        visible_answer_matches=answer_matches,
        observations=tuple(observations),
        steps=tuple(steps),
        final_answer=final_answer,
        terminated_by=terminated_by,
    )


# --- serialization ---------------------------------------------------------------


def _step_to_json(step: StepRecord) -> dict:
    doc: dict = {
        "step_index": step.step_index,
        "options": [o.to_json() for o in step.options.options],
        "raw_text": step.raw_text,
        "trace_report": step.trace_report,
        "outcome": step.outcome.to_json(),
        "gainless_state": step.gainless_state,
    }
    if step.info_gain is not None:
        doc["info_gain"] = step.info_gain
    if step.next_observation is not None:
        doc["next_observation"] = step.next_observation
    return doc


def _step_from_json(doc: dict) -> StepRecord:
    return StepRecord(
        step_index=doc["step_index"],
        options=OptionSet(tuple(Option.from_json(o) for o in doc["options"])),
        raw_text=doc["raw_text"],
        trace_report=doc["trace_report"],
        outcome=Outcome.from_json(doc["outcome"]),
        info_gain=doc.get("info_gain"),
        next_observation=doc.get("next_observation"),
        gainless_state=doc["gainless_state"],
    )


def episode_to_json(record: EpisodeRecord) -> dict:
    return {
        "schema": EPISODE_SCHEMA,
        "episode_id": record.episode_id,
        "category": record.category,
        "scenario_type": record.scenario_type,
        "scene_seed": record.scene_seed,
        "option_seed": record.option_seed,
        "question": question_to_json(record.question),
        "t_max": record.t_max,
        "initial_sufficiency": {
            "hidden_all_irrelevant": record.hidden_all_irrelevant,
            "visible_answer_matches": record.visible_answer_matches,
            "sufficient": record.initial_sufficient,
        },
        "observations": [observation_to_json(o) for o in record.observations],
        "steps": [_step_to_json(s) for s in record.steps],
        "final_answer": record.final_answer,
        "terminated_by": record.terminated_by,
        "source": record.source,
    }


def episode_from_json(doc: dict) -> EpisodeRecord:
    if doc.get("schema") != EPISODE_SCHEMA:
        raise EpisodeError(f"unsupported episode schema {doc.get('schema')!r}")
    return EpisodeRecord(
        episode_id=doc["episode_id"],
        category=doc["category"],
        scenario_type=doc["scenario_type"],
        scene_seed=doc["scene_seed"],
        option_seed=doc["option_seed"],
        question=question_from_json(doc["question"]),
        t_max=doc["t_max"],
        hidden_all_irrelevant=doc["initial_sufficiency"]["hidden_all_irrelevant"],
        visible_answer_matches=doc["initial_sufficiency"]["visible_answer_matches"],
        observations=tuple(observation_from_json(o) for o in doc["observations"]),
        steps=tuple(_step_from_json(s) for s in doc["steps"]),
        final_answer=doc["final_answer"],
        terminated_by=doc["terminated_by"],
        source=doc["source"],
    )


def save_episodes(path, records) -> None:
    ordered = sorted(records, key=lambda r: r.episode_id)
    with open(path, "w", encoding="utf-8") as handle:
        for record in ordered:
            handle.write(canonical_json(episode_to_json(record)) + "\n")


def load_episodes(path) -> list[EpisodeRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(episode_from_json(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise EpisodeError(f"{path}:{line_number}: malformed episode "
                                   f"record ({exc})") from exc
    return records


# --- step-record export ------------------------------------------------------------


def export_avr_core_records(record: EpisodeRecord) -> list[dict]:
    """One higher-order step document per step of the episode."""
    docs = []
    for step in record.steps:
        doc: dict = {
            "schema": AVRCORE_SCHEMA,
            "episode_id": record.episode_id,
            "category": record.category,
            "scenario_type": record.scenario_type,
            "scene_seed": record.scene_seed,
            "option_seed": record.option_seed,
            "t_max": record.t_max,
            "source": record.source,
            "initial_sufficiency": {
                "hidden_all_irrelevant": record.hidden_all_irrelevant,
                "visible_answer_matches": record.visible_answer_matches,
                "sufficient": record.initial_sufficient,
            },
            "step": step.step_index,
            "question": question_to_json(record.question),
            "history": list(range(step.step_index + 1)),
            "past_actions": [
                action_to_json(s.outcome.value)
                for s in record.steps[:step.step_index]
                if s.outcome.kind == "action"
            ],
            "options": [o.to_json() for o in step.options.options],
            "think": step.raw_text,
            "trace_report": step.trace_report,
            "outcome": step.outcome.to_json(),
            "gainless_state": step.gainless_state,
        }
        if step.step_index == 0:
            doc["observation_0"] = observation_to_json(record.observations[0])
        if step.outcome.kind == "action":
            doc["info_gain"] = step.info_gain
            doc["observation_next"] = observation_to_json(
                record.observations[step.next_observation])
        docs.append(doc)
    return docs


def import_avr_core_records(docs: list[dict]) -> EpisodeRecord:
    """Rebuild an EpisodeRecord from its exported step documents."""
    if not docs:
        raise EpisodeError("no step documents")
    head = docs[0]
    if head.get("schema") != AVRCORE_SCHEMA:
        raise EpisodeError(f"unsupported schema {head.get('schema')!r}")
    docs = sorted(docs, key=lambda d: d["step"])
    observations = [observation_from_json(docs[0]["observation_0"])]
    steps = []
    final_answer = None
    terminated_by = "step_cap"
    for doc in docs:
        outcome = Outcome.from_json(doc["outcome"])
        info_gain = None
        next_observation = None
        if outcome.kind == "action":
            observations.append(observation_from_json(doc["observation_next"]))
            next_observation = len(observations) - 1
            info_gain = doc["info_gain"]
        elif outcome.kind == "answer":
            final_answer = outcome.value
            terminated_by = "answered"
        else:
            terminated_by = "malformed"
        steps.append(StepRecord(
            step_index=doc["step"],
            options=OptionSet(tuple(Option.from_json(o) for o in doc["options"])),
            raw_text=doc["think"],
            trace_report=doc["trace_report"],
            outcome=outcome,
            info_gain=info_gain,
            next_observation=next_observation,
            gainless_state=doc["gainless_state"],
        ))
    sufficiency = head["initial_sufficiency"]
    return EpisodeRecord(
        episode_id=head["episode_id"],
        category=head["category"],
        scenario_type=head["scenario_type"],
        scene_seed=head["scene_seed"],
        option_seed=head["option_seed"],
        question=question_from_json(head["question"]),
        t_max=head["t_max"],
        hidden_all_irrelevant=sufficiency["hidden_all_irrelevant"],
        visible_answer_matches=sufficiency["visible_answer_matches"],
        observations=tuple(observations),
        steps=tuple(steps),
        final_answer=final_answer,
        terminated_by=terminated_by,
        source=head["source"],
    )


def save_avr_core(path, records) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in sorted(records, key=lambda r: r.episode_id):
            for doc in export_avr_core_records(record):
                handle.write(canonical_json(doc) + "\n")

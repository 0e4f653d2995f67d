"""Baseline agents behind one interface, plus the wire-protocol adapter.

Agents receive only an AgentContext (prompt, options, observation history,
public question) and return raw response text; they never see the simulator's
hidden state. The omniscient agent is the explicit exception: it is handed the
full scene and the ground-truth answer as a privileged upper-bound control.
The greedy agent is geometry-privileged in the sense that it plans over reveal
geometry, but that geometry is derived from its own observations.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from avrsim.belief import (
    BeliefState,
    CapacityError,
    HiddenSlot,
    SLOT_MATCH_RADIUS,
    answer_posterior,
    classify_content,
    condition,
    currently_visible_slots,
    entropy,
    expected_information_gain,
    hiding_slots,
    init_belief,
    predict_revealed_slots,
)
from avrsim.episode import AgentContext, PHASE_HEADERS
from avrsim.questions import PublicQuestion, answer_over
from avrsim.world import (
    Action,
    ObjectSpec,
    Observation,
    SceneSpec,
    apply_action,
    derive_seed,
)

import math


class AgentTransportError(Exception):
    pass


class Agent:
    """Per-episode agent: respond(context) -> raw text. May keep memory."""

    name = "agent"
    privileged = False

    def respond(self, context: AgentContext) -> str:
        raise NotImplementedError


def _answer_option_letter(options, value):
    """Letter of the answer option matching `value`.

    Numeric domains fall back to the closest value (ties toward the smaller),
    everything else to the lowest answer letter.
    """
    answers = [o for o in options.options if o.kind == "answer"]
    for option in answers:
        if option.payload == value:
            return option.letter
    if isinstance(value, int):
        numeric = [o for o in answers if isinstance(o.payload, int)]
        if numeric:
            best = min(numeric, key=lambda o: (abs(o.payload - value), o.payload))
            return best.letter
    return answers[0].letter


class KnownWorld:
    """Observation-derived world model: every object ever seen, at its latest
    pose, plus which of the initial hiding slots are still unresolved."""

    def __init__(self, question: PublicQuestion):
        self.question = question
        self.objects: dict[int, ObjectSpec] = {}
        self.held: list[int] = []
        self.slots: tuple[HiddenSlot, ...] = ()
        self.resolved: dict[int, str] = {}
        self.baseline_ids: set[int] = set()
        self.initialized = False

    def unresolved_ids(self) -> tuple[int, ...]:
        return tuple(s.slot_id for s in self.slots if s.slot_id not in self.resolved)

    def known_objects(self) -> tuple[ObjectSpec, ...]:
        return tuple(self.objects[i] for i in sorted(self.objects))

    def estimate_scene(self, camera) -> SceneSpec:
        return SceneSpec(
            objects=self.known_objects(),
            cover_relations=(),
            held=tuple(self.held),
            camera=camera,
            category="estimate", scenario_type=0, seed=0)

    def update(self, context: AgentContext) -> dict[int, str]:
        """Fold the newest observation in; return newly resolved slot states."""
        observation = context.observations[-1]
        previously_known = set(self.objects)
        for obj, _ in observation.visible:
            self.objects[obj.id] = obj
        if not self.initialized:
            self.slots = hiding_slots(context.observations[0])
            self.baseline_ids = set(context.observations[0].visible_ids())
            self.initialized = True
        newly_resolved: dict[int, str] = {}
        # Slot contents are objects first seen after the baseline observation;
        # the baseline objects are the hiding geometry itself.
        new_ids = ({obj.id for obj, _ in observation.visible}
                   - previously_known - self.baseline_ids)
        for slot in self.slots:
            if slot.slot_id in self.resolved:
                continue
            near = [self.objects[i] for i in new_ids
                    if math.dist(self.objects[i].position, slot.anchor)
                    <= SLOT_MATCH_RADIUS]
            if near:
                content = min(near, key=lambda o: math.dist(o.position, slot.anchor))
                newly_resolved[slot.slot_id] = classify_content(content, self.question)
        if newly_resolved:
            self.resolved.update(newly_resolved)
        # Slots whose whole region is in plain view with nothing in it are
        # settled as empty.
        estimate = self.estimate_scene(observation.camera)
        for slot_id in currently_visible_slots(estimate, self.slots,
                                               self.unresolved_ids()):
            self.resolved[slot_id] = "empty"
            newly_resolved[slot_id] = "empty"
        return newly_resolved

    def note_pick(self, target_id: int) -> None:
        if target_id not in self.held:
            self.held.append(target_id)

    def note_move(self, action: Action, camera) -> None:
        estimate = self.estimate_scene(camera)
        try:
            after, _ = apply_action(estimate, action)
        except Exception:
            return
        for obj in after.objects:
            self.objects[obj.id] = obj


class PassiveAgent(Agent):
    """Answers immediately from the first observation; never acts."""

    name = "passive"

    def respond(self, context: AgentContext) -> str:
        visible = context.observations[-1].visible_objects()
        value = answer_over(visible, context.question)
        if value is None:
            value = context.question.answer_domain[0]
        letter = _answer_option_letter(context.options, value)
        return (f"Based on the visible objects alone my answer is "
                f"{value}. <answer>{letter}</answer>")


class RandomAgent(Agent):
    """Uniform choice over all offered options."""

    name = "random"

    def __init__(self, seed: int):
        self.rng = random.Random(derive_seed("random-agent", seed))

    def respond(self, context: AgentContext) -> str:
        option = self.rng.choice(context.options.options)
        tag = "answer" if option.kind == "answer" else "action"
        return f"Choosing at random. <{tag}>{option.letter}</{tag}>"


class OmniscientAgent(Agent):
    """Privileged upper bound: answers the ground truth at step 0."""

    name = "omniscient"
    privileged = True

    def __init__(self, ground_truth):
        self.ground_truth = ground_truth

    def respond(self, context: AgentContext) -> str:
        letter = _answer_option_letter(context.options, self.ground_truth)
        return (f"The answer is {self.ground_truth}. "
                f"<answer>{letter}</answer>")


class GreedyRevealAgent(Agent):
    """Uncovers every initial hiding region in lowest-letter order, then
    answers from everything it has seen."""

    name = "greedy_reveal"
    privileged = True  # plans over reveal geometry rather than option text

    def __init__(self, question: PublicQuestion):
        self.world = KnownWorld(question)

    def respond(self, context: AgentContext) -> str:
        self.world.update(context)
        camera = context.observations[-1].camera
        estimate = self.world.estimate_scene(camera)
        unresolved = self.world.unresolved_ids()
        for option in context.options.options:
            if option.kind != "action":
                continue
            reveals = predict_revealed_slots(estimate, self.world.slots,
                                             unresolved, option.payload)
            if reveals:
                self._note(option.payload, camera)
                return (f"Hiding spots remain unchecked; {option.text} should "
                        f"expose one. <action>{option.letter}</action>")
        value = answer_over(self.world.known_objects(), context.question)
        if value is None:
            value = context.question.answer_domain[0]
        letter = _answer_option_letter(context.options, value)
        return (f"No offered action uncovers anything new; from everything "
                f"seen so far the answer is {value}. <answer>{letter}</answer>")

    def _note(self, action: Action, camera) -> None:
        if action.kind == "Pick":
            self.world.note_pick(action.target_id)
        elif action.kind == "MoveObject":
            self.world.note_move(action, camera)


class EigOracleAgent(Agent):
    """Scores every offered action by exact expected information gain and
    answers once the posterior is certain (or nothing offered gains)."""

    name = "eig_oracle"

    def __init__(self, question: PublicQuestion):
        self.question = question
        self.world = KnownWorld(question)
        self.belief: BeliefState | None = None
        self.fallback: GreedyRevealAgent | None = None

    def respond(self, context: AgentContext) -> str:
        if self.fallback is not None:
            return self.fallback.respond(context)
        newly = self.world.update(context)
        if self.belief is None:
            try:
                self.belief = init_belief(context.observations[0], self.question)
            except CapacityError:
                self.fallback = GreedyRevealAgent(self.question)
                self.fallback.world = self.world
                return ("Hypothesis space over hiding spots exceeds the exact "
                        "cap; falling back to greedy uncovering.\n"
                        + self.fallback.respond(context))
            if self.world.resolved:
                newly = dict(self.world.resolved)
        if newly:
            self.belief = condition(self.belief, newly)

        known = self.world.known_objects()
        posterior = answer_posterior(self.belief, known, self.question)
        post_entropy = entropy(posterior)
        camera = context.observations[-1].camera
        estimate = self.world.estimate_scene(camera)
        unresolved = self.world.unresolved_ids()

        scored: list[tuple[str, str, float]] = []
        for option in context.options.options:
            if option.kind != "action":
                continue
            reveals = predict_revealed_slots(estimate, self.belief.slots,
                                             unresolved, option.payload)
            gain = expected_information_gain(self.belief, known, self.question,
                                             reveals)
            scored.append((option.letter, option.text, gain))

        lines = [
            f"{PHASE_HEADERS[0]}: {len(known)} object(s) known, "
            f"{len(unresolved)} hiding spot(s) unresolved; answer entropy "
            f"{post_entropy:.3f} bits.",
            PHASE_HEADERS[1] + ": " + "; ".join(
                f"{letter}: {gain:.3f} bits" for letter, _, gain in scored) + ".",
        ]
        best = max(scored, key=lambda item: item[2], default=None)
        if best is not None and best[2] > 1e-12:
            letter = min(l for l, _, g in scored if g == best[2])
            text = next(t for l, t, _ in scored if l == letter)
            action = context.options.by_letter(letter).payload
            if action.kind == "Pick":
                self.world.note_pick(action.target_id)
            elif action.kind == "MoveObject":
                self.world.note_move(action, camera)
            lines.append(f"{PHASE_HEADERS[2]}: {text} maximizes expected "
                         f"information gain ({best[2]:.3f} bits).")
            return "\n".join(lines) + f"\n<action>{letter}</action>"

        mode = max(posterior.items(),
                   key=lambda kv: (kv[1], -self.question.answer_domain.index(kv[0])))
        value = mode[0]
        letter = _answer_option_letter(context.options, value)
        lines.append(f"{PHASE_HEADERS[2]}: no offered action reduces "
                     f"uncertainty; answering {value} "
                     f"(posterior {mode[1]:.3f}).")
        return "\n".join(lines) + f"\n<answer>{letter}</answer>"


class ScriptedAgent(Agent):
    """Replays a fixed transcript, one raw response per step."""

    name = "scripted"

    def __init__(self, responses):
        self.responses = list(responses)
        self.cursor = 0

    def respond(self, context: AgentContext) -> str:
        if self.cursor >= len(self.responses):
            raise AgentTransportError("transcript exhausted")
        text = self.responses[self.cursor]
        self.cursor += 1
        return text


class ExternalAgent(Agent):
    """Bridges one episode to an external process over the wire protocol."""

    name = "external"

    def __init__(self, session):
        self.session = session

    def respond(self, context: AgentContext) -> str:
        from avrsim import protocol
        try:
            return self.session.request(context)
        except protocol.ProtocolError as exc:
            raise AgentTransportError(str(exc)) from exc


AGENT_NAMES = ("passive", "random", "greedy_reveal", "eig_oracle", "omniscient")


def make_agent(name: str, *, question, agent_seed: int = 0, ground_truth=None):
    """Construct a fresh per-episode agent.

    Only the omniscient agent receives ground truth; everything else gets the
    public question view.
    """
    public = question.public_view() if hasattr(question, "public_view") else question
    if name == "passive":
        return PassiveAgent()
    if name == "random":
        return RandomAgent(agent_seed)
    if name == "greedy_reveal":
        return GreedyRevealAgent(public)
    if name == "eig_oracle":
        return EigOracleAgent(public)
    if name == "omniscient":
        if ground_truth is None:
            raise ValueError("omniscient agent requires the ground truth")
        return OmniscientAgent(ground_truth)
    raise ValueError(f"unknown agent {name!r}; known: {', '.join(AGENT_NAMES)}")

"""Benchmark suite construction: deterministic scene/question pairing.

A suite cell pairs a generated scene with a question whose relationship to the
hidden content is controlled:

* "insufficient" episodes require action: every hidden object is relevant to
  the question, and the visible evidence does not pin the answer;
* "sufficient" episodes can be answered at step 0: all hidden objects are
  irrelevant and the visible evidence already determines the answer (a visible
  Exist witness or a visible Query referent).

One in five episodes is sufficient. Question types rotate across episodes;
Query appears as an insufficient question only on single-hidden-object scenes,
where the hidden object is the referent itself.
"""

from __future__ import annotations

from dataclasses import dataclass

from avrsim.belief import answer_posterior, entropy, init_belief
from avrsim.episode import DEFAULT_T_MAX, EpisodeSpec
from avrsim.generate import generate_scene, hidden_ids
from avrsim.questions import (
    Question,
    UnsatisfiableTemplate,
    instantiate_question,
    is_relevant,
    sufficiency_flags,
)
from avrsim.world import derive_seed, visible_set

INSUFFICIENT_ROTATION = ("Counting", "Exist", "Compare", "MathCounting",
                         "MathCompare", "Query")
SUFFICIENT_ROTATION = ("Exist", "Query")

PAIRING_TRIES = 96


class SuiteError(Exception):
    pass


@dataclass(frozen=True)
class SuiteConfig:
    master_seed: int
    count_per_category: int = 100
    categories: tuple[str, ...] = ("occlusion", "stack", "composite")
    scenario_types: tuple[int, ...] = tuple(range(10))
    t_max: int = DEFAULT_T_MAX
    sufficient_share: int = 5   # every k-th episode is a sufficient one


def _insufficient_ok(scene, question: Question, hidden) -> bool:
    irrelevant, _ = sufficiency_flags(scene, question)
    if irrelevant:
        return False
    if not all(is_relevant(obj, question) for obj in hidden):
        return False
    if question.qtype == "Exist":
        visible = visible_set(scene).visible_objects()
        if any(is_relevant(obj, question) for obj in visible):
            return False
    # The episode must genuinely require interaction: the exact step-0
    # posterior over answers may not already be certain.
    observation = visible_set(scene)
    belief = init_belief(observation, question)
    posterior = answer_posterior(belief, observation.visible_objects(), question)
    return entropy(posterior) > 1e-9


def _sufficient_ok(scene, question: Question) -> bool:
    irrelevant, matches = sufficiency_flags(scene, question)
    if not (irrelevant and matches):
        return False
    if question.qtype == "Exist":
        return question.ground_truth == "yes"
    if question.qtype == "Query":
        visible = visible_set(scene).visible_objects()
        return sum(1 for o in visible
                   if is_relevant(o, question)) == 1
    return False


def pair_question(scene, profile: str, qtype_preference, pairing_seed: int) -> Question:
    """Find a question matching the profile, rotating types then seeds."""
    hidden = [scene.object_by_id(i) for i in hidden_ids(scene)]
    for qtype in qtype_preference:
        if profile == "insufficient" and qtype == "Query" and len(hidden) != 1:
            continue
        for attempt in range(PAIRING_TRIES):
            qseed = derive_seed("pairing", pairing_seed, qtype, attempt)
            try:
                question = instantiate_question(scene, qtype, qseed)
            except UnsatisfiableTemplate:
                continue
            if profile == "insufficient" and _insufficient_ok(scene, question, hidden):
                return question
            if profile == "sufficient" and _sufficient_ok(scene, question):
                return question
    raise SuiteError(
        f"no {profile} question found for scene seed {scene.seed} "
        f"({scene.category} type {scene.scenario_type})")


def _rotate(sequence, start):
    start %= len(sequence)
    return sequence[start:] + sequence[:start]


def build_suite(config: SuiteConfig) -> list[EpisodeSpec]:
    """Deterministic list of episode specs from one master seed."""
    specs: list[EpisodeSpec] = []
    index = 0
    for category in config.categories:
        for i in range(config.count_per_category):
            scenario_type = config.scenario_types[i % len(config.scenario_types)]
            scene_seed = derive_seed("suite-scene", config.master_seed, category, i)
            scene = generate_scene(category, scenario_type, scene_seed)
            sufficient = (i % config.sufficient_share
                          == config.sufficient_share - 1)
            profile = "sufficient" if sufficient else "insufficient"
            rotation = SUFFICIENT_ROTATION if sufficient else INSUFFICIENT_ROTATION
            question = pair_question(
                scene, profile, _rotate(rotation, i),
                derive_seed("suite-q", config.master_seed, category, i))
            specs.append(EpisodeSpec(
                episode_id=f"ep-{index:05d}",
                category=category,
                scenario_type=scenario_type,
                scene_seed=scene_seed,
                question=question,
                option_seed=derive_seed("suite-opt", config.master_seed, category, i),
                t_max=config.t_max,
            ))
            index += 1
    return specs

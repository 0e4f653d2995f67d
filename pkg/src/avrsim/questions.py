"""Question templates, the full-scene answer oracle, relevance, and sufficiency.

A question carries one or two restriction classes (attribute conjunctions).
Two-class questions always use mutually exclusive classes (two values of the
same attribute) so that no object can belong to both; the belief module's
hypothesis quotient relies on this. Template grammar and answer domains are
documented in the README ("Question templates").
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from avrsim.world import (
    COLORS,
    MATERIALS,
    SHAPES,
    SIZES,
    ObjectSpec,
    SceneSpec,
    derive_seed,
    visible_set,
)

QUESTION_TYPES = ("Query", "Exist", "Counting", "Compare", "MathCounting", "MathCompare")

QUESTION_SCHEMA = "question/1"

Answer = int | str

# A restriction class is a conjunction of attribute constraints, kept as a
# sorted tuple of (attribute, value) pairs.
RestrictionClass = tuple[tuple[str, str], ...]

ATTRIBUTE_VALUES = {
    "shape": SHAPES,
    "color": COLORS,
    "size": SIZES,
    "material": MATERIALS,
}

COMPARE_DOMAIN = ("more", "fewer", "equal")
YES_NO = ("yes", "no")


class QuestionError(Exception):
    pass


class UnsatisfiableTemplate(QuestionError):
    """The drawn template has no valid grounding in this scene; retry with a new seed."""


class OracleError(QuestionError):
    """The oracle met a scene/question pair the generator promised impossible."""


@dataclass(frozen=True)
class Question:
    qtype: str
    text: str
    restriction_classes: tuple[RestrictionClass, ...]
    ground_truth: Answer
    answer_domain: tuple[Answer, ...]
    queried_attribute: str | None = None
    op: str | None = None        # MathCounting: "sum" | "difference"
    constant: int | None = None  # MathCompare threshold

    def public_view(self) -> "PublicQuestion":
        return PublicQuestion(
            qtype=self.qtype, text=self.text,
            restriction_classes=self.restriction_classes,
            answer_domain=self.answer_domain,
            queried_attribute=self.queried_attribute,
            op=self.op, constant=self.constant)


@dataclass(frozen=True)
class PublicQuestion:
    """Everything an agent may see: the question without its ground truth."""

    qtype: str
    text: str
    restriction_classes: tuple[RestrictionClass, ...]
    answer_domain: tuple[Answer, ...]
    queried_attribute: str | None = None
    op: str | None = None
    constant: int | None = None


def matches(obj: ObjectSpec, rclass: RestrictionClass) -> bool:
    return all(getattr(obj, attr) == value for attr, value in rclass)


def class_count(objects, rclass: RestrictionClass) -> int:
    return sum(1 for obj in objects if matches(obj, rclass))


def describe_class(rclass: RestrictionClass, plural: bool = True) -> str:
    by_attr = dict(rclass)
    words = [by_attr[a] for a in ("size", "color", "material") if a in by_attr]
    noun = by_attr.get("shape", "object")
    if plural:
        noun += "s"
    return " ".join(words + [noun])


def is_relevant(obj: ObjectSpec, question: Question | PublicQuestion) -> bool:
    """True iff the object matches any restriction class of the question."""
    return any(matches(obj, rclass) for rclass in question.restriction_classes)


def _compare_word(a: int, b: int) -> str:
    if a > b:
        return "more"
    if a < b:
        return "fewer"
    return "equal"


def answer_over(objects, question: Question | PublicQuestion) -> Answer | None:
    """Template semantics over an arbitrary object collection.

    Returns None for a Query whose referent is absent from the collection;
    collections with several referent matches also yield None (the question's
    uniqueness promise fails there).
    """
    classes = question.restriction_classes
    if question.qtype == "Query":
        found = [o for o in objects if matches(o, classes[0])]
        if len(found) != 1:
            return None
        return getattr(found[0], question.queried_attribute)
    if question.qtype == "Exist":
        return "yes" if class_count(objects, classes[0]) > 0 else "no"
    if question.qtype == "Counting":
        return class_count(objects, classes[0])
    if question.qtype == "Compare":
        return _compare_word(class_count(objects, classes[0]),
                             class_count(objects, classes[1]))
    if question.qtype == "MathCounting":
        a = class_count(objects, classes[0])
        b = class_count(objects, classes[1])
        return a + b if question.op == "sum" else abs(a - b)
    if question.qtype == "MathCompare":
        total = class_count(objects, classes[0]) + class_count(objects, classes[1])
        return "yes" if total > question.constant else "no"
    raise QuestionError(f"unknown question type {question.qtype!r}")


def answer_oracle(scene: SceneSpec, question: Question) -> Answer:
    """Ground-truth answer over every object: on the table, covered, or held."""
    result = answer_over(scene.objects, question)
    if result is None:
        raise OracleError("Query referent is not unique in the full scene")
    return result


def visible_answer(observation_objects, question: Question | PublicQuestion) -> Answer | None:
    return answer_over(observation_objects, question)


def sufficiency_flags(scene: SceneSpec, question: Question) -> tuple[bool, bool]:
    """(all hidden objects irrelevant, visible-subscene answer equals truth)."""
    obs = visible_set(scene)
    visible_ids = obs.visible_ids()
    hidden = [o for o in scene.objects
              if o.id not in visible_ids and o.id not in scene.held]
    all_irrelevant = not any(is_relevant(o, question) for o in hidden)
    truth = answer_oracle(scene, question)
    subscene = answer_over(obs.visible_objects(), question)
    return all_irrelevant, subscene == truth


def initial_sufficiency(scene: SceneSpec, question: Question) -> bool:
    """True iff the first observation alone settles the question.

    Requires both that every hidden object is irrelevant and that the answer
    computed over the visible subscene equals the full-scene ground truth.
    """
    irrelevant, answer_matches = sufficiency_flags(scene, question)
    return irrelevant and answer_matches


# --- template instantiation ---------------------------------------------------

def _counting_domain(rng: random.Random, truth: int, total: int) -> tuple[int, ...]:
    # Window of four consecutive integers containing the truth. The truth is
    # never the window minimum when it is positive, so systematic undercounts
    # always land on a foil.
    k = min(rng.randint(1, 3), truth)
    k = max(k, truth + 3 - total) if total >= 3 else k
    lo = max(truth - k, 0)
    return tuple(range(lo, lo + 4))


def _query_domain(rng: random.Random, attribute: str, truth: str) -> tuple[str, ...]:
    values = ATTRIBUTE_VALUES[attribute]
    foils = [v for v in values if v != truth]
    rng.shuffle(foils)
    n_foils = min(3, len(foils))
    domain = [truth] + foils[:n_foils]
    rng.shuffle(domain)
    return tuple(domain)


def _single_classes(rng: random.Random, objects) -> list[RestrictionClass]:
    """Candidate one- and two-attribute classes, scene-derived, shuffled."""
    singles: set[RestrictionClass] = set()
    pairs: set[RestrictionClass] = set()
    for obj in objects:
        attrs = {"shape": obj.shape, "color": obj.color,
                 "size": obj.size, "material": obj.material}
        for attr, value in attrs.items():
            singles.add(((attr, value),))
        for a1 in attrs:
            for a2 in attrs:
                if a1 < a2:
                    pairs.add(tuple(sorted(((a1, attrs[a1]), (a2, attrs[a2])))))
    candidates = sorted(singles) + sorted(pairs)
    rng.shuffle(candidates)
    return candidates


def _disjoint_pair(rng: random.Random, objects) -> tuple[RestrictionClass, RestrictionClass]:
    """Two single-attribute classes over the same attribute, different values."""
    attribute = rng.choice(("color", "shape", "material", "size"))
    present = sorted({getattr(o, attribute) for o in objects})
    if len(present) < 2:
        values = [v for v in ATTRIBUTE_VALUES[attribute] if v not in present]
        rng.shuffle(values)
        present = present + values[: 2 - len(present)]
    first, second = rng.sample(present, 2) if len(present) >= 2 else (present[0], present[0])
    return ((attribute, first),), ((attribute, second),)


def instantiate_question(scene: SceneSpec, qtype: str, seed: int) -> Question:
    """Deterministically ground a question template in the scene.

    Raises UnsatisfiableTemplate when the drawn template has no valid grounding
    (for example, no uniquely identified Query referent); callers retry with a
    fresh seed.
    """
    if qtype not in QUESTION_TYPES:
        raise QuestionError(f"unknown question type {qtype!r}")
    rng = random.Random(derive_seed("question", qtype, seed, scene.seed,
                                    scene.category, scene.scenario_type))
    objects = scene.objects
    total = len(objects)

    if qtype == "Query":
        for rclass in _single_classes(rng, objects):
            found = [o for o in objects if matches(o, rclass)]
            if len(found) != 1:
                continue
            referent = found[0]
            constrained = {attr for attr, _ in rclass}
            options = [a for a in ("color", "shape", "material", "size")
                       if a not in constrained]
            attribute = rng.choice(options)
            truth = getattr(referent, attribute)
            text = f"What is the {attribute} of the {describe_class(rclass, plural=False)}?"
            return Question(qtype=qtype, text=text, restriction_classes=(rclass,),
                            ground_truth=truth,
                            answer_domain=_query_domain(rng, attribute, truth),
                            queried_attribute=attribute)
        raise UnsatisfiableTemplate("no uniquely identified referent")

    if qtype == "Exist":
        candidates = _single_classes(rng, objects)
        if rng.random() < 0.3:
            # Occasionally ask about an absent class, for "no" ground truths.
            absent = [
                ((attr, value),)
                for attr, values in ATTRIBUTE_VALUES.items()
                for value in values
                if not any(matches(o, ((attr, value),)) for o in objects)
            ]
            rng.shuffle(absent)
            candidates = absent + candidates
        rclass = candidates[0]
        truth = "yes" if class_count(objects, rclass) > 0 else "no"
        text = f"Are there any {describe_class(rclass)}?"
        return Question(qtype=qtype, text=text, restriction_classes=(rclass,),
                        ground_truth=truth, answer_domain=YES_NO)

    if qtype == "Counting":
        for rclass in _single_classes(rng, objects):
            truth = class_count(objects, rclass)
            if truth == 0:
                continue
            text = f"How many {describe_class(rclass)} are there?"
            return Question(qtype=qtype, text=text, restriction_classes=(rclass,),
                            ground_truth=truth,
                            answer_domain=_counting_domain(rng, truth, total))
        raise UnsatisfiableTemplate("no non-empty counting class")

    if qtype == "Compare":
        class_a, class_b = _disjoint_pair(rng, objects)
        truth = _compare_word(class_count(objects, class_a),
                              class_count(objects, class_b))
        text = (f"How does the number of {describe_class(class_a)} compare to the "
                f"number of {describe_class(class_b)}: more, fewer, or equal?")
        return Question(qtype=qtype, text=text,
                        restriction_classes=(class_a, class_b),
                        ground_truth=truth, answer_domain=COMPARE_DOMAIN)

    if qtype == "MathCounting":
        class_a, class_b = _disjoint_pair(rng, objects)
        op = rng.choice(("sum", "difference"))
        a = class_count(objects, class_a)
        b = class_count(objects, class_b)
        truth = a + b if op == "sum" else abs(a - b)
        if op == "sum":
            text = (f"What is the total number of {describe_class(class_a)} and "
                    f"{describe_class(class_b)} combined?")
        else:
            text = (f"What is the difference between the number of "
                    f"{describe_class(class_a)} and the number of "
                    f"{describe_class(class_b)}?")
        return Question(qtype=qtype, text=text,
                        restriction_classes=(class_a, class_b),
                        ground_truth=truth,
                        answer_domain=_counting_domain(rng, truth, total), op=op)

    # MathCompare
    class_a, class_b = _disjoint_pair(rng, objects)
    total_count = class_count(objects, class_a) + class_count(objects, class_b)
    constant = max(0, total_count + rng.choice((-2, -1, 0, 1)))
    truth = "yes" if total_count > constant else "no"
    text = (f"Is the combined number of {describe_class(class_a)} and "
            f"{describe_class(class_b)} greater than {constant}?")
    return Question(qtype=qtype, text=text,
                    restriction_classes=(class_a, class_b),
                    ground_truth=truth, answer_domain=YES_NO, constant=constant)


# --- serialization -------------------------------------------------------------

def question_to_json(question: Question) -> dict:
    doc: dict = {
        "schema": QUESTION_SCHEMA,
        "qtype": question.qtype,
        "text": question.text,
        "restriction_classes": [[list(pair) for pair in rc]
                                for rc in question.restriction_classes],
        "ground_truth": question.ground_truth,
        "answer_domain": list(question.answer_domain),
    }
    if question.queried_attribute is not None:
        doc["queried_attribute"] = question.queried_attribute
    if question.op is not None:
        doc["op"] = question.op
    if question.constant is not None:
        doc["constant"] = question.constant
    return doc


def question_from_json(doc: dict) -> Question:
    if doc.get("schema") != QUESTION_SCHEMA:
        raise QuestionError(f"unsupported question schema {doc.get('schema')!r}")
    return Question(
        qtype=doc["qtype"],
        text=doc["text"],
        restriction_classes=tuple(
            tuple((pair[0], pair[1]) for pair in rc)
            for rc in doc["restriction_classes"]),
        ground_truth=doc["ground_truth"],
        answer_domain=tuple(doc["answer_domain"]),
        queried_attribute=doc.get("queried_attribute"),
        op=doc.get("op"),
        constant=doc.get("constant"),
    )

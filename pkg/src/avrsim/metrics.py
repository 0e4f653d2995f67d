"""Scoring: initial-sufficiency judgment, information-gain rate, final-answer
accuracy, and the aggregated per-category report."""

from __future__ import annotations

from dataclasses import dataclass

from avrsim.episode import EpisodeRecord
from avrsim.questions import Question, is_relevant
from avrsim.world import Observation

CATEGORY_ORDER = ("occlusion", "stack", "composite")
CSV_COLUMNS = ("agent", "category", "n", "acc_isj", "igr", "acc_fa")

# External model scores sometimes quoted next to harness results. They need
# proprietary models on the other side of the wire protocol, so they are shown
# as context only and never asserted anywhere.
REFERENCE_BASELINES = (("GPT-4o (external reference)", {"acc_fa_avg": 45.7}),)


def gain_predicate(before: Observation, after: Observation,
                   question: Question) -> bool:
    """True iff the step made at least one question-relevant object newly visible."""
    newly = after.visible_ids() - before.visible_ids()
    lookup = {obj.id: obj for obj, _ in after.visible}
    return any(is_relevant(lookup[i], question) for i in newly)


def score_isj(record: EpisodeRecord) -> bool:
    """Step-0 choice class against ground-truth sufficiency.

    A sufficient initial view calls for an answer option, an insufficient one
    for an action option; a malformed first reply scores False.
    """
    if not record.steps:
        raise ValueError("episode has no steps")
    first = record.steps[0].outcome.kind
    if first == "malformed":
        return False
    return (first == "answer") == record.initial_sufficient


def score_igr(record: EpisodeRecord, include_answer_steps: bool = False) -> float | None:
    """Information-gaining action steps over decision steps.

    The answer-terminating step is excluded from the denominator by default
    (the "igr" column); include_answer_steps=True gives the alternate
    "igr_incl_answers" reading. Episodes without a single action step yield
    None and are excluded from aggregation.
    """
    action_steps = [s for s in record.steps if s.outcome.kind == "action"]
    denominator = len(action_steps)
    if include_answer_steps:
        denominator += sum(1 for s in record.steps if s.outcome.kind == "answer")
    if denominator == 0:
        return None
    gains = sum(1 for s in action_steps if s.info_gain)
    return gains / denominator


def score_fa(record: EpisodeRecord) -> bool:
    """Final-answer correctness; step-cap and malformed terminations are wrong."""
    return (record.terminated_by == "answered"
            and record.final_answer == record.question.ground_truth)


@dataclass(frozen=True)
class Cell:
    n: int
    acc_isj: float | None
    igr: float | None
    igr_n: int
    acc_fa: float | None

    @staticmethod
    def from_records(records: list[EpisodeRecord],
                     include_answer_steps: bool = False) -> "Cell":
        n = len(records)
        if n == 0:
            return Cell(0, None, None, 0, None)
        isj = 100.0 * sum(score_isj(r) for r in records) / n
        fa = 100.0 * sum(score_fa(r) for r in records) / n
        ratios = [score_igr(r, include_answer_steps) for r in records]
        ratios = [r for r in ratios if r is not None]
        igr = 100.0 * sum(ratios) / len(ratios) if ratios else None
        return Cell(n, isj, igr, len(ratios), fa)


@dataclass(frozen=True)
class MetricsReport:
    cells: dict[tuple[str, str], Cell]   # (agent, category or "AVG") -> Cell
    agents: tuple[str, ...]
    igr_variant: str

    def cell(self, agent: str, category: str) -> Cell:
        return self.cells[(agent, category)]


def aggregate(labelled_episodes, include_answer_steps: bool = False) -> MetricsReport:
    """Group (agent_label, EpisodeRecord) pairs into a per-category report.

    The AVG column is the mean over all of an agent's episodes, which equals
    the category means weighted by their episode counts.
    """
    by_agent: dict[str, dict[str, list[EpisodeRecord]]] = {}
    for label, record in labelled_episodes:
        by_agent.setdefault(label, {}).setdefault(record.category, []).append(record)
    cells: dict[tuple[str, str], Cell] = {}
    for agent in sorted(by_agent):
        everything: list[EpisodeRecord] = []
        for category in CATEGORY_ORDER:
            records = by_agent[agent].get(category, [])
            everything.extend(records)
            cells[(agent, category)] = Cell.from_records(records, include_answer_steps)
        cells[(agent, "AVG")] = Cell.from_records(everything, include_answer_steps)
    return MetricsReport(
        cells=cells, agents=tuple(sorted(by_agent)),
        igr_variant="igr_incl_answers" if include_answer_steps else "igr")


def _fmt(value: float | None) -> str:
    return "" if value is None else repr(value)


def report_to_csv(report: MetricsReport) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for agent in report.agents:
        for category in CATEGORY_ORDER + ("AVG",):
            cell = report.cell(agent, category)
            lines.append(",".join([
                agent, category, str(cell.n),
                _fmt(cell.acc_isj), _fmt(cell.igr), _fmt(cell.acc_fa)]))
    return "\n".join(lines) + "\n"


def _cell_text(value: float | None) -> str:
    return "—" if value is None else f"{value:.1f}"


def report_to_table(report: MetricsReport) -> str:
    headers = ["agent", "category", "n", "acc_isj", report.igr_variant,
               "igr_n", "acc_fa"]
    rows = []
    for agent in report.agents:
        for category in CATEGORY_ORDER + ("AVG",):
            cell = report.cell(agent, category)
            rows.append([agent, category, str(cell.n), _cell_text(cell.acc_isj),
                         _cell_text(cell.igr), str(cell.igr_n),
                         _cell_text(cell.acc_fa)])
    widths = [max(len(headers[i]), *(len(row[i]) for row in rows))
              for i in range(len(headers))]
    def line(cells):
        return "  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells))
    out = [line(headers), line(["-" * w for w in widths])]
    out.extend(line(row) for row in rows)
    for name, values in REFERENCE_BASELINES:
        pairs = ", ".join(f"{k}={v}" for k, v in values.items())
        out.append(f"reference only (requires an external model): {name}: {pairs}")
    return "\n".join(out) + "\n"

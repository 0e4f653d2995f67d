#!/usr/bin/env python3
"""Independent metrics recomputation from episodes.jsonl files.

Reads raw episode logs and rebuilds the report CSV from scratch: info-gain
flags are recounted from consecutive observation diffs and the question's
restriction classes, answer correctness from the recorded ground truth, and
sufficiency judgments from the step-0 outcome kind. Deliberately imports
nothing from the harness package so it can cross-check its reports.

Usage: recompute_report.py LABEL=episodes.jsonl [LABEL=...] > report.csv
"""

import json
import sys

CATEGORY_ORDER = ("occlusion", "stack", "composite")
CSV_COLUMNS = ("agent", "category", "n", "acc_isj", "igr", "acc_fa")


def matches(obj, rclass):
    return all(obj[attr] == value for attr, value in rclass)


def relevant(obj, question):
    return any(matches(obj, rclass) for rclass in question["restriction_classes"])


def step_gain(record, step, question):
    after_index = step["next_observation"]
    after = record["observations"][after_index]
    before = record["observations"][after_index - 1]
    before_ids = {entry["object"]["id"] for entry in before["visible"]}
    newly = [entry["object"] for entry in after["visible"]
             if entry["object"]["id"] not in before_ids]
    return any(relevant(obj, question) for obj in newly)


def score_episode(record):
    question = record["question"]
    sufficient = record["initial_sufficiency"]["sufficient"]
    steps = record["steps"]

    first_kind = steps[0]["outcome"]["kind"]
    if first_kind == "malformed":
        isj = False
    else:
        isj = (first_kind == "answer") == sufficient

    fa = (record["terminated_by"] == "answered"
          and record["final_answer"] == question["ground_truth"])

    action_steps = [s for s in steps if s["outcome"]["kind"] == "action"]
    gain_flags = [step_gain(record, s, question) for s in action_steps]
    flag_mismatches = sum(1 for s, g in zip(action_steps, gain_flags)
                          if bool(s.get("info_gain")) != g)
    igr = (sum(gain_flags) / len(action_steps)) if action_steps else None
    return isj, igr, fa, flag_mismatches


def load(path):
    with open(path, "r", encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def fmt(value):
    return "" if value is None else repr(value)


def main(argv):
    runs = []
    for arg in argv:
        label, _, path = arg.partition("=")
        if not path:
            sys.stderr.write(f"bad argument {arg!r}; expected LABEL=path\n")
            return 2
        runs.append((label, path))

    rows = [",".join(CSV_COLUMNS)]
    total_flag_mismatches = 0
    for label, path in sorted(runs):
        records = load(path)
        by_category = {}
        for record in records:
            by_category.setdefault(record["category"], []).append(record)
        buckets = [(cat, by_category.get(cat, [])) for cat in CATEGORY_ORDER]
        buckets.append(("AVG", [r for cat in CATEGORY_ORDER
                                for r in by_category.get(cat, [])]))
        for category, group in buckets:
            if not group:
                rows.append(",".join([label, category, "0", "", "", ""]))
                continue
            scored = [score_episode(r) for r in group]
            total_flag_mismatches += sum(s[3] for s in scored)
            n = len(group)
            isj = 100.0 * sum(s[0] for s in scored) / n
            fa = 100.0 * sum(s[2] for s in scored) / n
            ratios = [s[1] for s in scored if s[1] is not None]
            igr = 100.0 * sum(ratios) / len(ratios) if ratios else None
            rows.append(",".join([label, category, str(n),
                                  fmt(isj), fmt(igr), fmt(fa)]))
    sys.stdout.write("\n".join(rows) + "\n")
    sys.stderr.write(f"info_gain flag mismatches: {total_flag_mismatches}\n")
    return 0 if total_flag_mismatches == 0 else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))

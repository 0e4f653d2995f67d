"""Command-line surface: generate | run | report | export | replay | play.

Exit codes: 0 success, 1 usage error, 2 aborted episodes, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from avrsim import episode as ep
from avrsim import metrics as mx
from avrsim.agents import AGENT_NAMES, ExternalAgent, ScriptedAgent, make_agent
from avrsim.questions import question_from_json, question_to_json
from avrsim.suite import SuiteConfig, build_suite
from avrsim.world import canonical_json, derive_seed, scene_to_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORTED = 2
EXIT_INVARIANT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _parse_types(text: str) -> tuple[int, ...]:
    values: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        elif part:
            values.append(int(part))
    if not values or not all(0 <= v <= 9 for v in values):
        raise ValueError(f"scenario types must lie in 0..9: {text!r}")
    return tuple(values)


def _suite_config(args) -> SuiteConfig:
    return SuiteConfig(
        master_seed=args.seed,
        count_per_category=args.count,
        categories=tuple(args.category.split(",")),
        scenario_types=_parse_types(args.types),
        t_max=args.tmax,
    )


def _add_suite_flags(parser) -> None:
    parser.add_argument("--category", default="occlusion,stack,composite",
                        help="comma-separated scenario categories")
    parser.add_argument("--types", default="0-9",
                        help="scenario types, e.g. '0-9' or '0,3,7'")
    parser.add_argument("--count", type=int, default=100,
                        help="episodes per category")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--tmax", type=int, default=ep.DEFAULT_T_MAX,
                        help="action-step cap per episode")


def _spec_to_doc(spec: ep.EpisodeSpec) -> dict:
    doc = scene_to_json(spec.build_scene())
    doc["question"] = question_to_json(spec.question)
    doc["episode_id"] = spec.episode_id
    doc["option_seed"] = spec.option_seed
    doc["t_max"] = spec.t_max
    return doc


def _spec_from_doc(doc: dict) -> ep.EpisodeSpec:
    return ep.EpisodeSpec(
        episode_id=doc["episode_id"],
        category=doc["category"],
        scenario_type=doc["scenario_type"],
        scene_seed=doc["seed"],
        question=question_from_json(doc["question"]),
        option_seed=doc["option_seed"],
        t_max=doc["t_max"],
    )


def cmd_generate(args) -> int:
    config = _suite_config(args)
    specs = build_suite(config)
    scenes_dir = os.path.join(args.out, "scenes")
    os.makedirs(scenes_dir, exist_ok=True)
    manifest = []
    for spec in specs:
        name = f"{spec.episode_id}.json"
        path = os.path.join(scenes_dir, name)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(canonical_json(_spec_to_doc(spec)) + "\n")
        manifest.append({
            "episode_id": spec.episode_id,
            "category": spec.category,
            "scenario_type": spec.scenario_type,
            "scene_seed": spec.scene_seed,
            "qtype": spec.question.qtype,
            "file": f"scenes/{name}",
        })
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as handle:
        handle.write(canonical_json({"schema": "manifest/1", "episodes": manifest}) + "\n")
    print(f"wrote {len(specs)} scene files to {scenes_dir}")
    return EXIT_OK


def _load_specs(args) -> list[ep.EpisodeSpec]:
    if args.scenes:
        manifest_path = os.path.join(args.scenes, "manifest.json")
        with open(manifest_path, "r", encoding="utf-8") as handle:
            manifest = json.load(handle)
        specs = []
        for row in manifest["episodes"]:
            with open(os.path.join(args.scenes, row["file"]), "r", encoding="utf-8") as handle:
                specs.append(_spec_from_doc(json.load(handle)))
        return specs
    return build_suite(_suite_config(args))


def _episode_worker(payload) -> dict:
    doc, agent_name, agent_seed, endpoint, render_images = payload
    spec = _spec_from_doc(doc)
    record, aborted = _run_one(spec, agent_name, agent_seed, endpoint, render_images)
    return {"record": ep.episode_to_json(record) if record else None,
            "aborted": aborted, "episode_id": spec.episode_id}


def _run_one(spec, agent_name, agent_seed, endpoint, render_images):
    render_image = None
    if render_images:
        from avrsim.render import render_observation_b64
        render_image = render_observation_b64
    if endpoint:
        from avrsim.protocol import AgentEndpointSession
        session = AgentEndpointSession(endpoint)
        agent = ExternalAgent(session)
    else:
        agent = make_agent(
            agent_name, question=spec.question, agent_seed=agent_seed,
            ground_truth=(spec.question.ground_truth
                          if agent_name == "omniscient" else None))
    try:
        record = ep.run_episode(spec, agent, render_image=render_image)
        return record, None
    except ep.EpisodeAborted as exc:
        return None, str(exc)
    finally:
        if endpoint:
            session.close()


def _write_run_outputs(out_dir, config_doc, records, aborted) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w", encoding="utf-8") as handle:
        handle.write(canonical_json(config_doc) + "\n")
    ep.save_episodes(os.path.join(out_dir, "episodes.jsonl"), records)
    ep.save_avr_core(os.path.join(out_dir, "avrcore.jsonl"), records)
    if aborted:
        with open(os.path.join(out_dir, "aborted.jsonl"), "w", encoding="utf-8") as handle:
            for item in sorted(aborted, key=lambda d: d["episode_id"]):
                handle.write(canonical_json(item) + "\n")


def cmd_run(args) -> int:
    specs = _load_specs(args)
    agent_name = args.agent if not args.endpoint else "external"
    config_doc = {
        "schema": "runconfig/1",
        "agent": agent_name,
        "endpoint": bool(args.endpoint),
        "category": args.category,
        "types": args.types,
        "count": args.count,
        "seed": args.seed,
        "tmax": args.tmax,
        "igr_variant": args.igr_variant,
        "render_images": args.render_images,
        "jobs": args.jobs,
    }
    jobs = 1 if args.endpoint else max(1, args.jobs)

    records = []
    aborted = []

    def handle(result):
        if result["aborted"] is not None:
            aborted.append({"episode_id": result["episode_id"],
                            "reason": result["aborted"]})
        else:
            records.append(ep.episode_from_json(result["record"]))

    payloads = [
        (_spec_to_doc(spec), agent_name,
         derive_seed("agent", agent_name, args.seed, spec.episode_id),
         args.endpoint, args.render_images)
        for spec in specs
    ]
    if jobs == 1:
        for payload in payloads:
            handle(_episode_worker(payload))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for result in pool.map(_episode_worker, payloads):
                handle(result)

    _write_run_outputs(args.out, config_doc, records, aborted)
    print(f"ran {len(records)} episodes ({len(aborted)} aborted) -> {args.out}")
    if aborted:
        for item in aborted:
            print(f"  aborted {item['episode_id']}: {item['reason']}", file=sys.stderr)
        return EXIT_ABORTED
    return EXIT_OK


def cmd_report(args) -> int:
    labelled = []
    for run_dir in args.runs:
        config_path = os.path.join(run_dir, "config.json")
        label = os.path.basename(os.path.normpath(run_dir))
        if os.path.exists(config_path):
            with open(config_path, "r", encoding="utf-8") as handle:
                label = json.load(handle).get("agent", label)
        for record in ep.load_episodes(os.path.join(run_dir, "episodes.jsonl")):
            labelled.append((label, record))
    report = mx.aggregate(labelled,
                          include_answer_steps=args.igr_variant == "incl-answers")
    csv_text = mx.report_to_csv(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(csv_text)
    sys.stdout.write(mx.report_to_table(report))
    return EXIT_OK


def cmd_export(args) -> int:
    records = ep.load_episodes(os.path.join(args.run, "episodes.jsonl"))
    out = args.out or os.path.join(args.run, "avrcore.jsonl")
    ep.save_avr_core(out, records)
    print(f"exported {len(records)} episodes -> {out}")
    return EXIT_OK


def cmd_replay(args) -> int:
    records = ep.load_episodes(os.path.join(args.run, "episodes.jsonl"))
    replayed = []
    for record in records:
        spec = ep.EpisodeSpec(
            episode_id=record.episode_id, category=record.category,
            scenario_type=record.scenario_type, scene_seed=record.scene_seed,
            question=record.question, option_seed=record.option_seed,
            t_max=record.t_max)
        agent = ScriptedAgent([step.raw_text for step in record.steps])
        replayed.append(ep.run_episode(spec, agent))
    os.makedirs(args.out, exist_ok=True)
    ep.save_episodes(os.path.join(args.out, "episodes.jsonl"), replayed)
    original = [ep.episode_to_json(r) for r in records]
    fresh = [ep.episode_to_json(r) for r in replayed]
    if original != fresh:
        print("replay mismatch: transcripts do not reproduce the records",
              file=sys.stderr)
        return EXIT_INVARIANT
    print(f"replayed {len(replayed)} episodes byte-identically -> {args.out}")
    return EXIT_OK


class _HumanAgent:
    """Reads decisions from standard input; free-text lines become notes."""

    name = "human"

    def __init__(self, stdin, stdout):
        self.stdin = stdin
        self.stdout = stdout

    def respond(self, context) -> str:
        self.stdout.write(context.prompt + "\n")
        self.stdout.write("Type a letter (or a tagged response); other lines "
                          "are kept as notes. Finish with the choice.\n")
        self.stdout.flush()
        notes: list[str] = []
        while True:
            line = self.stdin.readline()
            if not line:
                return "\n".join(notes)  # EOF: malformed by construction
            line = line.strip()
            if not line:
                continue
            if "<answer>" in line or "<action>" in line:
                notes.append(line)
                return "\n".join(notes)
            if len(line) == 1 and line.upper().isalpha():
                option = context.options.by_letter(line.upper())
                if option is not None:
                    tag = "answer" if option.kind == "answer" else "action"
                    notes.append(f"<{tag}>{option.letter}</{tag}>")
                    return "\n".join(notes)
            notes.append(line)


def cmd_play(args) -> int:
    specs = _load_specs(args)
    records = []
    for spec in specs:
        agent = _HumanAgent(sys.stdin, sys.stdout)
        record = ep.run_episode(spec, agent)
        record = ep.EpisodeRecord(**{**record.__dict__, "source": "human"})
        records.append(record)
        print(f"episode {spec.episode_id}: terminated_by={record.terminated_by}, "
              f"final answer {record.final_answer!r} "
              f"(truth {spec.question.ground_truth!r})")
    config_doc = {"schema": "runconfig/1", "agent": "human",
                  "category": args.category, "types": args.types,
                  "count": args.count, "seed": args.seed, "tmax": args.tmax,
                  "igr_variant": "action-steps", "render_images": False,
                  "jobs": 1, "endpoint": False}
    _write_run_outputs(args.out, config_doc, records, [])
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="avrsim",
                     description="Active visual reasoning simulator and harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="write scene/question files")
    _add_suite_flags(p_gen)
    p_gen.add_argument("--out", required=True)
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="run episodes with an agent")
    _add_suite_flags(p_run)
    p_run.add_argument("--scenes", help="directory from 'generate' (overrides suite flags)")
    p_run.add_argument("--agent", default="eig_oracle",
                       help=f"one of: {', '.join(AGENT_NAMES)}")
    p_run.add_argument("--endpoint",
                       default=os.environ.get("AVR_AGENT_ENDPOINT") or None,
                       help="external agent endpoint host:port "
                            "(or AVR_AGENT_ENDPOINT)")
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--jobs", type=int, default=1)
    p_run.add_argument("--igr-variant", choices=("action-steps", "incl-answers"),
                       default="action-steps")
    p_run.add_argument("--render-images", action="store_true")
    p_run.set_defaults(func=cmd_run)

    p_rep = sub.add_parser("report", help="aggregate runs into a metrics report")
    p_rep.add_argument("--runs", nargs="+", required=True)
    p_rep.add_argument("--out", help="CSV output path")
    p_rep.add_argument("--igr-variant", choices=("action-steps", "incl-answers"),
                       default="action-steps")
    p_rep.set_defaults(func=cmd_report)

    p_exp = sub.add_parser("export", help="export step records from a run")
    p_exp.add_argument("--run", required=True)
    p_exp.add_argument("--out")
    p_exp.set_defaults(func=cmd_export)

    p_replay = sub.add_parser("replay", help="re-run episodes from transcripts")
    p_replay.add_argument("--run", required=True)
    p_replay.add_argument("--out", required=True)
    p_replay.set_defaults(func=cmd_replay)

    p_play = sub.add_parser("play", help="interactive human episode")
    _add_suite_flags(p_play)
    p_play.add_argument("--out", required=True)
    p_play.set_defaults(func=cmd_play)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except ep.EpisodeError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

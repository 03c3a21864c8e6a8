"""Command-line entry points: chat, select-skill, parse, eval, serve."""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources

from .backends import EchoBackend, LMBackend, LookupBackend, RemoteBackend, UniformBackend
from .errors import ConfigurationError, PromptBotError
from .harness import EvalConfig, TaskConfig, run_eval, report_text, write_report
from .metrics import detect_entities
from .model import Dialogue, load_dialogues, serialize_path, serialize_state
from .orchestrator import PARSE_KINDS, Orchestrator, Session, default_config
from .parsing import constrained_kg_decode, parse_dsl, track_state
from .prompts import PromptText, SHOT_SEPARATOR, default_templates, render_shot
from .retrieval import KnowledgeGraph
from .selector import SkillPromptSet, evaluate_selector, select_skill, SelectionSample
from .service import SessionStore, serve

FIXTURES = resources.files("promptbot") / "fixtures"

PARSE_TASKS = {
    "wow": "wow_parse",
    "wit": "wit_parse",
    "msc": "msc_parse",
    "mwoz": "mwoz_dst",
    "dialkg": "dialkg_parse",
}

EVAL_KINDS = {
    "dd": ("generation", ["f1", "bleu4", "rouge_l"]),
    "ed": ("generation", ["f1", "bleu4", "rouge_l"]),
    "persona": ("generation", ["f1", "bleu4", "rouge_l"]),
    "ic": ("generation", ["f1", "bleu4", "rouge_l"]),
    "cg_ic": ("generation", ["f1", "bleu4", "rouge_l"]),
    "msc": ("generation", ["f1", "bleu4", "rouge_l"]),
    "wow": ("generation", ["f1", "bleu4", "rouge_l", "kf1"]),
    "wit": ("generation", ["f1", "bleu4", "rouge_l", "kf1"]),
    "dialkg": ("generation", ["f1", "bleu4", "rouge_l", "kf1"]),
    "smd": ("generation", ["f1", "bleu4", "rouge_l", "entity_f1"]),
    "mwoz_dst": ("dst", []),
    "wow_parse": ("query_parse", []),
    "wit_parse": ("query_parse", []),
    "msc_parse": ("query_parse", []),
    "dialkg_parse": ("kg_parse", []),
}


def make_backend(args: argparse.Namespace) -> LMBackend:
    if getattr(args, "backend", None):
        return RemoteBackend(args.backend)
    mock = getattr(args, "mock", None)
    if mock:
        kind, _, arg = mock.partition(":")
        if kind == "uniform":
            return UniformBackend(vocab_size=int(arg or 50))
        if kind == "echo":
            with open(arg, encoding="utf-8") as fh:
                return EchoBackend(script=json.load(fh))
        if kind == "lookup":
            with open(arg, encoding="utf-8") as fh:
                spec = json.load(fh)
            return LookupBackend(
                table=spec.get("table", {}),
                generations=spec.get("generations", {}),
                default_prob=spec.get("default_prob", 1e-6),
            )
        raise ConfigurationError(f"unknown mock spec {mock!r}")
    raise ConfigurationError("pass --backend URL or --mock {uniform,echo,lookup}[:arg]")


def _load_prompt_dir(path: str) -> SkillPromptSet:
    prompt_set = SkillPromptSet()
    for name in sorted(os.listdir(path)):
        if not name.endswith(".txt"):
            continue
        with open(os.path.join(path, name), encoding="utf-8") as fh:
            text = fh.read().rstrip("\n")
        prompt_set.add(
            name[:-4],
            PromptText(text=text, shot_count=text.count(SHOT_SEPARATOR) + 1,
                       token_count=len(text.split())),
        )
    if not prompt_set.prompts:
        raise ConfigurationError(f"no .txt prompt files under {path}")
    return prompt_set


def cmd_select_skill(args: argparse.Namespace) -> int:
    backend = make_backend(args)
    prompts = _load_prompt_dir(args.prompts)
    if args.eval_samples:
        dialogues = load_dialogues(args.eval_samples)
        samples = [SelectionSample(history=d, label=d.task) for d in dialogues]
        report = evaluate_selector(samples, prompts, backend)
        payload = {
            "accuracy": report.accuracy,
            "macro_f1": report.macro_f1,
            "confusion": report.confusion,
        }
        out = json.dumps(payload, indent=2, sort_keys=True)
        print(out)
        if args.report:
            with open(args.report, "w", encoding="utf-8") as fh:
                fh.write(out + "\n")
        return 0
    history = load_dialogues(args.history)[0]
    result = select_skill(history, prompts, backend)
    print(result.label)
    for label in prompts.labels():
        print(f"{label}\t{result.scores[label]:.6f}")
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump({"label": result.label, "scores": result.scores}, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _parse_prompt(parser_id: str, shots: int, pool_path: str | None) -> PromptText:
    if pool_path:
        pool = load_dialogues(pool_path)
    else:
        pool = load_dialogues(str(FIXTURES / "dialogues" / f"{parser_id}.jsonl"))
    if shots > len(pool):
        raise ConfigurationError(f"asked for {shots} shots, pool has {len(pool)}")
    templates = default_templates()
    rendered = [render_shot(d, templates[parser_id]) for d in pool[:shots]]
    text = SHOT_SEPARATOR.join(rendered)
    return PromptText(text=text, shot_count=len(rendered), token_count=len(text.split()))


def cmd_parse(args: argparse.Namespace) -> int:
    backend = make_backend(args)
    parser_id = PARSE_TASKS[args.task]
    template = default_templates()[parser_id]
    prompt = _parse_prompt(parser_id, args.shots, args.prompt_dialogues)
    dialogues = load_dialogues(args.infile)
    with open(args.outfile, "w", encoding="utf-8") as fh:
        for dialogue in dialogues:
            record: dict = {"id": dialogue.id, "task": parser_id}
            if parser_id == "mwoz_dst":
                tracked = track_state(dialogue, template, prompt, backend)
                record["states"] = [serialize_state(s) for s in tracked.states]
                record["updates"] = [serialize_state(u) for u in tracked.updates]
                record["diagnostics"] = tracked.diagnostics
            elif parser_id == "dialkg_parse":
                kg = KnowledgeGraph.from_tsv(args.kg or str(FIXTURES / "kg.tsv"))
                decode = constrained_kg_decode(dialogue, template, prompt, backend, kg)
                record["paths"] = [serialize_path(p) for p in decode.paths]
                record["chosen"] = serialize_path(decode.chosen) if decode.chosen else None
            else:
                kind = PARSE_KINDS[parser_id]
                result = parse_dsl(dialogue, template, kind, prompt, backend)
                record["kind"] = result.kind
                record["payload"] = result.payload
                record["raw"] = result.raw
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    print(f"wrote {len(dialogues)} parses to {args.outfile}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    backend = make_backend(args)
    if args.task not in EVAL_KINDS:
        raise ConfigurationError(f"unknown task {args.task!r}; known: {sorted(EVAL_KINDS)}")
    kind, metrics = EVAL_KINDS[args.task]
    templates = default_templates()
    test = load_dialogues(args.data or str(FIXTURES / "dialogues" / f"{args.task}.jsonl"))
    validation = load_dialogues(args.validation) if args.validation else test
    global_entities = None
    if "entity_f1" in metrics:
        global_entities = json.loads((FIXTURES / "smd_entities.json").read_text("utf-8"))
    kg = None
    if kind == "kg_parse":
        kg = KnowledgeGraph.from_tsv(args.kg or str(FIXTURES / "kg.tsv"))
    task = TaskConfig(
        task=args.task,
        kind=kind,
        template=templates[args.task],
        test=test,
        validation=validation,
        metrics=metrics,
        global_entities=global_entities,
        kg=kg,
    )
    shots = [int(s) for s in args.shots.split(",")]
    progress = args.progress or (args.out + ".progress.jsonl")
    config = EvalConfig(
        task=task, shots=shots, runs=args.runs, seed=args.seed, progress_path=progress
    )
    report = run_eval(config, backend)
    write_report(report, args.out)
    print(report_text(report), end="")
    return 0


def cmd_chat(args: argparse.Namespace) -> int:
    backend = make_backend(args)
    orchestrator = Orchestrator(default_config(), backend)
    if args.pin_skill:
        orchestrator._skill(args.pin_skill)
    session = Session.new(orchestrator.config, pinned_skill=args.pin_skill)
    store = SessionStore(args.store) if args.store else None
    if store:
        store.save(session)
    print("type a message (ctrl-d to exit)")
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        try:
            bundle = orchestrator.step(session, text, style=args.style)
        except PromptBotError as exc:
            print(f"[error] {exc}")
            continue
        badge = bundle.selected_skill + (f"/{bundle.style}" if bundle.style else "")
        print(f"[{badge}] {bundle.response}")
        if bundle.retrieved:
            print(f"  (knowledge: {bundle.retrieved['provenance']})")
        if store:
            store.save(session)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    backend = make_backend(args)
    orchestrator = Orchestrator(default_config(), backend)
    serve(
        orchestrator,
        SessionStore(args.store),
        host=args.host,
        port=args.port,
        acknowledge_remote=args.acknowledge_remote,
        static_dir=args.static,
    )
    return 0


def cmd_serve_backend(args: argparse.Namespace) -> int:
    import uvicorn

    from .backend_api import create_backend_app
    from .service import check_bind

    check_bind(args.host, args.acknowledge_remote)
    app = create_backend_app(make_backend(args))
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _add_backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", help="base URL of a wire-protocol backend")
    parser.add_argument("--mock", help="in-process mock: uniform[:V], echo:script.json, lookup:spec.json")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="promptbot")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select-skill", help="rank skills for a dialogue history")
    p.add_argument("--history", help="JSONL file; the first dialogue is scored")
    p.add_argument("--prompts", required=True, help="directory of <label>.txt prompt files")
    p.add_argument("--eval-samples", help="JSONL of dialogues whose task field is the gold label")
    p.add_argument("--report", help="write a JSON report here")
    _add_backend_args(p)
    p.set_defaults(func=cmd_select_skill)

    p = sub.add_parser("parse", help="run a conversational parser over dialogues")
    p.add_argument("--task", required=True, choices=sorted(PARSE_TASKS))
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", dest="outfile", required=True)
    p.add_argument("--prompt-dialogues", help="JSONL pool for prompt shots")
    p.add_argument("--kg", help="graph TSV (dialkg only)")
    _add_backend_args(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("eval", help="few-shot evaluation with seeded runs")
    p.add_argument("--task", required=True)
    p.add_argument("--shots", default="0,1")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--data", help="test JSONL (defaults to the packaged fixture)")
    p.add_argument("--validation", help="shot pool JSONL (defaults to --data)")
    p.add_argument("--kg", help="graph TSV for kg parse tasks")
    p.add_argument("--out", required=True)
    p.add_argument("--progress", help="progress log path (default: <out>.progress.jsonl)")
    _add_backend_args(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("chat", help="interactive REPL")
    p.add_argument("--pin-skill")
    p.add_argument("--style")
    p.add_argument("--store", help="directory for session persistence")
    _add_backend_args(p)
    p.set_defaults(func=cmd_chat)

    p = sub.add_parser("serve", help="run the chat HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--store", default="./sessions")
    p.add_argument("--static", help="directory of built UI assets to serve")
    p.add_argument("--acknowledge-remote", action="store_true",
                   help="required to bind beyond loopback")
    _add_backend_args(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("serve-backend", help="expose a mock backend over the wire protocol")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8081)
    p.add_argument("--acknowledge-remote", action="store_true")
    _add_backend_args(p)
    p.set_defaults(func=cmd_serve_backend)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PromptBotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Seeded few-shot evaluation over dialogue datasets.

A run is identified by (task, shot count, run index). Shot sampling depends
only on the seed and the run index, every finished example is appended to a
JSONL progress log, and reports are rebuilt from that log, so an interrupted
evaluation resumed later produces a byte-identical report.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import dataclass, field
from typing import Callable

from .backends import GenerationRequest, LMBackend
from .errors import BackendTransportError, ConfigurationError, GenerationFault
from .metrics import (
    bleu4,
    detect_entities,
    entity_f1,
    jga,
    path_recall_at_k,
    rouge_l,
    rprec,
    summarize_runs,
    unigram_f1,
)
from .model import Dialogue, user_turn_indices
from .parsing import constrained_kg_decode, parse_dsl, track_state
from .prompts import SHOT_SEPARATOR, PromptText, Template, assemble_prompt, render_shot
from .retrieval import KnowledgeGraph

GENERATION_METRICS = {"f1": unigram_f1, "bleu4": bleu4, "rouge_l": rouge_l}

PATH_KS = (1, 5, 25)


@dataclass
class TaskConfig:
    task: str
    kind: str  # generation | dst | query_parse | kg_parse
    template: Template
    test: list[Dialogue]
    validation: list[Dialogue]
    metrics: list[str] = field(default_factory=lambda: ["f1"])
    global_entities: list[str] | None = None
    kg: KnowledgeGraph | None = None


@dataclass
class EvalConfig:
    task: TaskConfig
    shots: list[int]
    runs: int
    seed: int
    max_tokens: int = 150
    progress_path: str | None = None


def sample_shots(
    validation: list[Dialogue], k: int, seed: int, run_index: int
) -> list[Dialogue]:
    """Deterministic in (seed, run_index); order within the sample is stable."""
    if k > len(validation):
        raise ConfigurationError(
            f"asked for {k} shots but validation pool has {len(validation)}"
        )
    rng = random.Random(f"{seed}:{run_index}")
    return rng.sample(validation, k) if k else []


def _target_turn_indices(dialogue: Dialogue, template: Template) -> list[int]:
    """Turns the model is asked to produce: assistant turns, or every turn
    after the first for templates where any speaker can be completed."""
    if template.target == "any":
        return list(range(1, len(dialogue.turns)))
    user_side = set(user_turn_indices(dialogue))
    return [i for i in range(len(dialogue.turns)) if i not in user_side]


def _prefix(dialogue: Dialogue, index: int) -> Dialogue:
    return Dialogue(
        id=dialogue.id,
        task=dialogue.task,
        turns=dialogue.turns[: index + 1],
        personas_user=dialogue.personas_user,
        personas_assistant=dialogue.personas_assistant,
        kb=dialogue.kb,
        image_caption=dialogue.image_caption,
    )


def _grounding_text(dialogue: Dialogue, target: int) -> str | None:
    """Knowledge attached to the turn directly before the target, if any."""
    if target > 0 and dialogue.turns[target - 1].knowledge:
        return " ".join(item.rendered() for item in dialogue.turns[target - 1].knowledge)
    return None


def _fold_gold_state(dialogue: Dialogue, upto: int) -> dict[str, str]:
    state: dict[str, str] = {}
    for count, index in enumerate(user_turn_indices(dialogue)):
        if count > upto:
            break
        state.update(dialogue.turns[index].state_update or {})
    return state


class _Runner:
    """Evaluates single examples for one (shot count, run) cell."""

    def __init__(self, config: EvalConfig, shots_rendered: list[str], backend: LMBackend):
        self.config = config
        self.task = config.task
        self.shots = shots_rendered
        self.backend = backend
        self.budget = backend.descriptor().context_window - config.max_tokens

    def _assemble(self, query: str) -> tuple[PromptText, PromptText]:
        """(full prompt with query, prompt portion alone) within budget."""
        assembled = assemble_prompt(self.shots, query, self.budget, self.backend.count_tokens)
        kept = self.shots[len(self.shots) - assembled.shot_count :] if assembled.shot_count else []
        prompt_only = SHOT_SEPARATOR.join(kept)
        return assembled, PromptText(
            text=prompt_only,
            shot_count=len(kept),
            token_count=self.backend.count_tokens(prompt_only),
        )

    def generation_example(self, dialogue: Dialogue, target: int) -> dict[str, float]:
        query = render_shot(dialogue, self.task.template, upto_turn=target)
        assembled, _ = self._assemble(query)
        raw = self.backend.generate(
            GenerationRequest(context=assembled.text, max_tokens=self.config.max_tokens)
        )
        prediction = raw.strip()
        gold = dialogue.turns[target].text
        values: dict[str, float] = {}
        for name in self.task.metrics:
            if name in GENERATION_METRICS:
                values[name] = GENERATION_METRICS[name](prediction, gold)
            elif name == "kf1":
                knowledge = _grounding_text(dialogue, target)
                if knowledge is not None:
                    values[name] = unigram_f1(prediction, knowledge)
            elif name == "entity_f1":
                if self.task.global_entities:
                    gold_entities = detect_entities(gold, self.task.global_entities)
                    values[name] = entity_f1(prediction, gold_entities, self.task.global_entities)
            else:
                raise ConfigurationError(f"unknown metric {name!r}")
        return values

    def dst_example(self, dialogue: Dialogue) -> dict[str, float]:
        first_point = render_shot(
            dialogue, self.task.template, upto_turn=user_turn_indices(dialogue)[0]
        )
        _, prompt = self._assemble(first_point)
        tracked = track_state(dialogue, self.task.template, prompt, self.backend)
        gold = [_fold_gold_state(dialogue, i) for i in range(len(tracked.states))]
        return jga(tracked.states, gold)

    def query_example(self, dialogue: Dialogue, index: int) -> dict[str, float]:
        prefix = _prefix(dialogue, index)
        point = render_shot(prefix, self.task.template, upto_turn=index, strict=False)
        _, prompt = self._assemble(point)
        result = parse_dsl(
            prefix, self.task.template, "search_query", prompt, self.backend,
            max_tokens=self.config.max_tokens,
        )
        gold = dialogue.turns[index].query or ""
        return {"rprec": rprec(result.raw.strip(), gold)}

    def kg_example(self, dialogue: Dialogue, index: int) -> dict[str, float]:
        if self.task.kg is None:
            raise ConfigurationError("kg_parse tasks need a knowledge graph")
        prefix = _prefix(dialogue, index)
        point = render_shot(prefix, self.task.template, upto_turn=index, strict=False)
        _, prompt = self._assemble(point)
        decode = constrained_kg_decode(
            prefix, self.task.template, prompt, self.backend, self.task.kg,
            max_tokens=self.config.max_tokens,
        )
        gold = dialogue.turns[index].gold_path
        assert gold is not None
        return dict(path_recall_at_k(decode.paths, gold, PATH_KS))

    def examples(self) -> list[tuple[str, Callable[[], dict[str, float]]]]:
        """Stable (example_id, thunk) pairs for this task."""
        out: list[tuple[str, Callable[[], dict[str, float]]]] = []
        if self.task.kind == "generation":
            for dialogue in self.task.test:
                for target in _target_turn_indices(dialogue, self.task.template):
                    out.append(
                        (f"{dialogue.id}:{target}",
                         lambda d=dialogue, t=target: self.generation_example(d, t))
                    )
        elif self.task.kind == "dst":
            for dialogue in self.task.test:
                out.append((dialogue.id, lambda d=dialogue: self.dst_example(d)))
        elif self.task.kind == "query_parse":
            for dialogue in self.task.test:
                for index in user_turn_indices(dialogue):
                    if dialogue.turns[index].query is not None:
                        out.append(
                            (f"{dialogue.id}:{index}",
                             lambda d=dialogue, i=index: self.query_example(d, i))
                        )
        elif self.task.kind == "kg_parse":
            for dialogue in self.task.test:
                for index in user_turn_indices(dialogue):
                    if dialogue.turns[index].gold_path is not None:
                        out.append(
                            (f"{dialogue.id}:{index}",
                             lambda d=dialogue, i=index: self.kg_example(d, i))
                        )
        else:
            raise ConfigurationError(f"unknown task kind {self.task.kind!r}")
        return out


def _load_progress(path: str) -> dict[tuple, dict]:
    entries: dict[tuple, dict] = {}
    if not os.path.exists(path):
        return entries
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            key = (record["task"], record["k"], record["run"], record["example_id"])
            entries[key] = record
    return entries


def run_eval(config: EvalConfig, backend: LMBackend) -> dict:
    """Evaluate every (shot count, run) cell, resuming from the progress log.

    Backend faults mark the example failed (and excluded from aggregation)
    rather than aborting the evaluation.
    """
    progress = _load_progress(config.progress_path) if config.progress_path else {}
    log_fh = open(config.progress_path, "a", encoding="utf-8") if config.progress_path else None
    try:
        for k in config.shots:
            for run in range(config.runs):
                shot_dialogues = sample_shots(config.task.validation, k, config.seed, run)
                shots_rendered = [render_shot(d, config.task.template) for d in shot_dialogues]
                runner = _Runner(config, shots_rendered, backend)
                for example_id, thunk in runner.examples():
                    key = (config.task.task, k, run, example_id)
                    if key in progress:
                        continue
                    record = {
                        "task": config.task.task,
                        "k": k,
                        "run": run,
                        "example_id": example_id,
                    }
                    try:
                        record.update(thunk())
                    except (BackendTransportError, GenerationFault) as exc:
                        record["failed"] = True
                        record["error"] = str(exc)
                    progress[key] = record
                    if log_fh:
                        log_fh.write(json.dumps(record, sort_keys=True) + "\n")
                        log_fh.flush()
    finally:
        if log_fh:
            log_fh.close()
    return build_report(config, progress)


def build_report(config: EvalConfig, progress: dict[tuple, dict]) -> dict:
    """Aggregate the progress log into a mean/std report (population std)."""
    report: dict = {
        "task": config.task.task,
        "kind": config.task.kind,
        "seed": config.seed,
        "runs": config.runs,
        "shots": {},
    }
    skip_fields = {"task", "k", "run", "example_id", "failed", "error"}
    for k in config.shots:
        run_means: dict[str, list[float]] = {}
        examples = 0
        failures = 0
        for run in range(config.runs):
            records = [
                rec
                for (task, kk, rr, _), rec in sorted(progress.items())
                if task == config.task.task and kk == k and rr == run
            ]
            failures += sum(1 for r in records if r.get("failed"))
            records = [r for r in records if not r.get("failed")]
            examples += len(records)
            names = sorted({name for r in records for name in r if name not in skip_fields})
            for name in names:
                values = [r[name] for r in records if name in r]
                if values:
                    run_means.setdefault(name, []).append(sum(values) / len(values))
        metrics_summary = {}
        for name, means in sorted(run_means.items()):
            summary = summarize_runs(means)
            metrics_summary[name] = {
                "mean": summary.mean,
                "std": summary.std,
                "run_values": list(summary.run_values),
            }
        report["shots"][str(k)] = {
            "examples": examples,
            "failures": failures,
            "metrics": metrics_summary,
        }
    return report


def report_text(report: dict) -> str:
    """Canonical serialized report; equal inputs produce equal bytes."""
    return json.dumps(report, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(report_text(report))

"""Skill selection by scoring the dialogue history under each skill's prompt.

A skill's prompt is a few-shot concatenation of whole dialogues from that
skill. The history is scored as a continuation of each prompt; the label whose
prompt gives the highest total log-probability wins, with ties going to the
earliest registered label.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .backends import LMBackend, whitespace_token_count
from .errors import ConfigurationError, SelectionError
from .model import Dialogue
from .prompts import SHOT_SEPARATOR, PromptText, render_skill_history


@dataclass
class SkillPromptSet:
    """Ordered label -> prompt mapping; insertion order is registration order."""

    prompts: dict[str, PromptText] = field(default_factory=dict)

    def add(self, label: str, prompt: PromptText) -> None:
        if label in self.prompts:
            raise ConfigurationError(f"label {label!r} already registered")
        self.prompts[label] = prompt

    def labels(self) -> list[str]:
        return list(self.prompts)

    def __len__(self) -> int:
        return len(self.prompts)


def build_prompt_set(
    dialogues_by_label: Mapping[str, Iterable[Dialogue]],
    count_tokens: Callable[[str], int] = whitespace_token_count,
) -> SkillPromptSet:
    """Render each label's dialogues into its selection prompt."""
    prompt_set = SkillPromptSet()
    for label, dialogues in dialogues_by_label.items():
        shots = [render_skill_history(d) for d in dialogues]
        if not shots:
            raise ConfigurationError(f"label {label!r} has no prompt dialogues")
        text = SHOT_SEPARATOR.join(shots)
        prompt_set.add(
            label,
            PromptText(text=text, shot_count=len(shots), token_count=count_tokens(text)),
        )
    return prompt_set


@dataclass(frozen=True)
class SelectionResult:
    label: str
    scores: dict[str, float]


def select_skill(
    history: Dialogue,
    prompts: SkillPromptSet,
    backend: LMBackend,
    max_workers: int = 4,
) -> SelectionResult:
    """Argmax over per-label continuation scores; first registered label wins ties."""
    if not prompts.prompts:
        raise ConfigurationError("cannot select from an empty prompt set")
    rendered = render_skill_history(history)

    def score_label(label: str) -> float:
        context = prompts.prompts[label].text + SHOT_SEPARATOR
        return backend.score(context, rendered).total_logprob

    labels = prompts.labels()
    scores: dict[str, float] = {}
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        futures = {label: pool.submit(score_label, label) for label in labels}
        for label in labels:
            try:
                scores[label] = futures[label].result()
            except Exception as exc:
                raise SelectionError(f"scoring failed for {label!r}: {exc}", label=label)

    best = labels[0]
    for label in labels[1:]:
        if scores[label] > scores[best]:
            best = label
    return SelectionResult(label=best, scores=scores)


@dataclass(frozen=True)
class SelectionSample:
    """A dialogue prefix ending on user input, labelled with its source skill."""

    history: Dialogue
    label: str


def _samples_from(dialogue: Dialogue, label: str) -> list[SelectionSample]:
    from .model import user_turn_indices

    samples = []
    for i in user_turn_indices(dialogue):
        prefix = Dialogue(
            id=f"{dialogue.id}#{i}",
            task=dialogue.task,
            turns=dialogue.turns[: i + 1],
        )
        samples.append(SelectionSample(history=prefix, label=label))
    return samples


@dataclass
class SelectionDataset:
    prompts: SkillPromptSet
    prompt_dialogues: dict[str, list[Dialogue]]
    train: list[SelectionSample]
    val: list[SelectionSample]
    test: list[SelectionSample]


def build_selection_dataset(
    dialogues_by_label: Mapping[str, list[Dialogue]],
    k: int,
    test_k: int,
    seed: int,
    count_tokens: Callable[[str], int] = whitespace_token_count,
) -> SelectionDataset:
    """Sample k prompt dialogues and test_k held-out dialogues per label.

    Prompt and test dialogues are disjoint by construction; whatever remains
    becomes the validation pool. Sampling is driven only by the seed.
    """
    rng = random.Random(seed)
    prompt_dialogues: dict[str, list[Dialogue]] = {}
    train: list[SelectionSample] = []
    val: list[SelectionSample] = []
    test: list[SelectionSample] = []
    for label, pool in dialogues_by_label.items():
        if len(pool) < k + test_k:
            raise ConfigurationError(
                f"label {label!r} has {len(pool)} dialogues, needs {k + test_k}"
            )
        chosen = rng.sample(range(len(pool)), k + test_k)
        prompt_idx = set(chosen[:k])
        test_idx = set(chosen[k:])
        prompt_dialogues[label] = [pool[i] for i in sorted(prompt_idx)]
        for i, dialogue in enumerate(pool):
            target = (
                train if i in prompt_idx else test if i in test_idx else val
            )
            target.extend(_samples_from(dialogue, label))
    prompts = build_prompt_set(prompt_dialogues, count_tokens)
    return SelectionDataset(
        prompts=prompts,
        prompt_dialogues=prompt_dialogues,
        train=train,
        val=val,
        test=test,
    )


@dataclass(frozen=True)
class SelectorReport:
    accuracy: float
    macro_f1: float
    confusion: dict[str, dict[str, int]]


def evaluate_selector(
    samples: Iterable[SelectionSample],
    prompts: SkillPromptSet,
    backend: LMBackend,
) -> SelectorReport:
    """Accuracy and macro-F1 over labelled histories."""
    labels = prompts.labels()
    confusion: dict[str, dict[str, int]] = {g: {p: 0 for p in labels} for g in labels}
    total = 0
    hits = 0
    for sample in samples:
        if sample.label not in confusion:
            raise ConfigurationError(f"sample label {sample.label!r} is not registered")
        predicted = select_skill(sample.history, prompts, backend).label
        confusion[sample.label][predicted] += 1
        total += 1
        hits += int(predicted == sample.label)
    if total == 0:
        raise ConfigurationError("no samples to evaluate")

    f1s = []
    for label in labels:
        tp = confusion[label][label]
        fp = sum(confusion[g][label] for g in labels if g != label)
        fn = sum(confusion[label][p] for p in labels if p != label)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    return SelectorReport(
        accuracy=hits / total,
        macro_f1=sum(f1s) / len(f1s),
        confusion=confusion,
    )

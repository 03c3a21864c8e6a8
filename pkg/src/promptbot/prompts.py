"""Prompt rendering: templates, shots, generation points, and budgeted assembly.

Templates are data. Each one names its header blocks, speaker labels, and the
optional per-turn annotation line (knowledge, query, state, or path). Rendering
is pure string assembly; no backend is involved.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Callable

from .errors import BudgetError, RenderError
from .model import Dialogue, Turn, serialize_path, serialize_state, user_turn_indices

SHOT_SEPARATOR = "\n\n"
DIALOGUE_HEADER = "Dialogue:"

HeaderSource = str  # personas_user | personas_assistant | kb | image_caption
AnnotationSource = str  # knowledge | query | state_update | gold_path


@dataclass(frozen=True)
class HeaderBlock:
    title: str
    source: HeaderSource


@dataclass(frozen=True)
class Annotation:
    """A labelled line rendered after any turn carrying the source field."""

    label: str
    source: AnnotationSource
    required: bool = False


@dataclass(frozen=True)
class Template:
    """Rendering recipe for one skill's prompt format."""

    id: str
    headers: tuple[HeaderBlock, ...] = ()
    labels: dict[str, str] = field(default_factory=dict)
    annotation: Annotation | None = None
    target: str = "assistant"  # assistant | any | annotation

    def speaker_label(self, speaker: str) -> str:
        """Mapped label, or the speaker name itself for style-named turns."""
        return self.labels.get(speaker, f"{speaker}:")


def _header_lines(dialogue: Dialogue, block: HeaderBlock, strict: bool) -> list[str]:
    if block.source == "personas_user":
        values = list(dialogue.personas_user)
    elif block.source == "personas_assistant":
        values = list(dialogue.personas_assistant)
    elif block.source == "kb":
        values = [" ".join(row) for row in dialogue.kb]
    elif block.source == "image_caption":
        values = [dialogue.image_caption] if dialogue.image_caption else []
    else:
        raise RenderError(f"unknown header source {block.source!r}")
    if not values:
        if strict:
            raise RenderError(
                f"dialogue {dialogue.id!r} has no content for header {block.title!r}"
            )
        return []
    return [block.title, *values]


def _annotation_lines(turn: Turn, ann: Annotation) -> list[str]:
    """Annotation lines for a fully rendered turn; [] when the field is unset."""
    if ann.source == "knowledge":
        if turn.knowledge is None:
            return []
        return [f"{ann.label} {item.rendered()}" for item in turn.knowledge]
    if ann.source == "query":
        if turn.query is None:
            return []
        return [f"{ann.label} {turn.query}"]
    if ann.source == "state_update":
        if turn.state_update is None:
            return []
        body = serialize_state(turn.state_update)
        return [f"{ann.label} {body}" if body else ann.label]
    if ann.source == "gold_path":
        if turn.gold_path is None:
            return []
        return [f"{ann.label} {serialize_path(turn.gold_path)}"]
    raise RenderError(f"unknown annotation source {ann.source!r}")


def _turn_lines(
    dialogue: Dialogue,
    index: int,
    template: Template,
    user_side: set[int],
    strict: bool,
    with_annotation: bool = True,
) -> list[str]:
    turn = dialogue.turns[index]
    label = template.speaker_label(turn.speaker)
    lines = [f"{label} {turn.text}" if turn.text else label]
    ann = template.annotation
    if ann is not None and with_annotation:
        ann_lines = _annotation_lines(turn, ann)
        if not ann_lines and strict and ann.required and index in user_side:
            raise RenderError(
                f"turn {index} of dialogue {dialogue.id!r} lacks the "
                f"{ann.label!r} annotation required by template {template.id!r}"
            )
        lines.extend(ann_lines)
    return lines


def render_shot(
    dialogue: Dialogue,
    template: Template,
    upto_turn: int | None = None,
    strict: bool = True,
) -> str:
    """Render one dialogue under a template.

    Without upto_turn the whole dialogue is rendered (a prompt shot). With it,
    rendering stops at a generation point: for response templates the bare
    speaker label of turns[upto_turn]; for annotation-target templates the bare
    annotation label after turns[upto_turn], whose own annotation is withheld.
    """
    if not dialogue.turns:
        raise RenderError(f"dialogue {dialogue.id!r} has no turns to render")
    if upto_turn is not None and not 0 <= upto_turn < len(dialogue.turns):
        raise RenderError(f"upto_turn {upto_turn} out of range for dialogue {dialogue.id!r}")

    user_side = set(user_turn_indices(dialogue))
    lines: list[str] = []
    for block in template.headers:
        lines.extend(_header_lines(dialogue, block, strict))
    lines.append(DIALOGUE_HEADER)

    if upto_turn is None:
        for i in range(len(dialogue.turns)):
            lines.extend(_turn_lines(dialogue, i, template, user_side, strict))
    elif template.target == "annotation":
        if template.annotation is None:
            raise RenderError(f"template {template.id!r} targets annotation but defines none")
        for i in range(upto_turn):
            lines.extend(_turn_lines(dialogue, i, template, user_side, strict))
        lines.extend(
            _turn_lines(dialogue, upto_turn, template, user_side, strict, with_annotation=False)
        )
        lines.append(template.annotation.label)
    else:
        for i in range(upto_turn):
            lines.extend(_turn_lines(dialogue, i, template, user_side, strict))
        lines.append(template.speaker_label(dialogue.turns[upto_turn].speaker))

    text = "\n".join(lines)
    if SHOT_SEPARATOR in text:
        raise RenderError(f"rendered shot for {dialogue.id!r} contains a blank line")
    return text


def render_skill_history(dialogue: Dialogue) -> str:
    """History-only rendering used by the skill selector.

    Fixed User:/Assistant: labels, no headers or annotations, truncated at the
    last user-side turn so the text always ends on user input.
    """
    user_side = user_turn_indices(dialogue)
    if not user_side:
        raise RenderError(f"dialogue {dialogue.id!r} has no user turns")
    lines = [DIALOGUE_HEADER]
    for i in range(user_side[-1] + 1):
        turn = dialogue.turns[i]
        label = "User:" if i in set(user_side) else "Assistant:"
        lines.append(f"{label} {turn.text}" if turn.text else label)
    return "\n".join(lines)


@dataclass(frozen=True)
class PromptText:
    """An assembled prompt plus the bookkeeping the caller needs."""

    text: str
    shot_count: int
    token_count: int


def assemble_prompt(
    shots: list[str],
    query: str,
    token_budget: int,
    count_tokens: Callable[[str], int],
) -> PromptText:
    """Join shots and query with blank lines, evicting oldest shots to fit.

    The query is never truncated; if it alone exceeds the budget that is a
    BudgetError. Returned token_count is measured on the final text.
    """
    if count_tokens(query) > token_budget:
        raise BudgetError(
            f"query needs {count_tokens(query)} tokens, budget is {token_budget}"
        )
    kept = list(shots)
    while True:
        text = SHOT_SEPARATOR.join([*kept, query])
        tokens = count_tokens(text)
        if tokens <= token_budget or not kept:
            return PromptText(text=text, shot_count=len(kept), token_count=tokens)
        kept.pop(0)  # oldest shot first


def _template_from_dict(data: dict) -> Template:
    ann = data.get("annotation")
    return Template(
        id=data["id"],
        headers=tuple(HeaderBlock(h["title"], h["source"]) for h in data.get("headers", [])),
        labels=dict(data.get("labels", {})),
        annotation=Annotation(ann["label"], ann["source"], ann.get("required", False))
        if ann
        else None,
        target=data.get("target", "assistant"),
    )


def load_templates(path: str) -> dict[str, Template]:
    """Load a template manifest; ids must be unique."""
    with open(path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    templates: dict[str, Template] = {}
    for entry in manifest["templates"]:
        template = _template_from_dict(entry)
        if template.id in templates:
            raise RenderError(f"duplicate template id {template.id!r}")
        templates[template.id] = template
    return templates


@lru_cache(maxsize=1)
def default_templates() -> dict[str, Template]:
    """Templates bundled with the package."""
    ref = resources.files("promptbot") / "templates" / "manifest.json"
    manifest = json.loads(ref.read_text(encoding="utf-8"))
    templates = {}
    for entry in manifest["templates"]:
        template = _template_from_dict(entry)
        templates[template.id] = template
    return templates

"""Conversational parsers: free-text queries, state updates, and graph paths.

Each parser prompts the backend at an annotation generation point ('Search:',
'Write:', 'DST:', 'KG:') and post-processes the single-line emission. The graph
parser additionally constrains decoded objects to edges that exist in the
knowledge graph, so every returned path is sound by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

from .backends import GenerationRequest, LMBackend, perplexity
from .errors import RenderError, StateParseError
from .model import Dialogue, DialogueState, GraphPath, parse_state_string, serialize_path, user_turn_indices
from .prompts import SHOT_SEPARATOR, PromptText, Template, render_shot

NONE_TOKEN = "None"

ParseKind = Literal["title_query", "search_query", "persona_line", "state_update", "none"]


@dataclass(frozen=True)
class ParseResult:
    kind: ParseKind
    payload: str | DialogueState | None
    raw: str


def _parse_context(
    history: Dialogue, template: Template, prompt: PromptText
) -> str:
    user_side = user_turn_indices(history)
    if not user_side:
        raise RenderError(f"dialogue {history.id!r} has no user turn to parse")
    rendered = render_shot(history, template, upto_turn=user_side[-1], strict=False)
    return prompt.text + SHOT_SEPARATOR + rendered if prompt.text else rendered


def parse_dsl(
    history: Dialogue,
    template: Template,
    kind: ParseKind,
    prompt: PromptText,
    backend: LMBackend,
    max_tokens: int = 150,
) -> ParseResult:
    """Run one parse at the last user turn of the history.

    The emission 'None' (after trimming) always maps to kind 'none'. State
    updates are parsed strictly; malformed ones raise for the caller to handle.
    """
    context = _parse_context(history, template, prompt)
    raw = backend.generate(GenerationRequest(context=context, max_tokens=max_tokens))
    trimmed = raw.strip()
    if trimmed == NONE_TOKEN:
        return ParseResult(kind="none", payload=None, raw=raw)
    if kind == "state_update":
        return ParseResult(kind=kind, payload=parse_state_string(trimmed), raw=raw)
    return ParseResult(kind=kind, payload=trimmed, raw=raw)


@dataclass
class TrackResult:
    """Accumulated state after each user turn, plus the per-turn updates."""

    states: list[DialogueState]
    updates: list[DialogueState]
    diagnostics: list[str] = field(default_factory=list)


def track_state(
    dialogue: Dialogue,
    template: Template,
    prompt: PromptText,
    backend: LMBackend,
) -> TrackResult:
    """Predict a state update at every user turn and fold the updates.

    Gold annotations are stripped from the working copy before any prediction;
    the context for turn t shows only the updates this function predicted for
    earlier turns. Malformed emissions contribute an empty update.
    """
    working = Dialogue.from_dict(dialogue.to_dict())
    for turn in working.turns:
        turn.state_update = None

    result = TrackResult(states=[], updates=[])
    state: DialogueState = {}
    for index in user_turn_indices(working):
        rendered = render_shot(working, template, upto_turn=index, strict=False)
        context = prompt.text + SHOT_SEPARATOR + rendered if prompt.text else rendered
        raw = backend.generate(GenerationRequest(context=context))
        try:
            update = parse_state_string(raw.strip())
        except StateParseError as exc:
            update = {}
            result.diagnostics.append(f"turn {index}: {exc}")
        working.turns[index].state_update = update
        state = {**state, **update}
        result.updates.append(update)
        result.states.append(dict(state))
    return result


@dataclass
class KGDecodeResult:
    """Ranked candidate paths plus the greedily chosen one."""

    paths: list[GraphPath]
    chosen: GraphPath | None
    diagnostics: list[str] = field(default_factory=list)


def _split_emission(emission: str) -> tuple[str, str]:
    fields = emission.split("\t")
    subject = fields[0].strip()
    relation = fields[1].strip() if len(fields) > 1 else ""
    return subject, relation


def _hop_candidates(kg, subject: str, relation: str) -> list[tuple[str, str]]:
    """(relation, object) pairs; exact relation match, else every neighbor."""
    exact = [(relation, o) for o in kg.objects(subject, relation)]
    return exact if exact else kg.neighbors(subject)


def constrained_kg_decode(
    history: Dialogue,
    template: Template,
    prompt: PromptText,
    backend: LMBackend,
    kg,
    k: int = 25,
    max_tokens: int = 150,
) -> KGDecodeResult:
    """Two-stage constrained decoding over the knowledge graph.

    The backend proposes a subject and relation; objects come only from the
    graph, picked by lowest continuation perplexity (ties: object then relation
    string). A post-object emission starting with a tab triggers one more hop.
    Candidate paths are ranked by total log-probability of their serialized
    form. Every hop of every returned path exists in the graph.
    """
    base = _parse_context(history, template, prompt)
    emission = backend.generate(GenerationRequest(context=base, max_tokens=max_tokens))
    if not emission.strip():
        return KGDecodeResult(paths=[], chosen=None, diagnostics=["empty emission"])
    subject, relation = _split_emission(emission)

    diagnostics: list[str] = []
    candidate_paths: list[GraphPath] = []

    hop1 = _hop_candidates(kg, subject, relation)
    if not hop1:
        return KGDecodeResult(
            paths=[], chosen=None, diagnostics=[f"subject {subject!r} not in graph"]
        )
    # candidates are scored as continuations of the text the model actually saw
    hop1_context = f"{base} {subject}\t{relation}\t"
    scored1 = sorted(
        (perplexity(backend, hop1_context, obj), obj, rel) for rel, obj in hop1
    )
    _, best_obj, best_rel = scored1[0]
    chosen_hops: list[tuple[str, str, str]] = [(subject, best_rel, best_obj)]
    for _, obj, rel in scored1:
        candidate_paths.append(GraphPath(hops=((subject, rel, obj),)))

    continuation = backend.generate(
        GenerationRequest(context=hop1_context + best_obj, max_tokens=max_tokens)
    )
    if continuation.startswith("\t"):
        # the post-object emission looks like "\t<relation>\t..."
        fields2 = [f.strip() for f in continuation.split("\t")]
        relation2 = fields2[1] if len(fields2) > 1 else ""
        hop2 = _hop_candidates(kg, best_obj, relation2)
        if hop2:
            hop2_context = f"{hop1_context}{best_obj}\t{relation2}\t"
            scored2 = sorted(
                (perplexity(backend, hop2_context, obj), obj, rel) for rel, obj in hop2
            )
            _, best_obj2, best_rel2 = scored2[0]
            chosen_hops.append((best_obj, best_rel2, best_obj2))
            for _, obj, rel in scored2:
                candidate_paths.append(
                    GraphPath(hops=(tuple(chosen_hops[0]), (best_obj, rel, obj)))
                )
        else:
            diagnostics.append(f"no second-hop candidates from {best_obj!r}")

    chosen = GraphPath(hops=tuple(chosen_hops))

    def rank_key(path: GraphPath) -> tuple[float, str]:
        scored = backend.score(base, " " + serialize_path(path))
        return (-scored.total_logprob, serialize_path(path))

    unique: dict[tuple, GraphPath] = {}
    for path in candidate_paths:
        unique.setdefault(path.hops, path)
    ranked = sorted(unique.values(), key=rank_key)[:k]
    return KGDecodeResult(paths=ranked, chosen=chosen, diagnostics=diagnostics)

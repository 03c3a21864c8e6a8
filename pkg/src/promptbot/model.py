"""Core dialogue types: turns, dialogues, knowledge items, state, paths, memory."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Literal

from .errors import PathParseError, StateParseError, ValidationError

KnowledgeKind = Literal["text", "triple", "table_row", "caption", "persona", "style"]
SkillKind = Literal["generation", "parsing"]
KnowledgeRequirement = Literal["none", "wiki", "search", "kg", "memory"]

# <domain>-<slot>, both sides lowercase identifiers
_STATE_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*-[a-z][a-z0-9_]*$")

Triple = tuple[str, str, str]


def _check_triple(value: tuple[str, ...], what: str) -> Triple:
    if len(value) != 3:
        raise ValidationError(f"{what} must have 3 fields, got {len(value)}")
    for part in value:
        if not part:
            raise ValidationError(f"{what} has an empty field: {value!r}")
        if "\t" in part:
            raise ValidationError(f"{what} field contains a tab: {part!r}")
    return (value[0], value[1], value[2])


@dataclass(frozen=True)
class KnowledgeItem:
    """One unit of grounding knowledge attached to a turn.

    `value` is a string for text-like kinds and a (subject, relation, object)
    or (entity, attribute, value) triple for `triple` / `table_row`.
    """

    kind: KnowledgeKind
    value: str | Triple

    def __post_init__(self):
        if self.kind in ("triple", "table_row"):
            if isinstance(self.value, str):
                raise ValidationError(f"{self.kind} knowledge needs a 3-tuple value")
            object.__setattr__(self, "value", _check_triple(tuple(self.value), self.kind))
        else:
            if not isinstance(self.value, str):
                raise ValidationError(f"{self.kind} knowledge needs a string value")
            if "\n" in self.value:
                raise ValidationError("knowledge text must be a single line")

    def rendered(self) -> str:
        """Single-line form used inside prompts."""
        if self.kind == "triple":
            return "\t".join(self.value)
        if self.kind == "table_row":
            return " ".join(self.value)
        return self.value  # type: ignore[return-value]

    def to_dict(self) -> dict:
        value = list(self.value) if isinstance(self.value, tuple) else self.value
        return {"kind": self.kind, "value": value}

    @classmethod
    def from_dict(cls, data: dict) -> "KnowledgeItem":
        value = data["value"]
        if isinstance(value, list):
            value = tuple(value)
        return cls(kind=data["kind"], value=value)


@dataclass(frozen=True)
class GraphPath:
    """A 1- or 2-hop path through a knowledge graph; hops chain object->subject."""

    hops: tuple[Triple, ...]

    def __post_init__(self):
        if not 1 <= len(self.hops) <= 2:
            raise PathParseError(f"paths have 1 or 2 hops, got {len(self.hops)}")
        hops = tuple(_check_triple(tuple(h), "path hop") for h in self.hops)
        if len(hops) == 2 and hops[0][2] != hops[1][0]:
            raise PathParseError(
                f"hop 2 subject {hops[1][0]!r} does not chain from hop 1 object {hops[0][2]!r}"
            )
        object.__setattr__(self, "hops", hops)

    @property
    def target(self) -> str:
        """Final object node of the path."""
        return self.hops[-1][2]

    def to_list(self) -> list[list[str]]:
        return [list(h) for h in self.hops]

    @classmethod
    def from_list(cls, data: Iterable[Iterable[str]]) -> "GraphPath":
        return cls(hops=tuple(tuple(h) for h in data))  # type: ignore[arg-type]


def serialize_path(path: GraphPath) -> str:
    """Tab-joined path: 3 fields for 1 hop, 5 for 2 hops (shared node once)."""
    if len(path.hops) == 1:
        return "\t".join(path.hops[0])
    (s1, r1, o1), (_, r2, o2) = path.hops
    return "\t".join((s1, r1, o1, r2, o2))


def parse_path_string(text: str) -> GraphPath:
    """Inverse of serialize_path; rejects anything but 3 or 5 tab fields."""
    fields = [f.strip() for f in text.strip().split("\t")]
    if len(fields) == 3:
        return GraphPath(hops=((fields[0], fields[1], fields[2]),))
    if len(fields) == 5:
        return GraphPath(
            hops=(
                (fields[0], fields[1], fields[2]),
                (fields[2], fields[3], fields[4]),
            )
        )
    raise PathParseError(f"expected 3 or 5 tab-separated fields, got {len(fields)}: {text!r}")


DialogueState = dict[str, str]


def _check_state_key(key: str) -> None:
    if not _STATE_KEY_RE.match(key):
        raise StateParseError(f"bad state key {key!r}: expected <domain>-<slot>", entry=key)


def parse_state_string(text: str) -> DialogueState:
    """Parse 'key=value, key=value' into a state update; empty text means no update."""
    text = text.strip()
    if not text:
        return {}
    state: DialogueState = {}
    for entry in text.split(", "):
        entry = entry.strip()
        if "=" not in entry:
            raise StateParseError(f"state entry without '=': {entry!r}", entry=entry)
        key, value = entry.split("=", 1)
        _check_state_key(key)
        state[key] = value
    return state


def serialize_state(state: DialogueState) -> str:
    """Insertion-ordered 'key=value, key=value' form."""
    return ", ".join(f"{k}={v}" for k, v in state.items())


def apply_state_update(state: DialogueState, update: DialogueState) -> DialogueState:
    """Return a new state with update keys inserted or overwritten."""
    for key in update:
        _check_state_key(key)
    merged = dict(state)
    merged.update(update)
    return merged


@dataclass
class Turn:
    """One utterance. Annotations (knowledge, state, query, path) attach to the
    turn they follow in the rendered prompt, i.e. the user-side turn."""

    speaker: str
    text: str
    knowledge: list[KnowledgeItem] | None = None
    state_update: DialogueState | None = None
    query: str | None = None
    gold_path: GraphPath | None = None

    def __post_init__(self):
        if not self.speaker:
            raise ValidationError("turn speaker must be non-empty")
        if "\n" in self.text:
            raise ValidationError(f"turn text must not contain newlines: {self.text!r}")
        if self.query is not None and "\n" in self.query:
            raise ValidationError("turn query must be a single line")
        if self.state_update is not None:
            for key in self.state_update:
                _check_state_key(key)

    def to_dict(self) -> dict:
        data: dict = {"speaker": self.speaker, "text": self.text}
        if self.knowledge is not None:
            data["knowledge"] = [k.to_dict() for k in self.knowledge]
        if self.state_update is not None:
            data["state_update"] = dict(self.state_update)
        if self.query is not None:
            data["query"] = self.query
        if self.gold_path is not None:
            data["gold_path"] = self.gold_path.to_list()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Turn":
        return cls(
            speaker=data["speaker"],
            text=data["text"],
            knowledge=[KnowledgeItem.from_dict(k) for k in data["knowledge"]]
            if "knowledge" in data
            else None,
            state_update=dict(data["state_update"]) if "state_update" in data else None,
            query=data.get("query"),
            gold_path=GraphPath.from_list(data["gold_path"]) if "gold_path" in data else None,
        )


@dataclass
class Dialogue:
    """A whole conversation plus its side information."""

    id: str
    task: str
    turns: list[Turn] = field(default_factory=list)
    personas_user: list[str] = field(default_factory=list)
    personas_assistant: list[str] = field(default_factory=list)
    kb: list[Triple] = field(default_factory=list)
    image_caption: str | None = None

    def __post_init__(self):
        self.kb = [_check_triple(tuple(row), "kb row") for row in self.kb]
        for line in (*self.personas_user, *self.personas_assistant):
            if "\n" in line:
                raise ValidationError("persona lines must be single lines")

    def to_dict(self) -> dict:
        data: dict = {
            "id": self.id,
            "task": self.task,
            "turns": [t.to_dict() for t in self.turns],
        }
        if self.personas_user:
            data["personas_user"] = list(self.personas_user)
        if self.personas_assistant:
            data["personas_assistant"] = list(self.personas_assistant)
        if self.kb:
            data["kb"] = [list(row) for row in self.kb]
        if self.image_caption is not None:
            data["image_caption"] = self.image_caption
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "Dialogue":
        return cls(
            id=data["id"],
            task=data["task"],
            turns=[Turn.from_dict(t) for t in data["turns"]],
            personas_user=list(data.get("personas_user", [])),
            personas_assistant=list(data.get("personas_assistant", [])),
            kb=[tuple(row) for row in data.get("kb", [])],
            image_caption=data.get("image_caption"),
        )


def user_turn_indices(dialogue: Dialogue) -> list[int]:
    """Indices of user-side turns.

    Turns with speaker 'user' count; dialogues without any explicit 'user'
    speaker (two named styles talking) alternate starting from the first turn.
    """
    if any(t.speaker == "user" for t in dialogue.turns):
        return [i for i, t in enumerate(dialogue.turns) if t.speaker == "user"]
    return [i for i in range(len(dialogue.turns)) if i % 2 == 0]


def load_dialogues(path: str) -> list[Dialogue]:
    """Read one-dialogue-per-line JSONL."""
    dialogues = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                dialogues.append(Dialogue.from_dict(json.loads(line)))
    return dialogues


def dump_dialogues(dialogues: Iterable[Dialogue], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in dialogues:
            fh.write(json.dumps(d.to_dict(), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Skill:
    """Registry entry for one conversational skill."""

    id: str
    kind: SkillKind
    template_id: str
    knowledge_requirement: KnowledgeRequirement = "none"
    paired_parser: str | None = None

    def __post_init__(self):
        if (
            self.kind == "generation"
            and self.knowledge_requirement != "none"
            and not self.paired_parser
        ):
            raise ValidationError(
                f"skill {self.id!r} requires knowledge but names no paired parser"
            )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "template_id": self.template_id,
            "knowledge_requirement": self.knowledge_requirement,
            "paired_parser": self.paired_parser,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Skill":
        return cls(
            id=data["id"],
            kind=data["kind"],
            template_id=data["template_id"],
            knowledge_requirement=data.get("knowledge_requirement", "none"),
            paired_parser=data.get("paired_parser"),
        )


@dataclass
class Memory:
    """Per-session long-term store updated by the orchestrator."""

    user_persona: list[str] = field(default_factory=list)
    assistant_persona: list[str] = field(default_factory=list)
    last_knowledge: list[KnowledgeItem] = field(default_factory=list)
    last_query: str | None = None

    def append_persona(self, line: str) -> bool:
        """Append a user persona line; never removes lines. Returns False on duplicate."""
        if "\n" in line:
            raise ValidationError("persona lines must be single lines")
        if line in self.user_persona:
            return False
        self.user_persona.append(line)
        return True

    def copy(self) -> "Memory":
        return Memory(
            user_persona=list(self.user_persona),
            assistant_persona=list(self.assistant_persona),
            last_knowledge=list(self.last_knowledge),
            last_query=self.last_query,
        )

    def to_dict(self) -> dict:
        return {
            "user_persona": list(self.user_persona),
            "assistant_persona": list(self.assistant_persona),
            "last_knowledge": [k.to_dict() for k in self.last_knowledge],
            "last_query": self.last_query,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Memory":
        return cls(
            user_persona=list(data.get("user_persona", [])),
            assistant_persona=list(data.get("assistant_persona", [])),
            last_knowledge=[KnowledgeItem.from_dict(k) for k in data.get("last_knowledge", [])],
            last_query=data.get("last_query"),
        )

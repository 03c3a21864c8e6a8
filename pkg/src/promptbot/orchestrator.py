"""The interactive assistant loop.

Each user message flows through five phases: append the user turn, pick a
skill, run the skill's paired parser and retrieval, fold results into memory,
then render the skill's template over history plus memory and generate the
reply. A step either commits history, memory, and transcript together or, on
any failure, leaves the session exactly as it was.
"""

from __future__ import annotations

import difflib
import json
import uuid
from dataclasses import dataclass, field
from importlib import resources

from .backends import GenerationRequest, LMBackend, whitespace_token_count
from .errors import ConfigurationError, GenerationFault, NotFoundError, ValidationError
from .model import (
    Dialogue,
    KnowledgeItem,
    Memory,
    Skill,
    Turn,
    load_dialogues,
    parse_path_string,
    serialize_path,
)
from .parsing import ParseResult, constrained_kg_decode, parse_dsl
from .prompts import (
    SHOT_SEPARATOR,
    PromptText,
    Template,
    assemble_prompt,
    default_templates,
    render_shot,
)
from .retrieval import (
    FixtureSearchClient,
    KnowledgeGraph,
    RetrievedKnowledge,
    WikiIndex,
)
from .selector import SkillPromptSet, build_prompt_set, select_skill

FALLBACK_RESPONSE = "I'm not sure what to say."

PARSE_KINDS = {
    "wow_parse": "title_query",
    "wit_parse": "search_query",
    "msc_parse": "persona_line",
    "mwoz_dst": "state_update",
}


@dataclass
class OrchestratorConfig:
    templates: dict[str, Template]
    skills: dict[str, Skill]
    skill_shots: dict[str, list[str]]
    selector_prompts: SkillPromptSet
    wiki: WikiIndex | None = None
    search: FixtureSearchClient | None = None
    kg: KnowledgeGraph | None = None
    styles: list[str] = field(default_factory=list)
    bot_persona: list[str] = field(default_factory=list)
    max_tokens: int = 150
    fallback_text: str = FALLBACK_RESPONSE


def load_skill_registry(path: str) -> dict[str, Skill]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    skills: dict[str, Skill] = {}
    for entry in data["skills"]:
        skill = Skill.from_dict(entry)
        if skill.id in skills:
            raise ConfigurationError(f"duplicate skill id {skill.id!r}")
        skills[skill.id] = skill
    return skills


def default_config() -> OrchestratorConfig:
    """Configuration over the fixtures bundled with the package (1-shot prompts)."""
    fixtures = resources.files("promptbot") / "fixtures"
    templates = default_templates()
    skills = load_skill_registry(str(fixtures / "skills.json"))

    skill_shots: dict[str, list[str]] = {}
    selector_dialogues: dict[str, list[Dialogue]] = {}
    for skill in skills.values():
        dialogues = load_dialogues(str(fixtures / "dialogues" / f"{skill.id}.jsonl"))
        template = templates[skill.template_id]
        skill_shots[skill.id] = [render_shot(d, template) for d in dialogues[:1]]
        # styled replies are pinned explicitly, so cg_ic stays out of selection
        if skill.kind == "generation" and skill.id != "cg_ic":
            selector_dialogues[skill.id] = dialogues[:1]

    styles = [
        line.strip()
        for line in (fixtures / "styles.txt").read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    return OrchestratorConfig(
        templates=templates,
        skills=skills,
        skill_shots=skill_shots,
        selector_prompts=build_prompt_set(selector_dialogues),
        wiki=WikiIndex.from_jsonl(str(fixtures / "wiki.jsonl")),
        search=FixtureSearchClient.from_jsonl(str(fixtures / "search.jsonl")),
        kg=KnowledgeGraph.from_tsv(str(fixtures / "kg.tsv")),
        styles=styles,
        bot_persona=["I am a friendly assistant.", "I enjoy reading about almost anything."],
    )


@dataclass
class Session:
    id: str
    history: Dialogue
    memory: Memory
    pinned_skill: str | None = None
    transcript: list[dict] = field(default_factory=list)

    @classmethod
    def new(cls, config: OrchestratorConfig, pinned_skill: str | None = None) -> "Session":
        session_id = uuid.uuid4().hex
        return cls(
            id=session_id,
            history=Dialogue(id=session_id, task="chat"),
            memory=Memory(assistant_persona=list(config.bot_persona)),
            pinned_skill=pinned_skill,
        )

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "history": self.history.to_dict(),
            "memory": self.memory.to_dict(),
            "pinned_skill": self.pinned_skill,
            "transcript": self.transcript,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Session":
        return cls(
            id=data["id"],
            history=Dialogue.from_dict(data["history"]),
            memory=Memory.from_dict(data["memory"]),
            pinned_skill=data.get("pinned_skill"),
            transcript=list(data.get("transcript", [])),
        )


@dataclass
class ResponseBundle:
    """Everything one step produced, for display and for the transcript."""

    response: str
    selected_skill: str
    style: str | None
    scores: dict[str, float]
    parse: dict | None
    retrieved: dict | None
    memory_delta: dict
    diagnostics: list[str]
    fallback: bool

    def to_dict(self) -> dict:
        return {
            "response": self.response,
            "selected_skill": self.selected_skill,
            "style": self.style,
            "scores": self.scores,
            "parse": self.parse,
            "retrieved": self.retrieved,
            "memory_delta": self.memory_delta,
            "diagnostics": self.diagnostics,
            "fallback": self.fallback,
        }


def _parse_payload(result: ParseResult) -> dict:
    payload = result.payload
    if isinstance(payload, dict):
        payload = dict(payload)
    return {"kind": result.kind, "payload": payload, "raw": result.raw}


class Orchestrator:
    def __init__(self, config: OrchestratorConfig, backend: LMBackend):
        self.config = config
        self.backend = backend

    # ---------------------------------------------------------------- helpers

    def _skill(self, skill_id: str) -> Skill:
        skill = self.config.skills.get(skill_id)
        if skill is None:
            raise ConfigurationError(f"unknown skill {skill_id!r}")
        return skill

    def _template(self, skill: Skill) -> Template:
        return self.config.templates[skill.template_id]

    def _prompt_for(self, skill_id: str) -> PromptText:
        shots = self.config.skill_shots.get(skill_id, [])
        text = SHOT_SEPARATOR.join(shots)
        return PromptText(
            text=text, shot_count=len(shots), token_count=whitespace_token_count(text)
        )

    def validate_style(self, style: str) -> str:
        if style in self.config.styles:
            return style
        close = difflib.get_close_matches(style, self.config.styles, n=3)
        hint = f"; did you mean {', '.join(close)}?" if close else ""
        raise ValidationError(f"unknown style {style!r}{hint}")

    def _run_parser(
        self, parser_id: str, history: Dialogue, diagnostics: list[str]
    ) -> ParseResult | None:
        parser = self._skill(parser_id)
        kind = PARSE_KINDS.get(parser_id)
        if kind is None:
            raise ConfigurationError(f"skill {parser_id!r} is not a known parser")
        try:
            return parse_dsl(
                history,
                self._template(parser),
                kind,  # type: ignore[arg-type]
                self._prompt_for(parser_id),
                self.backend,
                max_tokens=self.config.max_tokens,
            )
        except ValidationError as exc:
            diagnostics.append(f"parser {parser_id} failed: {exc}")
            return None

    def _retrieve(
        self,
        skill: Skill,
        history: Dialogue,
        memory: Memory,
        diagnostics: list[str],
    ) -> tuple[RetrievedKnowledge | None, dict | None, str | None]:
        """Returns (retrieved, parse record, query) for knowledge-seeking skills."""
        requirement = skill.knowledge_requirement
        if requirement == "wiki":
            if self.config.wiki is None:
                diagnostics.append("no wiki index configured")
                return None, None, None
            result = self._run_parser(skill.paired_parser or "wow_parse", history, diagnostics)
            if result is None or result.kind == "none":
                return None, _parse_payload(result) if result else None, None
            title = str(result.payload)
            try:
                return self.config.wiki.wiki_first_sentence(title), _parse_payload(result), title
            except NotFoundError as exc:
                diagnostics.append(str(exc))
                return None, _parse_payload(result), title
        if requirement == "search":
            if self.config.search is None:
                diagnostics.append("no search client configured")
                return None, None, None
            result = self._run_parser(skill.paired_parser or "wit_parse", history, diagnostics)
            if result is None:
                return None, None, None
            if result.kind == "none":
                # no new query: reuse whatever the last query fetched
                if memory.last_knowledge:
                    reused = RetrievedKnowledge(
                        source="search",
                        text=memory.last_knowledge[0].rendered(),
                        provenance=memory.last_query or "",
                    )
                    return reused, _parse_payload(result), None
                diagnostics.append("parser returned None and memory holds no knowledge")
                return None, _parse_payload(result), None
            query = str(result.payload)
            try:
                return (
                    self.config.search.search_first_sentence(query),
                    _parse_payload(result),
                    query,
                )
            except NotFoundError as exc:
                diagnostics.append(str(exc))
                return None, _parse_payload(result), query
        if requirement == "kg":
            if self.config.kg is None:
                diagnostics.append("no knowledge graph configured")
                return None, None, None
            parser = self._skill(skill.paired_parser or "dialkg_parse")
            decode = constrained_kg_decode(
                history,
                self._template(parser),
                self._prompt_for(parser.id),
                self.backend,
                self.config.kg,
                max_tokens=self.config.max_tokens,
            )
            diagnostics.extend(decode.diagnostics)
            if not decode.paths:
                return None, None, None
            top = decode.paths[0]
            retrieved = RetrievedKnowledge(
                source="kg", text=serialize_path(top), provenance=serialize_path(top)
            )
            record = {
                "kind": "graph_path",
                "payload": top.to_list(),
                "raw": serialize_path(top),
            }
            return retrieved, record, None
        return None, None, None

    # ------------------------------------------------------------------ step

    def step(
        self,
        session: Session,
        text: str,
        style: str | None = None,
        pin_skill: str | None = None,
    ) -> ResponseBundle:
        """Run one exchange. Commits session state only if everything succeeds."""
        if not text.strip():
            raise ValidationError("message text must be non-empty")
        if "\n" in text:
            raise ValidationError("message text must be a single line")

        history = Dialogue.from_dict(session.history.to_dict())
        memory = session.memory.copy()
        persona_before = list(memory.user_persona)
        diagnostics: list[str] = []

        history.turns.append(Turn("user", text))

        scores: dict[str, float] = {}
        if style is not None:
            style = self.validate_style(style)
            skill = self._skill("cg_ic")
        elif pin_skill or session.pinned_skill:
            skill = self._skill(pin_skill or session.pinned_skill)  # type: ignore[arg-type]
        else:
            selection = select_skill(history, self.config.selector_prompts, self.backend)
            skill = self._skill(selection.label)
            scores = selection.scores

        parse_record: dict | None = None
        retrieved: RetrievedKnowledge | None = None
        query: str | None = None
        if skill.knowledge_requirement in ("wiki", "search", "kg"):
            retrieved, parse_record, query = self._retrieve(
                skill, history, memory, diagnostics
            )

        if retrieved is not None:
            if retrieved.source == "kg":
                items = [
                    KnowledgeItem(kind="triple", value=hop)
                    for hop in parse_path_string(retrieved.text).hops
                ]
            else:
                items = [KnowledgeItem(kind="text", value=retrieved.text)]
            history.turns[-1].knowledge = items
            memory.last_knowledge = items
            if query is not None:
                memory.last_query = query

        if skill.knowledge_requirement == "memory" and skill.paired_parser:
            result = self._run_parser(skill.paired_parser, history, diagnostics)
            if result is not None:
                parse_record = _parse_payload(result)
                if result.kind == "persona_line" and result.payload:
                    memory.append_persona(str(result.payload))

        pending_speaker = style if style is not None else "assistant"
        pending = Dialogue(
            id=session.id,
            task=skill.id,
            turns=[*history.turns, Turn(pending_speaker, "")],
            personas_user=list(memory.user_persona),
            personas_assistant=list(memory.assistant_persona),
        )
        template = self._template(skill)
        rendered = render_shot(pending, template, upto_turn=len(pending.turns) - 1, strict=False)

        window = self.backend.descriptor().context_window
        prompt = assemble_prompt(
            self.config.skill_shots.get(skill.id, []),
            rendered,
            window - self.config.max_tokens,
            self.backend.count_tokens,
        )

        raw = self.backend.generate(
            GenerationRequest(context=prompt.text, max_tokens=self.config.max_tokens)
        )
        response = raw.strip()
        fallback = False
        if not response:
            response = self.config.fallback_text
            fallback = True
            diagnostics.append("empty generation; used fallback response")

        history.turns.append(Turn("assistant", response))

        persona_added = [p for p in memory.user_persona if p not in persona_before]
        memory_delta = {
            "user_persona_added": persona_added,
            "last_query": memory.last_query,
            "last_query_changed": memory.last_query != session.memory.last_query,
            "last_knowledge": [k.to_dict() for k in memory.last_knowledge],
            "last_knowledge_changed": [k.to_dict() for k in memory.last_knowledge]
            != [k.to_dict() for k in session.memory.last_knowledge],
        }

        bundle = ResponseBundle(
            response=response,
            selected_skill=skill.id,
            style=style,
            scores=scores,
            parse=parse_record,
            retrieved={
                "source": retrieved.source,
                "text": retrieved.text,
                "provenance": retrieved.provenance,
            }
            if retrieved
            else None,
            memory_delta=memory_delta,
            diagnostics=diagnostics,
            fallback=fallback,
        )

        # commit: nothing above mutated the session itself
        session.history = history
        session.memory = memory
        session.transcript.append({"user": text, **bundle.to_dict()})
        return bundle

    def styled_reply(self, session: Session, text: str, style: str) -> ResponseBundle:
        """Convenience wrapper: one step forced through the styled-reply skill."""
        return self.step(session, text, style=style)


__all__ = [
    "FALLBACK_RESPONSE",
    "GenerationFault",
    "Orchestrator",
    "OrchestratorConfig",
    "ResponseBundle",
    "Session",
    "default_config",
    "load_skill_registry",
]

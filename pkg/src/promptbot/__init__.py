"""Prompt-based few-shot dialogue framework with swappable language-model backends."""

from .backends import (
    BackendDescriptor,
    EchoBackend,
    GenerationRequest,
    LMBackend,
    LookupBackend,
    RemoteBackend,
    ScoredContinuation,
    UniformBackend,
    perplexity,
)
from .errors import (
    BackendTransportError,
    BudgetError,
    ConfigurationError,
    GenerationFault,
    NotFoundError,
    PathParseError,
    PromptBotError,
    RenderError,
    SelectionError,
    StateParseError,
    ValidationError,
    WindowOverflowError,
)
from .model import (
    Dialogue,
    DialogueState,
    GraphPath,
    KnowledgeItem,
    Memory,
    Skill,
    Triple,
    Turn,
    load_dialogues,
    parse_path_string,
    parse_state_string,
    serialize_path,
    serialize_state,
)
from .orchestrator import Orchestrator, OrchestratorConfig, ResponseBundle, Session, default_config
from .prompts import PromptText, Template, assemble_prompt, default_templates, render_shot

__version__ = "0.1.0"

__all__ = [
    "BackendDescriptor",
    "BackendTransportError",
    "BudgetError",
    "ConfigurationError",
    "Dialogue",
    "DialogueState",
    "EchoBackend",
    "GenerationFault",
    "GenerationRequest",
    "GraphPath",
    "KnowledgeItem",
    "LMBackend",
    "LookupBackend",
    "Memory",
    "NotFoundError",
    "Orchestrator",
    "OrchestratorConfig",
    "PathParseError",
    "PromptBotError",
    "PromptText",
    "RemoteBackend",
    "RenderError",
    "ResponseBundle",
    "ScoredContinuation",
    "SelectionError",
    "Session",
    "Skill",
    "StateParseError",
    "Template",
    "Triple",
    "Turn",
    "UniformBackend",
    "ValidationError",
    "WindowOverflowError",
    "assemble_prompt",
    "default_config",
    "default_templates",
    "load_dialogues",
    "parse_path_string",
    "parse_state_string",
    "perplexity",
    "render_shot",
    "serialize_path",
    "serialize_state",
    "__version__",
]

"""Exception hierarchy shared across the package."""


class PromptBotError(Exception):
    """Base class for all package errors."""


class ValidationError(PromptBotError):
    """Invalid domain object (bad turn text, bad key grammar, bad triple)."""


class StateParseError(ValidationError):
    """Malformed dialogue-state string; carries the offending entry."""

    def __init__(self, message: str, entry: str = ""):
        super().__init__(message)
        self.entry = entry


class PathParseError(ValidationError):
    """Malformed graph-path string."""


class RenderError(PromptBotError):
    """A dialogue cannot be rendered under the requested template."""


class BudgetError(PromptBotError):
    """The rendered query alone exceeds the prompt token budget."""


class WindowOverflowError(PromptBotError):
    """Request does not fit the backend context window."""

    def __init__(self, message: str, token_count: int):
        super().__init__(message)
        self.token_count = token_count


class BackendTransportError(PromptBotError):
    """Remote backend unreachable after retries."""


class SelectionError(PromptBotError):
    """Skill selection failed; carries the label whose scoring failed."""

    def __init__(self, message: str, label: str = ""):
        super().__init__(message)
        self.label = label


class ConfigurationError(PromptBotError):
    """Invalid configuration (bad split sizes, unknown ids, bad bind)."""


class NotFoundError(PromptBotError):
    """Lookup missed: unknown wiki title, search query, or session id."""


class GenerationFault(PromptBotError):
    """The backend failed while generating; the session step is rolled back."""

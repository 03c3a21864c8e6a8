"""Sequential brute-force reference for skill selection."""

from __future__ import annotations

from promptbot.prompts import SHOT_SEPARATOR, render_skill_history


def brute_force_select(history, prompts, backend) -> tuple[str, dict[str, float]]:
    """Highest total continuation logprob; earliest registered label wins ties."""
    rendered = render_skill_history(history)
    scores: dict[str, float] = {}
    for label, prompt in prompts.prompts.items():
        scored = backend.score(prompt.text + SHOT_SEPARATOR, rendered)
        scores[label] = sum(scored.logprobs)
    best = None
    for label, value in scores.items():
        if best is None or value > scores[best]:
            best = label
    return best, scores

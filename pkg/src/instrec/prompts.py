"""Versioned prompt text assets.

Prompt wording is part of the engine's observable behavior (mock scripts
match on it), so it lives here as frozen constants rather than inline
strings. Bump PROMPT_VERSION when any template changes.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

from .types import (
    REASONING_CLOSE,
    REASONING_OPEN,
    Instruction,
    Prompt,
    ReasoningTrace,
    Trigger,
)

if TYPE_CHECKING:
    from .templates import Template

PROMPT_VERSION = "v1"

_SCAFFOLD = f"""You are an on-device assistant that recommends task instructions.
Analyze the trigger object in three stages and answer inside {REASONING_OPEN} ... {REASONING_CLOSE}:
[Entity Recognition] extract the key entities (names, numbers, dates, places).
[Contextual Relevance] connect those entities to what the user likely wants to do.
[Instruction Generation] state the recommendation-ready conclusion."""

_EXAMPLE_HEADER = "## Examples"
_GOLD_HEADER = "## Gold instruction"
_TRIGGER_HEADER = "## Trigger"
_REFINE_HEADER = "## Template steps"
_REFINE_TRIGGER_HEADER = "## Refine trigger"

#: Default in-context example triples (trigger description, reasoning, instruction)
#: used when a construction run does not supply its own.
DEFAULT_IN_CONTEXT_EXAMPLES: tuple[tuple[str, str, str], ...] = (
    (
        "screenshot of a train ticket for friday 9am",
        "the ticket names a departure station and time; the user will want to "
        "be reminded and guided there",
        "add calendar event",
    ),
    (
        "text message containing a new colleague's phone number",
        "the message carries a personal phone number; storing it is the "
        "obvious follow-up",
        "save phone number",
    ),
)


def render_trigger(trigger: Trigger) -> str:
    return f"{_TRIGGER_HEADER}\n{trigger.content_text()}"


def inference_prompt(trigger: Trigger) -> Prompt:
    """Scaffold plus trigger, no in-context examples."""
    return Prompt(body=f"{_SCAFFOLD}\n\n{render_trigger(trigger)}")


def construction_prompt(
    trigger: Trigger,
    examples: tuple[tuple[str, str, str], ...] = DEFAULT_IN_CONTEXT_EXAMPLES,
) -> Prompt:
    """Scaffold plus rendered in-context examples; the gold instruction is
    appended by the pipeline when the request is assembled."""
    rendered = "\n".join(
        f"- trigger: {t}\n  reasoning: {r}\n  instruction: {i}"
        for t, r, i in examples
    )
    body = f"{_SCAFFOLD}\n\n{_EXAMPLE_HEADER}\n{rendered}\n\n{render_trigger(trigger)}"
    return Prompt(body=body, in_context_examples=examples)


def with_gold(prompt: Prompt, gold: Instruction) -> Prompt:
    """Append the gold instruction section for teacher-forced construction."""
    return Prompt(
        body=f"{prompt.body}\n\n{_GOLD_HEADER}\n{gold.surface}",
        in_context_examples=prompt.in_context_examples,
    )


def refinement_prompt(trigger: Trigger, template: Template) -> Prompt:
    """Template steps as a numbered list, then the trigger to re-reason about."""
    steps = "\n".join(f"{i}. {step}" for i, step in enumerate(template.steps, 1))
    body = (
        f"{_SCAFFOLD}\n\n{_REFINE_HEADER}\n{steps}\n\n"
        f"{_REFINE_TRIGGER_HEADER}\n{trigger.content_text()}"
    )
    return Prompt(body=body)


def decode_context_prompt(base: Prompt, reasoning: ReasoningTrace) -> Prompt:
    """Scoring context: the prompt the model saw plus its finished reasoning."""
    return Prompt(body=f"{base.body}\n{reasoning.raw}")


def distillation_prompt(reasoning_raw: str) -> Prompt:
    """Ask the summarizer to compress a reasoning trace into template JSON."""
    body = (
        "Summarize the recurring problem-solving pattern in the reasoning "
        "below as a reusable template. Respond with a single JSON object "
        'with keys "name" (string), "tags" (list of strings), "scenarios" '
        '(string), and "steps" (list of strings).\n\n'
        f"## Reasoning\n{reasoning_raw}"
    )
    return Prompt(body=body)

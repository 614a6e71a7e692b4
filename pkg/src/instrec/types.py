"""Core domain types: triggers, instructions, prompts, reasoning traces, results.

These are immutable value objects with stable JSON encodings; all algorithms
live in the other modules. Field order in every ``to_dict`` is fixed so that
serialized output is byte-stable across runs.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .exceptions import InvariantViolation, MalformedReasoning

REASONING_OPEN = "<REASONING>"
REASONING_CLOSE = "</REASONING>"
EOS_TOKEN = "<EOS>"

#: Recommendation lists are capped at three entries.
MAX_RECOMMENDATIONS = 3


class Modality(str, Enum):
    TEXT = "text"
    IMAGE = "image"


@dataclass(frozen=True)
class Trigger:
    """A user-selected object that initiates a recommendation.

    Exactly one of ``text`` / ``image_ref`` is populated, matching
    ``modality``. Image payloads are opaque: either raw bytes or a file-path
    string; the engine never decodes pixels. Callers may supply a textual
    description of an image under the metadata key ``"ocr_text"``.
    """

    id: str
    modality: Modality
    text: str | None = None
    image_ref: bytes | str | None = None
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.id:
            raise InvariantViolation("trigger id must be non-empty")
        if self.modality is Modality.TEXT:
            if not self.text or self.image_ref is not None:
                raise InvariantViolation(
                    "text trigger must carry text and no image_ref"
                )
        else:
            if self.image_ref is None or self.text is not None:
                raise InvariantViolation(
                    "image trigger must carry image_ref and no text"
                )

    def content_text(self) -> str:
        """Textual stand-in used when rendering this trigger into a prompt."""
        if self.modality is Modality.TEXT:
            return self.text  # type: ignore[return-value]
        ocr = self.metadata.get("ocr_text")
        if ocr:
            return ocr
        if isinstance(self.image_ref, bytes):
            return f"<image {len(self.image_ref)} bytes>"
        return f"<image {self.image_ref}>"

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"id": self.id, "modality": self.modality.value}
        if self.text is not None:
            d["text"] = self.text
        if isinstance(self.image_ref, str):
            d["image_ref"] = self.image_ref
        elif isinstance(self.image_ref, bytes):
            d["image_b64"] = base64.b64encode(self.image_ref).decode("ascii")
        d["metadata"] = dict(self.metadata)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Trigger:
        image_ref: bytes | str | None = d.get("image_ref")
        if image_ref is None and "image_b64" in d:
            image_ref = base64.b64decode(d["image_b64"])
        return cls(
            id=d["id"],
            modality=Modality(d["modality"]),
            text=d.get("text"),
            image_ref=image_ref,
            metadata=dict(d.get("metadata", {})),
        )


@dataclass(frozen=True)
class Instruction:
    """A candidate action phrase from the registered instruction library.

    ``token_ids`` caches the active tokenizer's output on ``surface``.
    """

    id: str
    surface: str
    token_ids: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise InvariantViolation("instruction id must be non-empty")
        if not self.surface.strip():
            raise InvariantViolation("instruction surface must be non-empty")
        if any(t < 0 for t in self.token_ids):
            raise InvariantViolation("token ids must be non-negative")

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "surface": self.surface,
            "token_ids": list(self.token_ids),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Instruction:
        return cls(
            id=d["id"],
            surface=d["surface"],
            token_ids=tuple(d.get("token_ids", ())),
        )


@dataclass(frozen=True)
class Prompt:
    """Prompt text plus optional in-context example triples.

    Examples present means this is a construction prompt (reasoning-dataset
    building); absent means an inference prompt.
    """

    body: str
    in_context_examples: tuple[tuple[str, str, str], ...] | None = None

    @property
    def is_construction(self) -> bool:
        return self.in_context_examples is not None

    def to_dict(self) -> dict[str, Any]:
        examples = (
            [list(e) for e in self.in_context_examples]
            if self.in_context_examples is not None
            else None
        )
        return {"body": self.body, "in_context_examples": examples}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Prompt:
        raw = d.get("in_context_examples")
        examples = (
            tuple((e[0], e[1], e[2]) for e in raw) if raw is not None else None
        )
        return cls(body=d["body"], in_context_examples=examples)


class ReasoningStage(str, Enum):
    ENTITY_RECOGNITION = "entity_recognition"
    CONTEXTUAL_RELEVANCE = "contextual_relevance"
    INSTRUCTION_GENERATION = "instruction_generation"


#: Line label marking each stage inside the raw trace text.
STAGE_LABELS: dict[ReasoningStage, str] = {
    ReasoningStage.ENTITY_RECOGNITION: "[Entity Recognition]",
    ReasoningStage.CONTEXTUAL_RELEVANCE: "[Contextual Relevance]",
    ReasoningStage.INSTRUCTION_GENERATION: "[Instruction Generation]",
}

_STAGE_ORDER = tuple(ReasoningStage)
_RESERVED_MARKERS = (REASONING_OPEN, REASONING_CLOSE, *STAGE_LABELS.values())


@dataclass(frozen=True)
class ReasoningStep:
    stage: ReasoningStage
    text: str


@dataclass(frozen=True)
class ReasoningTrace:
    """Structured multi-step reasoning delimited by the special tokens.

    ``raw`` is the full text including delimiters; ``steps`` is the parsed
    view. Stages appear at most once each, always in the fixed order
    entity recognition, contextual relevance, instruction generation.
    """

    steps: tuple[ReasoningStep, ...]
    raw: str

    def __post_init__(self) -> None:
        if not (
            self.raw.startswith(REASONING_OPEN)
            and self.raw.endswith(REASONING_CLOSE)
        ):
            raise MalformedReasoning(
                f"raw trace must be delimited by {REASONING_OPEN} and "
                f"{REASONING_CLOSE}"
            )
        _check_stage_order(tuple(s.stage for s in self.steps))

    @classmethod
    def compose(cls, steps: list[ReasoningStep] | tuple[ReasoningStep, ...]) -> ReasoningTrace:
        """Build a trace with canonical raw text from parsed steps."""
        steps = tuple(ReasoningStep(s.stage, s.text.strip()) for s in steps)
        for step in steps:
            if any(marker in step.text for marker in _RESERVED_MARKERS):
                raise MalformedReasoning(
                    "step text may not contain delimiters or stage labels"
                )
        lines = [REASONING_OPEN]
        lines += [f"{STAGE_LABELS[s.stage]} {s.text}" for s in steps]
        lines.append(REASONING_CLOSE)
        return cls(steps=steps, raw="\n".join(lines))

    @classmethod
    def parse(cls, text: str, require_all_stages: bool = False) -> ReasoningTrace:
        """Parse delimited reasoning text into a trace.

        Surrounding whitespace is tolerated; everything else is strict.
        With ``require_all_stages`` the trace must contain all three stages,
        not just a well-ordered subset.
        """
        raw = text.strip()
        if not raw.startswith(REASONING_OPEN) or not raw.endswith(REASONING_CLOSE):
            raise MalformedReasoning("missing reasoning delimiters")
        inner = raw[len(REASONING_OPEN) : len(raw) - len(REASONING_CLOSE)]

        steps: list[ReasoningStep] = []
        current: tuple[ReasoningStage, list[str]] | None = None
        for line in inner.splitlines():
            stripped = line.strip()
            matched = None
            for stage, label in STAGE_LABELS.items():
                if stripped.startswith(label):
                    matched = (stage, stripped[len(label) :].strip())
                    break
            if matched is not None:
                if current is not None:
                    steps.append(
                        ReasoningStep(current[0], "\n".join(current[1]).strip())
                    )
                current = (matched[0], [matched[1]] if matched[1] else [])
            elif current is not None:
                if stripped:
                    current[1].append(stripped)
            elif stripped:
                raise MalformedReasoning(
                    f"text before first stage label: {stripped!r}"
                )
        if current is not None:
            steps.append(ReasoningStep(current[0], "\n".join(current[1]).strip()))

        if not steps:
            raise MalformedReasoning("trace contains no reasoning stages")
        _check_stage_order(tuple(s.stage for s in steps))
        if require_all_stages and len(steps) != len(_STAGE_ORDER):
            raise MalformedReasoning("trace must contain all three stages")
        return cls(steps=tuple(steps), raw=raw)

    def to_dict(self) -> dict[str, Any]:
        return {"raw": self.raw}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ReasoningTrace:
        return cls.parse(d["raw"])


def _check_stage_order(stages: tuple[ReasoningStage, ...]) -> None:
    positions = [_STAGE_ORDER.index(s) for s in stages]
    if len(set(positions)) != len(positions):
        raise MalformedReasoning("a reasoning stage appears more than once")
    if positions != sorted(positions):
        raise MalformedReasoning("reasoning stages are out of order")


@dataclass(frozen=True)
class RecommendationResult:
    """Output envelope: ranked instruction ids with decode scores.

    ``instructions`` holds one to three distinct library ids; ``scores`` is
    the parallel, non-increasing list of decode scores.
    """

    trigger_id: str
    reasoning: ReasoningTrace
    template_used: str | None
    instructions: tuple[str, ...]
    scores: tuple[float, ...]

    def __post_init__(self) -> None:
        n = len(self.instructions)
        if not 1 <= n <= MAX_RECOMMENDATIONS:
            raise InvariantViolation(
                f"result must rank 1..{MAX_RECOMMENDATIONS} instructions, got {n}"
            )
        if len(set(self.instructions)) != n:
            raise InvariantViolation("ranked instructions must be distinct")
        if len(self.scores) != n:
            raise InvariantViolation("scores must parallel instructions")
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise InvariantViolation("scores must be non-increasing")

    def to_dict(self) -> dict[str, Any]:
        return {
            "trigger_id": self.trigger_id,
            "reasoning": self.reasoning.raw,
            "template_used": self.template_used,
            "instructions": list(self.instructions),
            "scores": list(self.scores),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> RecommendationResult:
        return cls(
            trigger_id=d["trigger_id"],
            reasoning=ReasoningTrace.parse(d["reasoning"]),
            template_used=d.get("template_used"),
            instructions=tuple(d["instructions"]),
            scores=tuple(float(s) for s in d["scores"]),
        )

"""End-to-end orchestration: reasoning-dataset construction, inference with
template refinement, and SFT-ready dataset export.

Inference is a fixed four-stage flow: generate initial reasoning, retrieve a
template against that initial reasoning, optionally refine once, then decode
instructions through the trie. There is exactly one refinement pass, and
retrieval always consumes the initial reasoning, never the refined one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from . import prompts
from .backend import BackendRequest, Mode, ModelBackend
from .exceptions import (
    IOFailure,
    MalformedReasoning,
    PipelineStageError,
    UnknownInstructionId,
)
from .templates import RetrievalConfig, TemplateLibrary
from .tokenizer import Vocabulary
from .trie import TrieHolder
from .types import (
    MAX_RECOMMENDATIONS,
    Instruction,
    Prompt,
    ReasoningTrace,
    RecommendationResult,
    Trigger,
)


@dataclass
class ExportReport:
    """Outcome of an SFT export: lines written plus per-sample skips."""

    written: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)


class RecommendationPipeline:
    """Binds an instruction library, tokenizer, template store, and backend.

    Stateless across calls: each inference takes read snapshots of the trie
    and template library, so concurrent calls are independent.
    """

    def __init__(
        self,
        instructions: Sequence[Instruction],
        vocab: Vocabulary,
        backend: ModelBackend,
        templates: TemplateLibrary,
    ):
        self.instructions = {i.id: i for i in instructions}
        self.vocab = vocab
        self.backend = backend
        self.templates = templates
        self.trie_holder = TrieHolder(list(instructions), vocab)

    # --- dataset construction -------------------------------------------------

    def construct_reasoning_sample(
        self, construction: Prompt, trigger: Trigger, gold: Instruction
    ) -> ReasoningTrace:
        """Teacher-forced reasoning generation for one (trigger, gold) pair.

        The gold instruction is appended to the construction prompt and the
        backend's text is parsed strictly: all three stages, delimited."""
        if not construction.is_construction:
            raise ValueError("construction prompt must carry in-context examples")
        if gold.id not in self.instructions:
            raise UnknownInstructionId(gold.id)
        request = BackendRequest(
            prompt=prompts.with_gold(construction, gold),
            trigger=trigger,
            mode=Mode.GENERATE_TEXT,
        )
        text = self.backend.generate_text(request)
        return ReasoningTrace.parse(text, require_all_stages=True)

    # --- inference -------------------------------------------------------------

    def infer(
        self, trigger: Trigger, cfg: RetrievalConfig, k: int = MAX_RECOMMENDATIONS
    ) -> RecommendationResult:
        """Recommend up to ``k`` instructions for a trigger.

        Stage errors abort with a PipelineStageError naming the stage. A
        retrieval miss is not an error: decoding proceeds on the initial
        reasoning. ``k`` is clamped to the library size so small libraries
        stay usable.
        """
        if not 1 <= k <= MAX_RECOMMENDATIONS:
            raise ValueError(f"k must lie in 1..{MAX_RECOMMENDATIONS}, got {k}")
        trie = self.trie_holder.current
        k = min(k, trie.instruction_count)

        base = prompts.inference_prompt(trigger)
        try:
            raw = self.backend.generate_text(
                BackendRequest(prompt=base, trigger=trigger, mode=Mode.GENERATE_TEXT)
            )
            initial = ReasoningTrace.parse(raw)
        except Exception as exc:
            raise PipelineStageError("initial_reasoning", exc)

        try:
            hit = self.templates.retrieve(initial, cfg, trigger_id=trigger.id)
        except Exception as exc:
            raise PipelineStageError("template_retrieval", exc)

        if hit is not None:
            try:
                refined_raw = self.backend.generate_text(
                    BackendRequest(
                        prompt=prompts.refinement_prompt(trigger, hit.template),
                        trigger=trigger,
                        mode=Mode.GENERATE_TEXT,
                    )
                )
                reasoning = ReasoningTrace.parse(refined_raw)
            except Exception as exc:
                raise PipelineStageError("refinement", exc)
        else:
            reasoning = initial

        score_prompt = prompts.decode_context_prompt(base, reasoning)

        def scorer(prefix: Sequence[int]):
            return self.backend.score_tokens(
                BackendRequest(
                    prompt=score_prompt,
                    trigger=trigger,
                    mode=Mode.SCORE_TOKENS,
                    prefix=tuple(prefix),
                )
            )

        try:
            ranked = trie.top_k_decode(scorer, k)
        except Exception as exc:
            raise PipelineStageError("decode", exc)

        return RecommendationResult(
            trigger_id=trigger.id,
            reasoning=reasoning,
            template_used=hit.template.id if hit is not None else None,
            instructions=tuple(instr_id for instr_id, _ in ranked),
            scores=tuple(score for _, score in ranked),
        )


def export_sft_dataset(
    samples: Sequence[tuple[Trigger, Instruction, ReasoningTrace]], path: str
) -> ExportReport:
    """Write (trigger, instruction, reasoning) triples as JSONL.

    Each line is ``{"trigger": {...}, "reasoning": raw, "instruction":
    surface}`` with stable field order. Samples whose trace fails its
    invariants are skipped and reported, not written.
    """
    report = ExportReport()
    lines = []
    for index, (trigger, instruction, trace) in enumerate(samples):
        try:
            reparsed = ReasoningTrace.parse(trace.raw)
            if reparsed.steps != trace.steps:
                raise MalformedReasoning("raw text does not reproduce steps")
        except Exception as exc:
            report.skipped.append((index, str(exc)))
            continue
        lines.append(
            json.dumps(
                {
                    "trigger": trigger.to_dict(),
                    "reasoning": trace.raw,
                    "instruction": instruction.surface,
                },
                ensure_ascii=False,
            )
        )
    try:
        with open(path, "w", encoding="utf-8") as f:
            for line in lines:
                f.write(line + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write dataset: {exc}") from exc
    report.written = len(lines)
    return report


def load_sft_dataset(path: str) -> list[dict]:
    """Read back an exported JSONL dataset as dicts."""
    rows = []
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
    except OSError as exc:
        raise IOFailure(f"cannot read dataset: {exc}") from exc
    return rows

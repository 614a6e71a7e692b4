"""Reasoning-template store: threshold-gated retrieval, novelty-gated
insertion, and distillation of logged reasoning traces into new candidates.

Retrieval returns at most one template, the similarity argmax, and only when
that similarity clears the retrieval threshold. Every miss is logged so the
library can evolve: logged traces are clustered and summarized into candidate
templates, which re-enter through the same novelty gate as everything else.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import threading
import time
from dataclasses import dataclass
from typing import Any, Sequence

from .backend import BackendRequest, Mode, ModelBackend
from .embedding import Embedder, EmbeddingVector, cosine_similarity
from .exceptions import (
    DuplicateId,
    InvariantViolation,
    IOFailure,
    MalformedTemplateResponse,
    SummarizerFailure,
)
from .types import Modality, ReasoningTrace, Trigger

logger = logging.getLogger(__name__)

#: Similarity at which two logged traces land in the same distillation cluster.
CLUSTER_LINK_THRESHOLD = 0.7


def embedding_text(
    name: str, tags: Sequence[str], scenarios: str, steps: Sequence[str]
) -> str:
    """Canonical text a template is embedded from: all four metadata fields,
    newline-separated."""
    return "\n".join([name, *tags, scenarios, *steps])


@dataclass(frozen=True)
class Template:
    """Four-field reasoning template with its embedding cached."""

    id: str
    name: str
    tags: tuple[str, ...]
    scenarios: str
    steps: tuple[str, ...]
    embedding: EmbeddingVector

    def __post_init__(self) -> None:
        if not self.id:
            raise InvariantViolation("template id must be non-empty")
        if not self.name:
            raise InvariantViolation("template name must be non-empty")
        if not self.steps:
            raise InvariantViolation("template needs at least one reasoning step")

    @classmethod
    def build(
        cls,
        id: str,
        name: str,
        tags: Sequence[str],
        scenarios: str,
        steps: Sequence[str],
        embedder: Embedder,
    ) -> Template:
        return cls(
            id=id,
            name=name,
            tags=tuple(tags),
            scenarios=scenarios,
            steps=tuple(steps),
            embedding=embedder.embed(embedding_text(name, tags, scenarios, steps)),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "tags": list(self.tags),
            "scenarios": self.scenarios,
            "steps": list(self.steps),
        }


@dataclass(frozen=True)
class RetrievalConfig:
    """Similarity thresholds: ``delta`` gates retrieval, ``novelty_delta``
    gates insertion. Two knobs because the recommended operating points
    differ (0.6 for retrieval, 0.5 for insertion)."""

    delta: float = 0.6
    novelty_delta: float = 0.5

    def __post_init__(self) -> None:
        # Closed bounds: sweep harnesses probe the degenerate endpoints 0 and 1.
        for label, value in (("delta", self.delta), ("novelty_delta", self.novelty_delta)):
            if not 0.0 <= value <= 1.0:
                raise InvariantViolation(f"{label} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class DistillationLogEntry:
    """A reasoning trace that matched no template, kept for distillation."""

    trigger_id: str
    reasoning: ReasoningTrace
    best_similarity: float
    timestamp: float

    def to_dict(self) -> dict[str, Any]:
        # -inf marks "empty library at log time"; null keeps the JSON strict
        best = self.best_similarity if math.isfinite(self.best_similarity) else None
        return {
            "trigger_id": self.trigger_id,
            "reasoning": self.reasoning.raw,
            "best_similarity": best,
            "timestamp": self.timestamp,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DistillationLogEntry:
        best = d.get("best_similarity")
        return cls(
            trigger_id=d["trigger_id"],
            reasoning=ReasoningTrace.parse(d["reasoning"]),
            best_similarity=float(best) if best is not None else float("-inf"),
            timestamp=float(d["timestamp"]),
        )


@dataclass(frozen=True)
class AdmissionResult:
    """Outcome of the novelty gate: admitted or rejected, with the maximum
    similarity against the library at decision time (-inf when empty)."""

    added: bool
    max_similarity: float


@dataclass(frozen=True)
class AdmissionRecord:
    """Audit trail row for one novelty-gate decision."""

    template_id: str
    max_similarity: float
    threshold: float
    added: bool


@dataclass
class RetrievalHit:
    template: Template
    similarity: float


class TemplateLibrary:
    """Read-mostly store of templates.

    Concurrent retrievals are safe; insertions and loads take the writer
    lock, so readers never observe a half-inserted template. Embeddings are
    always recomputed through the active embedder, never persisted.
    """

    def __init__(self, embedder: Embedder, log_path: str | None = None):
        self._embedder = embedder
        self._templates: dict[str, Template] = {}
        self._lock = threading.Lock()
        self._log_path = log_path
        self.distillation_log: list[DistillationLogEntry] = []
        self.audit_log: list[AdmissionRecord] = []

    def __len__(self) -> int:
        return len(self._templates)

    @property
    def embedder(self) -> Embedder:
        return self._embedder

    def get(self, template_id: str) -> Template | None:
        return self._templates.get(template_id)

    def templates(self) -> list[Template]:
        with self._lock:
            return list(self._templates.values())

    def build_template(
        self,
        id: str,
        name: str,
        tags: Sequence[str],
        scenarios: str,
        steps: Sequence[str],
    ) -> Template:
        return Template.build(id, name, tags, scenarios, steps, self._embedder)

    def add_seed(self, template: Template) -> None:
        """Insert without the novelty gate; used when loading a library file.

        Seed templates therefore carry no pairwise-novelty guarantee.
        """
        with self._lock:
            if template.id in self._templates:
                raise DuplicateId(template.id)
            self._templates[template.id] = template

    def retrieve(
        self,
        reasoning: ReasoningTrace,
        cfg: RetrievalConfig,
        trigger_id: str = "",
    ) -> RetrievalHit | None:
        """Similarity argmax over the library, gated by ``cfg.delta``.

        Ties break toward the lexicographically smallest template id. On a
        miss the trace is appended to the distillation log (best similarity
        -inf when the library is empty) and None is returned.
        """
        query = self._embedder.embed(reasoning.raw)
        best: Template | None = None
        best_sim = float("-inf")
        for template in sorted(self.templates(), key=lambda t: t.id):
            sim = cosine_similarity(query, template.embedding)
            if sim > best_sim:
                best, best_sim = template, sim
        if best is not None and best_sim >= cfg.delta:
            return RetrievalHit(template=best, similarity=best_sim)
        self._log_miss(trigger_id, reasoning, best_sim)
        return None

    def add_if_novel(self, candidate: Template, cfg: RetrievalConfig) -> AdmissionResult:
        """Admit ``candidate`` iff its maximum similarity against the current
        library is strictly below ``cfg.novelty_delta``. An empty library
        admits everything (maximum taken as -inf)."""
        with self._lock:
            if candidate.id in self._templates:
                raise DuplicateId(candidate.id)
            max_sim = float("-inf")
            for template in self._templates.values():
                sim = cosine_similarity(candidate.embedding, template.embedding)
                max_sim = max(max_sim, sim)
            added = max_sim < cfg.novelty_delta
            if added:
                self._templates[candidate.id] = candidate
            self.audit_log.append(
                AdmissionRecord(
                    template_id=candidate.id,
                    max_similarity=max_sim,
                    threshold=cfg.novelty_delta,
                    added=added,
                )
            )
            return AdmissionResult(added=added, max_similarity=max_sim)

    def distill_candidates(
        self,
        log: Sequence[DistillationLogEntry],
        summarizer: ModelBackend,
        min_cluster: int,
        link_threshold: float = CLUSTER_LINK_THRESHOLD,
    ) -> list[Template]:
        """Cluster logged traces and summarize each big cluster's medoid into
        a candidate template.

        Greedy single-linkage clustering: an entry joins the first cluster
        containing any member within ``link_threshold`` cosine similarity.
        Clusters smaller than ``min_cluster`` are ignored. Candidates are
        returned, not inserted; pipe them through add_if_novel. A summarizer
        failure skips that cluster with a warning; an unparseable response
        raises MalformedTemplateResponse.
        """
        if min_cluster < 1:
            raise ValueError("min_cluster must be at least 1")
        if not log:
            return []

        vectors = [self._embedder.embed(e.reasoning.raw) for e in log]
        clusters: list[list[int]] = []
        for i in range(len(log)):
            for cluster in clusters:
                if any(
                    cosine_similarity(vectors[i], vectors[j]) >= link_threshold
                    for j in cluster
                ):
                    cluster.append(i)
                    break
            else:
                clusters.append([i])

        candidates = []
        for cluster in clusters:
            if len(cluster) < min_cluster:
                continue
            medoid = max(
                cluster,
                key=lambda i: (
                    sum(cosine_similarity(vectors[i], vectors[j]) for j in cluster),
                    -i,
                ),
            )
            entry = log[medoid]
            try:
                response = summarizer.generate_text(
                    _summarization_request(entry.reasoning.raw)
                )
            except Exception as exc:
                failure = SummarizerFailure(
                    f"cluster of {len(cluster)} (medoid trigger "
                    f"{entry.trigger_id}): {exc}"
                )
                logger.warning("skipping cluster: %s", failure)
                continue
            candidates.append(self._parse_template_response(response))
        return candidates

    def _parse_template_response(self, response: str) -> Template:
        try:
            payload = json.loads(response)
        except json.JSONDecodeError as exc:
            raise MalformedTemplateResponse(
                "summarizer response is not JSON"
            ) from exc
        if not isinstance(payload, dict):
            raise MalformedTemplateResponse("summarizer response is not an object")
        try:
            name = payload["name"]
            tags = payload["tags"]
            scenarios = payload["scenarios"]
            steps = payload["steps"]
        except KeyError as exc:
            raise MalformedTemplateResponse(f"missing field {exc}") from exc
        if (
            not isinstance(name, str)
            or not isinstance(tags, list)
            or not isinstance(scenarios, str)
            or not isinstance(steps, list)
            or not steps
        ):
            raise MalformedTemplateResponse("field types are wrong")
        digest = hashlib.sha1(
            embedding_text(name, tags, scenarios, steps).encode("utf-8")
        ).hexdigest()[:12]
        return self.build_template(
            id=f"distilled-{digest}",
            name=name,
            tags=tags,
            scenarios=scenarios,
            steps=steps,
        )

    def _log_miss(
        self, trigger_id: str, reasoning: ReasoningTrace, best_similarity: float
    ) -> None:
        entry = DistillationLogEntry(
            trigger_id=trigger_id,
            reasoning=reasoning,
            best_similarity=best_similarity,
            timestamp=time.monotonic(),
        )
        with self._lock:
            self.distillation_log.append(entry)
            if self._log_path is not None:
                try:
                    with open(self._log_path, "a", encoding="utf-8") as f:
                        f.write(json.dumps(entry.to_dict()) + "\n")
                except OSError as exc:
                    raise IOFailure(f"cannot append distillation log: {exc}") from exc

    # --- persistence ---------------------------------------------------------

    def save(self, path: str) -> None:
        """Write the library as a JSON array of the four metadata fields."""
        try:
            with open(path, "w", encoding="utf-8") as f:
                json.dump([t.to_dict() for t in self.templates()], f, indent=2)
                f.write("\n")
        except OSError as exc:
            raise IOFailure(f"cannot write template library: {exc}") from exc

    @classmethod
    def load(
        cls, path: str, embedder: Embedder, log_path: str | None = None
    ) -> TemplateLibrary:
        """Read a library file, recomputing embeddings with ``embedder``."""
        try:
            with open(path, encoding="utf-8") as f:
                raw = json.load(f)
        except OSError as exc:
            raise IOFailure(f"cannot read template library: {exc}") from exc
        library = cls(embedder, log_path=log_path)
        for item in raw:
            library.add_seed(
                library.build_template(
                    id=item["id"],
                    name=item["name"],
                    tags=item["tags"],
                    scenarios=item["scenarios"],
                    steps=item["steps"],
                )
            )
        return library


def load_distillation_log(path: str) -> list[DistillationLogEntry]:
    """Read an append-only JSONL distillation log."""
    entries = []
    try:
        with open(path, encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    entries.append(DistillationLogEntry.from_dict(json.loads(line)))
    except OSError as exc:
        raise IOFailure(f"cannot read distillation log: {exc}") from exc
    return entries


def _summarization_request(reasoning_raw: str) -> BackendRequest:
    from .prompts import distillation_prompt

    return BackendRequest(
        prompt=distillation_prompt(reasoning_raw),
        trigger=Trigger(
            id="distillation",
            modality=Modality.TEXT,
            text=reasoning_raw,
        ),
        mode=Mode.GENERATE_TEXT,
    )

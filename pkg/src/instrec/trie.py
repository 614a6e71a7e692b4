"""Token prefix tree over the instruction library and constrained decoding.

Every instruction's token sequence gets the end-of-sequence token appended
before insertion, which makes the code prefix-free: "save" and "save phone
number" coexist without ambiguity, and termination is always an explicit
<EOS> transition into a terminal leaf.

Decoding never emits anything outside the library: at each step the scorer's
logits are masked down to the current node's children, so any scorer, however
adversarial, walks root-to-terminal along a registered instruction.
"""

from __future__ import annotations

import itertools
import json
import threading
from typing import Callable, Iterable, Sequence

import numpy as np

from .exceptions import (
    DimensionMismatch,
    DuplicateInstruction,
    EmptyLibrary,
    InvalidPrefix,
    KTooLarge,
    ScorerFailure,
)
from .tokenizer import Vocabulary
from .types import Instruction

#: Maps a token prefix to one logit per vocabulary id.
Scorer = Callable[[Sequence[int]], np.ndarray]

_generation_counter = itertools.count(1)


class TrieNode:
    """One trie node: child map keyed by token id, plus a terminal marker.

    ``terminal_instruction`` is set only on the leaf reached through an
    instruction's full token sequence followed by <EOS>.
    """

    __slots__ = ("children", "terminal_instruction")

    def __init__(self) -> None:
        self.children: dict[int, TrieNode] = {}
        self.terminal_instruction: str | None = None


class InstructionTrie:
    """Immutable-after-build prefix tree over tokenized instructions."""

    def __init__(
        self,
        root: TrieNode,
        vocab_size: int,
        eos_id: int,
        instruction_ids: tuple[str, ...],
        generation: int,
    ):
        self.root = root
        self.vocab_size = vocab_size
        self.eos_id = eos_id
        self.instruction_ids = instruction_ids
        self.generation = generation

    @property
    def instruction_count(self) -> int:
        return len(self.instruction_ids)

    def walk(self, prefix: Sequence[int]) -> TrieNode:
        """Follow ``prefix`` from the root; InvalidPrefix if it leaves the trie."""
        node = self.root
        for token_id in prefix:
            child = node.children.get(token_id)
            if child is None:
                raise InvalidPrefix(f"prefix {list(prefix)} leaves the trie")
            node = child
        return node

    def valid_next(self, prefix: Sequence[int]) -> set[int]:
        """Token ids that may legally follow ``prefix``."""
        return set(self.walk(prefix).children)

    def constrained_decode(self, scorer: Scorer) -> tuple[str, float]:
        """Greedy masked decode; always returns a library instruction.

        At each node the scorer's logits are masked down to the node's
        children and the argmax is taken, ties broken by lowest token id.
        The score is the sum of the selected masked logits, including the
        final <EOS> step.
        """
        node = self.root
        prefix: list[int] = []
        total = 0.0
        while node.terminal_instruction is None:
            masked = mask_logits(
                _run_scorer(scorer, prefix), node.children, self.vocab_size
            )
            token_id = int(np.argmax(masked))
            total += float(masked[token_id])
            prefix.append(token_id)
            node = node.children[token_id]
        return node.terminal_instruction, total

    def top_k_decode(self, scorer: Scorer, k: int) -> list[tuple[str, float]]:
        """Exact top-k instructions by total path score, descending.

        Every root-to-terminal path is scored (the candidate set is the
        instruction library, which is small by construction), so the ranking
        is exact rather than beam-pruned. Ties are broken by ascending token
        ids. ``k`` must not exceed the library size.
        """
        if not 1 <= k <= self.instruction_count:
            raise KTooLarge(
                f"k={k} outside 1..{self.instruction_count}"
            )
        finished: list[tuple[float, tuple[int, ...], str]] = []
        stack: list[tuple[TrieNode, tuple[int, ...], float]] = [
            (self.root, (), 0.0)
        ]
        while stack:
            node, prefix, score = stack.pop()
            if node.terminal_instruction is not None:
                finished.append((score, prefix, node.terminal_instruction))
                continue
            logits = _run_scorer(scorer, prefix)
            if len(logits) != self.vocab_size:
                raise DimensionMismatch(
                    f"scorer returned {len(logits)} logits, expected {self.vocab_size}"
                )
            for token_id, child in node.children.items():
                stack.append(
                    (child, prefix + (token_id,), score + float(logits[token_id]))
                )
        finished.sort(key=lambda item: (-item[0], item[1]))
        return [(instr_id, score) for score, _, instr_id in finished[:k]]

    def to_debug_dict(self, vocab: Vocabulary) -> dict:
        """Nested dump keyed by token string, for golden-file inspection."""

        def render(node: TrieNode) -> dict:
            d: dict = {}
            if node.terminal_instruction is not None:
                d["terminal_instruction"] = node.terminal_instruction
            if node.children:
                d["children"] = {
                    vocab.id_to_token[tid]: render(child)
                    for tid, child in sorted(node.children.items())
                }
            return d

        return {
            "generation": self.generation,
            "vocab_size": self.vocab_size,
            "instruction_count": self.instruction_count,
            "root": render(self.root),
        }

    def to_debug_json(self, vocab: Vocabulary) -> str:
        return json.dumps(self.to_debug_dict(vocab), indent=2, sort_keys=True)


def build_trie(instructions: Sequence[Instruction], vocab: Vocabulary) -> InstructionTrie:
    """Insert every instruction's token ids plus <EOS> into a fresh trie.

    Build time is linear in the total token count. Each build gets a new,
    strictly increasing generation number.
    """
    if not instructions:
        raise EmptyLibrary("cannot build a trie from an empty library")
    eos = vocab.specials.end_of_sequence
    root = TrieNode()
    for instr in instructions:
        token_ids = instr.token_ids or tuple(vocab.tokenize(instr.surface))
        node = root
        for token_id in (*token_ids, eos):
            node = node.children.setdefault(token_id, TrieNode())
        if node.terminal_instruction is not None:
            raise DuplicateInstruction(
                f"{instr.id!r} and {node.terminal_instruction!r} share token ids"
            )
        node.terminal_instruction = instr.id
    return InstructionTrie(
        root=root,
        vocab_size=vocab.size,
        eos_id=eos,
        instruction_ids=tuple(i.id for i in instructions),
        generation=next(_generation_counter),
    )


def mask_logits(
    logits: np.ndarray | Sequence[float],
    valid: Iterable[int],
    vocab_size: int,
) -> np.ndarray:
    """Return a copy with every position outside ``valid`` set to -inf."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape != (vocab_size,):
        raise DimensionMismatch(
            f"logits shape {logits.shape} does not match vocab size {vocab_size}"
        )
    valid_ids = list(valid)
    if not valid_ids:
        raise ValueError("valid token set must be non-empty")
    masked = np.full(vocab_size, -np.inf, dtype=np.float64)
    masked[valid_ids] = logits[valid_ids]
    return masked


def _run_scorer(scorer: Scorer, prefix: Sequence[int]) -> np.ndarray:
    try:
        return np.asarray(scorer(tuple(prefix)), dtype=np.float64)
    except Exception as exc:
        raise ScorerFailure(f"scorer failed on prefix {list(prefix)}") from exc


class TrieHolder:
    """Publishes trie rebuilds atomically for concurrent readers.

    Readers snapshot ``current`` once and decode against that object; they
    see the old trie or the new one, never a partial structure. Rebuilds are
    serialized by a lock.
    """

    def __init__(self, instructions: Sequence[Instruction], vocab: Vocabulary):
        self._lock = threading.Lock()
        self._trie = build_trie(instructions, vocab)

    @property
    def current(self) -> InstructionTrie:
        return self._trie

    def publish(self, trie: InstructionTrie) -> None:
        with self._lock:
            self._trie = trie

    def rebuild(
        self, instructions: Sequence[Instruction], vocab: Vocabulary
    ) -> InstructionTrie:
        trie = build_trie(instructions, vocab)
        self.publish(trie)
        return trie

"""Tokenizer abstraction plus the deterministic reference tokenizer.

The trie is built against whatever tokenizer the deployment model uses; for
tests and desk-scale runs this module ships a word-level reference tokenizer:
lowercase, whitespace-split, ids assigned in ascending lexicographic order.
The three special tokens are appended after all words, in the fixed order
reasoning-open, reasoning-close, end-of-sequence.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Sequence

from .exceptions import DuplicateInstruction, EmptyLibrary, UnknownToken
from .types import EOS_TOKEN, REASONING_CLOSE, REASONING_OPEN, Instruction


@dataclass(frozen=True)
class SpecialTokenIds:
    reasoning_open: int
    reasoning_close: int
    end_of_sequence: int


@dataclass(frozen=True)
class Vocabulary:
    """Bidirectional token map with dense ids in [0, size)."""

    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]
    specials: SpecialTokenIds

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def tokenize(self, text: str) -> list[int]:
        """Map text to token ids: lowercased, whitespace-split.

        Special-token literals match before lowercasing so traces and
        instruction streams can mix them with ordinary words. Raises
        UnknownToken for any word outside the vocabulary.
        """
        if not text:
            raise ValueError("cannot tokenize empty text")
        ids = []
        for word in text.split():
            token_id = self.token_to_id.get(word)
            if token_id is None:
                token_id = self.token_to_id.get(word.lower())
            if token_id is None:
                raise UnknownToken(word)
            ids.append(token_id)
        return ids

    def detokenize(self, ids: Sequence[int]) -> str:
        words = []
        for token_id in ids:
            if not 0 <= token_id < self.size:
                raise UnknownToken(str(token_id))
            words.append(self.id_to_token[token_id])
        return " ".join(words)

    def to_dict(self) -> dict[str, Any]:
        return {
            "tokens": list(self.id_to_token),
            "specials": {
                "reasoning_open": self.specials.reasoning_open,
                "reasoning_close": self.specials.reasoning_close,
                "end_of_sequence": self.specials.end_of_sequence,
            },
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Vocabulary:
        tokens = tuple(d["tokens"])
        specials = d["specials"]
        return cls(
            token_to_id={tok: i for i, tok in enumerate(tokens)},
            id_to_token=tokens,
            specials=SpecialTokenIds(
                reasoning_open=specials["reasoning_open"],
                reasoning_close=specials["reasoning_close"],
                end_of_sequence=specials["end_of_sequence"],
            ),
        )


def build_vocabulary(surfaces: Iterable[str]) -> Vocabulary:
    """Build the reference vocabulary from instruction surfaces.

    Word ids are assigned in ascending lexicographic order starting at zero;
    the special tokens take the next three ids.
    """
    surfaces = list(surfaces)
    if not surfaces:
        raise EmptyLibrary("cannot build a vocabulary with no instructions")
    words: set[str] = set()
    for surface in surfaces:
        if not surface or not surface.strip():
            raise ValueError("instruction surfaces must be non-empty")
        words.update(surface.lower().split())

    ordered = sorted(words)
    tokens = tuple(ordered) + (REASONING_OPEN, REASONING_CLOSE, EOS_TOKEN)
    n = len(ordered)
    return Vocabulary(
        token_to_id={tok: i for i, tok in enumerate(tokens)},
        id_to_token=tokens,
        specials=SpecialTokenIds(
            reasoning_open=n, reasoning_close=n + 1, end_of_sequence=n + 2
        ),
    )


def tokenize_library(
    entries: Iterable[tuple[str, str] | Instruction], vocab: Vocabulary
) -> list[Instruction]:
    """Tokenize (id, surface) pairs into Instructions with cached token ids.

    Enforces the library invariant that no two instructions share a token-id
    sequence, and rejects surfaces that contain reserved special tokens.
    """
    reserved = {
        vocab.specials.reasoning_open,
        vocab.specials.reasoning_close,
        vocab.specials.end_of_sequence,
    }
    seen: dict[tuple[int, ...], str] = {}
    library = []
    for entry in entries:
        if isinstance(entry, Instruction):
            instr_id, surface = entry.id, entry.surface
        else:
            instr_id, surface = entry
        token_ids = tuple(vocab.tokenize(surface))
        if reserved & set(token_ids):
            raise ValueError(
                f"instruction {instr_id!r} contains a reserved special token"
            )
        if token_ids in seen:
            raise DuplicateInstruction(
                f"{instr_id!r} and {seen[token_ids]!r} share token ids {list(token_ids)}"
            )
        seen[token_ids] = instr_id
        library.append(Instruction(id=instr_id, surface=surface, token_ids=token_ids))
    if not library:
        raise EmptyLibrary("instruction library is empty")
    return library

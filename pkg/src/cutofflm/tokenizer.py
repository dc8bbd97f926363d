"""Byte-fallback BPE tokenizer with deterministic training.

Every byte value 0-255 has a base token, so encode() is total on arbitrary
bytes and decode(encode(x)) == x always holds. Special tokens (document
separator, pad, chat-role markers) occupy fixed ids after the byte range and
are never produced by encode(); they are inserted programmatically by the
packing and chat-template code.

Training is deterministic: the most frequent adjacent pair merges first, and
frequency ties break toward the lowest (left id, right id) pair.
"""

from __future__ import annotations

import base64
import hashlib
import json
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

FORMAT_VERSION = 1
N_BYTE_TOKENS = 256

DEFAULT_SPECIAL_TOKENS = (
    "<|endoftext|>",  # document separator, also the end-of-text stop token
    "<|pad|>",
    "<|system|>",
    "<|user|>",
    "<|assistant|>",
    "<|endofturn|>",
)

# Merges never cross whitespace boundaries; ASCII whitespace only, so the
# split is well defined on raw bytes.
_PRETOKEN_RE = re.compile(rb"\S+|\s+")


class TokenizerError(Exception):
    pass


@dataclass
class TokenizerArtifact:
    """Immutable trained tokenizer: vocab table, merge rules, specials."""

    vocab: list[bytes]
    merges: list[tuple[int, int]]
    specials: tuple[str, ...]
    trained_on_cutoff: int
    vocab_size_target: int
    fingerprint: str = ""
    _merge_rank: dict[tuple[int, int], tuple[int, int]] = field(
        default_factory=dict, repr=False, compare=False
    )
    _piece_cache: dict[bytes, tuple[int, ...]] = field(
        default_factory=dict, repr=False, compare=False
    )

    def __post_init__(self) -> None:
        if not self._merge_rank:
            base = N_BYTE_TOKENS + len(self.specials)
            self._merge_rank = {
                pair: (rank, base + rank) for rank, pair in enumerate(self.merges)
            }
        if not self.fingerprint:
            self.fingerprint = _fingerprint(self.specials, self.merges, self.vocab_size_target)

    @property
    def vocab_len(self) -> int:
        return len(self.vocab)

    def special_id(self, surface: str) -> int:
        try:
            return N_BYTE_TOKENS + self.specials.index(surface)
        except ValueError:
            raise TokenizerError(f"unknown special token {surface!r}") from None

    @property
    def doc_sep_id(self) -> int:
        return self.special_id("<|endoftext|>")

    @property
    def end_of_text_id(self) -> int:
        return self.special_id("<|endoftext|>")

    @property
    def pad_id(self) -> int:
        return self.special_id("<|pad|>")

    @property
    def end_of_turn_id(self) -> int:
        return self.special_id("<|endofturn|>")

    def role_id(self, role: str) -> int:
        return self.special_id(f"<|{role}|>")

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset(range(N_BYTE_TOKENS, N_BYTE_TOKENS + len(self.specials)))


def _fingerprint(specials: tuple[str, ...], merges: list[tuple[int, int]], target: int) -> str:
    canonical = json.dumps(
        {
            "format_version": FORMAT_VERSION,
            "specials": list(specials),
            "merges": [list(m) for m in merges],
            "vocab_size_target": target,
        },
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _base_vocab(specials: tuple[str, ...]) -> list[bytes]:
    vocab = [bytes([b]) for b in range(N_BYTE_TOKENS)]
    vocab.extend(s.encode("utf-8") for s in specials)
    return vocab


def train_bpe(
    corpus: Iterable[str | bytes],
    vocab_size: int,
    cutoff_year: int,
    specials: tuple[str, ...] = DEFAULT_SPECIAL_TOKENS,
) -> TokenizerArtifact:
    """Train a byte-fallback BPE tokenizer on an already cutoff-filtered corpus.

    The corpus must respect the stated cutoff; ``trained_on_cutoff`` records it
    so downstream training can assert no tokenizer leakage. If the corpus runs
    out of repeated pairs before ``vocab_size`` is reached, the artifact simply
    has fewer merges and a warning is emitted.
    """
    min_size = N_BYTE_TOKENS + len(specials)
    if vocab_size < min_size:
        raise TokenizerError(
            f"vocab_size {vocab_size} < {min_size} (256 bytes + {len(specials)} specials)"
        )

    piece_freq: Counter[bytes] = Counter()
    for text in corpus:
        data = text.encode("utf-8") if isinstance(text, str) else text
        for piece in _PRETOKEN_RE.findall(data):
            piece_freq[piece] += 1

    pieces: list[list[int]] = [list(p) for p in piece_freq]
    freqs: list[int] = list(piece_freq.values())

    pair_counts: Counter[tuple[int, int]] = Counter()
    pair_where: dict[tuple[int, int], set[int]] = {}
    for idx, ids in enumerate(pieces):
        f = freqs[idx]
        for pair in zip(ids, ids[1:]):
            pair_counts[pair] += f
            pair_where.setdefault(pair, set()).add(idx)

    vocab = _base_vocab(specials)
    merges: list[tuple[int, int]] = []

    while len(vocab) < vocab_size:
        best_pair: tuple[int, int] | None = None
        best_count = 1  # pairs must occur at least twice to be worth a rule
        for pair, count in pair_counts.items():
            if count > best_count or (count == best_count and best_pair is not None and pair < best_pair):
                best_pair = pair
                best_count = count
        if best_pair is None:
            warnings.warn(
                f"corpus exhausted after {len(merges)} merges "
                f"(vocabulary {len(vocab)} < requested {vocab_size})",
                stacklevel=2,
            )
            break

        new_id = len(vocab)
        vocab.append(vocab[best_pair[0]] + vocab[best_pair[1]])
        merges.append(best_pair)

        affected = pair_where.pop(best_pair, set())
        for idx in affected:
            ids = pieces[idx]
            f = freqs[idx]
            for pair in zip(ids, ids[1:]):
                pair_counts[pair] -= f
                if pair_counts[pair] <= 0:
                    del pair_counts[pair]
                spots = pair_where.get(pair)
                if spots is not None:
                    spots.discard(idx)
                    if not spots:
                        del pair_where[pair]
            merged: list[int] = []
            i = 0
            while i < len(ids):
                if i + 1 < len(ids) and (ids[i], ids[i + 1]) == best_pair:
                    merged.append(new_id)
                    i += 2
                else:
                    merged.append(ids[i])
                    i += 1
            pieces[idx] = merged
            for pair in zip(merged, merged[1:]):
                pair_counts[pair] += f
                pair_where.setdefault(pair, set()).add(idx)

    return TokenizerArtifact(
        vocab=vocab,
        merges=merges,
        specials=specials,
        trained_on_cutoff=cutoff_year,
        vocab_size_target=vocab_size,
    )


def _merge_piece(artifact: TokenizerArtifact, piece: bytes) -> tuple[int, ...]:
    cached = artifact._piece_cache.get(piece)
    if cached is not None:
        return cached
    ids = list(piece)
    ranks = artifact._merge_rank
    while len(ids) > 1:
        best_rank = None
        best_pair = None
        for pair in zip(ids, ids[1:]):
            info = ranks.get(pair)
            if info is not None and (best_rank is None or info[0] < best_rank):
                best_rank = info[0]
                best_pair = pair
        if best_pair is None:
            break
        new_id = ranks[best_pair][1]
        merged: list[int] = []
        i = 0
        while i < len(ids):
            if i + 1 < len(ids) and (ids[i], ids[i + 1]) == best_pair:
                merged.append(new_id)
                i += 2
            else:
                merged.append(ids[i])
                i += 1
        ids = merged
    result = tuple(ids)
    if len(artifact._piece_cache) < 100_000:
        artifact._piece_cache[piece] = result
    return result


def encode(artifact: TokenizerArtifact, data: str | bytes) -> list[int]:
    """Encode text or raw bytes; total via byte fallback, never emits specials."""
    raw = data.encode("utf-8") if isinstance(data, str) else data
    out: list[int] = []
    for piece in _PRETOKEN_RE.findall(raw):
        out.extend(_merge_piece(artifact, piece))
    return out


def decode(artifact: TokenizerArtifact, ids: Iterable[int]) -> bytes:
    """Concatenate per-token byte sequences. Special ids render their surface form."""
    vocab = artifact.vocab
    parts = []
    for pos, token_id in enumerate(ids):
        if not 0 <= token_id < len(vocab):
            raise TokenizerError(
                f"token id {token_id} at position {pos} out of range (vocab {len(vocab)})"
            )
        parts.append(vocab[token_id])
    return b"".join(parts)


def decode_text(artifact: TokenizerArtifact, ids: Iterable[int], skip_specials: bool = True) -> str:
    """Decode to str for display, optionally dropping special tokens."""
    if skip_specials:
        specials = artifact.special_ids
        ids = [i for i in ids if i not in specials]
    return decode(artifact, ids).decode("utf-8", errors="replace")


def save(artifact: TokenizerArtifact, path: str | Path) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "vocab_size_target": artifact.vocab_size_target,
        "specials": list(artifact.specials),
        "merges": [list(m) for m in artifact.merges],
        "vocab": [base64.b64encode(tok).decode("ascii") for tok in artifact.vocab],
        "trained_on_cutoff": artifact.trained_on_cutoff,
        "fingerprint": artifact.fingerprint,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load(path: str | Path) -> TokenizerArtifact:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise TokenizerError(f"tokenizer format version {version}, expected {FORMAT_VERSION}")
    specials = tuple(payload["specials"])
    merges = [tuple(m) for m in payload["merges"]]
    vocab = [base64.b64decode(tok) for tok in payload["vocab"]]

    expected = _base_vocab(specials)
    for left, right in merges:
        expected.append(expected[left] + expected[right])
    if vocab != expected:
        raise TokenizerError("stored vocab table does not match merge rules")

    artifact = TokenizerArtifact(
        vocab=vocab,
        merges=merges,
        specials=specials,
        trained_on_cutoff=payload["trained_on_cutoff"],
        vocab_size_target=payload["vocab_size_target"],
    )
    if artifact.fingerprint != payload["fingerprint"]:
        raise TokenizerError("tokenizer fingerprint mismatch on load")
    return artifact

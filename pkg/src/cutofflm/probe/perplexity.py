"""Per-document perplexity: exp of mean token negative log-likelihood.

Each document is scored with the document-separator token prepended as
initial context (matching how shards pack training data), so every document
token is a scored position. Documents longer than the context window are
scored in strictly non-overlapping windows; a window needs at least two
tokens to score anything.
"""

from __future__ import annotations

import math
from typing import Sequence

import torch
import torch.nn.functional as F

from .. import tokenizer as tok
from ..model.transformer import DecoderLM


def _window_nll(model: DecoderLM, window: list[int]) -> tuple[float, int]:
    tokens = torch.tensor([window], dtype=torch.long)
    logits = model(tokens)[0]
    logp = F.log_softmax(logits.double(), dim=-1)
    targets = torch.tensor(window[1:], dtype=torch.long)
    picked = logp[torch.arange(len(targets)), targets]
    return float(-picked.sum().item()), len(targets)


def document_nll(
    model: DecoderLM, artifact: tok.TokenizerArtifact, text: str
) -> tuple[float, int]:
    """(total NLL in nats, scored token count) for one document; (0, 0) if unscoreable."""
    ids = [artifact.doc_sep_id] + tok.encode(artifact, text)
    seq_len = model.config.sequence_length
    total = 0.0
    scored = 0
    for start in range(0, len(ids), seq_len):
        window = ids[start : start + seq_len]
        if len(window) < 2:
            continue
        nll, n = _window_nll(model, window)
        total += nll
        scored += n
    return total, scored


def _batched_short_nll(
    model: DecoderLM,
    rows: list[list[int]],
    pad_id: int,
    batch_size: int,
) -> list[tuple[float, int]]:
    """NLL for documents that fit in one window, right-padded and batched.

    Right padding is exact under causal masking: padded positions cannot
    influence earlier positions and their logits are never scored.
    """
    results: list[tuple[float, int]] = []
    for start in range(0, len(rows), batch_size):
        chunk = rows[start : start + batch_size]
        width = max(len(r) for r in chunk)
        tokens = torch.full((len(chunk), width), pad_id, dtype=torch.long)
        for i, row in enumerate(chunk):
            tokens[i, : len(row)] = torch.tensor(row, dtype=torch.long)
        with torch.no_grad():
            logp = F.log_softmax(model(tokens).double(), dim=-1)
        for i, row in enumerate(chunk):
            targets = torch.tensor(row[1:], dtype=torch.long)
            picked = logp[i, torch.arange(len(targets)), targets]
            results.append((float(-picked.sum().item()), len(targets)))
    return results


def per_document_perplexities(
    model: DecoderLM,
    artifact: tok.TokenizerArtifact,
    texts: Sequence[str],
    batch_size: int = 32,
) -> tuple[list[float], int, list[int]]:
    """Per-document perplexities, the excluded-document count, and token counts.

    Documents that tokenize to nothing scoreable are excluded (and counted);
    if every document is excluded, that is an error.
    """
    model.eval()
    seq_len = model.config.sequence_length
    encoded: list[tuple[int, list[int]]] = []
    excluded = 0
    for index, text in enumerate(texts):
        ids = [artifact.doc_sep_id] + tok.encode(artifact, text)
        if len(ids) < 2:
            excluded += 1
            continue
        encoded.append((index, ids))
    if not encoded:
        raise ValueError(f"all {len(texts)} documents were excluded (empty after tokenization)")

    nlls: dict[int, tuple[float, int]] = {}
    short = [(i, ids) for i, ids in encoded if len(ids) <= seq_len]
    long = [(i, ids) for i, ids in encoded if len(ids) > seq_len]
    if short:
        outcomes = _batched_short_nll(model, [ids for _, ids in short], artifact.pad_id, batch_size)
        for (i, _), outcome in zip(short, outcomes):
            nlls[i] = outcome
    with torch.no_grad():
        for i, ids in long:
            total, scored = 0.0, 0
            for start in range(0, len(ids), seq_len):
                window = ids[start : start + seq_len]
                if len(window) < 2:
                    continue
                nll, n = _window_nll(model, window)
                total += nll
                scored += n
            nlls[i] = (total, scored)

    ppls: list[float] = []
    token_counts: list[int] = []
    for i, _ in encoded:
        total, scored = nlls[i]
        ppls.append(math.exp(total / scored))
        token_counts.append(scored)
    return ppls, excluded, token_counts


def mean_perplexity(
    model: DecoderLM,
    artifact: tok.TokenizerArtifact,
    texts: Sequence[str],
    batch_size: int = 32,
) -> float:
    """Document-count-weighted mean perplexity over a text collection."""
    ppls, _excluded, _tokens = per_document_perplexities(model, artifact, texts, batch_size)
    return sum(ppls) / len(ppls)

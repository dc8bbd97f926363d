"""Shared desk-scale fixtures: a tiny tokenizer and tiny model configs."""

from __future__ import annotations

import datetime as dt

import pytest

from cutofflm import tokenizer as tok
from cutofflm.corpus.documents import TimestampedDocument
from cutofflm.model.config import ModelConfig
from cutofflm.model.transformer import DecoderLM

TRAIN_TEXTS = [
    "the quick brown fox jumps over the lazy dog",
    "pack my box with five dozen liquor jugs",
    "how vexingly quick daft zebras jump",
    "sphinx of black quartz judge my vow",
    "the five boxing wizards jump quickly",
] * 8


@pytest.fixture(scope="session")
def tiny_tokenizer() -> tok.TokenizerArtifact:
    return tok.train_bpe(TRAIN_TEXTS, vocab_size=320, cutoff_year=2013)


@pytest.fixture(scope="session")
def tiny_config(tiny_tokenizer) -> ModelConfig:
    return ModelConfig(
        sequence_length=64,
        n_layers=2,
        d_model=32,
        ffn_hidden=48,
        n_heads=2,
        vocab_size=tiny_tokenizer.vocab_len,
    )


@pytest.fixture(scope="session")
def tiny_model(tiny_config) -> DecoderLM:
    model = DecoderLM(tiny_config, init_seed=7)
    model.eval()
    return model


def make_doc(doc_id: str, text: str, date: dt.date | str, source: str = "t") -> TimestampedDocument:
    if isinstance(date, str):
        date = dt.date.fromisoformat(date)
    return TimestampedDocument(id=doc_id, text=text, timestamp=date, source=source)

import hashlib

import numpy as np
import pytest

from cutofflm import tokenizer as tok
from cutofflm.corpus.documents import CutoffSpec
from cutofflm.corpus.shards import (
    MANIFEST_NAME,
    ShardManifest,
    ShardSet,
    load_token_stream,
    read_shard,
    shard_tokens,
    verify_partition,
    write_shard,
)
from cutofflm.errors import ShardCorruptionError

from conftest import make_doc


@pytest.fixture()
def byte_artifact():
    # Pure byte tokenizer: 1 token per byte makes token arithmetic transparent.
    return tok.train_bpe([""], vocab_size=256 + 6, cutoff_year=2013)


def test_two_docs_concatenation_arithmetic(byte_artifact, tmp_path):
    docs = [
        make_doc("a", "abcde", "2015-01-01"),
        make_doc("b", "fghij", "2015-02-01"),
    ]
    shard_set = shard_tokens(docs, byte_artifact, 100, CutoffSpec(2020), tmp_path)
    assert shard_set.manifest.tokens_emitted == 12  # 5 + 1 + 5 + 1
    assert len(shard_set.manifest.shards) == 1
    tokens = read_shard(shard_set.shard_path(shard_set.manifest.shards[0]))
    assert len(tokens) == 12


def test_empty_stream_zero_shards(byte_artifact, tmp_path):
    shard_set = shard_tokens([], byte_artifact, 100, CutoffSpec(2020), tmp_path)
    assert shard_set.manifest.shards == []
    assert shard_set.manifest.tokens_emitted == 0


def test_shard_sizes_and_round_trip(tiny_tokenizer, tmp_path):
    # Documents totalling 10,000 tokens exactly; shard_size 4096 must yield
    # 4096/4096/1808 and decoding the concatenation must reproduce the texts.
    texts = []
    total = 0
    i = 0
    while total < 10_000 - 30:
        text = f"jump quickly vexing zebras {i}"
        n = len(tok.encode(tiny_tokenizer, text)) + 1
        total += n
        texts.append(text)
        i += 1
    filler_budget = 10_000 - total - 1
    filler = b"z" * filler_budget  # byte fallback: one token per byte
    texts.append(filler.decode("ascii"))
    docs = [make_doc(f"d{k}", t, "2015-01-01") for k, t in enumerate(texts)]

    expected_tokens = sum(len(tok.encode(tiny_tokenizer, t)) + 1 for t in texts)
    assert expected_tokens == 10_000

    shard_set = shard_tokens(docs, tiny_tokenizer, 4096, CutoffSpec(2020), tmp_path)
    sizes = [s.token_count for s in shard_set.manifest.shards]
    assert sizes == [4096, 4096, 1808]

    stream = load_token_stream(shard_set)
    decoded = tok.decode(tiny_tokenizer, stream.tolist())
    expected = b"".join(t.encode() + b"<|endoftext|>" for t in texts)
    assert decoded == expected


def test_budget_keeps_deterministic_prefix(byte_artifact, tmp_path):
    docs = [make_doc(f"d{i}", "abcd", "2015-01-01") for i in range(10)]  # 5 tokens each
    shard_set = shard_tokens(
        docs, byte_artifact, 100, CutoffSpec(2020), tmp_path, budget_tokens=12
    )
    # Whole documents in input order until the budget is reached: 3 docs (15 tokens).
    assert shard_set.manifest.docs_kept == 3
    assert [d["id"] for d in shard_set.manifest.documents] == ["d0", "d1", "d2"]


def test_inadmissible_document_refused(byte_artifact, tmp_path):
    with pytest.raises(ValueError, match="not admissible"):
        shard_tokens(
            [make_doc("late", "xyz", "2021-05-01")], byte_artifact, 10, CutoffSpec(2020), tmp_path
        )


class TestVerify:
    def _build(self, artifact, tmp_path):
        docs = [
            make_doc("a", "hello world", "2015-03-01"),
            make_doc("b", "quick brown fox", "2017-11-30"),
            make_doc("c", "lazy dog", "2019-12-31"),
        ]
        shard_set = shard_tokens(docs, artifact, 16, CutoffSpec(2020), tmp_path)
        return docs, shard_set

    def test_clean_pipeline_verifies(self, tiny_tokenizer, tmp_path):
        docs, shard_set = self._build(tiny_tokenizer, tmp_path)
        report = verify_partition(shard_set, docs, CutoffSpec(2020), tiny_tokenizer)
        assert report.valid
        assert report.violations == []
        assert report.corruptions == []

    def test_planted_violation_caught(self, tiny_tokenizer, tmp_path):
        docs, shard_set = self._build(tiny_tokenizer, tmp_path)
        # Rebuild the shards with a post-cutoff document smuggled in, checksums
        # intact, then verify against a 2020 cutoff.
        bad_doc = make_doc("smuggled", "future news", "2021-03-05")
        all_docs = docs + [bad_doc]
        forged = shard_tokens(
            all_docs, tiny_tokenizer, 16, CutoffSpec(2022), tmp_path / "forged"
        )
        forged.manifest.cutoff_year = 2020  # lie about provenance
        forged.manifest.save(tmp_path / "forged" / MANIFEST_NAME)
        reloaded = ShardSet(
            manifest=ShardManifest.load(tmp_path / "forged" / MANIFEST_NAME),
            root=tmp_path / "forged",
        )
        report = verify_partition(reloaded, all_docs, CutoffSpec(2020), tiny_tokenizer)
        assert ("smuggled" in {v[0] for v in report.violations})
        assert not report.valid

    def test_bit_flip_is_corruption_not_violation(self, tiny_tokenizer, tmp_path):
        docs, shard_set = self._build(tiny_tokenizer, tmp_path)
        shard_path = shard_set.shard_path(shard_set.manifest.shards[0])
        raw = bytearray(shard_path.read_bytes())
        raw[-1] ^= 0xFF
        shard_path.write_bytes(bytes(raw))
        report = verify_partition(shard_set, docs, CutoffSpec(2020), tiny_tokenizer)
        assert report.corruptions
        assert report.violations == []

    def test_checksum_distinct_from_temporal(self, tiny_tokenizer, tmp_path):
        docs, shard_set = self._build(tiny_tokenizer, tmp_path)
        info = shard_set.manifest.shards[0]
        tokens = read_shard(shard_set.shard_path(info))
        assert hashlib.sha256(tokens.astype("<u4").tobytes()).hexdigest() == info.checksum


def test_write_read_shard_header(tmp_path):
    tokens = np.arange(100, dtype=np.uint32)
    checksum = write_shard(tmp_path / "s.bin", tokens, 2018, "f" * 64)
    back = read_shard(tmp_path / "s.bin")
    assert np.array_equal(back, tokens)
    assert checksum == hashlib.sha256(tokens.astype("<u4").tobytes()).hexdigest()


def test_truncated_shard_rejected(tmp_path):
    tokens = np.arange(100, dtype=np.uint32)
    write_shard(tmp_path / "s.bin", tokens, 2018, "f" * 64)
    raw = (tmp_path / "s.bin").read_bytes()
    (tmp_path / "s.bin").write_bytes(raw[:-8])
    with pytest.raises(ShardCorruptionError):
        read_shard(tmp_path / "s.bin")

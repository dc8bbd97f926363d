import datetime as dt
import math

import numpy as np
import pytest
import torch
import torch.nn.functional as F

from cutofflm import tokenizer as tok
from cutofflm.model.config import ModelConfig
from cutofflm.model.transformer import DecoderLM
from cutofflm.probe.breakpoint import CutoffEstimate, detect_cutoff, fit_breakpoint
from cutofflm.probe.perplexity import mean_perplexity, per_document_perplexities
from cutofflm.probe.series import PerplexitySeries, QuarterBucket, quarter_index, quarter_label, relative_series

from conftest import make_doc


@pytest.fixture(scope="module")
def byte_artifact():
    return tok.train_bpe([""], vocab_size=262, cutoff_year=2013)


@pytest.fixture(scope="module")
def uniform_model(byte_artifact):
    config = ModelConfig(
        sequence_length=32, n_layers=1, d_model=16, ffn_hidden=24, n_heads=2,
        vocab_size=byte_artifact.vocab_len,
    )
    model = DecoderLM(config, init_seed=0)
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    model.eval()
    return model


class TestPerplexity:
    def test_uniform_model_gives_vocab_size(self, uniform_model, byte_artifact):
        ppl = mean_perplexity(uniform_model, byte_artifact, ["hello", "abc xyz"])
        assert ppl == pytest.approx(byte_artifact.vocab_len, rel=1e-9)

    def test_two_token_document_closed_form(self, byte_artifact):
        # Stub model with hand-set logits: vocabulary of 262, every position
        # puts logit L on token "a" (97) and 0 elsewhere.
        class FixedLogits:
            class config:
                sequence_length = 32
                vocab_size = 262

            def eval(self):
                return self

            def __call__(self, tokens):
                logits = torch.zeros(tokens.shape[0], tokens.shape[1], 262)
                logits[:, :, 97] = 1.5
                return logits

        model = FixedLogits()
        ppls, excluded, counts = per_document_perplexities(model, byte_artifact, ["aa"])
        # Hand computation: both scored tokens are id 97 with logit 1.5 among
        # 261 zeros: nll = log(261*exp(0) + exp(1.5)) - 1.5 per token.
        per_token = math.log(261 + math.exp(1.5)) - 1.5
        assert ppls[0] == pytest.approx(math.exp(per_token), rel=1e-9)
        assert counts[0] == 2

    def test_brute_force_oracle_twenty_docs(self, tiny_tokenizer, tiny_model):
        rng = np.random.default_rng(12)
        words = ["fox", "dog", "zebra", "wizard", "sphinx", "jug"]
        texts = [" ".join(rng.choice(words, size=rng.integers(2, 9))) for _ in range(20)]
        ppls, excluded, _ = per_document_perplexities(tiny_model, tiny_tokenizer, texts)
        assert excluded == 0

        # Oracle: per document, sum log-softmax values straight off forward().
        for text, got in zip(texts, ppls):
            ids = [tiny_tokenizer.doc_sep_id] + tok.encode(tiny_tokenizer, text)
            with torch.no_grad():
                logits = tiny_model(torch.tensor([ids[:-1]]))[0].double()
            logp = F.log_softmax(logits, dim=-1)
            nll = 0.0
            for position, target in enumerate(ids[1:]):
                nll -= float(logp[position, target])
            want = math.exp(nll / (len(ids) - 1))
            assert abs(got - want) / want < 1e-6

    def test_mean_is_document_weighted(self, uniform_model, byte_artifact):
        # With a uniform model every doc has identical ppl, so the mean equals it;
        # the stronger check of weighting is the oracle above. Here: exclusions.
        ppls, excluded, _ = per_document_perplexities(
            uniform_model, byte_artifact, ["ok text", ""]
        )
        assert excluded == 1
        assert len(ppls) == 1

    def test_all_excluded_is_error(self, uniform_model, byte_artifact):
        with pytest.raises(ValueError, match="excluded"):
            per_document_perplexities(uniform_model, byte_artifact, ["", ""])

    def test_long_document_non_overlapping_windows(self, tiny_tokenizer, tiny_model):
        long_text = "quick brown fox " * 40  # far beyond the 64-token window
        ppls, _, counts = per_document_perplexities(tiny_model, tiny_tokenizer, [long_text])
        ids = [tiny_tokenizer.doc_sep_id] + tok.encode(tiny_tokenizer, long_text)
        seq = tiny_model.config.sequence_length
        # Oracle over explicit windows.
        nll, scored = 0.0, 0
        for start in range(0, len(ids), seq):
            window = ids[start : start + seq]
            if len(window) < 2:
                continue
            with torch.no_grad():
                logp = F.log_softmax(tiny_model(torch.tensor([window[:-1]]))[0].double(), -1)
            for position, target in enumerate(window[1:]):
                nll -= float(logp[position, target])
            scored += len(window) - 1
        assert counts[0] == scored
        assert ppls[0] == pytest.approx(math.exp(nll / scored), rel=1e-9)

    def test_batched_matches_unbatched(self, tiny_tokenizer, tiny_model):
        texts = ["fox jumps", "lazy dog sleeps", "quartz vow"]
        a, _, _ = per_document_perplexities(tiny_model, tiny_tokenizer, texts, batch_size=1)
        b, _, _ = per_document_perplexities(tiny_model, tiny_tokenizer, texts, batch_size=32)
        assert a == pytest.approx(b, rel=1e-9)


class TestRelativeSeries:
    def test_constant_perplexity_normalizes_to_one(self, uniform_model, byte_artifact):
        docs = [
            make_doc(f"d{i}", "abc def", dt.date(2013 + i % 4, 1 + 3 * (i % 4), 5))
            for i in range(32)
        ]
        series = relative_series(uniform_model, byte_artifact, docs, 4, cutoff_year=2020)
        for bucket in series.buckets:
            if bucket.present:
                assert bucket.relative == pytest.approx(1.0, rel=1e-12)

    def test_mean_normalization_eight_twelve(self, monkeypatch):
        # Bucket perplexities 8 and 12 must normalize to 0.8 and 1.2.
        import sys

        series_module = sys.modules["cutofflm.probe.series"]

        def fake_ppl(model, artifact, texts, batch_size=32):
            value = 8.0 if "early" in texts[0] else 12.0
            return [value] * len(texts), 0, [3] * len(texts)

        monkeypatch.setattr(series_module, "per_document_perplexities", fake_ppl)
        docs = [
            make_doc("a", "early one", "2019-02-01"),
            make_doc("b", "late one", "2019-05-01"),
        ]
        series = relative_series(object(), object(), docs, 5, cutoff_year=2020)
        relatives = [b.relative for b in series.buckets if b.present]
        assert relatives == pytest.approx([0.8, 1.2])
        assert series.normalization == pytest.approx(10.0)

    def test_bucket_means_match_standalone_recompute(self, tiny_tokenizer, tiny_model):
        rng = np.random.default_rng(3)
        words = ["fox", "dog", "wizard", "jugs", "vow"]
        docs = []
        for i in range(60):
            quarter = i % 6  # 2015Q1..2016Q2
            year = 2015 + quarter // 4
            month = 1 + 3 * (quarter % 4)
            text = " ".join(rng.choice(words, size=4))
            docs.append(make_doc(f"d{i}", text, dt.date(year, month, 10)))
        series = relative_series(tiny_tokenizer and tiny_model, tiny_tokenizer, docs, 10, cutoff_year=2020)

        # Standalone recompute: group by quarter, mean of per-doc perplexities.
        groups: dict[int, list] = {}
        for doc in docs:
            groups.setdefault(quarter_index(doc.timestamp), []).append(doc.text)
        for bucket in series.buckets:
            if not bucket.present:
                continue
            ppls, _, _ = per_document_perplexities(
                tiny_model, tiny_tokenizer, groups[bucket.index][:10]
            )
            assert bucket.mean_perplexity == pytest.approx(sum(ppls) / len(ppls), rel=1e-9)

    def test_sparse_quarter_marked_absent(self, uniform_model, byte_artifact):
        docs = [make_doc("a", "x y z", "2015-01-05"), make_doc("b", "x y", "2015-07-05")]
        docs += [make_doc(f"c{i}", "w o r d s", "2016-01-05") for i in range(3)]
        series = relative_series(
            uniform_model, byte_artifact, docs, 5, cutoff_year=2020, min_per_quarter=2
        )
        by_label = {b.label: b for b in series.buckets}
        assert not by_label["2015Q1"].present
        assert not by_label["2015Q3"].present
        assert by_label["2016Q1"].present
        assert len(series.buckets) == 5  # 2015Q1..2016Q1 contiguous

    def test_every_doc_lands_in_one_quarter(self):
        dates = [dt.date(2015, m, 15) for m in range(1, 13)]
        indices = [quarter_index(d) for d in dates]
        assert indices == sorted(indices)
        assert [quarter_label(i) for i in indices[:4]] == ["2015Q1"] * 3 + ["2015Q2"]


class TestBreakpointDetector:
    def test_constructed_v_shape_exact(self):
        y = np.array([1.5, 1.3, 1.1, 0.9, 1.0, 1.2, 1.4, 1.6])
        estimate = fit_breakpoint(np.arange(8), y)
        assert estimate.breakpoint_index == 3
        assert estimate.pre_slope < 0 < estimate.post_slope
        assert estimate.sse == pytest.approx(0.0, abs=1e-20)

    def test_joined_lines_recover_join_exactly(self):
        # The vertex of a continuous join lies on both lines, so the two
        # adjacent splits are both exact; the earliest-tie rule deterministically
        # assigns the vertex to the post segment (breakpoint = join - 1).
        for s in (0.05, 0.2, 1.0):
            x = np.arange(20, dtype=float)
            join = 11
            y = np.empty(20)
            for i in range(20):
                y[i] = 1.0 + s * (join - i) if i <= join else 1.0 + s * (i - join)
            estimate = fit_breakpoint(x, y)
            assert estimate.breakpoint_index == join - 1
            assert estimate.sse == pytest.approx(0.0, abs=1e-18)
            assert estimate.pre_slope == pytest.approx(-s)
            assert estimate.post_slope == pytest.approx(s)

    def test_offset_and_scale_invariance_hundred_series(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(8, 40))
            y = np.cumsum(rng.normal(0, 0.05, size=n)) + 1.0
            x = np.arange(n, dtype=float)
            base = fit_breakpoint(x, y)
            c = float(rng.uniform(0.1, 10.0))
            d = float(rng.uniform(-5.0, 5.0))
            scaled = fit_breakpoint(x, c * y + d)
            assert scaled.breakpoint_index == base.breakpoint_index

    def test_monte_carlo_noisy_break_recovery(self):
        recovered = 0
        trials = 100
        true_break = 28
        for trial in range(trials):
            rng = np.random.default_rng(1000 + trial)
            x = np.arange(48, dtype=float)
            y = np.empty(48)
            for i in range(48):
                if i <= true_break:
                    y[i] = 1.0 - 0.02 * (true_break - i)
                else:
                    y[i] = 1.0 + 0.06 * (i - true_break)
            y += rng.normal(0, 0.02, size=48)
            estimate = fit_breakpoint(x, y)
            if abs(estimate.breakpoint_index - true_break) <= 2:
                recovered += 1
        assert recovered >= 95, f"recovered {recovered}/100"

    def test_all_equal_series_flagged_degenerate(self):
        estimate = fit_breakpoint(np.arange(10), np.full(10, 1.0))
        assert estimate.degenerate
        assert estimate.breakpoint_index is None

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError, match="at least"):
            fit_breakpoint(np.arange(5), np.arange(5, dtype=float))

    def test_detect_cutoff_tolerates_gaps(self):
        series = PerplexitySeries(cutoff_year=2018)
        values = {0: 1.4, 1: 1.2, 2: 1.0, 4: 1.1, 5: 1.3, 6: 1.5, 7: 1.7}
        for index in range(8):
            bucket = QuarterBucket(label=quarter_label(8072 + index), index=8072 + index)
            if index in values:
                bucket.mean_perplexity = values[index]
                bucket.relative = values[index]
                bucket.count = 5
            series.buckets.append(bucket)
        estimate = detect_cutoff(series)
        assert estimate.breakpoint_index == 8072 + 2  # calendar-true despite the gap

    def test_breakpoint_strictly_interior(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            y = np.cumsum(rng.normal(0, 0.1, size=12))
            if y.max() - y.min() < 1e-9:
                continue
            estimate = fit_breakpoint(np.arange(12), y)
            assert 1 <= estimate.breakpoint_index <= 9

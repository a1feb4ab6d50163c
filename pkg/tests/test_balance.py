"""Tests for deficit planning, minority generation, and corpus merging."""

import dataclasses
import json
import math

import numpy as np
import pytest

from ganbalance.advtrain import GanBundle, TrainConfig
from ganbalance.balance import (
    BalancePlan,
    compute_plan,
    generate_minority,
    merge_balanced,
)
from ganbalance.corpus import (
    EOS,
    UNK,
    ClassStats,
    CorpusRecord,
    LabeledCorpus,
    Vocab,
    class_stats,
)
from ganbalance.errors import ConfigError, HygieneError
from ganbalance.gantext import DiscriminatorNet, GeneratorNet
from ganbalance.numerics import Adam


def stats_from_counts(counts: dict) -> ClassStats:
    majority = max(counts, key=counts.get)
    minority = min(counts.values())
    return ClassStats(
        counts=dict(counts),
        majority=majority,
        ratios={},
        imbalance_ratio=max(counts.values()) / minority if minority else math.inf,
    )


def toy_vocab(n_extra=8):
    words = [f"w{i}" for i in range(n_extra)]
    return Vocab(words, max_size=len(words) + 4, min_freq=1)


def toy_bundle(vocab_size, kind="sentigan", k=2, max_len=8, seed=10, peak=None):
    gens = []
    n_gens = k if kind == "sentigan" else 1
    for i in range(n_gens):
        gen = GeneratorNet(
            vocab_size, k, d_emb=5, d_h=6, max_len=max_len,
            conditioning="embedding" if kind == "catgan" else "none",
            d_cat=4, seed=seed + i,
        )
        if peak is not None:
            gen.params["wout"].data[:] = 0.0
            gen.params["bout"].data[:] = 0.0
            gen.params["bout"].data[peak] = 20.0
        gens.append(gen)
    disc = DiscriminatorNet(vocab_size, k, mode=kind, d_emb=5, n_filters=3, seed=4)
    cfg = TrainConfig(adversarial_rounds=1, max_len=max_len)
    return GanBundle(
        kind=kind, generators=gens, disc=disc, config=cfg,
        label_names=["neg", "pos"][:k],
        g_opts=[Adam(g.params, lr=1e-3) for g in gens],
        d_opt=Adam(disc.params, lr=1e-3),
    )


class TestComputePlan:
    def test_majority_match_deficits(self):
        stats = stats_from_counts({"positive": 100, "negative": 20, "neutral": 10})
        plan = compute_plan(stats)
        assert plan.deficits == {"positive": 0, "negative": 80, "neutral": 90}
        assert plan.targets == {name: 100 for name in plan.targets}

    def test_already_balanced_all_zero(self):
        stats = stats_from_counts({"positive": 50, "negative": 50})
        plan = compute_plan(stats)
        assert all(d == 0 for d in plan.deficits.values())

    def test_review_scale_counts(self):
        stats = stats_from_counts(
            {"positive": 18476, "negative": 2316, "neutral": 1145}
        )
        plan = compute_plan(stats)
        assert plan.deficits["negative"] == 16160
        assert plan.deficits["neutral"] == 17331

    def test_explicit_integer_target(self):
        stats = stats_from_counts({"positive": 100, "negative": 20})
        plan = compute_plan(stats, target_policy=150)
        assert plan.deficits == {"positive": 50, "negative": 130}

    def test_rejects_bad_policy(self):
        stats = stats_from_counts({"positive": 10, "negative": 5})
        with pytest.raises(ConfigError):
            compute_plan(stats, target_policy="median")
        with pytest.raises(ConfigError):
            compute_plan(stats, target_policy=-5)

    @pytest.mark.parametrize(
        "bad",
        [
            {"min_len": 0},
            {"min_len": 5, "max_len": 4},
            {"max_unk_frac": 1.5},
            {"oversample_cap": 0.0},
        ],
    )
    def test_plan_validation(self, bad):
        stats = stats_from_counts({"positive": 10, "negative": 5})
        with pytest.raises(ConfigError):
            compute_plan(stats, **bad)

    def test_oversample_cap_limits_ask(self):
        stats = stats_from_counts({"positive": 100, "negative": 10})
        capped = compute_plan(stats, oversample_cap=2.0)
        assert capped.deficits["negative"] == 90
        assert capped.asked("negative") == 20
        free = compute_plan(stats)
        assert free.asked("negative") == 90


class TestGenerateMinority:
    def test_zero_deficit_produces_nothing(self):
        stats = stats_from_counts({"neg": 10, "pos": 10})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12)
        records, report = generate_minority(bundle, plan, toy_vocab(), seed=1)
        assert records == []
        assert report.shortfall == {}
        assert all(v == 0 for v in report.accepted.values())

    def test_fills_deficits_with_synthetic_train_records(self):
        stats = stats_from_counts({"neg": 4, "pos": 12})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12)
        records, report = generate_minority(bundle, plan, toy_vocab(), seed=1)
        assert report.accepted["neg"] == 8
        assert report.shortfall == {}
        assert len(records) == 8
        for rec in records:
            assert rec.provenance == "synthetic"
            assert rec.split == "train"
            assert rec.label == 0

    def test_dedup_keeps_accepted_records_unique(self):
        stats = stats_from_counts({"neg": 2, "pos": 20})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12)
        records, _ = generate_minority(bundle, plan, toy_vocab(), seed=2)
        keys = [tuple(r.tokens) for r in records]
        assert len(keys) == len(set(keys))

    def test_collapsed_generator_reports_duplicate_shortfall(self):
        stats = stats_from_counts({"neg": 2, "pos": 10})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12, peak=5)
        records, report = generate_minority(
            bundle, plan, toy_vocab(), seed=3, attempt_factor=5
        )
        assert report.accepted["neg"] == 1
        assert report.shortfall["neg"] == 7
        assert report.rejected["neg"]["duplicate"] > 0
        assert len(records) == 1

    def test_dedup_against_real_records(self):
        stats = stats_from_counts({"neg": 2, "pos": 4})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12, peak=5)
        collapsed = [5] * 8
        real = [CorpusRecord(label=0, tokens=collapsed, split="train")]
        records, report = generate_minority(
            bundle, plan, toy_vocab(), seed=3, real_records=real, attempt_factor=5
        )
        assert report.accepted["neg"] == 0
        assert all(tuple(r.tokens) != tuple(collapsed) for r in records)

    def test_unk_heavy_generator_is_filtered(self):
        stats = stats_from_counts({"neg": 2, "pos": 6})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12, peak=UNK)
        _, report = generate_minority(
            bundle, plan, toy_vocab(), seed=4, attempt_factor=5
        )
        assert report.accepted["neg"] == 0
        assert report.rejected["neg"]["unk"] > 0
        assert report.shortfall["neg"] == 4

    def test_length_bounds_are_enforced(self):
        stats = stats_from_counts({"neg": 2, "pos": 6})
        plan = compute_plan(stats, min_len=3, max_len=8)
        bundle = toy_bundle(12, peak=EOS)
        records, report = generate_minority(
            bundle, plan, toy_vocab(), seed=5, attempt_factor=5
        )
        assert records == []
        assert report.rejected["neg"]["length"] > 0

    def test_deterministic_by_seed(self):
        stats = stats_from_counts({"neg": 4, "pos": 10})
        plan = compute_plan(stats, max_len=8)
        a, _ = generate_minority(toy_bundle(12), plan, toy_vocab(), seed=7)
        b, _ = generate_minority(toy_bundle(12), plan, toy_vocab(), seed=7)
        c, _ = generate_minority(toy_bundle(12), plan, toy_vocab(), seed=8)
        assert [r.tokens for r in a] == [r.tokens for r in b]
        assert [r.tokens for r in a] != [r.tokens for r in c]

    def test_catgan_bundle_uses_the_shared_generator(self):
        stats = stats_from_counts({"neg": 3, "pos": 9})
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12, kind="catgan")
        records, report = generate_minority(bundle, plan, toy_vocab(), seed=1)
        assert report.accepted["neg"] == 6
        assert all(r.label == 0 for r in records)

    def test_vocab_size_mismatch_rejected(self):
        stats = stats_from_counts({"neg": 3, "pos": 9})
        plan = compute_plan(stats, max_len=8)
        with pytest.raises(ConfigError, match="vocabulary"):
            generate_minority(toy_bundle(12), plan, toy_vocab(20), seed=1)

    def test_unknown_category_rejected(self):
        plan = BalancePlan(
            targets={"mystery": 5},
            deficits={"mystery": 5},
            real_counts={"mystery": 0},
        )
        with pytest.raises(ConfigError, match="mystery"):
            generate_minority(toy_bundle(12), plan, toy_vocab(), seed=1)

    def test_report_serializes(self):
        stats = stats_from_counts({"neg": 4, "pos": 10})
        plan = compute_plan(stats, max_len=8)
        _, report = generate_minority(toy_bundle(12), plan, toy_vocab(), seed=7)
        blob = json.dumps(report.as_dict(), sort_keys=True)
        assert json.loads(blob)["accepted"]["neg"] == 6


def imbalanced_corpus(n_neg=4, n_pos=12, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for split, factor in (("train", 1.0), ("val", 0.5), ("test", 0.5)):
        for label, n in ((0, n_neg), (1, n_pos)):
            for _ in range(max(int(n * factor), 1)):
                body = [int(t) for t in rng.integers(4, 12, size=3)]
                records.append(
                    CorpusRecord(label=label, tokens=body + [EOS], split=split)
                )
    return LabeledCorpus(records=records, label_names=["neg", "pos"])


def record_lines(records):
    return "\n".join(
        json.dumps(dataclasses.asdict(r), sort_keys=True) for r in records
    )


class TestMergeBalanced:
    def _synthetic(self, n, label=0):
        return [
            CorpusRecord(
                label=label, tokens=[4, 5 + i % 3, EOS],
                provenance="synthetic", split="train",
            )
            for i in range(n)
        ]

    def test_post_merge_counts_equal(self):
        corpus = imbalanced_corpus()
        merged = merge_balanced(corpus, self._synthetic(8), seed=1)
        stats = class_stats(merged, split="train")
        assert stats.imbalance_ratio == 1.0
        assert stats.counts == {"neg": 12, "pos": 12}

    def test_val_and_test_untouched(self):
        corpus = imbalanced_corpus()
        merged = merge_balanced(corpus, self._synthetic(8), seed=1)
        for split in ("val", "test"):
            before = record_lines(corpus.subset(split).records)
            after = record_lines(merged.subset(split).records)
            assert before == after

    def test_empty_synthetic_returns_original(self):
        corpus = imbalanced_corpus()
        merged = merge_balanced(corpus, [], seed=1)
        assert merged.records == corpus.records

    def test_shuffle_is_deterministic(self):
        corpus = imbalanced_corpus()
        synth = self._synthetic(8)
        a = merge_balanced(corpus, synth, seed=1)
        b = merge_balanced(corpus, synth, seed=1)
        c = merge_balanced(corpus, synth, seed=2)
        assert a.records == b.records
        assert a.records != c.records

    def test_rejects_synthetic_in_val(self):
        corpus = imbalanced_corpus()
        bad = [
            CorpusRecord(
                label=0, tokens=[4, EOS], provenance="synthetic", split="val"
            )
        ]
        with pytest.raises(HygieneError, match="val"):
            merge_balanced(corpus, bad, seed=1)

    def test_rejects_real_records_passed_as_synthetic(self):
        corpus = imbalanced_corpus()
        bad = [CorpusRecord(label=0, tokens=[4, EOS], split="train")]
        with pytest.raises(HygieneError, match="real"):
            merge_balanced(corpus, bad, seed=1)

    def test_merged_corpus_passes_hygiene(self):
        corpus = imbalanced_corpus()
        merged = merge_balanced(corpus, self._synthetic(8), seed=1)
        merged.validate()
        assert len(merged.subset("train", provenance="synthetic").records) == 8


class TestEndToEndBalance:
    def test_plan_generate_merge_closes_the_gap(self):
        corpus = imbalanced_corpus(n_neg=4, n_pos=12)
        stats = class_stats(corpus, split="train")
        plan = compute_plan(stats, max_len=8)
        bundle = toy_bundle(12)
        synth, report = generate_minority(
            bundle, plan, toy_vocab(), seed=9,
            real_records=corpus.subset("train").records,
        )
        assert report.shortfall == {}
        merged = merge_balanced(corpus, synth, seed=9)
        after = class_stats(merged, split="train")
        assert after.imbalance_ratio == 1.0
        assert class_stats(merged, split="test").counts == class_stats(
            corpus, split="test"
        ).counts

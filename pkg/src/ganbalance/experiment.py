"""Experiment orchestration: the imbalanced-versus-balanced comparison.

One JSON config file fully determines a run.  For every seed the
pipeline loads and cleans the dataset, splits it, trains (or loads) the
chosen GAN, balances the training split, then trains and scores every
configured classifier on every comparison arm.  The report aggregates
the per-run scores into the degree-of-difference summary, grouped by
model family.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import shlex
from contextlib import contextmanager
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .advtrain import (
    GanBundle,
    TrainConfig,
    load_bundle,
    pretrain_mle,
    train_catgan,
    train_sentigan,
)
from .balance import GenerationReport, compute_plan, generate_minority, merge_balanced
from .corpus import (
    CorpusRecord,
    LabeledCorpus,
    SurfaceRecord,
    Vocab,
    build_vocab,
    class_stats,
    encode_corpus,
    load_dataset,
)
from .corpus import split as assign_splits
from .errors import ConfigError, GanBalanceError
from .gantext import DiscriminatorNet, GeneratorNet
from .seeding import derive_seed, rng_for
from .sentclass import (
    ML_KINDS,
    MLHyper,
    NN_ARCHS,
    NNHyper,
    TfidfFeaturizer,
    evaluate,
    train_ml,
    train_nn,
)
from .sentclass.metrics import ClsMetrics
from .textprep import PrepConfig, preprocess

log = logging.getLogger("ganbalance")

ARMS = ("imbalanced", "balanced", "duplicated")
GAN_KINDS = ("catgan", "sentigan")
FAMILIES = (("deep_learning", NN_ARCHS), ("machine_learning", ML_KINDS))
DIFF_METRICS = ("accuracy", "macro_f1")


class StageError(GanBalanceError):
    """A pipeline stage failed; carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause

    def record(self) -> dict:
        return {
            "stage": self.stage,
            "error": type(self.cause).__name__,
            "message": str(self.cause),
        }


@contextmanager
def stage(name: str):
    """Tag any failure inside the block with the stage that raised it."""
    try:
        yield
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def log_kv(stage_name: str, **items) -> None:
    parts = [f"stage={stage_name}"]
    for key, value in items.items():
        text = str(value)
        parts.append(f"{key}={shlex.quote(text) if ' ' in text else text}")
    log.info(" ".join(parts))


# ------------------------------------------------------------- configuration

@dataclass(frozen=True)
class NetConfig:
    """Capacity of the generator and discriminator networks."""

    d_emb: int = 32
    d_h: int = 64
    d_cat: int = 8
    disc_emb: int = 32
    disc_filters: int = 32
    filter_widths: tuple[int, ...] = (2, 3, 4)

    def __post_init__(self) -> None:
        for name in ("d_emb", "d_h", "d_cat", "disc_emb", "disc_filters"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.filter_widths or any(w < 1 for w in self.filter_widths):
            raise ConfigError("filter_widths must be positive")


@dataclass(frozen=True)
class BalancePolicy:
    """How far to balance and which synthetic candidates to keep."""

    target: str | int = "majority"
    min_len: int = 1
    max_unk_frac: float = 0.2
    dedup: bool = True
    oversample_cap: float | None = None
    attempt_factor: int = 20


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one comparison run needs; loadable from a JSON file.

    The JSON schema matches the field names: scalar fields map to JSON
    scalars, tuple fields to arrays, and the nested configs (prep,
    train, nets, balance, ml, nn) to objects with that dataclass's
    field names.  Unknown keys are rejected so typos fail loudly.
    """

    dataset: str
    schema: str
    out_dir: str = "runs"
    gan: str = "catgan"
    arms: tuple[str, ...] = ("imbalanced", "balanced")
    seeds: tuple[int, ...] = (0,)
    classifiers: tuple[str, ...] = ML_KINDS + NN_ARCHS
    split_ratios: tuple[float, float, float] = (0.7, 0.15, 0.15)
    vocab_size: int = 20000
    min_freq: int = 1
    max_len: int = 32
    gan_checkpoint: str | None = None
    prep: PrepConfig = field(default_factory=PrepConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    nets: NetConfig = field(default_factory=NetConfig)
    balance: BalancePolicy = field(default_factory=BalancePolicy)
    ml: MLHyper = field(default_factory=MLHyper)
    nn: NNHyper = field(default_factory=NNHyper)

    def __post_init__(self) -> None:
        if self.gan not in GAN_KINDS:
            raise ConfigError(f"gan must be one of {GAN_KINDS}, got {self.gan!r}")
        unknown = [a for a in self.arms if a not in ARMS]
        if unknown:
            raise ConfigError(f"unknown arms {unknown}; choose from {ARMS}")
        if not {"imbalanced", "balanced"} <= set(self.arms):
            raise ConfigError("arms must include both 'imbalanced' and 'balanced'")
        if len(set(self.arms)) != len(self.arms):
            raise ConfigError("arms must be unique")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.classifiers:
            raise ConfigError("need at least one classifier")
        known = ML_KINDS + NN_ARCHS
        bad = [c for c in self.classifiers if c not in known]
        if bad:
            raise ConfigError(f"unknown classifiers {bad}; choose from {known}")
        if self.vocab_size < 5 or self.min_freq < 1 or self.max_len < 2:
            raise ConfigError("vocab_size, min_freq and max_len are too small")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("experiment config must be a JSON object")
        obj = dict(obj)
        nested = {
            "prep": PrepConfig,
            "train": TrainConfig,
            "nets": NetConfig,
            "balance": BalancePolicy,
            "ml": MLHyper,
            "nn": NNHyper,
        }
        for key, sub in nested.items():
            if key in obj:
                obj[key] = _build_section(sub, obj[key], key)
        for key in ("arms", "seeds", "classifiers", "split_ratios"):
            if key in obj:
                obj[key] = tuple(obj[key])
        return _build_section(cls, obj, "experiment")

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(obj)


def _build_section(cls, obj, what: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{what} section must be a JSON object")
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {unknown}")
    if cls is TrainConfig and "mutations" in obj:
        obj = dict(obj, mutations=tuple(obj["mutations"]))
    if cls is NetConfig and "filter_widths" in obj:
        obj = dict(obj, filter_widths=tuple(obj["filter_widths"]))
    try:
        return cls(**obj)
    except TypeError as exc:
        raise ConfigError(f"bad {what} section: {exc}") from exc


# ------------------------------------------------------------------- results

@dataclass
class RunRecord:
    """Score of one classifier on one arm for one seed."""

    model: str
    arm: str
    seed: int
    metrics: ClsMetrics

    def as_dict(self) -> dict:
        return {
            "model": self.model,
            "arm": self.arm,
            "seed": self.seed,
            "metrics": self.metrics.as_dict(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "RunRecord":
        return cls(
            model=obj["model"],
            arm=obj["arm"],
            seed=obj["seed"],
            metrics=ClsMetrics(**obj["metrics"]),
        )


@dataclass
class ExperimentReport:
    """Per-run scores plus the aggregated difference block."""

    dataset: dict
    gan: str
    arms: list[str]
    classifiers: list[str]
    seeds: list[int]
    runs: list[RunRecord]
    aggregates: dict
    differences: dict
    generation: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "dataset": dict(self.dataset),
            "gan": self.gan,
            "arms": list(self.arms),
            "classifiers": list(self.classifiers),
            "seeds": list(self.seeds),
            "runs": [run.as_dict() for run in self.runs],
            "aggregates": self.aggregates,
            "differences": self.differences,
            "generation": self.generation,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentReport":
        try:
            return cls(
                dataset=obj["dataset"],
                gan=obj["gan"],
                arms=list(obj["arms"]),
                classifiers=list(obj["classifiers"]),
                seeds=list(obj["seeds"]),
                runs=[RunRecord.from_dict(r) for r in obj["runs"]],
                aggregates=obj["aggregates"],
                differences=obj["differences"],
                generation=obj.get("generation", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed report: {exc}") from exc


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def aggregate_runs(runs: list[RunRecord]) -> dict:
    """Mean accuracy and macro-F1 per (arm, model) over seeds."""
    grouped: dict[str, dict[str, list[ClsMetrics]]] = {}
    for run in runs:
        grouped.setdefault(run.arm, {}).setdefault(run.model, []).append(run.metrics)
    return {
        arm: {
            model: {
                "accuracy": _mean([m.accuracy for m in ms]),
                "macro_f1": _mean([m.macro_f1 for m in ms]),
            }
            for model, ms in models.items()
        }
        for arm, models in grouped.items()
    }


def compute_differences(runs: list[RunRecord], arms: list[str]) -> dict:
    """Arm-minus-imbalanced means, grouped by model family.

    The overall row is the mean of the family rows weighted by how many
    models each family contributed.
    """
    aggs = aggregate_runs(runs)
    if "imbalanced" not in aggs:
        raise ConfigError("difference block needs imbalanced-arm runs")
    base = aggs["imbalanced"]
    out: dict[str, dict] = {}
    for arm in arms:
        if arm == "imbalanced" or arm not in aggs:
            continue
        block: dict[str, dict] = {}
        for metric in DIFF_METRICS:
            rows: dict[str, float] = {}
            weighted = 0.0
            total = 0
            for family, members in FAMILIES:
                diffs = [
                    aggs[arm][model][metric] - base[model][metric]
                    for model in aggs[arm]
                    if model in members and model in base
                ]
                if diffs:
                    rows[family] = _mean(diffs)
                    weighted += len(diffs) * rows[family]
                    total += len(diffs)
            rows["overall"] = weighted / total
            block[metric] = rows
        out[arm] = block
    return out


# ------------------------------------------------------------------ pipeline

@dataclass
class PreparedData:
    """Cleaned, seed-independent inputs shared by every seed."""

    surface: list[SurfaceRecord]
    vocab: Vocab
    label_names: list[str]
    n_raw: int
    n_rejected: int


def prepare_corpus(config: ExperimentConfig) -> PreparedData:
    """Load, clean and tokenize the dataset; build the vocabulary.

    Nothing here depends on the seed, so a multi-seed run shares one
    prepared corpus and one vocabulary, and a GAN checkpoint trained
    under one seed stays id-compatible with every other seed.
    """
    with stage("load"):
        raw, errors = load_dataset(config.dataset, config.schema)
        if not raw:
            raise ConfigError(f"dataset {config.dataset} has no usable rows")
    log_kv("load", path=config.dataset, rows=len(raw), rejected=len(errors))
    with stage("prep"):
        surface = []
        dropped = 0
        for record in raw:
            tokens = preprocess(record, config.prep)
            if tokens:
                surface.append(SurfaceRecord(label=record.label, tokens=tokens))
            else:
                dropped += 1
        if not surface:
            raise ConfigError("preprocessing dropped every record")
    log_kv("prep", kept=len(surface), dropped=dropped)
    with stage("vocab"):
        vocab = build_vocab(
            [s.tokens for s in surface],
            max_size=config.vocab_size,
            min_freq=config.min_freq,
        )
    log_kv("vocab", size=len(vocab))
    label_names = sorted({s.label for s in surface})
    return PreparedData(
        surface=surface,
        vocab=vocab,
        label_names=label_names,
        n_raw=len(raw),
        n_rejected=len(errors) + dropped,
    )


def split_and_encode(
    config: ExperimentConfig, prepared: PreparedData, seed: int
) -> LabeledCorpus:
    """Assign splits for this seed and encode to token ids."""
    with stage("split"):
        assigned = assign_splits(prepared.surface, config.split_ratios, seed)
        corpus = encode_corpus(
            assigned, prepared.vocab, prepared.label_names, max_len=config.max_len
        )
    return corpus


def build_gan(
    config: ExperimentConfig, corpus: LabeledCorpus, vocab_size: int, seed: int
) -> tuple[GanBundle, list[dict]]:
    """Pretrain and adversarially train the configured GAN for one seed."""
    tcfg = replace(config.train, seed=derive_seed(seed, "gan"))
    nets = config.nets
    k = len(corpus.label_names)
    train_slice = corpus.subset("train")
    val_slice = corpus.subset("val")
    if config.gan == "sentigan":
        generators = [
            GeneratorNet(
                vocab_size,
                k,
                d_emb=nets.d_emb,
                d_h=nets.d_h,
                noise_init=True,
                max_len=tcfg.max_len,
                seed=derive_seed(seed, "gan", "g", i),
            )
            for i in range(k)
        ]
        for i, gen in enumerate(generators):
            cat_train = [r for r in train_slice.records if r.label == i]
            cat_val = [r for r in val_slice.records if r.label == i]
            _, curve = pretrain_mle(
                gen, cat_train, replace(tcfg, seed=derive_seed(seed, "mle", i)),
                cat_val or None,
            )
            log_kv(
                "gan-train", phase="pretrain", category=corpus.label_names[i],
                nll_start=f"{curve[0]:.4f}", nll_end=f"{curve[-1]:.4f}",
            )
        disc = DiscriminatorNet(
            vocab_size, k, mode="sentigan", d_emb=nets.disc_emb,
            n_filters=nets.disc_filters, filter_widths=nets.filter_widths,
            seed=derive_seed(seed, "gan", "d"),
        )
        return train_sentigan(generators, disc, corpus, tcfg)
    gen = GeneratorNet(
        vocab_size,
        k,
        d_emb=nets.d_emb,
        d_h=nets.d_h,
        d_cat=nets.d_cat,
        conditioning="embedding",
        max_len=tcfg.max_len,
        seed=derive_seed(seed, "gan", "g"),
    )
    _, curve = pretrain_mle(
        gen, train_slice, replace(tcfg, seed=derive_seed(seed, "mle")),
        val_slice.records or None,
    )
    log_kv(
        "gan-train", phase="pretrain", nll_start=f"{curve[0]:.4f}",
        nll_end=f"{curve[-1]:.4f}",
    )
    disc = DiscriminatorNet(
        vocab_size, k, mode="catgan", d_emb=nets.disc_emb,
        n_filters=nets.disc_filters, filter_widths=nets.filter_widths,
        seed=derive_seed(seed, "gan", "d"),
    )
    return train_catgan(gen, disc, corpus, tcfg)


def duplicate_minority(corpus: LabeledCorpus, seed: int) -> list[CorpusRecord]:
    """Random minority duplication up to the majority count.

    The baseline arm that isolates "more minority rows" from "generated
    minority rows": copies of real training records, tagged synthetic so
    the usual hygiene rules keep them out of val and test.
    """
    stats = class_stats(corpus, split="train")
    target = stats.counts[stats.majority]
    by_name: dict[str, list[CorpusRecord]] = {name: [] for name in stats.counts}
    for record in corpus.records:
        if record.split == "train":
            by_name[corpus.label_names[record.label]].append(record)
    copies: list[CorpusRecord] = []
    for name in sorted(stats.counts):
        deficit = target - stats.counts[name]
        if deficit <= 0:
            continue
        pool = by_name[name]
        rng = rng_for(seed, "dup", name)
        picks = rng.integers(0, len(pool), size=deficit)
        copies.extend(
            replace(pool[int(i)], provenance="synthetic", split="train")
            for i in picks
        )
    return copies


def load_or_train_gan(
    config: ExperimentConfig, corpus: LabeledCorpus, vocab: Vocab, seed: int
) -> GanBundle:
    """Use the pinned checkpoint when the config names one, else train."""
    with stage("gan-train"):
        if config.gan_checkpoint:
            bundle = load_bundle(config.gan_checkpoint)
            log_kv("gan-train", loaded=config.gan_checkpoint, round=bundle.round)
        else:
            bundle, history = build_gan(config, corpus, len(vocab), seed)
            last = history[-1] if history else {}
            log_kv(
                "gan-train", rounds=bundle.round,
                bleu2=f"{last.get('bleu2', float('nan')):.4f}",
            )
    return bundle


def balanced_corpus(
    config: ExperimentConfig,
    corpus: LabeledCorpus,
    bundle: GanBundle,
    vocab: Vocab,
    seed: int,
) -> tuple[LabeledCorpus, GenerationReport]:
    """Generate minority records with the GAN and fold them into train."""
    with stage("balance"):
        stats = class_stats(corpus, split="train")
        policy = config.balance
        plan = compute_plan(
            stats,
            target_policy=policy.target,
            min_len=policy.min_len,
            max_len=config.max_len,
            max_unk_frac=policy.max_unk_frac,
            dedup=policy.dedup,
            oversample_cap=policy.oversample_cap,
        )
        real_train = [r for r in corpus.records if r.split == "train"]
        synthetic, gen_report = generate_minority(
            bundle,
            plan,
            vocab,
            seed=derive_seed(seed, "balance"),
            real_records=real_train,
            attempt_factor=policy.attempt_factor,
        )
        merged = merge_balanced(
            corpus, synthetic, seed=derive_seed(seed, "merge", "balanced")
        )
        log_kv(
            "balance", synthetic=len(synthetic),
            shortfall=sum(gen_report.shortfall.values()),
        )
    return merged, gen_report


def duplicated_corpus(
    config: ExperimentConfig, corpus: LabeledCorpus, seed: int
) -> LabeledCorpus:
    """Baseline arm: duplicate real minority rows instead of generating."""
    with stage("balance"):
        copies = duplicate_minority(corpus, seed)
        merged = merge_balanced(
            corpus, copies, seed=derive_seed(seed, "merge", "duplicated")
        )
        log_kv("balance", duplicated=len(copies))
    return merged


def _arm_corpora(
    config: ExperimentConfig,
    corpus: LabeledCorpus,
    vocab: Vocab,
    seed: int,
) -> tuple[dict[str, LabeledCorpus], GenerationReport | None]:
    """Build the training corpus for every configured arm."""
    corpora = {"imbalanced": corpus}
    gen_report = None
    if "balanced" in config.arms:
        bundle = load_or_train_gan(config, corpus, vocab, seed)
        corpora["balanced"], gen_report = balanced_corpus(
            config, corpus, bundle, vocab, seed
        )
    if "duplicated" in config.arms:
        corpora["duplicated"] = duplicated_corpus(config, corpus, seed)
    return corpora, gen_report


def run_seed(
    config: ExperimentConfig, prepared: PreparedData, seed: int
) -> tuple[list[RunRecord], GenerationReport | None]:
    """The full per-seed pipeline: split through scored classifiers."""
    corpus = split_and_encode(config, prepared, seed)
    with stage("stats"):
        stats = class_stats(corpus, split="train")
    log_kv(
        "stats", seed=seed, imbalance=f"{stats.imbalance_ratio:.2f}",
        **{f"n_{name}": n for name, n in stats.counts.items()},
    )
    corpora, gen_report = _arm_corpora(config, corpus, prepared.vocab, seed)
    test_slice = corpus.subset("test")
    runs = []
    for arm in config.arms:
        for model in config.classifiers:
            with stage("train-clf"):
                metrics, _ = score_classifier(
                    model, corpora[arm], test_slice, config,
                    len(prepared.vocab), seed, arm,
                )
            log_kv(
                "train-clf", seed=seed, arm=arm, model=model,
                accuracy=f"{metrics.accuracy:.4f}",
                macro_f1=f"{metrics.macro_f1:.4f}",
            )
            runs.append(RunRecord(model=model, arm=arm, seed=seed, metrics=metrics))
    return runs, gen_report


def score_classifier(
    model: str,
    arm_corpus: LabeledCorpus,
    test_slice: LabeledCorpus,
    config: ExperimentConfig,
    vocab_size: int,
    seed: int,
    arm: str,
) -> tuple[ClsMetrics, list[int]]:
    """Train one classifier on one arm; score it on the real test slice.

    Returns the metrics and the raw test-slice predictions from the
    same fitted model.
    """
    train_slice = arm_corpus.subset("train")
    clf_seed = derive_seed(seed, "clf", arm, model)
    if model in ML_KINDS:
        hyper = replace(config.ml, seed=clf_seed)
        featurizer = TfidfFeaturizer()
        features = featurizer.fit_transform(train_slice.records)
        labels = [r.label for r in train_slice.records]
        clf = train_ml(model, features, labels, hyper)
        test_features = featurizer.transform(test_slice.records)
        metrics = evaluate(clf, test_slice, features=test_features)
        preds = [int(p) for p in clf.predict(test_features)]
        return metrics, preds
    hyper = replace(config.nn, seed=clf_seed)
    val_slice = arm_corpus.subset("val")
    clf, _ = train_nn(model, train_slice, val_slice, hyper, vocab_size=vocab_size)
    metrics = evaluate(clf, test_slice)
    preds = [int(p) for p in clf.predict(test_slice.records)]
    return metrics, preds


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run the whole comparison and aggregate the report."""
    prepared = prepare_corpus(config)
    runs: list[RunRecord] = []
    generation: dict[str, dict] = {}
    for seed in config.seeds:
        seed_runs, gen_report = run_seed(config, prepared, seed)
        runs.extend(seed_runs)
        if gen_report is not None:
            generation[str(seed)] = gen_report.as_dict()
    with stage("aggregate"):
        aggregates = aggregate_runs(runs)
        differences = compute_differences(runs, list(config.arms))
    return ExperimentReport(
        dataset={
            "path": config.dataset,
            "schema": config.schema,
            "n_records": len(prepared.surface),
            "n_rejected": prepared.n_rejected,
            "label_names": list(prepared.label_names),
        },
        gan=config.gan,
        arms=list(config.arms),
        classifiers=list(config.classifiers),
        seeds=list(config.seeds),
        runs=runs,
        aggregates=aggregates,
        differences=differences,
        generation=generation,
    )


# ----------------------------------------------------------------- rendering

FAMILY_LABELS = {
    "deep_learning": "Deep learning",
    "machine_learning": "Machine learning",
    "overall": "Overall average",
}
METRIC_LABELS = {"accuracy": "Accuracy", "macro_f1": "Macro-F1"}


def render_report(report: ExperimentReport, fmt: str) -> str:
    """Render the report as markdown, csv, or json.

    Every render re-derives the difference block from the per-run
    records and refuses to emit a report whose summary does not match
    its own data.
    """
    if not report.runs:
        raise ConfigError("cannot render a report with no runs")
    recheck = compute_differences(report.runs, report.arms)
    if recheck != report.differences:
        raise GanBalanceError(
            "difference block does not match the per-run records"
        )
    if fmt == "json":
        return json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "markdown":
        return _render_markdown(report)
    raise ConfigError(f"unknown report format {fmt!r}")


def report_from_json(text: str) -> ExperimentReport:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"report is not valid JSON: {exc}") from exc
    return ExperimentReport.from_dict(obj)


def _render_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["model", "arm", "seed", "accuracy", "macro_precision", "macro_recall",
         "macro_f1", "precision", "recall", "f1", "confusion"]
    )
    for run in report.runs:
        m = run.metrics
        writer.writerow(
            [
                run.model, run.arm, run.seed,
                repr(m.accuracy), repr(m.macro_precision), repr(m.macro_recall),
                repr(m.macro_f1),
                json.dumps(m.precision), json.dumps(m.recall), json.dumps(m.f1),
                json.dumps(m.confusion),
            ]
        )
    return buf.getvalue()


def _render_markdown(report: ExperimentReport) -> str:
    ds = report.dataset
    lines = [
        "# Balancing comparison",
        "",
        f"Dataset: `{ds['path']}` (schema `{ds['schema']}`), "
        f"{ds['n_records']} records, categories: {', '.join(ds['label_names'])}.",
        f"GAN: {report.gan}. Arms: {', '.join(report.arms)}. "
        f"Seeds: {', '.join(str(s) for s in report.seeds)}.",
        "",
        "## Mean scores per model and arm",
        "",
    ]
    header = ["Model"]
    for arm in report.arms:
        header += [f"{arm} acc", f"{arm} F1"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for model in report.classifiers:
        row = [model]
        for arm in report.arms:
            cell = report.aggregates.get(arm, {}).get(model)
            if cell is None:
                row += ["-", "-"]
            else:
                row += [f"{cell['accuracy'] * 100:.2f}", f"{cell['macro_f1'] * 100:.2f}"]
        lines.append("| " + " | ".join(row) + " |")
    lines += [
        "",
        "## Degree of difference from the imbalanced arm",
        "",
        "Values are percentage points: (arm mean - imbalanced mean) x 100.",
        "",
    ]
    diff_arms = [arm for arm in report.arms if arm in report.differences]
    header = ["Metric", "Model family"] + diff_arms
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for metric in DIFF_METRICS:
        for family in ("deep_learning", "machine_learning", "overall"):
            row = [METRIC_LABELS[metric], FAMILY_LABELS[family]]
            present = False
            for arm in diff_arms:
                value = report.differences[arm][metric].get(family)
                if value is None:
                    row.append("-")
                else:
                    row.append(f"{value * 100:.2f}")
                    present = True
            if present:
                lines.append("| " + " | ".join(row) + " |")
    if report.generation:
        lines += ["", "## Synthetic generation", ""]
        for seed, gen in sorted(report.generation.items(), key=lambda kv: int(kv[0])):
            accepted = sum(gen["accepted"].values())
            shortfall = sum(gen["shortfall"].values())
            lines.append(
                f"- seed {seed}: accepted {accepted} synthetic records, "
                f"shortfall {shortfall}."
            )
    lines.append("")
    return "\n".join(lines)

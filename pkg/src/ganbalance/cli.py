"""Command-line entry point: every pipeline stage as a subcommand.

Exit codes: 0 on success, 1 for usage problems (bad flags, unknown
subcommand, unreadable config), 2 when a pipeline stage fails.  Stage
failures print a one-line JSON error record naming the stage on stderr;
logs are timestamped key=value lines on stderr; command results go to
stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .advtrain import load_bundle, save_bundle, write_history_csv
from .corpus import class_stats, write_jsonl
from .errors import ConfigError, GanBalanceError
from .experiment import (
    ExperimentConfig,
    StageError,
    balanced_corpus,
    build_gan,
    duplicated_corpus,
    load_or_train_gan,
    log_kv,
    prepare_corpus,
    render_report,
    report_from_json,
    run_experiment,
    score_classifier,
    split_and_encode,
    stage,
)
from .gantext import CategoryBound
from .genmetrics import BleuConfig, bleu, nll_div, nll_gen
from .seeding import derive_seed, rng_for
from .sentclass.metrics import metrics_from_predictions


class _UsageError(Exception):
    pass


class _EarlyExit(Exception):
    def __init__(self, status: int):
        super().__init__(status)
        self.status = status


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exit code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _UsageError(message)

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise _EarlyExit(status)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON file")
    common.add_argument("--seed", type=int, help="override the config seed list")
    common.add_argument("--out", help="override the config output directory")

    parser = _Parser(prog="ganbalance", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def add(name, handler, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(handler=handler)
        return p

    add("prep", _cmd_prep, "clean and split the dataset, write corpus and vocab")
    add("stats", _cmd_stats, "print per-category counts and the imbalance ratio")
    add("train-gan", _cmd_train_gan, "train the GAN, write checkpoint and history")
    p = sub.add_parser("sample", parents=[common], help="sample records from a trained GAN")
    p.add_argument("--category", required=True, help="category name to sample")
    p.add_argument("--n", type=int, default=10, help="number of records")
    p.add_argument("--checkpoint", help="GAN checkpoint path")
    p.set_defaults(handler=_cmd_sample)
    p = sub.add_parser("metrics", parents=[common], help="generation quality metrics")
    p.add_argument("--checkpoint", help="GAN checkpoint path")
    p.add_argument("--bleu-n", type=int, default=32, help="samples per category for BLEU")
    p.set_defaults(handler=_cmd_metrics)
    p = sub.add_parser("balance", parents=[common], help="generate minority records and merge")
    p.add_argument("--checkpoint", help="GAN checkpoint path")
    p.set_defaults(handler=_cmd_balance)
    p = sub.add_parser("train-clf", parents=[common], help="train one classifier on one arm")
    p.add_argument("--model", required=True, help="classifier name")
    p.add_argument("--arm", default="imbalanced", help="comparison arm")
    p.add_argument("--checkpoint", help="GAN checkpoint path")
    p.set_defaults(handler=_cmd_train_clf)
    p = sub.add_parser("evaluate", parents=[common], help="recompute metrics from predictions")
    p.add_argument("--preds", required=True, help="predictions file from train-clf")
    p.set_defaults(handler=_cmd_evaluate)
    add("run", _cmd_run, "full pipeline: all seeds, arms and classifiers")
    p = sub.add_parser("report", parents=[common], help="re-render a report from its JSON")
    p.add_argument("--report", help="report JSON path (default: <out>/report.json)")
    p.set_defaults(handler=_cmd_report)
    return parser


def _setup_logging() -> None:
    logger = logging.getLogger("ganbalance")
    if logger.handlers:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(
        logging.Formatter("%(asctime)s %(message)s", datefmt="%Y-%m-%dT%H:%M:%S")
    )
    logger.addHandler(handler)
    logger.setLevel(logging.INFO)
    logger.propagate = False


def _config_for(args) -> ExperimentConfig:
    if not args.config:
        raise ConfigError(f"the {args.command} command needs --config")
    config = ExperimentConfig.from_json(args.config)
    if args.seed is not None:
        config = replace(config, seeds=(args.seed,))
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    if getattr(args, "checkpoint", None):
        config = replace(config, gan_checkpoint=args.checkpoint)
    return config


def _out_dir(config: ExperimentConfig) -> Path:
    path = Path(config.out_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _default_checkpoint(config: ExperimentConfig, seed: int) -> str | None:
    if config.gan_checkpoint:
        return config.gan_checkpoint
    default = Path(config.out_dir) / f"gan_seed{seed}.ckpt"
    return str(default) if default.exists() else None


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# ----------------------------------------------------------------- commands

def _cmd_prep(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    prepared = prepare_corpus(config)
    corpus = split_and_encode(config, prepared, seed)
    out = _out_dir(config)
    with stage("write"):
        corpus_path = out / f"corpus_seed{seed}.jsonl"
        write_jsonl(corpus, prepared.vocab, corpus_path)
        vocab_path = out / "vocab.json"
        vocab_path.write_text(
            json.dumps(
                {
                    "tokens": prepared.vocab.id_to_token[4:],
                    "max_size": prepared.vocab.max_size,
                    "min_freq": prepared.vocab.min_freq,
                },
                sort_keys=True,
            )
            + "\n",
            encoding="utf-8",
        )
    _emit(
        {
            "corpus": str(corpus_path),
            "vocab": str(vocab_path),
            "records": len(corpus.records),
            "vocab_size": len(prepared.vocab),
            "rejected": prepared.n_rejected,
        }
    )
    return 0


def _cmd_stats(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    prepared = prepare_corpus(config)
    corpus = split_and_encode(config, prepared, seed)
    with stage("stats"):
        stats = class_stats(corpus, split="train")
    _emit(
        {
            "split": "train",
            "counts": stats.counts,
            "majority": stats.majority,
            "imbalance_ratio": stats.imbalance_ratio,
        }
    )
    return 0


def _cmd_train_gan(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    prepared = prepare_corpus(config)
    corpus = split_and_encode(config, prepared, seed)
    with stage("gan-train"):
        bundle, history = build_gan(config, corpus, len(prepared.vocab), seed)
    out = _out_dir(config)
    with stage("write"):
        ckpt = out / f"gan_seed{seed}.ckpt"
        save_bundle(bundle, ckpt)
        history_path = out / f"gan_history_seed{seed}.csv"
        write_history_csv(history, history_path)
    _emit({"checkpoint": str(ckpt), "history": str(history_path), "rounds": bundle.round})
    return 0


def _load_bundle_for(config: ExperimentConfig, seed: int):
    path = _default_checkpoint(config, seed)
    with stage("gan-load"):
        if path is None:
            raise ConfigError(
                "no GAN checkpoint found; run train-gan first, pass --checkpoint, "
                "or set gan_checkpoint in the config"
            )
        bundle = load_bundle(path)
    log_kv("gan-load", checkpoint=path, round=bundle.round)
    return bundle


def _cmd_sample(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    prepared = prepare_corpus(config)
    bundle = _load_bundle_for(config, seed)
    with stage("sample"):
        if args.category not in bundle.label_names:
            raise ConfigError(
                f"unknown category {args.category!r}; "
                f"trained categories: {bundle.label_names}"
            )
        if args.n < 1:
            raise ConfigError("--n must be positive")
        cat = bundle.label_names.index(args.category)
        gen = bundle.generators[cat if bundle.kind == "sentigan" else 0]
        res = gen.sample_sequence(
            cat,
            max_len=config.max_len,
            mode="multinomial",
            rng=rng_for(seed, "sample", args.category),
            batch=args.n,
        )
        for b in range(args.n):
            words = prepared.vocab.decode(res.row_ids(b))
            print(json.dumps({"category": args.category, "tokens": words}))
    return 0


def _cmd_metrics(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    prepared = prepare_corpus(config)
    corpus = split_and_encode(config, prepared, seed)
    bundle = _load_bundle_for(config, seed)
    per_cat = {}
    with stage("metrics"):
        if args.bleu_n < 1:
            raise ConfigError("--bleu-n must be positive")
        for cat, name in enumerate(bundle.label_names):
            gen = bundle.generators[cat if bundle.kind == "sentigan" else 0]
            refs = [
                tuple(r.tokens)
                for r in corpus.records
                if r.split == "train" and r.label == cat
            ][:200]
            res = gen.sample_sequence(
                cat,
                max_len=config.max_len,
                mode="multinomial",
                rng=rng_for(seed, "metrics", name, "bleu"),
                batch=args.bleu_n,
            )
            hyps = [tuple(res.row_ids(b)) for b in range(args.bleu_n) if res.row_ids(b)]
            bound = CategoryBound(gen, cat)
            val_seqs = [
                r.tokens
                for r in corpus.records
                if r.split == "val" and r.label == cat
            ][:200]
            entry = {}
            if refs and hyps:
                entry["bleu2"] = bleu(refs, hyps, BleuConfig(max_n=2))
                entry["bleu3"] = bleu(refs, hyps, BleuConfig(max_n=3))
            if val_seqs:
                entry["nll_gen"] = nll_gen(bound, val_seqs)
            entry["nll_div"] = nll_div(
                bound, n_samples=100, seed=derive_seed(seed, "metrics", name)
            )
            per_cat[name] = entry
        means = {}
        for key in ("bleu2", "bleu3", "nll_gen", "nll_div"):
            values = [entry[key] for entry in per_cat.values() if key in entry]
            if values:
                means[key] = float(np.mean(values))
    _emit({"categories": per_cat, "mean": means})
    return 0


def _cmd_balance(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    prepared = prepare_corpus(config)
    corpus = split_and_encode(config, prepared, seed)
    bundle = (
        _load_bundle_for(config, seed)
        if _default_checkpoint(config, seed)
        else load_or_train_gan(config, corpus, prepared.vocab, seed)
    )
    merged, gen_report = balanced_corpus(config, corpus, bundle, prepared.vocab, seed)
    out = _out_dir(config)
    with stage("write"):
        corpus_path = out / f"balanced_seed{seed}.jsonl"
        write_jsonl(merged, prepared.vocab, corpus_path)
        report_path = out / f"generation_seed{seed}.json"
        report_path.write_text(
            json.dumps(gen_report.as_dict(), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    _emit(
        {
            "corpus": str(corpus_path),
            "generation_report": str(report_path),
            "accepted": sum(gen_report.accepted.values()),
            "shortfall": sum(gen_report.shortfall.values()),
        }
    )
    return 0


def _cmd_train_clf(args) -> int:
    config = _config_for(args)
    seed = config.seeds[0]
    if args.arm not in config.arms:
        raise ConfigError(f"arm {args.arm!r} is not in the configured arms {config.arms}")
    if args.model not in config.classifiers:
        raise ConfigError(
            f"model {args.model!r} is not in the configured classifiers"
        )
    prepared = prepare_corpus(config)
    corpus = split_and_encode(config, prepared, seed)
    if args.arm == "balanced":
        resolved = _default_checkpoint(config, seed)
        bundle = (
            _load_bundle_for(config, seed)
            if resolved
            else load_or_train_gan(config, corpus, prepared.vocab, seed)
        )
        arm_corpus, _ = balanced_corpus(config, corpus, bundle, prepared.vocab, seed)
    elif args.arm == "duplicated":
        arm_corpus = duplicated_corpus(config, corpus, seed)
    else:
        arm_corpus = corpus
    test_slice = corpus.subset("test")
    with stage("train-clf"):
        metrics, preds = score_classifier(
            args.model, arm_corpus, test_slice, config,
            len(prepared.vocab), seed, args.arm,
        )
        truth = [r.label for r in test_slice.records]
    out = _out_dir(config)
    with stage("write"):
        preds_path = out / f"clf_{args.model}_{args.arm}_seed{seed}.json"
        preds_path.write_text(
            json.dumps(
                {
                    "model": args.model,
                    "arm": args.arm,
                    "seed": seed,
                    "label_names": corpus.label_names,
                    "truth": truth,
                    "preds": preds,
                    "metrics": metrics.as_dict(),
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
    _emit({"predictions": str(preds_path), "metrics": metrics.as_dict()})
    return 0


def _cmd_evaluate(args) -> int:
    with stage("evaluate"):
        try:
            obj = json.loads(Path(args.preds).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read predictions {args.preds}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.preds} is not valid JSON: {exc}") from exc
        try:
            truth = obj["truth"]
            preds = obj["preds"]
            k = len(obj["label_names"])
            stored = obj["metrics"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{args.preds} is missing field {exc}") from exc
        metrics = metrics_from_predictions(truth, preds, k)
        if metrics.as_dict() != stored:
            raise GanBalanceError(
                f"stored metrics in {args.preds} do not match its predictions"
            )
    _emit(metrics.as_dict())
    return 0


def _cmd_run(args) -> int:
    config = _config_for(args)
    report = run_experiment(config)
    out = _out_dir(config)
    with stage("render"):
        paths = {}
        for fmt, suffix in (("json", "json"), ("markdown", "md"), ("csv", "csv")):
            path = out / f"report.{suffix}"
            path.write_text(render_report(report, fmt), encoding="utf-8")
            paths[fmt] = str(path)
    _emit({"report": paths, "differences": report.differences})
    return 0


def _cmd_report(args) -> int:
    config = _config_for(args)
    out = _out_dir(config)
    source = Path(args.report) if args.report else out / "report.json"
    with stage("render"):
        try:
            report = report_from_json(source.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read report {source}: {exc}") from exc
        paths = {}
        for fmt, suffix in (("markdown", "md"), ("csv", "csv")):
            path = out / f"report.{suffix}"
            path.write_text(render_report(report, fmt), encoding="utf-8")
            paths[fmt] = str(path)
    _emit({"report": paths})
    return 0


# ------------------------------------------------------------------- driver

def cli(argv=None) -> int:
    """Parse arguments and dispatch; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError:
        return 1
    except _EarlyExit as exc:
        return exc.status
    _setup_logging()
    try:
        return args.handler(args)
    except StageError as err:
        print(json.dumps(err.record(), sort_keys=True), file=sys.stderr)
        return 2
    except ConfigError as err:
        print(f"ganbalance: error: {err}", file=sys.stderr)
        return 1
    except GanBalanceError as err:
        record = {"stage": "internal", "error": type(err).__name__, "message": str(err)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli(sys.argv[1:]))


if __name__ == "__main__":
    main()

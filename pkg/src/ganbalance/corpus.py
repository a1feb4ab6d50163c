"""Dataset loading, vocabularies, splits, stats, and fixture corpora.

The module owns everything between raw CSV files and encoded id
sequences: the three review schemas, vocabulary construction, stratified
splitting, class-imbalance statistics, TF-IDF weights, JSONL round-trip,
and a deterministic synthetic-corpus generator used by the tests and the
inline experiment configs.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CorpusError, HygieneError
from .seeding import rng_for
from .textprep import RawRecord

__all__ = [
    "Vocab",
    "SurfaceRecord",
    "LabeledCorpus",
    "ClassStats",
    "SynthCategory",
    "load_dataset",
    "build_vocab",
    "class_stats",
    "split",
    "featurize_tfidf",
    "synth_corpus",
    "encode_corpus",
    "write_jsonl",
    "read_jsonl",
]

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>")

#: encoded sequences are cut to this many ids, final id always EOS
DEFAULT_MAX_LEN = 32

SPLITS = ("train", "val", "test")


class Vocab:
    """Token/id bijection with four reserved ids.

    PAD=0, BOS=1, EOS=2, UNK=3 are fixed; real tokens start at 4 in
    descending frequency order (ties by first occurrence).
    """

    def __init__(self, tokens_in_order: Sequence[str], max_size: int, min_freq: int):
        self.max_size = max_size
        self.min_freq = min_freq
        self.id_to_token: list[str] = list(RESERVED_TOKENS) + list(tokens_in_order)
        self.token_to_id: dict[str, int] = {
            tok: i for i, tok in enumerate(self.id_to_token)
        }
        if len(self.token_to_id) != len(self.id_to_token):
            raise CorpusError("vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(
        self,
        tokens: Sequence[str],
        max_len: int | None = None,
        append_eos: bool = True,
    ) -> list[int]:
        """Map tokens to ids, truncating so EOS still fits at the end."""
        ids = [self.token_to_id.get(t, UNK) for t in tokens]
        if append_eos:
            if max_len is not None:
                ids = ids[: max_len - 1]
            ids.append(EOS)
        elif max_len is not None:
            ids = ids[:max_len]
        return ids

    def decode(self, ids: Sequence[int], strip_special: bool = True) -> list[str]:
        """Map ids back to surface tokens; UNK keeps its surface form."""
        out = []
        for i in ids:
            i = int(i)
            if i < 0 or i >= len(self.id_to_token):
                raise CorpusError(f"id {i} outside vocabulary of size {len(self)}")
            if strip_special and i in (PAD, BOS, EOS):
                continue
            out.append(self.id_to_token[i])
        return out


@dataclass
class SurfaceRecord:
    """A cleaned record before encoding: label name plus surface tokens."""

    label: str
    tokens: list[str]
    provenance: str = "real"
    split: str = "train"


@dataclass
class CorpusRecord:
    """An encoded record: label id plus token ids."""

    label: int
    tokens: list[int]
    provenance: str = "real"
    split: str = "train"


@dataclass
class LabeledCorpus:
    """Encoded records plus the ordered category list."""

    records: list[CorpusRecord]
    label_names: list[str]

    def validate(self, vocab: Vocab | None = None) -> None:
        k = len(self.label_names)
        for rec in self.records:
            if not 0 <= rec.label < k:
                raise CorpusError(f"label id {rec.label} outside {k} categories")
            if rec.provenance == "synthetic" and rec.split in ("val", "test"):
                raise HygieneError(
                    f"synthetic record assigned to {rec.split} split"
                )
            if vocab is not None:
                for t in rec.tokens:
                    if not 0 <= t < len(vocab):
                        raise CorpusError(
                            f"token id {t} outside vocabulary of size {len(vocab)}"
                        )

    def subset(self, split: str | None = None, provenance: str | None = None):
        recs = [
            r
            for r in self.records
            if (split is None or r.split == split)
            and (provenance is None or r.provenance == provenance)
        ]
        return LabeledCorpus(records=recs, label_names=list(self.label_names))


@dataclass
class ClassStats:
    """Per-category counts and imbalance ratios."""

    counts: dict[str, int]
    majority: str
    ratios: dict[tuple[str, str], float]
    imbalance_ratio: float


_RATING_TO_LABEL = {1: "negative", 2: "negative", 3: "neutral", 4: "positive", 5: "positive"}

_SCHEMA_COLUMNS = {
    "labeled3": ("course", "label", "review"),
    "rated5": ("rating", "review"),
    "labeled2": ("label", "review"),
}

_SCHEMA_LABELS = {
    "labeled3": ("positive", "neutral", "negative"),
    "labeled2": ("positive", "negative"),
}


def _default_rule(schema: str) -> Callable[[str], str | None]:
    if schema == "rated5":
        def rule(cell: str) -> str | None:
            try:
                rating = int(cell.strip())
            except ValueError:
                return None
            return _RATING_TO_LABEL.get(rating)
        return rule

    allowed = _SCHEMA_LABELS[schema]

    def rule(cell: str) -> str | None:
        label = cell.strip().lower()
        return label if label in allowed else None

    return rule


def load_dataset(
    path: str | Path,
    schema: str,
    labeling_rule: Callable[[str], str | None] | None = None,
) -> tuple[list[RawRecord], list[tuple[int, str]]]:
    """Read a CSV dataset in one of the three review schemas.

    Returns (records, errors); each error is (line number, reason) for a
    row that was rejected.  The labeling rule maps the raw label or
    rating cell to a category name, or None to reject the row.
    """
    if schema not in _SCHEMA_COLUMNS:
        raise CorpusError(f"unknown schema {schema!r}")
    columns = _SCHEMA_COLUMNS[schema]
    rule = labeling_rule or _default_rule(schema)
    label_col = "rating" if schema == "rated5" else "label"

    records: list[RawRecord] = []
    errors: list[tuple[int, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise CorpusError(f"{path}: empty file")
        missing = [c for c in columns if c not in reader.fieldnames]
        if missing:
            raise CorpusError(
                f"{path}: schema {schema} needs columns {missing}, header has {reader.fieldnames}"
            )
        for row in reader:
            line = reader.line_num
            if any(row.get(c) is None for c in columns):
                errors.append((line, "wrong number of fields"))
                continue
            text = row["review"]
            if not text or not text.strip():
                errors.append((line, "empty review text"))
                continue
            label = rule(row[label_col])
            if label is None:
                errors.append((line, f"unusable {label_col} {row[label_col]!r}"))
                continue
            extra = {
                k: v
                for k, v in row.items()
                if k not in ("review", label_col) and k is not None and v is not None
            }
            records.append(RawRecord(label=label, text=text, extra=extra))
    return records, errors


def build_vocab(
    corpora: Iterable[Sequence[str]], max_size: int = 20000, min_freq: int = 1
) -> Vocab:
    """Build a frequency-ordered vocabulary over token sequences.

    max_size includes the four reserved ids; frequency ties keep
    first-occurrence order so the result is deterministic.
    """
    counts: Counter[str] = Counter()
    first_seen: dict[str, int] = {}
    n = 0
    for tokens in corpora:
        for tok in tokens:
            counts[tok] += 1
            if tok not in first_seen:
                first_seen[tok] = n
                n += 1
    if not counts:
        raise CorpusError("cannot build a vocabulary from an empty token stream")
    eligible = [t for t in counts if counts[t] >= min_freq]
    eligible.sort(key=lambda t: (-counts[t], first_seen[t]))
    kept = eligible[: max(0, max_size - len(RESERVED_TOKENS))]
    return Vocab(kept, max_size=max_size, min_freq=min_freq)


def class_stats(corpus: LabeledCorpus, split: str | None = None) -> ClassStats:
    """Count records per category and compute imbalance ratios."""
    recs = corpus.records if split is None else [r for r in corpus.records if r.split == split]
    if not recs:
        raise CorpusError("class_stats needs a nonempty corpus")
    counts = {name: 0 for name in corpus.label_names}
    for rec in recs:
        counts[corpus.label_names[rec.label]] += 1
    majority = max(counts, key=lambda name: counts[name])
    ratios: dict[tuple[str, str], float] = {}
    for a in counts:
        for b in counts:
            if a != b:
                ratios[(a, b)] = counts[a] / counts[b] if counts[b] else math.inf
    minority = min(counts.values())
    imbalance = max(counts.values()) / minority if minority else math.inf
    return ClassStats(counts=counts, majority=majority, ratios=ratios, imbalance_ratio=imbalance)


def _largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    ideal = [n * r for r in ratios]
    base = [int(math.floor(x)) for x in ideal]
    order = sorted(range(len(ratios)), key=lambda i: (ideal[i] - base[i]), reverse=True)
    for i in order[: n - sum(base)]:
        base[i] += 1
    return base


def split(corpus, ratios: tuple[float, float, float], seed: int, stratified: bool = True):
    """Assign train/val/test splits, stratified by category by default.

    Accepts a LabeledCorpus or a plain list of records with ``label``
    and ``split`` attributes and returns the same shape with fresh
    split assignments.  Sizes follow the ratios to within one record
    per category (largest-remainder rounding).
    """
    if len(ratios) != len(SPLITS):
        raise CorpusError(f"need {len(SPLITS)} ratios, got {len(ratios)}")
    if any(r <= 0 for r in ratios):
        raise CorpusError("split ratios must be positive")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise CorpusError(f"split ratios must sum to 1, got {sum(ratios)}")

    is_corpus = isinstance(corpus, LabeledCorpus)
    records = corpus.records if is_corpus else list(corpus)

    def label_name(rec) -> str:
        return corpus.label_names[rec.label] if is_corpus else rec.label

    if stratified:
        groups: dict[str, list[int]] = {}
        for i, rec in enumerate(records):
            groups.setdefault(label_name(rec), []).append(i)
    else:
        groups = {"": list(range(len(records)))}

    assignment = [""] * len(records)
    for name in sorted(groups):
        idx = groups[name]
        if len(idx) < len(SPLITS):
            raise CorpusError(
                f"category {name or '(all)'!r} has {len(idx)} records, "
                f"fewer than the {len(SPLITS)} splits"
            )
        rng = rng_for(seed, "split", name)
        perm = rng.permutation(len(idx))
        sizes = _largest_remainder(len(idx), ratios)
        pos = 0
        for split_name, size in zip(SPLITS, sizes):
            for j in perm[pos : pos + size]:
                assignment[idx[j]] = split_name
            pos += size

    out = [replace(rec, split=assignment[i]) for i, rec in enumerate(records)]
    if is_corpus:
        return LabeledCorpus(records=out, label_names=list(corpus.label_names))
    return out


def featurize_tfidf(
    corpus: LabeledCorpus, vocab: Vocab
) -> tuple[np.ndarray, list[int]]:
    """TF-IDF weights: tf(t,d) * log(N_docs / df(t)).

    Terms are the token ids that actually occur in the corpus (PAD
    excluded), so df >= 1 always holds.  Returns (weights, term ids)
    with one matrix column per term id, ascending.
    """
    docs = [rec.tokens for rec in corpus.records]
    n_docs = len(docs)
    if n_docs == 0:
        raise CorpusError("featurize_tfidf needs a nonempty corpus")
    df: Counter[int] = Counter()
    for doc in docs:
        df.update(set(t for t in doc if t != PAD))
    terms = sorted(df)
    col = {t: j for j, t in enumerate(terms)}
    weights = np.zeros((n_docs, len(terms)))
    for i, doc in enumerate(docs):
        for t, tf in Counter(doc).items():
            if t in col:
                weights[i, col[t]] = tf * math.log(n_docs / df[t])
    return weights, terms


@dataclass
class SynthCategory:
    """Recipe for one synthetic category: how many records, which words."""

    count: int
    lexicon: list[str]
    templates: list[str]


def synth_corpus(
    spec: dict[str, SynthCategory | tuple[int, list[str], list[str]]], seed: int
) -> list[RawRecord]:
    """Generate a labeled fixture corpus from per-category templates.

    Each record picks one of the category's templates and fills every
    ``{}`` slot with a word from the category's lexicon.  Lexicons must
    be pairwise disjoint so category membership stays decidable from
    words alone.
    """
    cats: dict[str, SynthCategory] = {}
    for name, raw in spec.items():
        cat = raw if isinstance(raw, SynthCategory) else SynthCategory(*raw)
        if not cat.lexicon:
            raise CorpusError(f"category {name!r} has an empty lexicon")
        if not cat.templates:
            raise CorpusError(f"category {name!r} has no templates")
        cats[name] = cat
    names = sorted(cats)
    for i, a in enumerate(names):
        for b in names[i + 1 :]:
            overlap = set(cats[a].lexicon) & set(cats[b].lexicon)
            if overlap:
                raise CorpusError(
                    f"lexicons for {a!r} and {b!r} overlap: {sorted(overlap)[:5]}"
                )

    records: list[RawRecord] = []
    for name in names:
        cat = cats[name]
        rng = rng_for(seed, "synth", name)
        for _ in range(cat.count):
            template = cat.templates[int(rng.integers(len(cat.templates)))]
            parts = template.split("{}")
            fills = [
                cat.lexicon[int(rng.integers(len(cat.lexicon)))]
                for _ in range(len(parts) - 1)
            ]
            text = parts[0]
            for fill, part in zip(fills, parts[1:]):
                text += fill + part
            records.append(RawRecord(label=name, text=text, extra={}))
    return records


def encode_corpus(
    records: Sequence[SurfaceRecord],
    vocab: Vocab,
    label_names: Sequence[str] | None = None,
    max_len: int = DEFAULT_MAX_LEN,
) -> LabeledCorpus:
    """Encode surface records into id sequences with a trailing EOS."""
    if label_names is None:
        label_names = sorted({r.label for r in records})
    index = {name: i for i, name in enumerate(label_names)}
    out = []
    for rec in records:
        if rec.label not in index:
            raise CorpusError(f"record label {rec.label!r} not in {list(label_names)}")
        out.append(
            CorpusRecord(
                label=index[rec.label],
                tokens=vocab.encode(rec.tokens, max_len=max_len),
                provenance=rec.provenance,
                split=rec.split,
            )
        )
    corpus = LabeledCorpus(records=out, label_names=list(label_names))
    corpus.validate(vocab)
    return corpus


def write_jsonl(corpus: LabeledCorpus, vocab: Vocab, path: str | Path) -> None:
    """Write one JSON object per record: label, tokens, provenance, split."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in corpus.records:
            fh.write(
                json.dumps(
                    {
                        "label": corpus.label_names[rec.label],
                        "tokens": vocab.decode(rec.tokens),
                        "provenance": rec.provenance,
                        "split": rec.split,
                    },
                    sort_keys=True,
                )
                + "\n"
            )


def read_jsonl(path: str | Path) -> list[SurfaceRecord]:
    """Read records written by write_jsonl back as surface records."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                records.append(
                    SurfaceRecord(
                        label=obj["label"],
                        tokens=list(obj["tokens"]),
                        provenance=obj.get("provenance", "real"),
                        split=obj.get("split", "train"),
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorpusError(f"{path}:{line_no}: bad record ({exc})") from exc
    return records

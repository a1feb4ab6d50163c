"""Rebalancing a skewed training split with generated minority text.

compute_plan turns train-split class statistics into per-category
deficits under a target policy.  generate_minority samples a trained
generator bundle until each deficit is covered by records that survive
the filters (length bounds, UNK fraction, exact-duplicate rejection).
merge_balanced folds the accepted synthetic records into the training
split without touching val or test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .corpus import EOS, PAD, UNK, ClassStats, CorpusRecord, LabeledCorpus, Vocab
from .errors import ConfigError, GanBalanceError, HygieneError
from .seeding import rng_for

__all__ = [
    "BalancePlan",
    "GenerationReport",
    "compute_plan",
    "generate_minority",
    "merge_balanced",
]


@dataclass(frozen=True)
class BalancePlan:
    """Per-category targets and deficits plus generation filters."""

    targets: dict[str, int]
    deficits: dict[str, int]
    real_counts: dict[str, int]
    min_len: int = 1
    max_len: int = 32
    max_unk_frac: float = 0.2
    dedup: bool = True
    oversample_cap: float | None = None

    def __post_init__(self) -> None:
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ConfigError("length bounds must satisfy 1 <= min <= max")
        if not 0.0 <= self.max_unk_frac <= 1.0:
            raise ConfigError("max_unk_frac must lie in [0, 1]")
        if self.oversample_cap is not None and self.oversample_cap <= 0:
            raise ConfigError("oversample_cap must be positive when set")
        for name, d in self.deficits.items():
            if d < 0:
                raise ConfigError(f"negative deficit for {name!r}")

    def asked(self, name: str) -> int:
        """Records to actually generate: the deficit, capped by ratio."""
        deficit = self.deficits[name]
        if self.oversample_cap is None:
            return deficit
        ceiling = int(math.floor(self.oversample_cap * self.real_counts[name]))
        return min(deficit, ceiling)


@dataclass
class GenerationReport:
    """Accounting of one generate_minority run."""

    targets: dict[str, int]
    deficits: dict[str, int]
    asked: dict[str, int]
    accepted: dict[str, int]
    rejected: dict[str, dict[str, int]]
    shortfall: dict[str, int] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "targets": dict(self.targets),
            "deficits": dict(self.deficits),
            "asked": dict(self.asked),
            "accepted": dict(self.accepted),
            "rejected": {k: dict(v) for k, v in self.rejected.items()},
            "shortfall": dict(self.shortfall),
        }


def compute_plan(
    stats: ClassStats,
    target_policy: str | int = "majority",
    min_len: int = 1,
    max_len: int = 32,
    max_unk_frac: float = 0.2,
    dedup: bool = True,
    oversample_cap: float | None = None,
) -> BalancePlan:
    """Deficits per category: max(0, target - real count).

    target_policy "majority" matches every category to the majority
    count; an integer sets an explicit target for all categories.
    """
    if target_policy == "majority":
        target = stats.counts[stats.majority]
    elif isinstance(target_policy, int) and not isinstance(target_policy, bool):
        if target_policy < 0:
            raise ConfigError("explicit target must be nonnegative")
        target = target_policy
    else:
        raise ConfigError(f"unknown target policy {target_policy!r}")
    targets = {name: target for name in stats.counts}
    deficits = {name: max(0, target - n) for name, n in stats.counts.items()}
    return BalancePlan(
        targets=targets,
        deficits=deficits,
        real_counts=dict(stats.counts),
        min_len=min_len,
        max_len=max_len,
        max_unk_frac=max_unk_frac,
        dedup=dedup,
        oversample_cap=oversample_cap,
    )


def _content_tokens(ids: list[int]) -> list[int]:
    return [t for t in ids if t not in (PAD, EOS)]


def _classify_rejection(plan: BalancePlan, ids: list[int], seen) -> str | None:
    content = _content_tokens(ids)
    if not plan.min_len <= len(content) <= plan.max_len:
        return "length"
    unk_frac = sum(1 for t in content if t == UNK) / len(content)
    if unk_frac > plan.max_unk_frac:
        return "unk"
    if plan.dedup and tuple(ids) in seen:
        return "duplicate"
    return None


def generate_minority(
    bundle,
    plan: BalancePlan,
    vocab: Vocab,
    seed: int,
    real_records: list[CorpusRecord] | None = None,
    attempt_factor: int = 20,
) -> tuple[list[CorpusRecord], GenerationReport]:
    """Sample synthetic minority records until the plan is satisfied.

    Candidates are drawn per category from the bundle's generator and
    kept only when they pass the plan's filters; rejected candidates are
    replaced until the attempt budget (attempt_factor per wanted record)
    runs out, at which point the shortfall is reported rather than the
    filters being relaxed.  Dedup compares token sequences exactly,
    against real_records and all previously accepted synthetic ones.
    """
    if attempt_factor < 1:
        raise ConfigError("attempt_factor must be positive")
    names = list(bundle.label_names)
    for name in plan.deficits:
        if name not in names:
            raise ConfigError(f"no generator trained for category {name!r}")
    gen0 = bundle.generators[0]
    if gen0.vocab_size != len(vocab):
        raise ConfigError(
            f"bundle vocabulary size {gen0.vocab_size} != vocab {len(vocab)}"
        )

    seen: set[tuple[int, ...]] = set()
    if plan.dedup and real_records:
        seen.update(tuple(r.tokens) for r in real_records)

    accepted: dict[str, int] = {}
    rejected: dict[str, dict[str, int]] = {}
    asked: dict[str, int] = {}
    shortfall: dict[str, int] = {}
    out: list[CorpusRecord] = []

    for name in sorted(plan.deficits):
        want = plan.asked(name)
        asked[name] = want
        accepted[name] = 0
        rejected[name] = {"length": 0, "unk": 0, "duplicate": 0}
        if want == 0:
            continue
        cat = names.index(name)
        gen = bundle.generators[cat if bundle.kind == "sentigan" else 0]
        rng = rng_for(seed, "balance", name)
        budget = want * attempt_factor
        spent = 0
        while accepted[name] < want and spent < budget:
            batch = min(64, budget - spent)
            res = gen.sample_sequence(
                cat, max_len=plan.max_len, mode="multinomial", rng=rng, batch=batch
            )
            spent += batch
            for b in range(batch):
                if accepted[name] == want:
                    break
                ids = res.row_ids(b)
                reason = _classify_rejection(plan, ids, seen)
                if reason is not None:
                    rejected[name][reason] += 1
                    continue
                if plan.dedup:
                    seen.add(tuple(ids))
                out.append(
                    CorpusRecord(
                        label=cat,
                        tokens=ids,
                        provenance="synthetic",
                        split="train",
                    )
                )
                accepted[name] += 1
        if accepted[name] < want:
            shortfall[name] = want - accepted[name]

    report = GenerationReport(
        targets=dict(plan.targets),
        deficits=dict(plan.deficits),
        asked=asked,
        accepted=accepted,
        rejected=rejected,
        shortfall=shortfall,
    )
    return out, report


def merge_balanced(
    corpus: LabeledCorpus,
    synthetic: list[CorpusRecord],
    seed: int = 0,
) -> LabeledCorpus:
    """Fold synthetic records into the train split, val/test untouched.

    The merged training block is shuffled deterministically by seed;
    val and test records keep their original relative order.  Merging an
    empty synthetic list returns the corpus unchanged.
    """
    for rec in synthetic:
        if rec.provenance != "synthetic":
            raise HygieneError(
                f"merge_balanced got a {rec.provenance!r} record as synthetic"
            )
        if rec.split != "train":
            raise HygieneError(
                f"synthetic record targets {rec.split!r}; only train may be balanced"
            )
        if not 0 <= rec.label < len(corpus.label_names):
            raise GanBalanceError(f"synthetic label {rec.label} out of range")
    if not synthetic:
        return LabeledCorpus(
            records=list(corpus.records), label_names=list(corpus.label_names)
        )
    train = [r for r in corpus.records if r.split == "train"] + list(synthetic)
    others = [r for r in corpus.records if r.split != "train"]
    order = rng_for(seed, "merge").permutation(len(train))
    merged = LabeledCorpus(
        records=[train[i] for i in order] + others,
        label_names=list(corpus.label_names),
    )
    merged.validate()
    return merged

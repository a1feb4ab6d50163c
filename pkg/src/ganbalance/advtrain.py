"""Training procedures for the text GANs.

Three layers: MLE pretraining (teacher-forced cross-entropy), SentiGAN
adversarial training (k generators vs one (k+1)-way discriminator,
policy gradients against Monte Carlo penalty estimates), and CatGAN
adversarial training (one conditional generator vs k binary heads,
Gumbel-softmax gradients with evolutionary selection over a set of loss
mutations).  A GanBundle snapshots everything needed to resume a run:
network parameters, optimizer state, and the round counter; the seeded
rng streams are keyed by absolute round so a resumed run replays the
exact noise of an uninterrupted one.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np

from .corpus import BOS, EOS, PAD, CorpusRecord, LabeledCorpus
from .errors import ConfigError, CorpusError, GanBalanceError, TrainingDiverged
from .gantext import DiscriminatorNet, GeneratorNet
from .genmetrics import BleuConfig, bleu
from .numerics import Adam, Tape, clip_global_norm, load_arrays, ops, save_arrays
from .seeding import derive_seed, rng_for

__all__ = [
    "TrainConfig",
    "PenaltyRecord",
    "EvolutionCandidate",
    "FitnessResult",
    "GanBundle",
    "pretrain_mle",
    "train_sentigan",
    "train_catgan",
    "train_rounds",
    "evaluate_fitness",
    "estimate_penalties",
    "gumbel_temperature",
    "save_bundle",
    "load_bundle",
    "write_history_csv",
]

HISTORY_COLUMNS = [
    "round", "temperature", "d_loss", "g_loss", "penalty_mean",
    "mutation", "f_quality", "f_diversity", "fitness",
    "bleu2", "nll_gen", "nll_div",
]


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for pretraining and adversarial training.

    adversarial_rounds defaults to a desk-scale 50; paper_schedule()
    returns the same config at the published 250 rounds.
    """

    pretrain_epochs: int = 20
    adversarial_rounds: int = 50
    batch_size: int = 32
    rollout_count: int = 16
    g_lr: float = 1e-3
    d_lr: float = 1e-3
    temp_start: float = 2.0
    temp_end: float = 0.5
    temp_decay: str = "exp"
    mutations: tuple[str, ...] = ("nonsat", "lsgan", "ragan")
    eval_every: int = 10
    fitness_samples: int = 32
    lambda_div: float = 0.05
    max_len: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        if self.pretrain_epochs < 0:
            raise ConfigError("pretrain_epochs must be nonnegative")
        for name in ("adversarial_rounds", "batch_size", "rollout_count",
                     "eval_every", "fitness_samples", "max_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.g_lr <= 0 or self.d_lr <= 0:
            raise ConfigError("learning rates must be positive")
        if self.temp_end > self.temp_start:
            raise ConfigError("temperature schedule must not rise")
        if self.temp_end <= 0:
            raise ConfigError("temperatures must be positive")
        if self.temp_decay not in ("exp", "linear"):
            raise ConfigError(f"unknown temperature decay {self.temp_decay!r}")
        if not self.mutations:
            raise ConfigError("mutation set must not be empty")
        for m in self.mutations:
            if m not in ("nonsat", "lsgan", "ragan"):
                raise ConfigError(f"unknown mutation {m!r}")

    def paper_schedule(self) -> "TrainConfig":
        """The published round count instead of the desk-scale default."""
        return replace(self, adversarial_rounds=250)


@dataclass
class PenaltyRecord:
    """Per-timestep penalty estimates for a generated batch, each in [0,1]."""

    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        active = self.values[self.mask == 1]
        if active.size and (active.min() < 0 or active.max() > 1):
            raise GanBalanceError("penalties must lie in [0, 1]")

    def mean(self) -> float:
        total = self.mask.sum()
        return float((self.values * self.mask).sum() / total) if total else 0.0


@dataclass
class FitnessResult:
    """Fitness components of one evolution candidate."""

    f_quality: float
    f_diversity: float
    fitness: float
    lambda_div: float
    val_nll: float | None = None


@dataclass
class EvolutionCandidate:
    """A child generator produced by one mutation, with its fitness."""

    mutation: str
    gen: GeneratorNet
    opt_state: dict
    result: FitnessResult


@dataclass
class GanBundle:
    """Everything a training run needs to continue where it stopped."""

    kind: str
    generators: list[GeneratorNet]
    disc: DiscriminatorNet
    config: TrainConfig
    label_names: list[str]
    round: int = 0
    g_opts: list[Adam] = field(default_factory=list)
    d_opt: Adam | None = None


def gumbel_temperature(config: TrainConfig, round_idx: int) -> float:
    """Decay from temp_start to temp_end across the adversarial rounds."""
    total = config.adversarial_rounds
    if total <= 1:
        return config.temp_end
    frac = min(round_idx, total - 1) / (total - 1)
    if config.temp_decay == "linear":
        return config.temp_start + frac * (config.temp_end - config.temp_start)
    return config.temp_start * (config.temp_end / config.temp_start) ** frac


def _pad_rows(rows, length: int) -> np.ndarray:
    out = np.full((len(rows), length), PAD, dtype=np.int64)
    for i, ids in enumerate(rows):
        ids = list(ids)[:length]
        out[i, : len(ids)] = ids
    return out


def _guard_gradients(params, what: str, round_idx: int) -> None:
    """Abort the round when gradients blow past the clipped ceiling."""
    clip_global_norm(params, 5.0)
    total = 0.0
    count = 0
    for p in params.values():
        if p.grad is not None:
            total += float(np.abs(p.grad).sum())
            count += p.grad.size
    mean_abs = total / max(count, 1)
    if not math.isfinite(mean_abs) or mean_abs > 1e3:
        raise TrainingDiverged(
            f"{what} diverged at round {round_idx}: mean |grad| = {mean_abs}"
        )


def _records_of(corpus_or_records) -> list[CorpusRecord]:
    if isinstance(corpus_or_records, LabeledCorpus):
        return list(corpus_or_records.records)
    return list(corpus_or_records)


def _micro_nll(gen: GeneratorNet, records, cap: int | None = None) -> float:
    total = 0.0
    count = 0
    records = _records_of(records)
    subset = records if cap is None else records[:cap]
    for rec in subset:
        total += gen.sequence_nll(rec.label, rec.tokens)
        count += len(rec.tokens)
    if count == 0:
        raise CorpusError("cannot evaluate NLL on an empty slice")
    return total / count


# ----------------------------------------------------------------- pretraining

def pretrain_mle(
    gen: GeneratorNet,
    corpus_slice: list[CorpusRecord],
    config: TrainConfig,
    val_slice: list[CorpusRecord] | None = None,
) -> tuple[GeneratorNet, list[float]]:
    """Teacher-forced MLE training; returns (generator, per-epoch NLL curve).

    The curve has pretrain_epochs + 1 entries: index 0 is the held-out
    NLL before any update.  val_slice defaults to the training slice
    when no held-out records are supplied.
    """
    corpus_slice = _records_of(corpus_slice)
    if not corpus_slice:
        raise CorpusError("pretrain_mle needs a nonempty training slice")
    eval_slice = _records_of(val_slice) if val_slice else corpus_slice
    opt = Adam(gen.params, lr=config.g_lr)
    curve = [_micro_nll(gen, eval_slice, cap=512)]
    by_label: dict[int, list[CorpusRecord]] = {}
    for rec in corpus_slice:
        by_label.setdefault(rec.label, []).append(rec)

    for epoch in range(config.pretrain_epochs):
        rng = rng_for(config.seed, "mle", epoch)
        batches = []
        for label in sorted(by_label):
            recs = by_label[label]
            order = rng.permutation(len(recs))
            for start in range(0, len(recs), config.batch_size):
                chunk = [recs[j] for j in order[start : start + config.batch_size]]
                batches.append((label, chunk))
        batch_order = rng.permutation(len(batches))

        for bi in batch_order:
            label, chunk = batches[bi]
            width = min(max(len(r.tokens) for r in chunk), config.max_len)
            targets = _pad_rows([r.tokens for r in chunk], width)
            inputs = np.full_like(targets, PAD)
            inputs[:, 0] = BOS
            inputs[:, 1:] = targets[:, :-1]
            mask = (targets != PAD).astype(float)
            denom = mask.sum()
            with Tape() as tape:
                logits = gen.unroll_tape(inputs, label)
                total = None
                for t, step_logits in enumerate(logits):
                    ce = ops.cross_entropy(step_logits, targets[:, t], reduce="none")
                    term = ops.tsum(ops.mul(ce, mask[:, t]))
                    total = term if total is None else ops.add(total, term)
                loss = ops.mul(total, 1.0 / denom)
                tape.backward(loss)
            opt.step()
        curve.append(_micro_nll(gen, eval_slice, cap=512))
    return gen, curve


# ------------------------------------------------------------------- penalties

def _sample_with_states(gen, category, batch, max_len, rng):
    """Multinomial sampling that keeps per-step states for MC rollouts."""
    state = gen.init_state(category, rng=rng, batch=batch)
    h0 = state[0].copy()
    ids = np.full((batch, max_len), PAD, dtype=np.int64)
    mask = np.zeros((batch, max_len))
    states = []
    prev = np.full(batch, BOS, dtype=np.int64)
    alive = np.ones(batch, dtype=bool)
    for t in range(max_len):
        logits, state = gen.step(category, state, prev)
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        u = rng.random(batch)
        tok = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
        np.clip(tok, 0, gen.vocab_size - 1, out=tok)
        tok = np.where(alive, tok, PAD)
        ids[:, t] = tok
        mask[:, t] = alive
        states.append((state[0].copy(), state[1].copy()))
        alive = alive & (tok != EOS)
        prev = tok
        if not alive.any():
            break
    return ids, mask, states, h0


def _complete_rows(gen, category, h, c, prev, start_col, prefix, max_len, rng):
    """Continue tiled rows to EOS/max_len; returns full (rows, max_len) ids."""
    rows = h.shape[0]
    out = np.full((rows, max_len), PAD, dtype=np.int64)
    out[:, :start_col] = prefix
    state = (h, c)
    alive = np.ones(rows, dtype=bool)
    for t in range(start_col, max_len):
        logits, state = gen.step(category, state, prev)
        probs = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs /= probs.sum(axis=1, keepdims=True)
        u = rng.random(rows)
        tok = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
        np.clip(tok, 0, gen.vocab_size - 1, out=tok)
        tok = np.where(alive, tok, PAD)
        out[alive, t] = tok[alive]
        alive = alive & (tok != EOS)
        prev = tok
        if not alive.any():
            break
    return out


def estimate_penalties(
    gen: GeneratorNet,
    disc: DiscriminatorNet,
    category: int,
    ids: np.ndarray,
    mask: np.ndarray,
    states: list,
    n_rollouts: int,
    rng,
) -> PenaltyRecord:
    """Per-step penalties 1 - D_category(x), Monte Carlo over rollouts.

    Intermediate positions average the penalty of n_rollouts sampled
    completions from the saved state; each sequence's final position
    scores the finished sequence directly.
    """
    if n_rollouts < 1:
        raise ConfigError("rollout count must be positive")
    batch, max_len = ids.shape
    values = np.zeros((batch, max_len))
    lengths = mask.sum(axis=1).astype(int)

    full_probs = disc.discriminate(ids)
    for b in range(batch):
        if lengths[b]:
            values[b, lengths[b] - 1] = 1.0 - full_probs[b, category]

    for t in range(max_len - 1):
        todo = np.flatnonzero((mask[:, t] == 1) & (t + 1 < lengths))
        if todo.size == 0:
            continue
        h = np.repeat(states[t][0][todo], n_rollouts, axis=0)
        c = np.repeat(states[t][1][todo], n_rollouts, axis=0)
        prev = np.repeat(ids[todo, t], n_rollouts)
        prefix = np.repeat(ids[todo, : t + 1], n_rollouts, axis=0)
        completions = _complete_rows(
            gen, category, h, c, prev, t + 1, prefix, max_len, rng
        )
        probs = disc.discriminate(completions)
        pen = 1.0 - probs[:, category]
        values[todo, t] = pen.reshape(todo.size, n_rollouts).mean(axis=1)

    np.clip(values, 0.0, 1.0, out=values)
    return PenaltyRecord(values=values, mask=mask)


# --------------------------------------------------------------------- fitness

def evaluate_fitness(
    candidate: GeneratorNet,
    disc: DiscriminatorNet,
    val_slice: list[CorpusRecord],
    n_samples: int,
    lambda_div: float = 0.05,
    seed: int = 0,
) -> FitnessResult:
    """Score a candidate: quality + lambda_div * diversity.

    f_quality is the mean own-category real-head score over fresh
    samples; f_diversity is the candidate's mean per-token NLL on the
    same fresh samples (higher = more spread out).  The val slice only
    feeds the diagnostic val_nll and never enters the fitness.
    """
    if n_samples < 32:
        raise ConfigError("fitness needs at least 32 samples")
    k = candidate.n_categories
    rng = rng_for(seed, "fitness")
    quality_total = 0.0
    quality_count = 0
    nll_total = 0.0
    token_count = 0
    for c in range(k):
        m = n_samples // k + (1 if c < n_samples % k else 0)
        if m == 0:
            continue
        res = candidate.sample_sequence(c, mode="multinomial", rng=rng, batch=m)
        probs = disc.discriminate(res.ids)
        quality_total += float(probs[:, c].sum())
        quality_count += m
        for b in range(m):
            row = res.row_ids(b)
            if row:
                nll_total += candidate.sequence_nll(c, row)
                token_count += len(row)
    f_quality = quality_total / quality_count
    f_diversity = nll_total / max(token_count, 1)
    val_records = _records_of(val_slice) if val_slice is not None else []
    val_nll = _micro_nll(candidate, val_records, cap=64) if val_records else None
    return FitnessResult(
        f_quality=f_quality,
        f_diversity=f_diversity,
        fitness=f_quality + lambda_div * f_diversity,
        lambda_div=lambda_div,
        val_nll=val_nll,
    )


# ------------------------------------------------------------------- trainers

def train_sentigan(
    generators: list[GeneratorNet],
    disc: DiscriminatorNet,
    corpus: LabeledCorpus,
    config: TrainConfig,
) -> tuple[GanBundle, list[dict]]:
    """Adversarial training with k generators and a (k+1)-way head."""
    k = len(corpus.label_names)
    if k < 2:
        raise ConfigError("SentiGAN needs at least 2 categories")
    if len(generators) != k:
        raise ConfigError(f"need one generator per category: {len(generators)} != {k}")
    if disc.mode != "sentigan" or disc.n_categories != k:
        raise ConfigError("discriminator must be sentigan-mode with matching k")
    bundle = GanBundle(
        kind="sentigan",
        generators=list(generators),
        disc=disc,
        config=config,
        label_names=list(corpus.label_names),
        g_opts=[Adam(g.params, lr=config.g_lr) for g in generators],
        d_opt=Adam(disc.params, lr=config.d_lr),
    )
    history = train_rounds(bundle, corpus, config.adversarial_rounds)
    return bundle, history


def train_catgan(
    gen: GeneratorNet,
    disc: DiscriminatorNet,
    corpus: LabeledCorpus,
    config: TrainConfig,
) -> tuple[GanBundle, list[dict]]:
    """Adversarial training with one conditional generator and k heads."""
    k = len(corpus.label_names)
    if gen.conditioning != "embedding":
        raise ConfigError("CatGAN needs a category-embedding generator")
    if disc.mode != "catgan" or disc.n_categories != k:
        raise ConfigError("discriminator must be catgan-mode with matching k")
    bundle = GanBundle(
        kind="catgan",
        generators=[gen],
        disc=disc,
        config=config,
        label_names=list(corpus.label_names),
        g_opts=[Adam(gen.params, lr=config.g_lr)],
        d_opt=Adam(disc.params, lr=config.d_lr),
    )
    history = train_rounds(bundle, corpus, config.adversarial_rounds)
    return bundle, history


def train_rounds(bundle: GanBundle, corpus: LabeledCorpus, n_rounds: int) -> list[dict]:
    """Run n_rounds adversarial rounds from the bundle's current round."""
    train = [r for r in corpus.records if r.split == "train"]
    val = [r for r in corpus.records if r.split == "val"]
    by_cat: dict[int, list[CorpusRecord]] = {i: [] for i in range(len(bundle.label_names))}
    for rec in train:
        by_cat[rec.label].append(rec)
    for cat, recs in by_cat.items():
        if not recs:
            raise CorpusError(
                f"category {bundle.label_names[cat]!r} has no training records"
            )

    history = []
    for _ in range(n_rounds):
        r = bundle.round
        if bundle.kind == "sentigan":
            row = _sentigan_round(bundle, train, by_cat, r)
        else:
            row = _catgan_round(bundle, by_cat, val, r)
        if (r + 1) % bundle.config.eval_every == 0 or r + 1 == bundle.config.adversarial_rounds:
            row.update(_metric_snapshot(bundle, by_cat, val, r))
        history.append(row)
        bundle.round = r + 1
    return history


def _sentigan_round(bundle, train, by_cat, r) -> dict:
    cfg = bundle.config
    disc = bundle.disc
    k = len(bundle.label_names)
    batch = cfg.batch_size
    penalty_means = []
    g_losses = []

    for i, gen in enumerate(bundle.generators):
        rng_sample = rng_for(cfg.seed, "sg", r, "sample", i)
        ids, mask, states, h0 = _sample_with_states(
            gen, i, batch, cfg.max_len, rng_sample
        )
        record = estimate_penalties(
            gen, disc, i, ids, mask, states, cfg.rollout_count,
            rng_for(cfg.seed, "sg", r, "mc", i),
        )
        penalty_means.append(record.mean())

        steps = len(states)
        inputs = np.full((batch, steps), PAD, dtype=np.int64)
        inputs[:, 0] = BOS
        inputs[:, 1:] = ids[:, : steps - 1]
        with Tape() as tape:
            logits = gen.unroll_tape(inputs, i, h0=h0)
            total = None
            for t, step_logits in enumerate(logits):
                weights = record.values[:, t] * mask[:, t]
                ce = ops.cross_entropy(step_logits, ids[:, t], reduce="none")
                term = ops.tsum(ops.mul(ce, weights))
                total = term if total is None else ops.add(total, term)
            loss = ops.mul(total, -1.0 / batch)
            tape.backward(loss)
        _guard_gradients(gen.params, f"generator {i}", r)
        bundle.g_opts[i].step()
        g_losses.append(float(loss.data))

    rng_d = rng_for(cfg.seed, "sg", r, "disc")
    idx = rng_d.integers(0, len(train), size=batch)
    real_rows = [train[j].tokens for j in idx]
    real_targets = [train[j].label for j in idx]
    fake_rows = []
    per_gen = max(batch // k, 1)
    for i, gen in enumerate(bundle.generators):
        res = gen.sample_sequence(
            i, max_len=cfg.max_len, mode="multinomial",
            rng=rng_for(cfg.seed, "sg", r, "dfake", i), batch=per_gen,
        )
        fake_rows.extend(res.row_ids(b) for b in range(per_gen))
    all_ids = _pad_rows(real_rows + fake_rows, cfg.max_len)
    targets = np.array(real_targets + [k] * len(fake_rows))
    with Tape() as tape:
        d_logits = disc.forward_tape(all_ids)
        d_loss = ops.cross_entropy(d_logits, targets)
        tape.backward(d_loss)
    _guard_gradients(disc.params, "discriminator", r)
    bundle.d_opt.step()

    return {
        "round": r,
        "d_loss": float(d_loss.data),
        "g_loss": float(np.mean(g_losses)),
        "penalty_mean": float(np.mean(penalty_means)),
    }


def _mutation_loss(mutation, fake_logit, real_logit_values):
    """Generator-side adversarial loss on one category head."""
    if mutation == "nonsat":
        return ops.mean(ops.softplus(ops.mul(fake_logit, -1.0)))
    if mutation == "lsgan":
        gap = ops.sub(ops.sigmoid(fake_logit), 1.0)
        return ops.mean(ops.mul(gap, gap))
    if mutation == "ragan":
        mean_real = float(real_logit_values.mean())
        mean_fake = ops.mean(fake_logit)
        fake_side = ops.mean(ops.softplus(ops.sub(mean_real, fake_logit)))
        real_side = ops.mean(ops.softplus(ops.sub(real_logit_values, mean_fake)))
        return ops.add(fake_side, real_side)
    raise ConfigError(f"unknown mutation {mutation!r}")


def _catgan_round(bundle, by_cat, val, r) -> dict:
    cfg = bundle.config
    disc = bundle.disc
    k = len(bundle.label_names)
    parent = bundle.generators[0]
    parent_opt = bundle.g_opts[0]
    tau = gumbel_temperature(cfg, r)
    per_cat = max(cfg.batch_size // k, 1)

    children: list[EvolutionCandidate] = []
    for mutation in cfg.mutations:
        child = parent.clone()
        child_opt = Adam(child.params, lr=cfg.g_lr)
        child_opt.restore_state(parent_opt.clone_state())
        with Tape() as tape:
            total = None
            for c in range(k):
                res = child.sample_sequence(
                    c, max_len=cfg.max_len, mode="gumbel_st", temperature=tau,
                    rng=rng_for(cfg.seed, "cg", r, mutation, "sample", c),
                    batch=per_cat,
                )
                head_logits = disc.forward_tape(res.soft)
                fake_logit = ops.pick(head_logits, np.full(per_cat, c))
                real_values = None
                if mutation == "ragan":
                    rng_real = rng_for(cfg.seed, "cg", r, mutation, "real", c)
                    recs = by_cat[c]
                    picki = rng_real.integers(0, len(recs), size=per_cat)
                    real_ids = _pad_rows([recs[j].tokens for j in picki], cfg.max_len)
                    real_values = disc.logits(real_ids)[:, c]
                term = _mutation_loss(mutation, fake_logit, real_values)
                total = term if total is None else ops.add(total, term)
            loss = ops.mul(total, 1.0 / k)
            tape.backward(loss)
        _guard_gradients(child.params, f"mutation {mutation}", r)
        child_opt.step()
        result = evaluate_fitness(
            child, disc, val, cfg.fitness_samples, cfg.lambda_div,
            seed=derive_seed(cfg.seed, "cg", r, mutation, "fitness"),
        )
        children.append(
            EvolutionCandidate(
                mutation=mutation, gen=child,
                opt_state=child_opt.clone_state(), result=result,
            )
        )

    best = children[0]
    for cand in children[1:]:
        if cand.result.fitness > best.result.fitness:
            best = cand
    bundle.generators[0] = best.gen
    bundle.g_opts[0] = Adam(best.gen.params, lr=cfg.g_lr)
    bundle.g_opts[0].restore_state(best.opt_state)
    parent = best.gen

    rows = []
    signs = []
    head_cats = []
    for c in range(k):
        rng_real = rng_for(cfg.seed, "cg", r, "dreal", c)
        recs = by_cat[c]
        picki = rng_real.integers(0, len(recs), size=per_cat)
        rows.extend(recs[j].tokens for j in picki)
        signs.extend([1.0] * per_cat)
        head_cats.extend([c] * per_cat)
        res = parent.sample_sequence(
            c, max_len=cfg.max_len, mode="multinomial",
            rng=rng_for(cfg.seed, "cg", r, "dfake", c), batch=per_cat,
        )
        rows.extend(res.row_ids(b) for b in range(per_cat))
        signs.extend([-1.0] * per_cat)
        head_cats.extend([c] * per_cat)
    all_ids = _pad_rows(rows, cfg.max_len)
    with Tape() as tape:
        head_logits = disc.forward_tape(all_ids)
        picked = ops.pick(head_logits, np.array(head_cats))
        d_loss = ops.mean(ops.softplus(ops.mul(picked, -np.array(signs))))
        tape.backward(d_loss)
    _guard_gradients(disc.params, "discriminator", r)
    bundle.d_opt.step()

    return {
        "round": r,
        "temperature": tau,
        "d_loss": float(d_loss.data),
        "mutation": best.mutation,
        "f_quality": best.result.f_quality,
        "f_diversity": best.result.f_diversity,
        "fitness": best.result.fitness,
        "children": [
            {
                "mutation": c.mutation,
                "f_quality": c.result.f_quality,
                "f_diversity": c.result.f_diversity,
                "fitness": c.result.fitness,
            }
            for c in children
        ],
    }


def _metric_snapshot(bundle, by_cat, val, r) -> dict:
    """BLEU-2 and NLL metrics on the current generator(s)."""
    cfg = bundle.config
    k = len(bundle.label_names)
    bleu_scores = []
    nll_gen_vals = []
    nll_div_vals = []
    for c in range(k):
        gen = bundle.generators[c if bundle.kind == "sentigan" else 0]
        refs = [tuple(rec.tokens) for rec in by_cat[c][:200]]
        res = gen.sample_sequence(
            c, max_len=cfg.max_len, mode="multinomial",
            rng=rng_for(cfg.seed, "eval", r, "bleu", c), batch=32,
        )
        hyps = [tuple(res.row_ids(b)) for b in range(32) if res.row_ids(b)]
        if refs and hyps:
            bleu_scores.append(bleu(refs, hyps, BleuConfig(max_n=2)))
        val_c = [rec for rec in val if rec.label == c][:64]
        if val_c:
            nll_gen_vals.append(_micro_nll(gen, val_c))
        rng_div = rng_for(cfg.seed, "eval", r, "div", c)
        total = 0.0
        count = 0
        for _ in range(100):
            row = gen.sample_sequence(c, mode="multinomial", rng=rng_div).row_ids(0)
            if row:
                total += gen.sequence_nll(c, row)
                count += len(row)
        if count:
            nll_div_vals.append(total / count)
    out = {}
    if bleu_scores:
        out["bleu2"] = float(np.mean(bleu_scores))
    if nll_gen_vals:
        out["nll_gen"] = float(np.mean(nll_gen_vals))
    if nll_div_vals:
        out["nll_div"] = float(np.mean(nll_div_vals))
    return out


# ----------------------------------------------------------------- persistence

def write_history_csv(history: list[dict], path: str | Path) -> None:
    """Write the per-round history as CSV with a fixed column set."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_COLUMNS, extrasaction="ignore")
        writer.writeheader()
        for row in history:
            writer.writerow({k: row.get(k, "") for k in HISTORY_COLUMNS})


def _net_meta(gen: GeneratorNet) -> dict:
    return {
        "vocab_size": gen.vocab_size,
        "n_categories": gen.n_categories,
        "d_emb": gen.d_emb,
        "d_h": gen.d_h,
        "d_cat": gen.d_cat,
        "conditioning": gen.conditioning,
        "noise_init": gen.noise_init,
        "max_len": gen.max_len,
    }


def save_bundle(bundle: GanBundle, path: str | Path) -> None:
    """Checkpoint a bundle: parameters, optimizer state, and metadata."""
    meta = {
        "kind": bundle.kind,
        "round": bundle.round,
        "label_names": bundle.label_names,
        "config": {**asdict(bundle.config), "mutations": list(bundle.config.mutations)},
        "generators": [_net_meta(g) for g in bundle.generators],
        "disc": {
            "vocab_size": bundle.disc.vocab_size,
            "n_categories": bundle.disc.n_categories,
            "mode": bundle.disc.mode,
            "d_emb": bundle.disc.d_emb,
            "n_filters": bundle.disc.n_filters,
            "filter_widths": list(bundle.disc.filter_widths),
        },
    }
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    arrays: dict[str, np.ndarray] = {
        "__meta_json__": np.frombuffer(blob, dtype=np.uint8).astype(np.float64)
    }
    for i, gen in enumerate(bundle.generators):
        for name, arr in gen.param_arrays().items():
            arrays[f"g{i}.{name}"] = arr
        arrays.update(bundle.g_opts[i].state_arrays(prefix=f"opt_g{i}."))
    for name, arr in bundle.disc.param_arrays().items():
        arrays[f"d.{name}"] = arr
    arrays.update(bundle.d_opt.state_arrays(prefix="opt_d."))
    save_arrays(path, arrays)


def load_bundle(path: str | Path) -> GanBundle:
    """Rebuild a bundle from a checkpoint, bit-exact."""
    arrays = load_arrays(path)
    meta = json.loads(bytes(arrays["__meta_json__"].astype(np.uint8)))
    cfg_dict = dict(meta["config"])
    cfg_dict["mutations"] = tuple(cfg_dict["mutations"])
    config = TrainConfig(**cfg_dict)

    generators = []
    g_opts = []
    for i, gmeta in enumerate(meta["generators"]):
        gen = GeneratorNet(
            vocab_size=gmeta["vocab_size"],
            n_categories=gmeta["n_categories"],
            d_emb=gmeta["d_emb"],
            d_h=gmeta["d_h"],
            d_cat=max(gmeta["d_cat"], 1),
            conditioning=gmeta["conditioning"],
            noise_init=gmeta["noise_init"],
            max_len=gmeta["max_len"],
        )
        gen.load_param_arrays(
            {name: arrays[f"g{i}.{name}"] for name in gen.params}
        )
        opt = Adam(gen.params, lr=config.g_lr)
        opt.load_state_arrays(arrays, prefix=f"opt_g{i}.")
        generators.append(gen)
        g_opts.append(opt)

    dmeta = meta["disc"]
    disc = DiscriminatorNet(
        vocab_size=dmeta["vocab_size"],
        n_categories=dmeta["n_categories"],
        mode=dmeta["mode"],
        d_emb=dmeta["d_emb"],
        n_filters=dmeta["n_filters"],
        filter_widths=tuple(dmeta["filter_widths"]),
    )
    disc.load_param_arrays({name: arrays[f"d.{name}"] for name in disc.params})
    d_opt = Adam(disc.params, lr=config.d_lr)
    d_opt.load_state_arrays(arrays, prefix="opt_d.")

    return GanBundle(
        kind=meta["kind"],
        generators=generators,
        disc=disc,
        config=config,
        label_names=list(meta["label_names"]),
        round=int(meta["round"]),
        g_opts=g_opts,
        d_opt=d_opt,
    )

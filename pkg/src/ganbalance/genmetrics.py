"""Quality and diversity metrics for generated text.

Corpus BLEU against a shared reference set, plus two negative
log-likelihood metrics: nll_gen (how well the generator covers real
held-out text) and nll_div (how peaked the generator is on its own
samples).  Generators are duck-typed: they need ``sequence_nll(ids) ->
(total nats, token count)`` and, for nll_div, ``sample_sequence(rng) ->
id list``.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigError
from .seeding import rng_for

__all__ = ["BleuConfig", "bleu", "modified_precisions", "nll_gen", "nll_div"]


@dataclass(frozen=True)
class BleuConfig:
    """BLEU-n settings: order, zero-precision floor, brevity penalty."""

    max_n: int = 4
    epsilon: float = 1e-9
    brevity_penalty: bool = True

    def __post_init__(self) -> None:
        if self.max_n < 1:
            raise ConfigError("BLEU needs max_n >= 1")


def _ngrams(seq: Sequence, n: int) -> Counter:
    return Counter(tuple(seq[i : i + n]) for i in range(len(seq) - n + 1))


def modified_precisions(
    references: Sequence[Sequence],
    hypotheses: Sequence[Sequence],
    config: BleuConfig = BleuConfig(),
) -> list[tuple[int, int]]:
    """Corpus-level clipped n-gram counts, one (clipped, total) per order.

    Clip counts come from the merged per-gram maximum over the shared
    reference set, computed once rather than per hypothesis.
    """
    if not hypotheses:
        raise ValueError("bleu needs at least one hypothesis")
    if not references:
        raise ValueError("bleu needs at least one reference")
    out = []
    for n in range(1, config.max_n + 1):
        ceiling: Counter = Counter()
        for ref in references:
            for gram, cnt in _ngrams(ref, n).items():
                if cnt > ceiling[gram]:
                    ceiling[gram] = cnt
        clipped = 0
        total = 0
        for hyp in hypotheses:
            counts = _ngrams(hyp, n)
            total += sum(counts.values())
            clipped += sum(min(cnt, ceiling[gram]) for gram, cnt in counts.items())
        out.append((clipped, total))
    return out


def bleu(
    references: Sequence[Sequence],
    hypotheses: Sequence[Sequence],
    config: BleuConfig = BleuConfig(),
) -> float:
    """Corpus BLEU of hypotheses against a shared reference set.

    Geometric mean of the modified n-gram precisions (zero counts floor
    at epsilon) times the brevity penalty exp(min(0, 1 - r/c)), where r
    sums each hypothesis's closest reference length (ties toward the
    shorter reference) and c sums hypothesis lengths.
    """
    log_sum = 0.0
    for clipped, total in modified_precisions(references, hypotheses, config):
        p = clipped / total if clipped and total else config.epsilon
        log_sum += math.log(p)
    geo = math.exp(log_sum / config.max_n)
    if not config.brevity_penalty:
        return geo
    c = sum(len(h) for h in hypotheses)
    if c == 0:
        return 0.0
    ref_lens = sorted(len(r) for r in references)
    r = sum(
        min(ref_lens, key=lambda L: (abs(L - len(h)), L)) for h in hypotheses
    )
    return math.exp(min(0.0, 1.0 - r / c)) * geo


def nll_gen(gen, sequences: Sequence[Sequence[int]]) -> float:
    """Mean per-token NLL (nats) of real sequences under the generator."""
    if not sequences:
        raise ValueError("nll_gen needs a nonempty evaluation slice")
    total = 0.0
    count = 0
    for ids in sequences:
        nll, n = gen.sequence_nll(ids)
        total += nll
        count += n
    return total / count


def nll_div(gen, n_samples: int = 200, seed: int = 0) -> float:
    """Mean per-token NLL of the generator on its own fresh samples.

    Values near zero mean the generator is peaked on a few sequences;
    values near log(vocab size) mean close to uniform.
    """
    if n_samples < 100:
        raise ConfigError("nll_div needs at least 100 samples to be stable")
    rng = rng_for(seed, "nll-div")
    total = 0.0
    count = 0
    for _ in range(n_samples):
        ids = gen.sample_sequence(rng)
        nll, n = gen.sequence_nll(ids)
        total += nll
        count += n
    return total / count

"""Independent oracles shared by the test suite.

Everything here is deliberately written against the public behavior only:
central finite differences for gradients, counter-based BLEU, a brute-force
confusion matrix, hand enumeration helpers. None of it imports internals
from the modules it checks.
"""

import math
from collections import Counter

import numpy as np

from ganbalance.numerics import Tape, Tensor, backward, ops


def scalarize(outputs, probes):
    """Reduce op outputs to one scalar: sum of sum(out * probe)."""
    if not isinstance(outputs, (tuple, list)):
        outputs = (outputs,)
    total = None
    for out, probe in zip(outputs, probes):
        term = ops.tsum(ops.mul(out, Tensor(probe)))
        total = term if total is None else ops.add(total, term)
    return total


def gradcheck(build, arrays, rng, n_coords=5, h=1e-5, tol=1e-4):
    """Compare tape gradients against central finite differences.

    Args:
        build: callable taking Tensors (one per array) and returning the op
            output (Tensor or tuple of Tensors).
        arrays: list of float64 input arrays; every one is checked.
        rng: Generator used to pick probe vectors and coordinates.
        n_coords: coordinates sampled per input.
        h: central difference step.
        tol: relative error bound per coordinate.

    Returns:
        (ok_fraction, max_rel_err) over all sampled coordinates.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    with Tape():
        raw = build(*tensors)
        outs = raw if isinstance(raw, (tuple, list)) else (raw,)
        probes = [rng.normal(size=o.data.shape) for o in outs]
        loss = scalarize(raw, probes)
    backward(loss)
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data)
                for t in tensors]

    def value_at(idx, coord, delta):
        trial = [a.copy() for a in arrays]
        trial[idx].flat[coord] += delta
        out = build(*[Tensor(a) for a in trial])
        outs2 = out if isinstance(out, (tuple, list)) else (out,)
        return sum(float(np.sum(o.data * p)) for o, p in zip(outs2, probes))

    checked = 0
    good = 0
    worst = 0.0
    for idx, arr in enumerate(arrays):
        size = arr.size
        take = min(n_coords, size)
        coords = rng.choice(size, size=take, replace=False)
        for coord in coords:
            up = value_at(idx, coord, h)
            down = value_at(idx, coord, -h)
            numeric = (up - down) / (2.0 * h)
            a = float(analytic[idx].flat[coord])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-6)
            worst = max(worst, rel)
            checked += 1
            if rel <= tol:
                good += 1
    return good / max(checked, 1), worst


def bleu_brute(references, hypotheses, max_n=4, eps=1e-9):
    """Corpus BLEU computed the slow, obvious way with Counters."""
    if not hypotheses:
        raise ValueError("no hypotheses")
    if not references:
        raise ValueError("no references")
    log_parts = []
    for n in range(1, max_n + 1):
        clipped = 0
        total = 0
        for hyp in hypotheses:
            hyp_counts = Counter(tuple(hyp[i : i + n]) for i in range(len(hyp) - n + 1))
            best = Counter()
            for ref in references:
                ref_counts = Counter(
                    tuple(ref[i : i + n]) for i in range(len(ref) - n + 1)
                )
                for gram, cnt in ref_counts.items():
                    if cnt > best[gram]:
                        best[gram] = cnt
            for gram, cnt in hyp_counts.items():
                clipped += min(cnt, best.get(gram, 0))
                total += cnt
        if total == 0 or clipped == 0:
            p_n = eps
        else:
            p_n = clipped / total
        log_parts.append(math.log(p_n))
    geo = math.exp(sum(log_parts) / max_n)
    c = sum(len(h) for h in hypotheses)
    r = 0
    for hyp in hypotheses:
        lens = sorted(len(ref) for ref in references)
        r += min(lens, key=lambda L: (abs(L - len(hyp)), L))
    if c == 0:
        return 0.0
    bp = math.exp(min(0.0, 1.0 - r / c))
    return bp * geo


def nb_brute(features, labels, alpha, queries):
    """Naive Bayes posteriors by explicit log-space enumeration.

    Works in pure python floats: per-class priors count/n, per-term
    likelihoods (count + alpha) / (total + alpha * V), query scored as
    log prior + sum of feature * log likelihood, normalized by
    log-sum-exp. Returns an (m, k) array of posteriors.
    """
    features = [list(map(float, row)) for row in features]
    labels = list(labels)
    k = max(labels) + 1
    n = len(features)
    v = len(features[0])
    out = []
    log_priors = []
    log_liks = []
    for c in range(k):
        rows = [features[i] for i in range(n) if labels[i] == c]
        log_priors.append(math.log(len(rows) / n) if rows else -math.inf)
        counts = [sum(row[j] for row in rows) for j in range(v)]
        total = sum(counts)
        log_liks.append(
            [math.log((counts[j] + alpha) / (total + alpha * v)) for j in range(v)]
        )
    for q in queries:
        scores = []
        for c in range(k):
            s = log_priors[c]
            for j in range(v):
                s += q[j] * log_liks[c][j]
            scores.append(s)
        top = max(scores)
        exps = [math.exp(s - top) for s in scores]
        z = sum(exps)
        out.append([e / z for e in exps])
    return np.array(out)


def confusion_brute(y_true, y_pred, k):
    """Confusion matrix and per-class P/R/F1 by direct counting."""
    mat = [[0] * k for _ in range(k)]
    for t, p in zip(y_true, y_pred):
        mat[t][p] += 1
    precision, recall, f1 = [], [], []
    for c in range(k):
        tp = mat[c][c]
        fp = sum(mat[r][c] for r in range(k)) - tp
        fn = sum(mat[c]) - tp
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(f)
    acc = sum(mat[c][c] for c in range(k)) / max(len(y_true), 1)
    return {
        "confusion": mat,
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "accuracy": acc,
        "macro_f1": sum(f1) / k,
    }

def exhaustive_penalty(gen, disc, category, prefix, state_row, prev, max_len,
                       eos=2, pad=0):
    """Expected 1 - D_category over all completions, by full enumeration.

    Recurses over every continuation of the prefix until EOS or max_len,
    weighting each branch by the generator's own softmax probabilities.
    Feasible only for tiny vocabularies and lengths.
    """
    t = len(prefix)
    if prev == eos or t == max_len:
        row = np.full((1, max_len), pad, dtype=np.int64)
        row[0, :t] = prefix
        return float(1.0 - disc.discriminate(row)[0, category])
    h, c = state_row
    logits, (h2, c2) = gen.step(
        category, (h[None, :], c[None, :]), np.array([prev], dtype=np.int64)
    )
    z = logits[0] - logits[0].max()
    probs = np.exp(z) / np.exp(z).sum()
    total = 0.0
    for tok in range(gen.vocab_size):
        total += probs[tok] * exhaustive_penalty(
            gen, disc, category, prefix + [tok], (h2[0], c2[0]), tok, max_len,
            eos=eos, pad=pad,
        )
    return total

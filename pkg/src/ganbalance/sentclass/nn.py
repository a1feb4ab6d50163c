"""Neural classifiers: RNN, GRU, BiLSTM, and a multi-width CNN.

All four read token ids through a learned embedding table and end in a
dense softmax over the categories.  The recurrent models classify from
the final hidden state (both directions' final states for the BiLSTM)
and train on length-bucketed batches so no masking is needed; the CNN
pads every sequence to a fixed length and max-pools over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..corpus import PAD, CorpusRecord, LabeledCorpus
from ..errors import ConfigError, CorpusError, HygieneError
from ..numerics import Adam, Tape, Tensor, ops
from ..seeding import rng_for
from .metrics import metrics_from_predictions

__all__ = ["NNHyper", "NNModel", "train_nn", "NN_ARCHS"]

NN_ARCHS = ("rnn", "gru", "bilstm", "cnn")
INIT_SCALE = 0.08
CNN_WIDTHS = (2, 3, 4)


@dataclass(frozen=True)
class NNHyper:
    """Hyperparameters shared by the neural classifiers."""

    d_emb: int = 32
    d_h: int = 64
    n_filters: int = 32
    lr: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 20
    patience: int = 3
    max_len: int = 32
    seed: int = 0

    def __post_init__(self) -> None:
        for name in (
            "d_emb", "d_h", "n_filters", "batch_size",
            "max_epochs", "patience", "max_len",
        ):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


class NNModel:
    """One neural classifier: parameter store plus forward graph."""

    def __init__(
        self,
        arch: str,
        vocab_size: int,
        n_categories: int,
        hyper: NNHyper = NNHyper(),
    ):
        if arch not in NN_ARCHS:
            raise ConfigError(f"unknown architecture {arch!r}")
        if n_categories < 2:
            raise ConfigError("classifier needs at least 2 categories")
        if vocab_size < 4:
            raise ConfigError("vocab_size must cover the reserved ids")
        self.arch = arch
        self.vocab_size = vocab_size
        self.n_categories = n_categories
        self.hyper = hyper
        rng = rng_for(hyper.seed, "classifier-init", arch)

        def p(name, *shape):
            return Tensor(
                rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape),
                requires_grad=True,
                name=name,
            )

        e, h, k = hyper.d_emb, hyper.d_h, n_categories
        self.params: dict[str, Tensor] = {"emb": p("emb", vocab_size, e)}
        if arch == "rnn":
            self.params.update(
                wx=p("wx", e, h), wh=p("wh", h, h), b=p("b", h),
                wout=p("wout", h, k), bout=p("bout", k),
            )
        elif arch == "gru":
            for gate in ("z", "r", "n"):
                self.params[f"w{gate}"] = p(f"w{gate}", e, h)
                self.params[f"u{gate}"] = p(f"u{gate}", h, h)
                self.params[f"b{gate}"] = p(f"b{gate}", h)
            self.params.update(wout=p("wout", h, k), bout=p("bout", k))
        elif arch == "bilstm":
            for tag in ("f", "b"):
                self.params[f"wx{tag}"] = p(f"wx{tag}", e, 4 * h)
                self.params[f"wh{tag}"] = p(f"wh{tag}", h, 4 * h)
                self.params[f"bias{tag}"] = p(f"bias{tag}", 4 * h)
            self.params.update(wout=p("wout", 2 * h, k), bout=p("bout", k))
        else:
            f = hyper.n_filters
            for w in CNN_WIDTHS:
                self.params[f"conv{w}_w"] = p(f"conv{w}_w", w, e, f)
                self.params[f"conv{w}_b"] = p(f"conv{w}_b", f)
            self.params.update(
                wout=p("wout", len(CNN_WIDTHS) * f, k), bout=p("bout", k)
            )

    # ---------------------------------------------------------------- forward

    def _recurrent_final_state(self, ids: np.ndarray):
        b, t = ids.shape
        h_dim = self.hyper.d_h
        pr = self.params
        if self.arch == "bilstm":
            finals = []
            for tag, order in (("f", range(t)), ("b", range(t - 1, -1, -1))):
                h = Tensor(np.zeros((b, h_dim)))
                c = Tensor(np.zeros((b, h_dim)))
                for step in order:
                    x = ops.embedding_lookup(pr["emb"], ids[:, step])
                    gates = ops.add(
                        ops.add(
                            ops.matmul(x, pr[f"wx{tag}"]),
                            ops.matmul(h, pr[f"wh{tag}"]),
                        ),
                        pr[f"bias{tag}"],
                    )
                    h, c = ops.lstm_gates(gates, c)
                finals.append(h)
            return ops.concat(finals, axis=1)
        h = Tensor(np.zeros((b, h_dim)))
        for step in range(t):
            x = ops.embedding_lookup(pr["emb"], ids[:, step])
            if self.arch == "rnn":
                h = ops.tanh(
                    ops.add(
                        ops.add(ops.matmul(x, pr["wx"]), ops.matmul(h, pr["wh"])),
                        pr["b"],
                    )
                )
            else:
                z = ops.sigmoid(
                    ops.add(
                        ops.add(ops.matmul(x, pr["wz"]), ops.matmul(h, pr["uz"])),
                        pr["bz"],
                    )
                )
                r = ops.sigmoid(
                    ops.add(
                        ops.add(ops.matmul(x, pr["wr"]), ops.matmul(h, pr["ur"])),
                        pr["br"],
                    )
                )
                n = ops.tanh(
                    ops.add(
                        ops.add(
                            ops.matmul(x, pr["wn"]),
                            ops.matmul(ops.mul(r, h), pr["un"]),
                        ),
                        pr["bn"],
                    )
                )
                h = ops.add(ops.mul(ops.sub(1.0, z), n), ops.mul(z, h))
        return h

    def _cnn_features(self, ids: np.ndarray):
        pr = self.params
        x = ops.embedding_lookup(pr["emb"], ids)
        pooled = []
        for w in CNN_WIDTHS:
            conv = ops.add(ops.conv1d(x, pr[f"conv{w}_w"]), pr[f"conv{w}_b"])
            pooled.append(ops.max_pool_over_time(ops.relu(conv)))
        return ops.concat(pooled, axis=1)

    def forward(self, ids: np.ndarray) -> Tensor:
        """Category logits for a (B, T) id batch."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2 or ids.shape[1] < 1:
            raise ConfigError(f"need a (B, T) id batch, got {ids.shape}")
        if self.arch == "cnn":
            feats = self._cnn_features(self._pad_for_cnn(ids))
        else:
            feats = self._recurrent_final_state(ids)
        return ops.add(ops.matmul(feats, self.params["wout"]), self.params["bout"])

    def _pad_for_cnn(self, ids: np.ndarray) -> np.ndarray:
        width = max(self.hyper.max_len, max(CNN_WIDTHS))
        out = np.full((ids.shape[0], width), PAD, dtype=np.int64)
        keep = min(ids.shape[1], width)
        out[:, :keep] = ids[:, :keep]
        return out

    # ------------------------------------------------------------- inference

    def predict(self, records) -> np.ndarray:
        records = _records_of(records)
        out = np.empty(len(records), dtype=np.int64)
        for rows, positions in _length_buckets(
            records, self.hyper.batch_size, self.hyper.max_len
        ):
            logits = self.forward(rows)
            out[positions] = logits.data.argmax(axis=1)
        return out

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self.params.items()}

    def load_param_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            tensor.data = np.asarray(arrays[name]).copy()


def _records_of(records) -> list[CorpusRecord]:
    if isinstance(records, LabeledCorpus):
        return list(records.records)
    return list(records)


def _length_buckets(records, batch_size, max_len):
    """Same-length batches of (ids matrix, original positions)."""
    by_len: dict[int, list[int]] = {}
    for i, rec in enumerate(records):
        by_len.setdefault(min(len(rec.tokens), max_len) or 1, []).append(i)
    for length in sorted(by_len):
        idx = by_len[length]
        for start in range(0, len(idx), batch_size):
            chunk = idx[start : start + batch_size]
            rows = np.full((len(chunk), length), PAD, dtype=np.int64)
            for j, i in enumerate(chunk):
                ids = records[i].tokens[:length]
                rows[j, : len(ids)] = ids
            yield rows, np.array(chunk)


def train_nn(
    arch: str,
    corpus_train,
    corpus_val,
    hyper: NNHyper = NNHyper(),
    vocab_size: int | None = None,
) -> tuple[NNModel, list[dict]]:
    """Adam + cross-entropy with early stopping on validation macro-F1.

    Returns the snapshot from the best validation epoch and the
    learning curve (per-epoch train loss and val macro-F1).  Training
    may contain synthetic records; validation must not.
    """
    train = _records_of(corpus_train)
    val = _records_of(corpus_val)
    if not train or not val:
        raise CorpusError("train_nn needs nonempty train and val slices")
    for rec in val:
        if rec.provenance == "synthetic":
            raise HygieneError("validation slice contains synthetic records")
    if vocab_size is None:
        vocab_size = max(max(r.tokens, default=0) for r in train + val) + 1
    k = max(r.label for r in train + val) + 1
    if isinstance(corpus_train, LabeledCorpus):
        k = len(corpus_train.label_names)
    model = NNModel(arch, vocab_size, k, hyper)
    opt = Adam(model.params, lr=hyper.lr)
    truth = np.array([r.label for r in val])

    best_f1 = -1.0
    best_params = model.param_arrays()
    since_best = 0
    curve: list[dict] = []
    for epoch in range(hyper.max_epochs):
        order = rng_for(hyper.seed, "classifier", arch, epoch).permutation(len(train))
        shuffled = [train[i] for i in order]
        losses = []
        for rows, positions in _length_buckets(
            shuffled, hyper.batch_size, hyper.max_len
        ):
            labels = np.array([shuffled[i].label for i in positions])
            with Tape() as tape:
                loss = ops.cross_entropy(model.forward(rows), labels)
                tape.backward(loss)
            opt.step()
            losses.append(float(loss.data))
        preds = model.predict(val)
        val_f1 = metrics_from_predictions(truth, preds, k).macro_f1
        curve.append(
            {
                "epoch": epoch,
                "train_loss": float(np.mean(losses)),
                "val_macro_f1": val_f1,
            }
        )
        if val_f1 > best_f1 + 1e-12:
            best_f1 = val_f1
            best_params = model.param_arrays()
            since_best = 0
        else:
            since_best += 1
            if since_best >= hyper.patience:
                break
    model.load_param_arrays(best_params)
    return model, curve

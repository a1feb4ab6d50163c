"""Generator and discriminator networks for adversarial text training.

The generator is an autoregressive LSTM over token embeddings with two
conditioning modes: "none" (one independent instance per category, with
an optional noise-drawn initial hidden state) and "embedding" (a single
shared network with a category embedding concatenated to every input).
The discriminator is a multi-width CNN over embeddings with either one
(k+1)-way softmax head or k parallel real/fake sigmoid heads.

Sampling and scoring run on a plain-numpy fast path that calls the same
kernels as the tape operators, so a sampled sequence scores bitwise
identically when replayed through the training graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import BOS, EOS, PAD
from .errors import GanBalanceError, ShapeError
from .numerics import Tensor, ops
from .numerics.kernels import lstm_gates_forward, maxpool_time_forward, conv1d_forward
from .numerics.ops import np_sigmoid, np_softmax
from .seeding import rng_for

__all__ = [
    "GeneratorNet",
    "DiscriminatorNet",
    "SampleResult",
    "CategoryBound",
    "generate_step",
    "sample_sequence",
    "sequence_nll",
    "rollout",
    "discriminate",
]

INIT_SCALE = 0.08  # uniform(-0.08, 0.08) for every parameter


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("an rng or integer seed is required")
    return np.random.default_rng(int(rng))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _one_hot(ids: np.ndarray, vocab_size: int) -> np.ndarray:
    ids = np.asarray(ids)
    out = np.zeros(ids.shape + (vocab_size,))
    np.put_along_axis(out, ids[..., None], 1.0, axis=-1)
    return out


@dataclass
class SampleResult:
    """A batch of sampled sequences.

    ids is (B, T) with PAD after each row's EOS; mask is 1.0 on emitted
    positions (EOS included); logps holds the model log-probability of
    each emitted token under the untempered distribution; soft is the
    (B, T, V) straight-through tensor in gumbel mode, else None.
    """

    ids: np.ndarray
    mask: np.ndarray
    logps: np.ndarray
    soft: Tensor | None = None

    @property
    def lengths(self) -> np.ndarray:
        return self.mask.sum(axis=1).astype(np.int64)

    def row_ids(self, b: int) -> list[int]:
        n = int(self.mask[b].sum())
        return [int(t) for t in self.ids[b, :n]]


class GeneratorNet:
    """Category-conditioned autoregressive LSTM text generator."""

    def __init__(
        self,
        vocab_size: int,
        n_categories: int,
        d_emb: int = 32,
        d_h: int = 64,
        d_cat: int = 8,
        conditioning: str = "none",
        noise_init: bool = False,
        max_len: int = 32,
        seed: int = 0,
    ):
        if conditioning not in ("none", "embedding"):
            raise ValueError(f"unknown conditioning mode {conditioning!r}")
        if vocab_size < 4:
            raise ValueError("vocab_size must cover the reserved ids")
        self.vocab_size = vocab_size
        self.n_categories = n_categories
        self.d_emb = d_emb
        self.d_h = d_h
        self.d_cat = d_cat if conditioning == "embedding" else 0
        self.conditioning = conditioning
        self.noise_init = noise_init
        self.max_len = max_len

        in_dim = d_emb + self.d_cat
        rng = rng_for(seed, "generator-init")

        def p(name, *shape):
            return Tensor(
                rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape),
                requires_grad=True,
                name=name,
            )

        self.params: dict[str, Tensor] = {}
        self.params["emb"] = p("emb", vocab_size, d_emb)
        if self.conditioning == "embedding":
            self.params["cat_emb"] = p("cat_emb", n_categories, self.d_cat)
        self.params["wx"] = p("wx", in_dim, 4 * d_h)
        self.params["wh"] = p("wh", d_h, 4 * d_h)
        self.params["b"] = p("b", 4 * d_h)
        self.params["wout"] = p("wout", d_h, vocab_size)
        self.params["bout"] = p("bout", vocab_size)

    # ---------------------------------------------------------------- common

    def _check_category(self, category: int) -> int:
        category = int(category)
        if not 0 <= category < self.n_categories:
            raise GanBalanceError(
                f"category {category} out of range for {self.n_categories} categories"
            )
        return category

    def init_state(
        self, category: int, rng=None, batch: int = 1
    ) -> tuple[np.ndarray, np.ndarray]:
        """Fresh (h, c).  With noise_init the hidden state is N(0,1)."""
        self._check_category(category)
        c = np.zeros((batch, self.d_h))
        if self.noise_init:
            h = _as_rng(rng).standard_normal((batch, self.d_h))
        else:
            h = np.zeros((batch, self.d_h))
        return h, c

    def clone(self) -> "GeneratorNet":
        """Deep copy with identical parameters (for evolution children)."""
        twin = GeneratorNet(
            self.vocab_size,
            self.n_categories,
            d_emb=self.d_emb,
            d_h=self.d_h,
            d_cat=max(self.d_cat, 1),
            conditioning=self.conditioning,
            noise_init=self.noise_init,
            max_len=self.max_len,
        )
        for name, tensor in self.params.items():
            twin.params[name].data = tensor.data.copy()
        return twin

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.params.items()}

    def load_param_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            src = np.asarray(arrays[name])
            if src.shape != tensor.data.shape:
                raise ShapeError(
                    f"parameter {name!r}: stored shape {src.shape} != {tensor.data.shape}"
                )
            tensor.data = src.copy()

    # ------------------------------------------------------------- fast path

    def _input_arrays(self, prev, category: int) -> np.ndarray:
        """Embed previous tokens (ids or soft rows) for one numpy step."""
        emb = self.params["emb"].data
        if isinstance(prev, np.ndarray) and prev.ndim == 2:
            x = prev @ emb
        else:
            ids = np.atleast_1d(np.asarray(prev, dtype=np.int64))
            x = emb[ids]
        if self.conditioning == "embedding":
            row = self.params["cat_emb"].data[category]
            x = np.concatenate([x, np.tile(row, (x.shape[0], 1))], axis=1)
        return x

    def step(self, category: int, state, prev):
        """One decode step on the numpy path: (logits, next state)."""
        category = self._check_category(category)
        h, c = state
        x = self._input_arrays(prev, category)
        gates = x @ self.params["wx"].data + h @ self.params["wh"].data + self.params["b"].data
        h2, c2, _, _ = lstm_gates_forward(gates, c)
        logits = h2 @ self.params["wout"].data + self.params["bout"].data
        return logits, (h2, c2)

    def sample_sequence(
        self,
        category: int,
        max_len: int | None = None,
        mode: str = "multinomial",
        temperature: float = 1.0,
        rng=None,
        batch: int = 1,
        state: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> SampleResult:
        """Sample a batch of sequences in greedy/multinomial/gumbel_st mode.

        Every mode stops a row at its first EOS (or at max_len); rows
        that stopped early are PAD-filled.  gumbel_st builds the
        differentiable straight-through soft sequence on the active
        tape; the other modes never touch the tape.
        """
        if mode not in ("greedy", "multinomial", "gumbel_st"):
            raise ValueError(f"unknown sampling mode {mode!r}")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        category = self._check_category(category)
        max_len = max_len or self.max_len
        if max_len < 1:
            raise ValueError("max_len must be at least 1")
        needs_rng = mode != "greedy" or (self.noise_init and state is None)
        if needs_rng:
            rng = _as_rng(rng)

        if mode == "gumbel_st":
            return self._sample_gumbel(category, max_len, temperature, rng, batch, state)

        if state is None:
            state = self.init_state(category, rng=rng, batch=batch)
        ids = np.full((batch, max_len), PAD, dtype=np.int64)
        mask = np.zeros((batch, max_len))
        logps = np.zeros((batch, max_len))
        prev = np.full(batch, BOS, dtype=np.int64)
        alive = np.ones(batch, dtype=bool)
        for t in range(max_len):
            logits, state = self.step(category, state, prev)
            logp = _log_softmax(logits)
            if mode == "greedy":
                tok = logits.argmax(axis=1)
            else:
                probs = np_softmax(logits / temperature, axis=1)
                u = rng.random(batch)
                tok = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
                np.clip(tok, 0, self.vocab_size - 1, out=tok)
            ids[alive, t] = tok[alive]
            mask[alive, t] = 1.0
            logps[alive, t] = logp[alive, tok[alive]]
            alive = alive & (tok != EOS)
            if not alive.any():
                break
            prev = tok
        return SampleResult(ids=ids, mask=mask, logps=logps)

    def _sample_gumbel(self, category, max_len, temperature, rng, batch, state):
        ids = np.full((batch, max_len), PAD, dtype=np.int64)
        mask = np.zeros((batch, max_len))
        logps = np.zeros((batch, max_len))
        if state is None:
            state = self.init_state(category, rng=rng, batch=batch)
        h = Tensor(state[0])
        c = Tensor(state[1])
        pad_row = np.zeros((1, self.vocab_size))
        pad_row[0, PAD] = 1.0
        soft_steps: list[Tensor] = []
        x = self._embed_tape(np.full(batch, BOS, dtype=np.int64), category)
        alive = np.ones(batch, dtype=bool)
        for t in range(max_len):
            logits, (h, c) = self._cell_tape(h, c, x)
            st = ops.gumbel_softmax(logits, temperature, hard=True, rng=rng)
            keep = alive.astype(float)[:, None]
            st = ops.add(ops.mul(st, keep), pad_row * (1.0 - keep))
            tok = st.data.argmax(axis=1)
            logp = _log_softmax(logits.data)
            ids[alive, t] = tok[alive]
            mask[alive, t] = 1.0
            logps[alive, t] = logp[alive, tok[alive]]
            soft_steps.append(ops.reshape(st, (batch, 1, self.vocab_size)))
            alive = alive & (tok != EOS)
            x = self._embed_soft_tape(st, category)
        soft = ops.concat(soft_steps, axis=1)
        return SampleResult(ids=ids, mask=mask, logps=logps, soft=soft)

    def sequence_nll(self, category: int, ids, state=None) -> float:
        """Teacher-forced -sum(log P(y_t | y_<t)), in nats.

        Evaluation starts from a zero state unless one is passed, so
        scores are deterministic even for noise_init generators.
        """
        category = self._check_category(category)
        ids = [int(t) for t in ids]
        if not ids:
            raise ValueError("sequence_nll needs a nonempty sequence")
        if any(not 0 <= t < self.vocab_size for t in ids):
            raise GanBalanceError("sequence contains ids outside the vocabulary")
        if state is None:
            state = (np.zeros((1, self.d_h)), np.zeros((1, self.d_h)))
        total = 0.0
        prev = np.array([BOS], dtype=np.int64)
        for tok in ids:
            logits, state = self.step(category, state, prev)
            total -= float(_log_softmax(logits)[0, tok])
            prev = np.array([tok], dtype=np.int64)
        return total

    def rollout(
        self, category: int, prefix, n: int, seed, temperature: float = 1.0
    ) -> list[list[int]]:
        """Complete a prefix n times by multinomial sampling.

        The prefix is replayed from a fresh state (seeded noise for
        noise_init generators), the resulting state is tiled n times,
        and each copy samples independently from the seed's stream.
        """
        if n < 1:
            raise ValueError("rollout needs n >= 1")
        category = self._check_category(category)
        prefix = [int(t) for t in prefix]
        if prefix and prefix[-1] == EOS:
            return [list(prefix) for _ in range(n)]
        if len(prefix) >= self.max_len:
            raise ValueError(
                f"prefix length {len(prefix)} leaves no room under max_len {self.max_len}"
            )
        rng = _as_rng(seed)
        state = self.init_state(category, rng=rng, batch=1)
        prev = np.array([BOS], dtype=np.int64)
        for tok in prefix:
            _, state = self.step(category, state, prev)
            prev = np.array([tok], dtype=np.int64)
        h = np.repeat(state[0], n, axis=0)
        c = np.repeat(state[1], n, axis=0)
        start = np.repeat(prev, n)
        completions = self._complete(category, (h, c), start, prefix, n, rng, temperature)
        return completions

    def _complete(self, category, state, prev, prefix, n, rng, temperature):
        remaining = self.max_len - len(prefix)
        out = [list(prefix) for _ in range(n)]
        alive = np.ones(n, dtype=bool)
        for _ in range(remaining):
            logits, state = self.step(category, state, prev)
            probs = np_softmax(logits / temperature, axis=1)
            u = rng.random(n)
            tok = (probs.cumsum(axis=1) < u[:, None]).sum(axis=1)
            np.clip(tok, 0, self.vocab_size - 1, out=tok)
            for b in range(n):
                if alive[b]:
                    out[b].append(int(tok[b]))
            alive = alive & (tok != EOS)
            if not alive.any():
                break
            prev = tok
        return out

    # ------------------------------------------------------------- tape path

    def _embed_tape(self, ids: np.ndarray, category: int) -> Tensor:
        x = ops.embedding_lookup(self.params["emb"], np.asarray(ids, dtype=np.int64))
        return self._attach_category(x, category, ids.shape[0])

    def _embed_soft_tape(self, soft: Tensor, category: int) -> Tensor:
        x = ops.matmul(soft, self.params["emb"])
        return self._attach_category(x, category, soft.data.shape[0])

    def _attach_category(self, x: Tensor, category: int, batch: int) -> Tensor:
        if self.conditioning != "embedding":
            return x
        rows = ops.embedding_lookup(
            self.params["cat_emb"], np.full(batch, category, dtype=np.int64)
        )
        return ops.concat([x, rows], axis=1)

    def _cell_tape(self, h: Tensor, c: Tensor, x: Tensor):
        gates = ops.add(
            ops.add(ops.matmul(x, self.params["wx"]), ops.matmul(h, self.params["wh"])),
            self.params["b"],
        )
        h2, c2 = ops.lstm_gates(gates, c)
        logits = ops.add(ops.matmul(h2, self.params["wout"]), self.params["bout"])
        return logits, (h2, c2)

    def unroll_tape(
        self, inputs: np.ndarray, category: int, h0: np.ndarray | None = None
    ) -> list[Tensor]:
        """Teacher-forced unroll over (B, T) input ids; logits per step."""
        category = self._check_category(category)
        inputs = np.asarray(inputs, dtype=np.int64)
        batch, steps = inputs.shape
        h = Tensor(h0 if h0 is not None else np.zeros((batch, self.d_h)))
        c = Tensor(np.zeros((batch, self.d_h)))
        out = []
        for t in range(steps):
            x = self._embed_tape(inputs[:, t], category)
            logits, (h, c) = self._cell_tape(h, c, x)
            out.append(logits)
        return out


class DiscriminatorNet:
    """Multi-width CNN over token embeddings with two head variants.

    mode "sentigan": one (k+1)-way softmax head, index k meaning
    "generated".  mode "catgan": k sigmoid heads sharing the trunk, one
    real/fake probability per category.
    """

    def __init__(
        self,
        vocab_size: int,
        n_categories: int,
        mode: str,
        d_emb: int = 32,
        n_filters: int = 32,
        filter_widths: tuple[int, ...] = (2, 3, 4),
        seed: int = 0,
    ):
        if mode not in ("sentigan", "catgan"):
            raise ValueError(f"unknown discriminator mode {mode!r}")
        self.vocab_size = vocab_size
        self.n_categories = n_categories
        self.mode = mode
        self.d_emb = d_emb
        self.n_filters = n_filters
        self.filter_widths = tuple(filter_widths)
        self.out_dim = n_categories + 1 if mode == "sentigan" else n_categories

        rng = rng_for(seed, "discriminator-init")

        def p(name, *shape):
            return Tensor(
                rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape),
                requires_grad=True,
                name=name,
            )

        self.params: dict[str, Tensor] = {"emb": p("emb", vocab_size, d_emb)}
        for w in self.filter_widths:
            self.params[f"conv{w}_w"] = p(f"conv{w}_w", w, d_emb, n_filters)
            self.params[f"conv{w}_b"] = p(f"conv{w}_b", n_filters)
        trunk = len(self.filter_widths) * n_filters
        self.params["head_w"] = p("head_w", trunk, self.out_dim)
        self.params["head_b"] = p("head_b", self.out_dim)

    def param_arrays(self) -> dict[str, np.ndarray]:
        return {name: t.data for name, t in self.params.items()}

    def load_param_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            src = np.asarray(arrays[name])
            if src.shape != tensor.data.shape:
                raise ShapeError(
                    f"parameter {name!r}: stored shape {src.shape} != {tensor.data.shape}"
                )
            tensor.data = src.copy()

    def _soft_batch(self, x) -> np.ndarray:
        """Normalize any accepted input to a (B, T, V) soft array."""
        if isinstance(x, Tensor):
            raise TypeError("pass tensors to forward_tape, arrays or ids here")
        arr = np.asarray(x)
        if arr.ndim == 1:
            arr = _one_hot(arr.astype(np.int64)[None, :], self.vocab_size)
        elif arr.ndim == 2 and np.issubdtype(arr.dtype, np.integer):
            arr = _one_hot(arr, self.vocab_size)
        elif arr.ndim == 2:
            arr = arr[None, :, :]
        if arr.ndim != 3 or arr.shape[2] != self.vocab_size:
            raise ShapeError(
                f"discriminator input must be ids or (.., T, {self.vocab_size}) soft rows,"
                f" got shape {np.asarray(x).shape}"
            )
        return self._pad_short(arr)

    def _pad_short(self, arr: np.ndarray) -> np.ndarray:
        need = max(self.filter_widths)
        if arr.shape[1] >= need:
            return arr
        pad = np.zeros((arr.shape[0], need - arr.shape[1], self.vocab_size))
        pad[:, :, PAD] = 1.0
        return np.concatenate([arr, pad], axis=1)

    def forward_tape(self, soft) -> Tensor:
        """Logits for a (B, T, V) soft batch (Tensor or array)."""
        if not isinstance(soft, Tensor):
            soft = Tensor(self._soft_batch(soft))
        need = max(self.filter_widths)
        if soft.data.shape[1] < need:
            pad = np.zeros((soft.data.shape[0], need - soft.data.shape[1], self.vocab_size))
            pad[:, :, PAD] = 1.0
            soft = ops.concat([soft, Tensor(pad)], axis=1)
        b, t, v = soft.data.shape
        flat = ops.reshape(soft, (b * t, v))
        x = ops.reshape(ops.matmul(flat, self.params["emb"]), (b, t, self.d_emb))
        feats = []
        for w in self.filter_widths:
            conv = ops.add(ops.conv1d(x, self.params[f"conv{w}_w"]), self.params[f"conv{w}_b"])
            feats.append(ops.max_pool_over_time(ops.relu(conv)))
        trunk = ops.concat(feats, axis=1)
        return ops.add(ops.matmul(trunk, self.params["head_w"]), self.params["head_b"])

    def logits(self, x) -> np.ndarray:
        """Fast-path logits; same arithmetic as forward_tape, no tape."""
        soft = self._soft_batch(x)
        b, t, _ = soft.shape
        emb = soft.reshape(b * t, self.vocab_size) @ self.params["emb"].data
        xe = emb.reshape(b, t, self.d_emb)
        feats = []
        for w in self.filter_widths:
            conv = conv1d_forward(xe, self.params[f"conv{w}_w"].data)
            conv = conv + self.params[f"conv{w}_b"].data
            pooled, _ = maxpool_time_forward(np.maximum(conv, 0.0))
            feats.append(pooled)
        trunk = np.concatenate(feats, axis=1)
        return trunk @ self.params["head_w"].data + self.params["head_b"].data

    def discriminate(self, x) -> np.ndarray:
        """Probabilities: softmax over k+1 (sentigan) or k sigmoids (catgan)."""
        arr = np.asarray(x)
        single = arr.ndim == 1 or (
            arr.ndim == 2 and not np.issubdtype(arr.dtype, np.integer)
        )
        logits = self.logits(x)
        probs = np_softmax(logits, axis=1) if self.mode == "sentigan" else np_sigmoid(logits)
        return probs[0] if single else probs


@dataclass
class CategoryBound:
    """Adapter fixing a generator to one category for the NLL metrics."""

    gen: GeneratorNet
    category: int
    temperature: float = 1.0

    def sequence_nll(self, ids) -> tuple[float, int]:
        ids = list(ids)
        return (self.gen.sequence_nll(self.category, ids), len(ids))

    def sample_sequence(self, rng) -> list[int]:
        res = self.gen.sample_sequence(
            self.category, mode="multinomial", temperature=self.temperature, rng=rng
        )
        return res.row_ids(0)


def generate_step(gen: GeneratorNet, category: int, state, prev):
    """One decode step: (logits over vocab, next state)."""
    return gen.step(category, state, prev)


def sample_sequence(gen: GeneratorNet, category: int, max_len=None, mode="multinomial",
                    temperature: float = 1.0, seed=None, batch: int = 1) -> SampleResult:
    """Sample sequences; see GeneratorNet.sample_sequence."""
    return gen.sample_sequence(
        category, max_len=max_len, mode=mode, temperature=temperature,
        rng=seed, batch=batch,
    )


def sequence_nll(gen: GeneratorNet, category: int, ids) -> float:
    """Teacher-forced NLL of a token sequence, in nats."""
    return gen.sequence_nll(category, ids)


def rollout(gen: GeneratorNet, category: int, prefix, n: int, seed) -> list[list[int]]:
    """n Monte Carlo completions of a prefix."""
    return gen.rollout(category, prefix, n, seed)


def discriminate(disc: DiscriminatorNet, x) -> np.ndarray:
    """Probability vector(s) for a sequence or soft batch."""
    return disc.discriminate(x)

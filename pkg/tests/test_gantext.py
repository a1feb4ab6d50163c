import math

import numpy as np
import pytest

from ganbalance.corpus import BOS, EOS, PAD
from ganbalance.errors import GanBalanceError, ShapeError
from ganbalance.gantext import (
    CategoryBound,
    DiscriminatorNet,
    GeneratorNet,
    discriminate,
    generate_step,
    rollout,
    sample_sequence,
    sequence_nll,
)
from ganbalance.numerics import Adam, Tape, backward, ops
from ganbalance.numerics.ops import np_softmax


def _gen(**kw):
    args = dict(vocab_size=12, n_categories=3, d_emb=8, d_h=12, seed=7)
    args.update(kw)
    return GeneratorNet(**args)


def _disc(**kw):
    args = dict(vocab_size=12, n_categories=3, mode="sentigan", d_emb=8, n_filters=6, seed=3)
    args.update(kw)
    return DiscriminatorNet(**args)


def test_generate_step_deterministic_and_shaped():
    gen = _gen()
    state = gen.init_state(0)
    logits1, state1 = generate_step(gen, 0, state, BOS)
    logits2, _ = generate_step(gen, 0, state, BOS)
    assert logits1.shape == (1, gen.vocab_size)
    assert np.array_equal(logits1, logits2)
    assert np.isfinite(logits1).all()
    assert state1[0].shape == (1, gen.d_h)


def test_zero_init_state_without_noise():
    gen = _gen(noise_init=False)
    h, c = gen.init_state(1)
    assert not h.any() and not c.any()


def test_noise_init_state_is_seeded_normal():
    gen = _gen(noise_init=True)
    h1, _ = gen.init_state(0, rng=5)
    h2, _ = gen.init_state(0, rng=5)
    h3, _ = gen.init_state(0, rng=6)
    assert np.array_equal(h1, h2)
    assert not np.array_equal(h1, h3)
    assert h1.std() > 0.3


def test_bad_category_rejected():
    gen = _gen()
    with pytest.raises(GanBalanceError):
        gen.init_state(3)
    with pytest.raises(GanBalanceError):
        gen.step(-1, gen.init_state(0), BOS)


def test_conditioning_modes_change_input_width():
    plain = _gen(conditioning="none")
    condi = _gen(conditioning="embedding", d_cat=4)
    assert plain.params["wx"].data.shape[0] == plain.d_emb
    assert condi.params["wx"].data.shape[0] == condi.d_emb + 4
    assert "cat_emb" in condi.params and "cat_emb" not in plain.params
    # different category rows give different logits for the same state
    s = condi.init_state(0)
    l0, _ = condi.step(0, s, BOS)
    l1, _ = condi.step(1, s, BOS)
    assert not np.array_equal(l0, l1)


def test_greedy_sampling_deterministic():
    gen = _gen(noise_init=True)
    a = sample_sequence(gen, 0, mode="greedy", seed=11)
    b = sample_sequence(gen, 0, mode="greedy", seed=11)
    assert np.array_equal(a.ids, b.ids)
    plain = _gen(noise_init=False)
    c = plain.sample_sequence(0, mode="greedy")
    d = plain.sample_sequence(0, mode="greedy")
    assert np.array_equal(c.ids, d.ids)


def test_sampling_stops_at_first_eos():
    gen = _gen()
    gen.params["bout"].data[EOS] = 12.0  # push EOS to near-certainty
    res = gen.sample_sequence(0, mode="multinomial", rng=1)
    assert res.ids[0, 0] == EOS
    assert res.mask[0].sum() == 1
    assert (res.ids[0, 1:] == PAD).all()


def test_sampled_logps_negate_to_sequence_nll():
    gen = _gen()
    res = gen.sample_sequence(0, mode="multinomial", rng=9)
    ids = res.row_ids(0)
    total_logp = res.logps[0, res.mask[0] == 1].sum()
    assert -total_logp == pytest.approx(sequence_nll(gen, 0, ids), abs=1e-10)


def test_logps_track_model_not_temperature():
    gen = _gen()
    res = gen.sample_sequence(0, mode="multinomial", temperature=0.37, rng=2)
    ids = res.row_ids(0)
    total_logp = res.logps[0, res.mask[0] == 1].sum()
    assert -total_logp == pytest.approx(gen.sequence_nll(0, ids), abs=1e-10)


def test_sampling_validates_arguments():
    gen = _gen()
    with pytest.raises(ValueError):
        gen.sample_sequence(0, mode="beam", rng=1)
    with pytest.raises(ValueError):
        gen.sample_sequence(0, temperature=0.0, rng=1)
    with pytest.raises(ValueError):
        gen.sample_sequence(0, mode="multinomial")  # rng required


def test_gumbel_hard_equals_soft_argmax():
    gen = _gen()
    with Tape():
        res = gen.sample_sequence(0, mode="gumbel_st", temperature=0.8, rng=4, batch=5)
    soft = res.soft.data
    for b in range(5):
        for t in range(soft.shape[1]):
            row = soft[b, t]
            if res.mask[b, t]:
                assert row.sum() == pytest.approx(1.0)
                assert res.ids[b, t] == row.argmax()
            else:
                assert row[PAD] == 1.0  # frozen rows are PAD one-hots


def test_gumbel_reproducible_and_differentiable():
    gen = _gen()
    with Tape():
        r1 = gen.sample_sequence(0, mode="gumbel_st", rng=21, batch=2)
    with Tape():
        r2 = gen.sample_sequence(0, mode="gumbel_st", rng=21, batch=2)
    assert np.array_equal(r1.ids, r2.ids)

    with Tape() as tape:
        res = gen.sample_sequence(0, mode="gumbel_st", rng=3, batch=2)
        loss = ops.mean(res.soft)
        tape.backward(loss)
    assert gen.params["emb"].grad is not None
    assert np.abs(gen.params["emb"].grad).sum() > 0


def test_sequence_nll_uniform_limit():
    gen = _gen(vocab_size=50)
    gen.params["wout"].data[:] = 0.0
    gen.params["bout"].data[:] = 0.0
    ids = [4, 9, 17, 30, EOS]
    assert gen.sequence_nll(0, ids) == pytest.approx(len(ids) * math.log(50))


def test_sequence_nll_positive_and_validated():
    gen = _gen()
    assert gen.sequence_nll(0, [4, 5, EOS]) > 0
    with pytest.raises(ValueError):
        gen.sequence_nll(0, [])
    with pytest.raises(GanBalanceError):
        gen.sequence_nll(0, [4, 99])


def test_mle_steps_reduce_nll_on_memorized_sequence():
    gen = _gen()
    target = [4, 7, 5, 9, EOS]
    before = gen.sequence_nll(0, target)
    opt = Adam(gen.params, lr=0.05)
    inputs = np.array([[BOS] + target[:-1]])
    targets = np.array(target)
    for _ in range(50):
        with Tape() as tape:
            logits = gen.unroll_tape(inputs, 0)
            losses = [
                ops.cross_entropy(step_logits, targets[t : t + 1])
                for t, step_logits in enumerate(logits)
            ]
            total = losses[0]
            for piece in losses[1:]:
                total = ops.add(total, piece)
            tape.backward(total)
        opt.step()
    after = gen.sequence_nll(0, target)
    assert after < before * 0.5


def test_rollout_prefix_with_eos_copies():
    gen = _gen()
    prefix = [5, EOS]
    outs = rollout(gen, 0, prefix, 4, seed=2)
    assert outs == [prefix] * 4


def test_rollout_reproducible():
    gen = _gen()
    a = rollout(gen, 1, [4, 5], 1, seed=13)
    b = rollout(gen, 1, [4, 5], 1, seed=13)
    assert a == b
    assert a[0][:2] == [4, 5]


def test_rollout_rejects_full_prefix():
    gen = _gen(max_len=4)
    with pytest.raises(ValueError):
        gen.rollout(0, [4, 5, 6, 7], 2, seed=1)
    with pytest.raises(ValueError):
        gen.rollout(0, [4], 0, seed=1)


def test_rollout_frequencies_match_softmax():
    gen = _gen(vocab_size=5, d_emb=6, d_h=8)
    prefix = [4]
    n = 10000
    outs = gen.rollout(0, prefix, n, seed=99)
    counts = np.zeros(5)
    for seq in outs:
        counts[seq[len(prefix)]] += 1
    state = gen.init_state(0)
    _, state = gen.step(0, state, BOS)
    logits, _ = gen.step(0, state, np.array([4]))
    probs = np_softmax(logits, axis=1)[0]
    assert np.abs(counts / n - probs).max() < 0.02


def test_discriminator_sentigan_probabilities():
    disc = _disc(mode="sentigan")
    probs = discriminate(disc, [4, 5, 6, 7, EOS])
    assert probs.shape == (4,)
    assert probs.sum() == pytest.approx(1.0)
    # untrained head should be close to uniform over k+1
    assert np.abs(probs - 0.25).max() < 0.05


def test_discriminator_catgan_bounds():
    disc = _disc(mode="catgan")
    probs = discriminate(disc, [4, 5, 6, 7])
    assert probs.shape == (3,)
    assert ((probs > 0) & (probs < 1)).all()


def test_hard_and_soft_inputs_agree_exactly():
    disc = _disc()
    ids = np.array([4, 5, 6, 7, 8])
    onehot = np.zeros((len(ids), disc.vocab_size))
    onehot[np.arange(len(ids)), ids] = 1.0
    assert np.array_equal(discriminate(disc, ids), discriminate(disc, onehot))


def test_short_sequences_are_pad_extended():
    disc = _disc()
    got = discriminate(disc, [4])
    padded = discriminate(disc, [4, PAD, PAD, PAD])
    assert np.array_equal(got, padded)


def test_forward_tape_matches_fast_logits():
    disc = _disc()
    rng = np.random.default_rng(0)
    soft = rng.dirichlet(np.ones(disc.vocab_size), size=(3, 6))
    assert np.array_equal(disc.forward_tape(soft).data, disc.logits(soft))
    ids = rng.integers(0, disc.vocab_size, size=(2, 7))
    assert np.array_equal(disc.forward_tape(ids).data, disc.logits(ids))


def test_discriminator_batch_shapes():
    disc = _disc(mode="sentigan")
    batch = np.array([[4, 5, 6, 7], [8, 9, 4, 5]])
    probs = disc.discriminate(batch)
    assert probs.shape == (2, 4)
    assert np.allclose(probs.sum(axis=1), 1.0)


def test_load_param_arrays_validates_shape():
    gen = _gen()
    arrays = gen.param_arrays()
    bad = dict(arrays)
    bad["wout"] = np.zeros((2, 2))
    with pytest.raises(ShapeError):
        gen.load_param_arrays(bad)


def test_clone_is_independent():
    gen = _gen()
    twin = gen.clone()
    s = gen.init_state(0)
    a, _ = gen.step(0, s, BOS)
    b, _ = twin.step(0, s, BOS)
    assert np.array_equal(a, b)
    twin.params["bout"].data[:] = 5.0
    c, _ = gen.step(0, s, BOS)
    assert np.array_equal(a, c)


def test_category_bound_adapter():
    gen = _gen()
    bound = CategoryBound(gen, category=2)
    total, n = bound.sequence_nll([4, 5, EOS])
    assert n == 3
    assert total == pytest.approx(gen.sequence_nll(2, [4, 5, EOS]))
    ids = bound.sample_sequence(np.random.default_rng(1))
    assert all(0 <= t < gen.vocab_size for t in ids)

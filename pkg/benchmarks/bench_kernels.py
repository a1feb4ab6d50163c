"""Time the hot kernels on the numba and numpy backends side by side.

Run with ``python3 benchmarks/bench_kernels.py``.  Two shape sets are
timed: "typical" mirrors the nets this package actually trains (batch
32, short sequences, narrow embeddings), "large" is a stress case where
the numpy path's BLAS matmuls catch up on the convolutions.  Each
kernel is timed as best-of-N after a warmup call, so the numba column
measures compiled code, not compilation.  The live-backend selection
itself is environment driven (GANBALANCE_NUMBA=0 or NUMBA_DISABLE_JIT=1
forces numpy); this script imports both implementations directly and
ignores the switch.
"""

import argparse
import time

import numpy as np

from ganbalance.numerics import _kernels_numpy

try:
    from ganbalance.numerics import _kernels_numba
except ImportError:
    _kernels_numba = None

SHAPES = {
    "typical": dict(b=32, length=12, d=16, f=12, w=3, h=32, vocab=256, n_param=50_000),
    "large": dict(b=64, length=32, d=48, f=64, w=3, h=64, vocab=5000, n_param=200_000),
}


def build_cases(rng, b, length, d, f, w, h, vocab, n_param):
    x = rng.normal(size=(b, length, d))
    filt = rng.normal(size=(w, d, f))
    gconv = rng.normal(size=(b, length - w + 1, f))
    gates = rng.normal(size=(b, 4 * h))
    c_prev = rng.normal(size=(b, h))
    _, _, ifgo, tc = _kernels_numpy.lstm_gates_forward(gates, c_prev)
    gh = rng.normal(size=(b, h))
    gc = rng.normal(size=(b, h))
    pool_in = rng.normal(size=(b, length, f))
    arg = np.argmax(pool_in, axis=1)
    gpool = rng.normal(size=(b, f))
    ids = rng.integers(0, vocab, size=b * length)
    gemb = rng.normal(size=(b * length, d))
    param = rng.normal(size=n_param)
    grad = rng.normal(size=n_param)
    m = np.zeros_like(param)
    v = np.zeros_like(param)

    return [
        ("conv1d_forward", lambda k: k.conv1d_forward(x, filt)),
        ("conv1d_backward", lambda k: k.conv1d_backward(x, filt, gconv)),
        ("lstm_gates_forward", lambda k: k.lstm_gates_forward(gates, c_prev)),
        (
            "lstm_gates_backward",
            lambda k: k.lstm_gates_backward(ifgo, c_prev, tc, gh, gc),
        ),
        ("maxpool_time_forward", lambda k: k.maxpool_time_forward(pool_in)),
        (
            "maxpool_time_backward",
            lambda k: k.maxpool_time_backward(arg, gpool, length),
        ),
        ("embedding_grad", lambda k: k.embedding_grad(ids, gemb, vocab)),
        (
            "adam_update",
            lambda k: k.adam_update(param, grad, m, v, 1, 1e-3, 0.9, 0.999, 1e-8),
        ),
    ]


def best_ms(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=50, help="best-of-N timing")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument(
        "--shapes", choices=[*SHAPES, "all"], default="all",
        help="which shape set to time",
    )
    args = parser.parse_args()

    if _kernels_numba is None:
        print("numba is not importable; timing the numpy backend only")

    names = list(SHAPES) if args.shapes == "all" else [args.shapes]
    for shape_name in names:
        dims = SHAPES[shape_name]
        rng = np.random.default_rng(args.seed)
        cases = build_cases(rng, **dims)
        if _kernels_numba is not None:
            for _, fn in cases:
                fn(_kernels_numba)  # trigger JIT compilation outside the timers

        dim_text = ", ".join(f"{k}={v}" for k, v in dims.items())
        print(f"\n[{shape_name}] {dim_text}")
        header = f"{'kernel':<24}{'numpy ms':>12}{'numba ms':>12}{'speedup':>10}"
        print(header)
        print("-" * len(header))
        for name, fn in cases:
            np_ms = best_ms(lambda: fn(_kernels_numpy), args.repeats)
            if _kernels_numba is None:
                print(f"{name:<24}{np_ms:>12.3f}{'-':>12}{'-':>10}")
                continue
            nb_ms = best_ms(lambda: fn(_kernels_numba), args.repeats)
            print(f"{name:<24}{np_ms:>12.3f}{nb_ms:>12.3f}{np_ms / nb_ms:>9.1f}x")


if __name__ == "__main__":
    main()

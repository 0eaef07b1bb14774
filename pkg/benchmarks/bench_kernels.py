"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--number 2000]

Both paths are imported side by side from ``rbsched._kernels`` so a single
process compares them; the ``RBSCHED_DISABLE_JIT`` flag only picks which one
the package uses by default.  Outputs are checked for equality first.
"""

import argparse
import timeit

import numpy as np

from rbsched import _kernels as K


def cases(rng):
    shares = rng.dirichlet(np.ones(10))
    demands = rng.integers(0, 40, 10)
    order = np.argsort(-rng.random(10), kind="stable")
    cap = 1 << 17
    tree = np.zeros(2 * cap)
    K.tree_update_np(tree, np.arange(100_000), rng.random(100_000))
    leaves = rng.integers(0, 100_000, 128)
    values = rng.random(128)
    targets = rng.random(128) * tree[1]
    return {
        "integerize (U=10, eval)": lambda k: k("integerize")(shares, demands, 16, True),
        "waterfill (U=10)": lambda k: k("waterfill")(demands, 16),
        "greedy_fill (U=10)": lambda k: k("greedy_fill")(order, demands, 16),
        "tree_update (128 of 100k)": lambda k: k("tree_update")(tree, leaves, values),
        "tree_sample (128 of 100k)": lambda k: k("tree_sample")(tree, targets, 100_000),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--number", type=int, default=2000)
    args = ap.parse_args(argv)

    if not K.HAVE_NUMBA:
        print("numba is not installed; nothing to compare")
        return
    jit = lambda name: getattr(K, name + "_jit")  # noqa: E731
    ref = lambda name: getattr(K, name + "_np")  # noqa: E731

    print(f"{'kernel':28s} {'numba us':>10s} {'numpy us':>10s} {'speedup':>8s}")
    for name, call in cases(np.random.default_rng(0)).items():
        a, b = call(jit), call(ref)
        if a is not None:
            np.testing.assert_array_equal(a, b)
        # first call compiles (or loads the cache); keep it out of the timing
        t_jit = min(timeit.repeat(lambda: call(jit), repeat=args.repeat, number=args.number))
        t_np = min(timeit.repeat(lambda: call(ref), repeat=args.repeat, number=args.number))
        us_jit = 1e6 * t_jit / args.number
        us_np = 1e6 * t_np / args.number
        print(f"{name:28s} {us_jit:10.2f} {us_np:10.2f} {us_np / us_jit:7.1f}x")


if __name__ == "__main__":
    main()

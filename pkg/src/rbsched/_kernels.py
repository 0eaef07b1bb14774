"""Per-step integer kernels with a numba path and a pure-numpy fallback.

Every kernel exists twice: ``*_jit`` is a scalar loop compiled with
``numba.njit`` and ``*_np`` is a vectorised numpy version.  Both produce
bit-identical results; the test-suite checks this on fuzzed inputs.

The public names (``integerize``, ``waterfill``, ...) point at the numba
versions unless numba is missing or ``RBSCHED_DISABLE_JIT`` is set to a
truthy value before import.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba ships with the pinned deps
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() not in ("", "0", "false", "no")


USE_JIT = HAVE_NUMBA and not _env_flag("RBSCHED_DISABLE_JIT")


# ---------------------------------------------------------------------------
# fractional shares -> integer block grants
# ---------------------------------------------------------------------------


@njit(cache=True)
def integerize_jit(shares, demands, num_blocks, fill_remaining):
    n = shares.shape[0]
    frac = np.zeros(n)
    out = np.zeros(n, dtype=np.int64)
    used = 0
    for u in range(n):
        if demands[u] > 0:
            f = shares[u] * num_blocks
            if f > demands[u]:
                f = float(demands[u])
            frac[u] = f
            out[u] = int(np.floor(f))
            used += out[u]
    pool = num_blocks - used
    if pool < 0:
        pool = 0

    # one extra block per user with a fractional part, largest remainder first
    taken = np.zeros(n, dtype=np.bool_)
    while pool > 0:
        best = -1
        best_rem = 0.0
        for u in range(n):
            if taken[u]:
                continue
            rem = frac[u] - out[u]
            if rem > 0.0 and out[u] + 1 <= demands[u] and (best < 0 or rem > best_rem):
                best = u
                best_rem = rem
        if best < 0:
            break
        taken[best] = True
        out[best] += 1
        pool -= 1

    if fill_remaining:
        while pool > 0:
            best = -1
            best_unmet = 0
            for u in range(n):
                unmet = demands[u] - out[u]
                if unmet > best_unmet:
                    best = u
                    best_unmet = unmet
            if best < 0:
                break
            out[best] += 1
            pool -= 1
    return out


def integerize_np(shares, demands, num_blocks, fill_remaining):
    shares = np.asarray(shares, dtype=np.float64)
    demands = np.asarray(demands, dtype=np.int64)
    active = demands > 0
    frac = np.where(active, np.minimum(shares * num_blocks, demands.astype(np.float64)), 0.0)
    out = np.floor(frac).astype(np.int64)
    pool = max(int(num_blocks - out.sum()), 0)

    rem = frac - out
    eligible = (rem > 0.0) & (out + 1 <= demands)
    order = np.lexsort((np.arange(len(rem)), -rem))
    chosen = order[eligible[order]][:pool]
    out[chosen] += 1
    pool -= len(chosen)

    if fill_remaining:
        while pool > 0:
            unmet = demands - out
            best = int(np.argmax(unmet))  # first index on ties
            if unmet[best] <= 0:
                break
            out[best] += 1
            pool -= 1
    return out


# ---------------------------------------------------------------------------
# max-min fair water-filling
# ---------------------------------------------------------------------------


@njit(cache=True)
def waterfill_jit(demands, num_blocks):
    n = demands.shape[0]
    out = np.zeros(n, dtype=np.int64)
    pool = num_blocks
    while pool > 0:
        best = -1
        for u in range(n):
            if out[u] < demands[u] and (best < 0 or out[u] < out[best]):
                best = u
        if best < 0:
            break
        out[best] += 1
        pool -= 1
    return out


def waterfill_np(demands, num_blocks):
    demands = np.asarray(demands, dtype=np.int64)
    if demands.sum() <= num_blocks:
        return demands.copy()
    # largest level L with sum(min(d, L)) <= S; leftovers go one each,
    # ascending index, to users still above the level
    lo, hi = 0, int(demands.max())
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if np.minimum(demands, mid).sum() <= num_blocks:
            lo = mid
        else:
            hi = mid - 1
    out = np.minimum(demands, lo)
    left = int(num_blocks - out.sum())
    above = np.flatnonzero(demands > lo)[:left]
    out[above] += 1
    return out


# ---------------------------------------------------------------------------
# greedy fill in a given priority order (max throughput)
# ---------------------------------------------------------------------------


@njit(cache=True)
def greedy_fill_jit(order, demands, num_blocks):
    out = np.zeros(demands.shape[0], dtype=np.int64)
    left = num_blocks
    for k in range(order.shape[0]):
        if left <= 0:
            break
        u = order[k]
        g = min(demands[u], left)
        out[u] = g
        left -= g
    return out


def greedy_fill_np(order, demands, num_blocks):
    demands = np.asarray(demands, dtype=np.int64)
    d = demands[order]
    before = np.cumsum(d) - d
    out = np.zeros_like(demands)
    out[order] = np.clip(num_blocks - before, 0, d)
    return out


# ---------------------------------------------------------------------------
# sum tree for proportional prioritised sampling
# ---------------------------------------------------------------------------
# Layout: tree[1] is the root, leaves live at tree[cap:2*cap], cap a power of
# two.  Parents are always recomputed as left + right so that both paths sum
# in the same order.


@njit(cache=True)
def tree_update_jit(tree, leaves, values):
    cap = tree.shape[0] // 2
    for k in range(leaves.shape[0]):
        i = leaves[k] + cap
        tree[i] = values[k]
        i //= 2
        while i >= 1:
            tree[i] = tree[2 * i] + tree[2 * i + 1]
            i //= 2


def tree_update_np(tree, leaves, values):
    cap = tree.shape[0] // 2
    leaves = np.asarray(leaves, dtype=np.int64)
    # last write wins for duplicate leaves, as in the scalar loop
    tree[leaves + cap] = values
    idx = np.unique((leaves + cap) // 2)
    while idx.size and idx[0] >= 1:
        tree[idx] = tree[2 * idx] + tree[2 * idx + 1]
        if idx[0] == 1:
            break
        idx = np.unique(idx // 2)


@njit(cache=True)
def tree_sample_jit(tree, targets, size):
    cap = tree.shape[0] // 2
    out = np.empty(targets.shape[0], dtype=np.int64)
    for k in range(targets.shape[0]):
        v = targets[k]
        i = 1
        while i < cap:
            left = tree[2 * i]
            if v < left:
                i = 2 * i
            else:
                v = v - left
                i = 2 * i + 1
        leaf = i - cap
        out[k] = leaf if leaf < size else size - 1
    return out


def tree_sample_np(tree, targets, size):
    cap = tree.shape[0] // 2
    v = np.array(targets, dtype=np.float64)
    i = np.ones(v.shape[0], dtype=np.int64)
    while cap > 1 and i[0] < cap:
        left = tree[2 * i]
        go_left = v < left
        v = np.where(go_left, v, v - left)
        i = 2 * i + (~go_left)
    return np.minimum(i - cap, size - 1)


if USE_JIT:
    integerize = integerize_jit
    waterfill = waterfill_jit
    greedy_fill = greedy_fill_jit
    tree_update = tree_update_jit
    tree_sample = tree_sample_jit
else:
    integerize = integerize_np
    waterfill = waterfill_np
    greedy_fill = greedy_fill_np
    tree_update = tree_update_np
    tree_sample = tree_sample_np

BACKEND = "numba" if USE_JIT else "numpy"

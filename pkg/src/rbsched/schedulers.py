"""Model-based comparison schedulers.

All of them map an :class:`~rbsched.env.Observation` to an integer
:class:`~rbsched.allocation.Allocation`, except :func:`schedule_random`,
which returns a share vector that still has to go through
:func:`~rbsched.allocation.postprocess`.
"""

from __future__ import annotations

import enum

import numpy as np

from . import _kernels
from .allocation import Allocation
from .env import Observation


class SchedulerKind(str, enum.Enum):
    MAX_THROUGHPUT = "mt"
    MAX_MIN_FAIR = "mmf"
    DELAY_SENSITIVE = "ds"
    RANDOM = "random"
    DDPG = "ddpg"


def schedule_mt(obs: Observation) -> Allocation:
    """Serve users fully in descending channel quality until blocks run out."""
    idx = np.arange(obs.num_users)
    order = np.lexsort((idx, -obs.power_fading))
    blocks = _kernels.greedy_fill(order, np.ascontiguousarray(obs.demand), obs.num_resources)
    return Allocation(blocks=blocks)


def schedule_mmf(obs: Observation) -> Allocation:
    """Max-min fair water-filling, one block at a time."""
    blocks = _kernels.waterfill(np.ascontiguousarray(obs.demand), obs.num_resources)
    return Allocation(blocks=blocks)


def _normalise(values, mask, uniform):
    v = np.where(mask, values, 0.0)
    total = v.sum()
    return v / total if total > 0 else uniform


def ds_scores(obs: Observation, prio_weight: float = 0.5) -> np.ndarray:
    """Combined channel-priority / timeout-urgency score over requesting users."""
    req = obs.demand > 0
    n_req = int(req.sum())
    if n_req == 0:
        return np.zeros(obs.num_users)
    uniform = req / n_req
    channel = _normalise(
        _normalise(obs.packet_rate, req, uniform) * _normalise(obs.power_fading, req, uniform),
        req,
        uniform,
    )
    ratio = np.zeros(obs.num_users)
    np.divide(obs.timeout_blocks, obs.min_ttl, out=ratio, where=req)
    urgency = _normalise(ratio, req, uniform)
    return _normalise(prio_weight * channel + (1.0 - prio_weight) * urgency, req, uniform)


def schedule_ds(obs: Observation, prio_weight: float = 0.5) -> Allocation:
    """Delay-sensitive scheduler.

    Blocks are shared in proportion to :func:`ds_scores`.  A job that cannot
    finish before its deadline even with every block (``remaining > ttl*S``)
    is skipped; the blocks it would have absorbed go back to the pool and
    are handed out in descending score order.
    """
    S = obs.num_resources
    demand = np.ascontiguousarray(obs.demand, dtype=np.int64)
    scores = ds_scores(obs, prio_weight)
    blocks = _kernels.integerize(scores, demand, S, False)

    skip = set()
    feasible = demand.copy()
    for u, jobs in enumerate(obs.jobs):
        for job_id, remaining, ttl in jobs:
            if remaining > ttl * S:
                skip.add(job_id)
                feasible[u] -= remaining

    withheld = np.maximum(blocks - feasible, 0)
    blocks = np.minimum(blocks, feasible)
    pool = int(withheld.sum())
    if pool:
        order = np.lexsort((np.arange(obs.num_users), -scores))
        for u in order:
            if pool == 0:
                break
            extra = min(pool, int(feasible[u] - blocks[u]))
            blocks[u] += extra
            pool -= extra
    return Allocation(blocks=blocks, skip_jobs=frozenset(skip))


def schedule_random(obs: Observation, rng: np.random.Generator) -> np.ndarray:
    """Share vector of i.i.d. U(0,1) entries normalised to sum 1."""
    x = rng.random(obs.num_users)
    return x / x.sum()

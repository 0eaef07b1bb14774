"""Integer block allocations and the share-vector post-processing rules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class Allocation:
    """Integer blocks per user.

    ``skip_jobs`` lists job ids that must not be served this step even though
    their user receives blocks (used by the delay-sensitive scheduler).
    """

    blocks: np.ndarray
    skip_jobs: frozenset = field(default_factory=frozenset)

    @property
    def total(self) -> int:
        return int(self.blocks.sum())


def postprocess(shares, demands, num_blocks: int, eval_mode: bool) -> Allocation:
    """Project a share vector onto a feasible integer allocation.

    1. users without demand get nothing (no renormalisation),
    2. the fractional grant ``share * S`` is capped at the user's demand,
    3. floors are taken and at most one extra block goes to each user with a
       fractional remainder, largest remainder first,
    4. (``eval_mode`` only) leftover blocks go one at a time to the user with
       the largest unmet demand.

    Ties always go to the lower user index.
    """
    shares = np.ascontiguousarray(shares, dtype=np.float64)
    demands = np.ascontiguousarray(demands, dtype=np.int64)
    blocks = _kernels.integerize(shares, demands, int(num_blocks), bool(eval_mode))
    return Allocation(blocks=blocks)


def is_valid(alloc: Allocation, demands, num_blocks: int) -> bool:
    b = alloc.blocks
    return bool((b >= 0).all() and b.sum() <= num_blocks and (b <= np.asarray(demands)).all())

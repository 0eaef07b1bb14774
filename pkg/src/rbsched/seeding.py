"""Named, derived random streams from one master seed.

A stream seed is ``mix64(master ^ key_hash)`` where ``key_hash`` folds the
stream name (FNV-1a, 64 bit) and any integer keys through the SplitMix64
finaliser.  Streams with different names are statistically independent, so
e.g. changing the agent seed never perturbs the environment draws.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

ENV_STREAMS = ("env-mobility", "env-channel", "env-jobs")
AGENT_STREAMS = ("agent-init", "agent-explore", "agent-sample")


def mix64(x: int) -> int:
    """SplitMix64 finaliser."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h = ((h ^ byte) * 0x100000001B3) & MASK64
    return h


def derive_seed(master: int, name: str, *keys: int) -> int:
    h = fnv1a64(name)
    for k in keys:
        h = mix64(h ^ (int(k) & MASK64))
    return mix64((int(master) & MASK64) ^ h)


def stream(master: int, name: str, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master, name, *keys)))

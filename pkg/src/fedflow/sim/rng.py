"""Reproducible random substreams.

Every stochastic component derives its own generator from the scenario seed
plus a stable name, so draws in one component never shift another's sequence
when components are added or reordered.
"""

from __future__ import annotations

import hashlib

import numpy as np


def substream(seed: int, *names: str) -> np.random.Generator:
    key = tuple(
        int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "big")
        for name in names
    )
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=key))

"""Deterministic, labeled random streams.

Every draw in a run is keyed by (seed, step, substep label), so replays and
paired runs line up exactly no matter what happened on other substeps.
PCG64 seeded through SeedSequence keeps the streams platform-independent.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _label_entropy(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, step: int, label: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=[int(seed) & (2**64 - 1), int(step), _label_entropy(label)])
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit child seed, for replicas / population members."""
    digest = hashlib.blake2b(f"{int(seed)}:{label}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class StepRng:
    """Per-run stream factory: one generator per (step, substep label)."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self.step_index = 0

    def substream(self, label: str) -> np.random.Generator:
        return stream(self.seed, self.step_index, label)

    def advance(self) -> None:
        self.step_index += 1

    def clone(self) -> "StepRng":
        c = StepRng(self.seed)
        c.step_index = self.step_index
        return c

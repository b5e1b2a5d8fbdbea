"""Reproduction-time parameter variation.

Mutators see only (parameters, rng) — no fitness, no population ranking.
"basic" is stateless: each coordinate is resampled around its current value
with a fixed sigma, with probability 0.2. "adaptive" doubles the genome:
every logic parameter carries its own sigma, and the sigmas themselves drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .programs import ProgramEntry

UPDATE_PROB = 0.2
SIGMA_MIN = 1e-6
SIGMA_MAX = 1.0


@dataclass(frozen=True)
class MutatorConfig:
    kind: str                      # "basic" | "adaptive"
    base_sigma: float = 0.01
    meta_update_prob: float = 0.2  # adaptive only: chance a sigma drifts
    meta_sigma: float = 0.1        # adaptive only: log-scale drift size

    def __post_init__(self):
        if self.kind not in ("basic", "adaptive"):
            raise ValueError(f"unknown mutator kind {self.kind!r}")
        if not (0.0 <= self.meta_update_prob <= 1.0):
            raise ValueError("meta_update_prob must be in [0, 1]")
        if self.base_sigma < 0 or self.meta_sigma <= 0:
            raise ValueError("sigmas must be positive")


def mutate_basic(params: np.ndarray, sigma: float,
                 rng: np.random.Generator) -> np.ndarray:
    """Resample each coordinate with probability 0.2 around its value."""
    p = np.asarray(params, dtype=np.float32)
    hit = rng.random(p.shape) < UPDATE_PROB
    noise = rng.normal(0.0, 1.0, p.shape).astype(np.float32) * np.float32(sigma)
    return np.where(hit, p + noise, p)


def mutate_adaptive(params_with_sigmas: np.ndarray,
                    rng: np.random.Generator,
                    meta_update_prob: float = 0.2,
                    meta_sigma: float = 0.1) -> np.ndarray:
    """Augmented vector [params || sigmas]: params move by their own sigma,
    sigmas drift multiplicatively (log-normal) and stay in [1e-6, 1]."""
    v = np.asarray(params_with_sigmas, dtype=np.float32)
    if v.size % 2 != 0:
        raise ValueError("adaptive vector must be [params || sigmas]")
    half = v.size // 2
    p, s = v[:half], v[half:]
    hit = rng.random(half) < UPDATE_PROB
    noise = rng.normal(0.0, 1.0, half).astype(np.float32) * s
    new_p = np.where(hit, p + noise, p)
    meta_hit = rng.random(half) < meta_update_prob
    factor = np.exp(rng.normal(0.0, meta_sigma, half)).astype(np.float32)
    new_s = np.where(meta_hit, s * factor, s)
    np.clip(new_s, SIGMA_MIN, SIGMA_MAX, out=new_s)
    return np.concatenate([new_p, new_s])


def initial_mutator_state(cfg: MutatorConfig, n_logic: int) -> np.ndarray:
    """Per-organism mutator state: empty for basic, per-param sigmas for adaptive."""
    if cfg.kind == "basic":
        return np.zeros(0, dtype=np.float32)
    return np.full(n_logic, cfg.base_sigma, dtype=np.float32)


def spawn_child_params(parent: ProgramEntry, mutator: MutatorConfig,
                       rng: np.random.Generator) -> ProgramEntry:
    """New child entry: mutated logic params plus mutated mutator state."""
    if mutator.kind == "basic":
        child_logic = mutate_basic(parent.logic, mutator.base_sigma, rng)
        return ProgramEntry(parent.arch, child_logic, "basic", parent.mutator_state)
    sigmas = parent.mutator_state
    if sigmas.size != parent.logic.size:
        sigmas = np.full(parent.logic.size, mutator.base_sigma, dtype=np.float32)
    augmented = np.concatenate([parent.logic, sigmas])
    out = mutate_adaptive(augmented, rng, mutator.meta_update_prob, mutator.meta_sigma)
    half = out.size // 2
    return ProgramEntry(parent.arch, out[:half], "adaptive", out[half:])

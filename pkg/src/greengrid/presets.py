"""The four named configurations and their blueprint families.

Numbers here are tuned for desk-scale grids so the qualitative regimes hold:
persistence is forgiving and grows big biomes, collaboration taxes upkeep,
sideways starves the map from two corners with persistence's exact physics,
and pestilence ages agents fast enough that lineages must keep reproducing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import AgentParams
from .blueprint import EnvBlueprint
from .cells import CellType
from .config import EnvConfig
from .env import Environment, new_environment, place_seed
from .mutators import MutatorConfig, initial_mutator_state
from .programs import ProgramEntry, ProgramStore

PRESET_NAMES = ("persistence", "collaboration", "sideways", "pestilence")

# Start-of-life stock for each seed cell (earth, air).
SEED_START_NUTRIENT = (4.0, 4.0)

# "Scarce" starting charge in every earth/air cell (8% of the cap): enough to
# bootstrap the first organism while the generator fronts diffuse inward.
INITIAL_STOCK = (0.8, 0.8)


@dataclass(frozen=True)
class ConfigPreset:
    name: str
    config: EnvConfig
    blueprint: EnvBlueprint


def _persistence_config() -> EnvConfig:
    return EnvConfig(
        state_size=12,
        max_nutrient_cell=10.0,
        generator_amount=1.0,
        diffusion_rate=0.25,
        diffusion_iterations_per_step=5,
        absorption_amount=0.5,
        dissipation=(0.005, 0.008, 0.008, 0.016),
        specialize_cost=(0.2, 0.2),
        spawn_cost=(2.0, 2.0),
        reproduce_cost=(3.0, 3.0),
        seed_min_nutrient=0.4,
        max_lifetime=10_000,
        aging_slope=0.005,
        struct_generation=200.0,
        structural_cap=200.0,
        max_programs=64,
    )


def _collaboration_config() -> EnvConfig:
    return EnvConfig(
        state_size=12,
        max_nutrient_cell=10.0,
        generator_amount=1.0,
        diffusion_rate=0.25,
        diffusion_iterations_per_step=5,
        absorption_amount=0.5,
        dissipation=(0.04, 0.045, 0.045, 0.06),
        specialize_cost=(0.6, 0.6),
        spawn_cost=(1.2, 1.2),
        reproduce_cost=(2.5, 2.5),
        seed_min_nutrient=0.4,
        max_lifetime=100_000_000,
        aging_slope=0.005,
        struct_generation=200.0,
        structural_cap=200.0,
        max_programs=64,
    )


def _pestilence_config() -> EnvConfig:
    return EnvConfig(
        state_size=12,
        max_nutrient_cell=10.0,
        generator_amount=1.0,
        diffusion_rate=0.25,
        diffusion_iterations_per_step=5,
        absorption_amount=0.5,
        dissipation=(0.008, 0.01, 0.01, 0.02),
        specialize_cost=(0.8, 0.8),
        spawn_cost=(1.0, 1.0),
        reproduce_cost=(2.0, 2.0),
        seed_min_nutrient=2.0,
        max_lifetime=300,
        aging_slope=0.0025,
        struct_generation=200.0,
        structural_cap=200.0,
        max_programs=64,
    )


def _uniform_blueprint(h: int, w: int, seed_columns: tuple[int, ...],
                       earth_frac: float = 0.35) -> EnvBlueprint:
    """Sun roof, air column, earth bed, immovable floor."""
    earth_rows = max(2, int(h * earth_frac))
    rows = ["S" * w]
    for _ in range(h - earth_rows - 2):
        rows.append("A" * w)
    for _ in range(earth_rows):
        rows.append("E" * w)
    rows.append("I" * w)
    return EnvBlueprint(rows=tuple(rows), seed_columns=seed_columns)


def _sideways_blueprint(h: int, w: int, seed_columns: tuple[int, ...]) -> EnvBlueprint:
    """Generators only in the north-west (sun) and south-east (immovable)."""
    earth_rows = max(2, int(h * 0.35))
    half = w // 2
    rows = ["S" * half + "A" * (w - half)]
    for _ in range(h - earth_rows - 2):
        rows.append("A" * w)
    for _ in range(earth_rows):
        rows.append("E" * w)
    rows.append("E" * half + "I" * (w - half))
    return EnvBlueprint(rows=tuple(rows), seed_columns=seed_columns)


def make_preset(name: str, height: int = 72, width: int = 128) -> tuple[EnvConfig, EnvBlueprint]:
    """Construct a named configuration at the requested desk scale."""
    if height < 8 or width < 8:
        raise ValueError("preset worlds need height and width >= 8")
    center = (width // 2,)
    if name == "persistence":
        return _persistence_config(), _uniform_blueprint(height, width, center)
    if name == "collaboration":
        return _collaboration_config(), _uniform_blueprint(height, width, center)
    if name == "sideways":
        return _persistence_config(), _sideways_blueprint(height, width, center)
    if name == "pestilence":
        # shallow earth bed: fast-aging agents cannot wait for a deep soil front
        return _pestilence_config(), _uniform_blueprint(height, width, center,
                                                        earth_frac=0.25)
    raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")


def make_petri(name: str, height: int = 26, width: int = 18) -> tuple[EnvConfig, EnvBlueprint]:
    """Small single-seed dish sharing the named preset's physics."""
    config, _ = make_preset(name, 8, 8)
    return config, make_preset(name, height, width)[1]


def seeded_world(config: EnvConfig, blueprint: EnvBlueprint, params: AgentParams,
                 mutator: MutatorConfig | None = None,
                 seed_nutrient: tuple[float, float] = SEED_START_NUTRIENT,
                 initial_stock: tuple[float, float] = INITIAL_STOCK,
                 ) -> tuple[Environment, ProgramStore]:
    """Materialize a blueprint, charge it scarcely, plant one organism per
    seed column."""
    env = new_environment(blueprint, config)
    if initial_stock != (0.0, 0.0):
        types, states, ids = env.writable_copies()
        states[:, :, 0][types == CellType.EARTH] = initial_stock[0]
        states[:, :, 1][types == CellType.AIR] = initial_stock[1]
        env = Environment(types, states, ids)
    programs = ProgramStore(config.max_programs)
    kind = mutator.kind if mutator is not None else "none"
    state = (initial_mutator_state(mutator, params.vector.size)
             if mutator is not None else np.zeros(0, dtype=np.float32))
    for column in blueprint.seed_columns:
        agent_id = programs.mint(ProgramEntry(params.arch, params.vector, kind, state))
        env = place_seed(env, column, agent_id, seed_nutrient)
    return env, programs

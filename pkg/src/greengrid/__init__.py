"""greengrid: a falling-sand plant biome simulator with evolution tools."""

from .agents import AgentParams, Perception, init_extended, init_minimal, perceive
from .blueprint import EnvBlueprint
from .cells import CellType
from .config import EnvConfig
from .env import (
    Environment,
    count_agents,
    deserialize_env,
    is_extinct,
    new_environment,
    place_seed,
    serialize_env,
)
from .evolve import EvalReport, evaluate, fitness, meta_evolve_e2e, meta_evolve_petri, petri_fitness, petri_run
from .mutators import MutatorConfig, mutate_adaptive, mutate_basic, spawn_child_params
from .physics import StepStats, aging_step, energy_step, gravity_step, step, structural_step
from .presets import ConfigPreset, make_preset, make_petri, seeded_world
from .programs import ProgramEntry, ProgramStore
from .rng import StepRng

__version__ = "0.1.0"

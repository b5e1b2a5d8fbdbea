import numpy as np
import pytest

from greengrid.blueprint import EnvBlueprint
from greengrid.config import EnvConfig
from greengrid.env import Environment, new_environment


@pytest.fixture
def small_config():
    """Neutral physics for hand-built fixtures."""
    return EnvConfig(
        state_size=12,
        max_nutrient_cell=10.0,
        generator_amount=0.5,
        diffusion_rate=0.25,
        absorption_amount=0.5,
        dissipation=(0.01, 0.01, 0.01, 0.02),
        specialize_cost=(0.2, 0.2),
        spawn_cost=(2.0, 2.0),
        reproduce_cost=(2.0, 2.0),
        seed_min_nutrient=0.4,
        max_lifetime=1000,
        aging_slope=0.005,
        struct_decay_earth=1.0,
        struct_decay_agent=5.0,
        struct_generation=10.0,
        structural_cap=10.0,
        struct_iterations_per_step=1,
        max_programs=8,
    )


@pytest.fixture
def integrity_config(small_config):
    """The worked structural-integrity constants: decay 1/5, generation 10."""
    return small_config


def build_env(rows, config, nutrients=None, ids=None, integrity=None,
              ages=None) -> Environment:
    """Hand-build a world from layout rows; optional per-cell overrides are
    dicts {(y, x): value}."""
    bp = EnvBlueprint(rows=tuple(rows))
    env = new_environment(bp, config)
    types, states, idg = env.writable_copies()
    for (y, x), (e, a) in (nutrients or {}).items():
        states[y, x, 0] = e
        states[y, x, 1] = a
    for (y, x), v in (ids or {}).items():
        idg[y, x] = v
    for (y, x), v in (integrity or {}).items():
        states[y, x, 3] = v
    for (y, x), v in (ages or {}).items():
        states[y, x, 2] = v
    return Environment(types, states, idg)


def put_cell(env: Environment, pos, cell_type, e=0.0, a=0.0, age=0.0,
             integrity=0.0, agent_id=0) -> Environment:
    types, states, ids = env.writable_copies()
    y, x = pos
    types[y, x] = cell_type
    states[y, x] = 0.0
    states[y, x, 0] = e
    states[y, x, 1] = a
    states[y, x, 2] = age
    states[y, x, 3] = integrity
    ids[y, x] = agent_id
    return Environment(types, states, ids)


@pytest.fixture
def build():
    return build_env


@pytest.fixture
def put():
    return put_cell

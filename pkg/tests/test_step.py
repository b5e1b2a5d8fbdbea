"""The master step: ordering, determinism, the worked tiny world, the ledger."""

import numpy as np
import pytest

from greengrid.blueprint import EnvBlueprint
from greengrid.cells import CellType
from greengrid.env import serialize_env
from greengrid.mutators import MutatorConfig
from greengrid.physics import step
from greengrid.presets import make_preset, seeded_world
from greengrid.programs import ProgramStore
from greengrid.rng import StepRng
from greengrid import init_minimal


def test_empty_world_is_stable(build, small_config):
    env = build(["VVV", "VVV"], small_config)
    programs = ProgramStore(4)
    rng = StepRng(0)
    out, programs, stats = step(env, programs, small_config, rng)
    assert (out.type_grid == env.type_grid).all()
    assert stats.n_agents == 0 and stats.births == 0 and stats.deaths == 0
    assert stats.n_repro_attempts == 0


def test_tiny_persistence_specializes_then_spawns():
    config, blueprint = make_preset("persistence", 12, 12)
    env, programs = seeded_world(config, blueprint, init_minimal())
    rng = StepRng(1)
    env, programs, _ = step(env, programs, config, rng)
    types = {CellType(t) for t in env.type_grid[env.type_grid >= 6]}
    # step 1: the seed has specialized into root + leaf
    assert types == {CellType.AGENT_ROOT, CellType.AGENT_LEAF}
    # within a few more steps both cells have spawned
    for _ in range(7):
        env, programs, stats = step(env, programs, config, rng)
    assert stats.n_agents >= 4


def test_same_seed_is_bit_identical():
    config, blueprint = make_preset("persistence", 16, 24)
    mut = MutatorConfig("basic", 0.01)
    snaps = []
    for _ in range(2):
        env, programs = seeded_world(config, blueprint, init_minimal(), mut)
        rng = StepRng(42)
        for _ in range(40):
            env, programs, _ = step(env, programs, config, rng, mutator=mut)
        snaps.append(serialize_env(env))
    assert snaps[0] == snaps[1]


def test_nutrient_ledger_balances_per_step():
    config, blueprint = make_preset("persistence", 24, 32)
    mut = MutatorConfig("basic", 0.01)
    env, programs = seeded_world(config, blueprint, init_minimal(), mut)
    rng = StepRng(9)
    for _ in range(120):
        before = env.state_grid[:, :, :2].sum(axis=(0, 1))
        env, programs, st = step(env, programs, config, rng, mutator=mut)
        after = env.state_grid[:, :, :2].sum(axis=(0, 1))
        delta = after - before
        explained = (st.generated - st.dissipated - st.op_costs
                     - st.cap_losses - st.death_losses)
        assert abs(delta[0] - explained[0]) < 1e-5
        assert abs(delta[1] - explained[1]) < 1e-5


def test_stats_csv_shape():
    config, blueprint = make_preset("persistence", 12, 12)
    env, programs = seeded_world(config, blueprint, init_minimal())
    rng = StepRng(1)
    env, programs, stats = step(env, programs, config, rng)
    row = stats.csv_row()
    from greengrid.physics import StepStats
    assert len(row.split(",")) == len(StepStats.CSV_HEADER.split(","))

"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The meta-evolution
criterion (9) dominates the runtime; the whole suite targets a laptop.
"""

import dataclasses
import time
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from greengrid.agents import AgentParams, MINIMAL_LEN, init_extended, init_minimal
from greengrid.cells import CellType, is_agent
from greengrid.config import EnvConfig
from greengrid.env import serialize_env
from greengrid.evolve import (
    PgpeConfig,
    PgpeState,
    evaluate,
    meta_evolve_petri,
    petri_run,
    pgpe_sample,
    pgpe_step,
)
from greengrid.mutators import MutatorConfig, mutate_adaptive, mutate_basic
from greengrid.physics import energy_step, gravity_step, step, structural_step
from greengrid.presets import make_petri, make_preset, seeded_world
from greengrid.record import load_record, record_run, replay
from greengrid.rng import StepRng, derive_seed

from tests.conftest import build_env, put_cell
from tests.test_ops_exclusive import _write, oracle_outcomes, env_key, random_case
from greengrid.ops import ExclusiveOp, resolve_exclusive

N_JOBS = 2


def report(criterion, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
    print(line, flush=True)
    assert ok, line


# -- 1. structural-integrity fixtures (exact, < 1 ms) -------------------------

def test_c01_structural_integrity_fixture():
    cfg = EnvConfig(struct_decay_earth=1.0, struct_decay_agent=5.0,
                    struct_generation=10.0, structural_cap=10.0)
    env = build_env(["IEEEEEEEEV", "VVVVVVVVVV", "VVVVVVVVVV"], cfg)
    env = put_cell(env, (1, 2), CellType.AGENT_ROOT, agent_id=1)
    env = put_cell(env, (1, 8), CellType.AGENT_LEAF, agent_id=1)
    for _ in range(12):
        env = structural_step(env, cfg)
    integ = env.state_grid[:, :, 3]
    exact = (integ[0, 0] == 10.0 and integ[0, 1] == 9.0
             and integ[1, 2] == 4.0 and integ[1, 8] == 0.0)
    fallen = gravity_step(env).type_grid[2, 8] == CellType.AGENT_LEAF
    structural_step(env, cfg)  # warm
    t0 = time.perf_counter()
    structural_step(env, cfg)
    dt = time.perf_counter() - t0
    report(1, exact and fallen and dt < 1e-3,
           f"root=4 leaf=0 exact={exact}, cell-c falls={fallen}, {dt*1e6:.0f}us/iteration")


# -- 2. gravity block fall (exact, < 1 ms) -------------------------------------

def test_c02_gravity_block():
    cfg = EnvConfig()
    env = build_env(["VVVV"] * 6, cfg)
    for y, x in ((1, 1), (1, 2), (2, 1), (2, 2)):
        env = put_cell(env, (y, x), CellType.AGENT_UNSPECIALIZED, e=1.0, a=1.0,
                       agent_id=2)
    coherent = True
    for expected_top in (2, 3, 4):
        env = gravity_step(env)
        pos = np.argwhere(is_agent(env.type_grid))
        ys = sorted({int(y) for y, _ in pos})
        xs = sorted({int(x) for _, x in pos})
        coherent &= (ys == [expected_top, expected_top + 1] and xs == [1, 2])
    settled = gravity_step(env)
    resting = (settled.type_grid == env.type_grid).all()
    gravity_step(env)  # warm
    t0 = time.perf_counter()
    gravity_step(env)
    dt = time.perf_counter() - t0
    report(2, coherent and resting and dt < 1e-3,
           f"block cohesive={coherent}, rests at floor={resting}, {dt*1e6:.0f}us/step")


# -- 3. conflict-resolution oracle ---------------------------------------------

def test_c03_conflict_resolution_oracle():
    g = np.random.Generator(np.random.PCG64(31337))
    violations = 0
    outside_support = 0
    for _ in range(1000):
        env, ops = random_case(g)
        support = {}
        for prob, o in oracle_outcomes(env, ops):
            support[env_key(o)] = support.get(env_key(o), 0.0) + prob
        out, stats = resolve_exclusive(env, ops, g)
        if len(stats.write_log) != len(set(stats.write_log)):
            violations += 1
        if env_key(out) not in support:
            outside_support += 1

    # tie case: three proposers, one target, 10k seeded trials
    cfg = EnvConfig()
    env = build_env(["AVA", "VAV"], cfg)
    ops = [ExclusiveOp("air", a, (0, 1), _write(CellType.AIR, e=i + 1.0), None)
           for i, a in enumerate([(0, 0), (0, 2), (1, 1)])]
    counts = Counter()
    for _ in range(10_000):
        out, _ = resolve_exclusive(env, ops, g)
        counts[float(out.state_grid[0, 1, 0])] += 1
    observed = [counts[1.0], counts[2.0], counts[3.0]]
    p = chisquare(observed).pvalue
    ok = violations == 0 and outside_support == 0 and p > 0.01
    report(3, ok, f"0 double-writes in 1000 cases ({violations} violations, "
                  f"{outside_support} off-support), tie chi2 p={p:.3f}")


# -- 4. nutrient ledger ----------------------------------------------------------

def test_c04_nutrient_ledger():
    config, blueprint = make_preset("persistence", 48, 96)
    mut = MutatorConfig("basic", 0.01)
    env, programs = seeded_world(config, blueprint, init_minimal(), mut)
    rng = StepRng(4)
    residual = np.zeros(2)
    for _ in range(1000):
        before = env.state_grid[:, :, :2].sum(axis=(0, 1))
        env, programs, st = step(env, programs, config, rng, mutator=mut)
        after = env.state_grid[:, :, :2].sum(axis=(0, 1))
        explained = (st.generated - st.dissipated - st.op_costs
                     - st.cap_losses - st.death_losses)
        residual += np.abs((after - before) - explained)
    ledger_ok = residual.max() < 1e-3

    # diffusion-only sub-test: generators off, no agents
    cfg = dataclasses.replace(config, generator_amount=0.0)
    g = np.random.default_rng(0)
    nutrients = {(y, x): (float(g.uniform(0, 10)), 0.0)
                 for y in range(6) for x in range(10)}
    denv = build_env(["EEEEEEEEEE"] * 6, cfg, nutrients=nutrients)
    diff_ok = True
    for _ in range(200):
        before = denv.state_grid[:, :, 0].sum()
        denv, _ = energy_step(denv, cfg)
        diff_ok &= abs(denv.state_grid[:, :, 0].sum() - before) < 1e-6
    report(4, ledger_ok and diff_ok,
           f"cumulative residual {residual.max():.2e} < 1e-3, "
           f"diffusion conserves to 1e-6/step: {diff_ok}")


# -- 5. fertile-init survival and preset ranking ---------------------------------

def test_c05_persistence_survival_and_ranking():
    t0 = time.monotonic()
    mut = MutatorConfig("basic", 0.01)
    reports = {}
    for name in ("persistence", "sideways", "pestilence"):
        preset = make_preset(name, 48, 96)
        reports[name] = evaluate(preset, init_minimal(), mut, seed=0,
                                 n_reps=8, n_steps=1000, n_jobs=N_JOBS)
    dt = time.monotonic() - t0
    ext = reports["persistence"].extinction_count
    means = {k: r.mean_total for k, r in reports.items()}
    ranked = means["persistence"] > means["sideways"] > means["pestilence"]
    report(5, ext == 0 and ranked,
           f"persistence extinctions {ext}/8, totals "
           f"p={means['persistence']:.0f} > s={means['sideways']:.0f} > "
           f"x={means['pestilence']:.0f} ({ranked}), {dt:.0f}s")


# -- 6. pestilence hardship -------------------------------------------------------

def test_c06_pestilence_hardship():
    preset = make_preset("pestilence", 48, 96)
    mut = MutatorConfig("basic", 0.01)
    rep = evaluate(preset, init_minimal(), mut, seed=0, n_reps=16,
                   n_steps=1000, n_jobs=N_JOBS)
    rate = rep.extinction_pct
    report(6, rate > 25.0, f"extinction rate {rate:.1f}% > 25%")


# -- 7. petri interception invariants ----------------------------------------------

def test_c07_petri_interception():
    config, blueprint = make_petri("pestilence")
    g = np.random.Generator(np.random.PCG64(7))
    max_ids = 0
    for trial in range(20):
        if trial < 10:
            vec = g.normal(0, 0.5, MINIMAL_LEN).astype(np.float32)
        else:
            vec = init_minimal().vector + g.normal(0, 0.05, MINIMAL_LEN).astype(np.float32)
        params = AgentParams("minimal", vec)
        env, programs = seeded_world(config, blueprint, params)
        rng = StepRng(trial)
        for _ in range(120):
            env, programs, _ = step(env, programs, config, rng, intercept=True)
            ids = set(env.agent_id_grid[env.type_grid >= 6].tolist())
            max_ids = max(max_ids, len(ids))
    single = max_ids <= 1

    # paired runs agree bit-exactly until the first selected reproduce op
    snaps = {}
    for intercept in (False, True):
        env, programs = seeded_world(config, blueprint, init_minimal())
        rng = StepRng(4)
        frames, selected = [], []
        for _ in range(260):
            env, programs, st = step(env, programs, config, rng,
                                     intercept=intercept)
            frames.append(serialize_env(env))
            selected.append(st.n_repro_selected)
        snaps[intercept] = (frames, selected)
    first = next((i for i in range(260)
                  if snaps[False][1][i] or snaps[True][1][i]), None)
    paired = first is not None and all(
        snaps[False][0][i] == snaps[True][0][i] for i in range(first))
    report(7, single and paired,
           f"distinct-id max {max_ids} <= 1 over 20 runs; paired runs equal "
           f"through step {first}")


# -- 8. PGPE sanity ------------------------------------------------------------------

def test_c08_pgpe_quadratic():
    t0 = time.monotonic()
    rng = np.random.Generator(np.random.PCG64(42))
    target = rng.standard_normal(64) * 0.3
    state = PgpeState.init(np.zeros(64), PgpeConfig(init_std=0.1))
    for _ in range(200):
        samples = pgpe_sample(state, 32, rng)
        fits = -((samples - target) ** 2).sum(axis=1)
        state = pgpe_step(state, fits, samples)
    err = float(np.linalg.norm(state.center - target))
    dt = time.monotonic() - t0
    report(8, err < 0.05 and dt < 10.0, f"|center-c| = {err:.4f} < 0.05 in {dt:.2f}s")


# -- 9. Petri meta-evolution improves deployment --------------------------------------

def test_c09_petri_meta_improves_deployment():
    t0 = time.monotonic()
    init = init_extended()
    best, history = meta_evolve_petri("pestilence", init, seed=0, pop=32,
                                      outer=30, n_jobs=N_JOBS)
    fitness_up = history[-1].best_fitness > history[0].best_fitness

    preset = make_preset("pestilence", 48, 96)
    mut = MutatorConfig("basic", 0.001)
    init_rep = evaluate(preset, init, mut, seed=0, n_reps=16, n_steps=1000,
                        n_jobs=N_JOBS)
    best_rep = evaluate(preset, best, mut, seed=0, n_reps=16, n_steps=1000,
                        n_jobs=N_JOBS)
    halved = best_rep.extinction_count <= init_rep.extinction_count / 2
    dt = time.monotonic() - t0
    report(9, fitness_up and halved and dt < 1800,
           f"petri fitness {history[0].best_fitness:.0f} -> "
           f"{history[-1].best_fitness:.0f}; deployed extinctions "
           f"{init_rep.extinction_count}/16 -> {best_rep.extinction_count}/16 "
           f"({dt/60:.1f} min)")


# -- 10. replay determinism -------------------------------------------------------------

def test_c10_replay_determinism(tmp_path_factory):
    out = tmp_path_factory.mktemp("acc_record")
    config, blueprint = make_preset("persistence", 48, 96)
    mut = MutatorConfig("basic", 0.01)
    env, programs = seeded_world(config, blueprint, init_minimal(), mut)
    record, _, _ = record_run(out / "rec", env, programs, config, blueprint,
                              seed=10, n_steps=1000, snapshot_every=100,
                              mutator=mut)
    ok, problems = replay(load_record(record.path))
    report(10, ok, f"{len(record.snapshot_steps)} snapshots bit-identical "
                   f"({problems if problems else 'zero diffs'})")


# -- 11. mutator statistics ----------------------------------------------------------------

def test_c11_mutator_statistics():
    rng = np.random.Generator(np.random.PCG64(11))
    n = 100_000
    out = mutate_basic(np.zeros(n, dtype=np.float32), 0.05, rng)
    frac = float((out != 0).mean())
    frac_ok = abs(frac - 0.20) <= 0.005

    logic_len = 230
    augmented = np.concatenate([np.zeros(logic_len, dtype=np.float32),
                                np.full(logic_len, 0.01, dtype=np.float32)])
    mutated = mutate_adaptive(augmented, rng)
    double_ok = mutated.size == 2 * logic_len
    report(11, frac_ok and double_ok,
           f"update fraction {frac:.4f} in 0.20 +/- 0.005; adaptive length "
           f"{mutated.size} == 2x{logic_len}")
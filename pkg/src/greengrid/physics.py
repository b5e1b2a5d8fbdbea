"""Per-step environment logic and the master step ordering.

Substep order is fixed: agents act on the state they perceived (parallel ops
first), then exclusive ops commit, then reproduction, then gravity, structural
integrity, aging and energy. Every random draw comes from a labeled substream
of the step's StepRng, so substeps cannot perturb each other's streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import maximum_filter

from .agents import AgentParams, DIR_JITTER, forward_batch, gather_perception_batch
from .cells import (
    IDX_AGE,
    IDX_AIR_NUTRIENT,
    IDX_EARTH_NUTRIENT,
    IDX_STRUCTURAL,
    NULL_AGENT_ID,
    CellType,
    is_agent,
    is_gravity_affected,
    is_intangible,
)
from .config import EnvConfig
from .env import Environment
from .ops import (
    ExclusiveInterface,
    ReproduceInterface,
    _apply_parallel_arrays,
    _sanitize_parallel_arrays,
    propose_air,
    propose_earth,
    propose_reproduce,
    propose_spawn,
    reproduce_pipeline,
    resolve_exclusive,
)
from .programs import ProgramStore
from .rng import StepRng


@dataclass
class StepStats:
    """Per-step counters plus the nutrient ledger terms (per channel)."""

    step: int = 0
    n_agents: int = 0
    births: int = 0
    deaths: int = 0
    n_repro_attempts: int = 0
    n_repro_selected: int = 0
    n_repro_success: int = 0
    n_repro_failed_no_ground: int = 0
    n_repro_failed_table_full: int = 0
    intercepted_successes: int = 0
    generated: np.ndarray = field(default_factory=lambda: np.zeros(2))
    dissipated: np.ndarray = field(default_factory=lambda: np.zeros(2))
    op_costs: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cap_losses: np.ndarray = field(default_factory=lambda: np.zeros(2))
    death_losses: np.ndarray = field(default_factory=lambda: np.zeros(2))

    CSV_HEADER = ("step,n_agents,births,deaths,n_repro_success,n_repro_attempts,"
                  "n_repro_selected,n_repro_failed_no_ground,n_repro_failed_table_full")

    def csv_row(self) -> str:
        return (f"{self.step},{self.n_agents},{self.births},{self.deaths},"
                f"{self.n_repro_success},{self.n_repro_attempts},"
                f"{self.n_repro_selected},{self.n_repro_failed_no_ground},"
                f"{self.n_repro_failed_table_full}")


def gravity_step(env: Environment) -> Environment:
    """Sequential line-by-line fall, bottom row first, so detached blocks
    move as one. Earth always falls; agents only with zero integrity."""
    types, states, ids = env.writable_copies()
    h = env.height
    for y in range(h - 2, -1, -1):
        row, below = types[y], types[y + 1]
        falls = is_gravity_affected(row) & is_intangible(below)
        agent_row = is_agent(row)
        blocked = agent_row & (states[y, :, IDX_STRUCTURAL] > 0.0)
        falls &= ~blocked
        if not falls.any():
            continue
        cols = np.nonzero(falls)[0]
        for grid in (types, ids):
            tmp = grid[y, cols].copy()
            grid[y, cols] = grid[y + 1, cols]
            grid[y + 1, cols] = tmp
        tmp = states[y, cols].copy()
        states[y, cols] = states[y + 1, cols]
        states[y + 1, cols] = tmp
    return Environment(types, states, ids)


def structural_step(env: Environment, config: EnvConfig) -> Environment:
    """One integrity relaxation: sources emit, propagators inherit the 3x3
    max minus their material decay, everything else is zero."""
    types, states, ids = env.writable_copies()
    t = types
    integ = states[:, :, IDX_STRUCTURAL].copy()
    immovable = t == CellType.IMMOVABLE
    earth = t == CellType.EARTH
    agent = is_agent(t)
    integ[immovable] = config.struct_generation
    integ[~(immovable | earth | agent)] = 0.0
    m = maximum_filter(integ, size=3, mode="constant", cval=0.0)
    new = np.zeros_like(integ)
    new[earth] = m[earth] - config.struct_decay_earth
    new[agent] = m[agent] - config.struct_decay_agent
    new[immovable] = config.struct_generation
    np.clip(new, 0.0, config.structural_cap, out=new)
    states[:, :, IDX_STRUCTURAL] = new
    return Environment(types, states, ids)


def aging_step(env: Environment) -> Environment:
    types, states, ids = env.writable_copies()
    agents = is_agent(types)
    states[:, :, IDX_AGE][agents] += 1.0
    return Environment(types, states, ids)


def _neighbor4_count(mask: np.ndarray) -> np.ndarray:
    out = np.zeros(mask.shape, dtype=np.float64)
    out[1:, :] += mask[:-1, :]
    out[:-1, :] += mask[1:, :]
    out[:, 1:] += mask[:, :-1]
    out[:, :-1] += mask[:, 1:]
    return out


def _neighbor4_sum(values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values)
    out[1:, :] += values[:-1, :]
    out[:-1, :] += values[1:, :]
    out[:, 1:] += values[:, :-1]
    out[:, :-1] += values[:, 1:]
    return out


def _diffuse(channel: np.ndarray, mask: np.ndarray, rate: float) -> np.ndarray:
    """Symmetric edge flows between 4-neighbors of the same material.
    Each edge moves rate*(a-b)/2, so the sum is conserved exactly."""
    c = np.where(mask, channel, 0.0)
    delta = np.zeros_like(c)
    pair = mask[:-1, :] & mask[1:, :]
    f = rate * (c[:-1, :] - c[1:, :]) / 2.0 * pair
    delta[:-1, :] -= f
    delta[1:, :] += f
    pair = mask[:, :-1] & mask[:, 1:]
    f = rate * (c[:, :-1] - c[:, 1:]) / 2.0 * pair
    delta[:, :-1] -= f
    delta[:, 1:] += f
    return np.where(mask, channel + delta, channel)


@dataclass
class EnergyStats:
    generated: np.ndarray = field(default_factory=lambda: np.zeros(2))
    dissipated: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cap_loss: np.ndarray = field(default_factory=lambda: np.zeros(2))
    death_loss: np.ndarray = field(default_factory=lambda: np.zeros(2))
    deaths: int = 0


def energy_step(env: Environment, config: EnvConfig,
                rng: np.random.Generator | None = None,
                ) -> tuple[Environment, EnergyStats]:
    """Generation -> diffusion -> harvest -> dissipation -> death."""
    types, states, ids = env.writable_copies()
    t = types
    stats = EnergyStats()
    cap = config.max_nutrient_cell
    earth = t == CellType.EARTH
    air = t == CellType.AIR

    # 1. generation: sources inject into adjacent same-channel material
    for mask, src_type, ch in ((earth, CellType.IMMOVABLE, IDX_EARTH_NUTRIENT),
                               (air, CellType.SUN, IDX_AIR_NUTRIENT)):
        near = (_neighbor4_count(t == src_type) > 0) & mask
        before = states[:, :, ch][near].sum()
        states[:, :, ch][near] = np.minimum(states[:, :, ch][near]
                                            + config.generator_amount, cap)
        stats.generated[ch] += states[:, :, ch][near].sum() - before

    # 2. diffusion among like cells (isolated pockets get nothing); several
    # exchange iterations per step make worlds mix on biological timescales
    for _ in range(config.diffusion_iterations_per_step):
        states[:, :, IDX_EARTH_NUTRIENT] = _diffuse(states[:, :, IDX_EARTH_NUTRIENT],
                                                    earth, config.diffusion_rate)
        states[:, :, IDX_AIR_NUTRIENT] = _diffuse(states[:, :, IDX_AIR_NUTRIENT],
                                                  air, config.diffusion_rate)

    # 3. harvest: each root/leaf draws up to absorption_amount from every
    # adjacent source cell; scarce cells split evenly between requesters
    for taker_type, src_mask, ch in ((CellType.AGENT_ROOT, earth, IDX_EARTH_NUTRIENT),
                                     (CellType.AGENT_LEAF, air, IDX_AIR_NUTRIENT)):
        takers = t == taker_type
        if not takers.any():
            continue
        requesters = _neighbor4_count(takers) * src_mask
        supply = states[:, :, ch] * src_mask
        grant = np.zeros_like(supply)
        busy = requesters > 0
        grant[busy] = np.minimum(config.absorption_amount,
                                 supply[busy] / requesters[busy])
        states[:, :, ch][src_mask] -= (grant * requesters)[src_mask]
        gain = _neighbor4_sum(grant * src_mask)
        stored = states[:, :, ch][takers]
        new = np.minimum(stored + gain[takers], cap)
        stats.cap_loss[ch] += (stored + gain[takers] - new).sum()
        states[:, :, ch][takers] = new

    # 4. dissipation: both channels pay the same upkeep; old cells pay more
    agents = is_agent(t)
    if agents.any():
        upkeep = np.zeros(t.shape)
        for ct in (CellType.AGENT_UNSPECIALIZED, CellType.AGENT_ROOT,
                   CellType.AGENT_LEAF, CellType.AGENT_FLOWER):
            upkeep[t == ct] = config.dissipation_for(ct)
        half_life = config.max_lifetime / 2.0
        over = states[:, :, IDX_AGE] - half_life
        upkeep += np.where(agents & (over > 0), config.aging_slope * over, 0.0)

        died = np.zeros(t.shape, dtype=bool)
        for ch in (IDX_EARTH_NUTRIENT, IDX_AIR_NUTRIENT):
            stored = states[:, :, ch]
            pay = np.minimum(stored, upkeep) * agents
            stored -= pay
            stats.dissipated[ch] += pay.sum()
            died |= agents & (pay < upkeep * agents) & agents
        died &= agents

        # 5. death: keep whichever nutrient is left, as earth, else air, else void
        if died.any():
            stats.deaths = int(died.sum())
            e_left = states[:, :, IDX_EARTH_NUTRIENT]
            a_left = states[:, :, IDX_AIR_NUTRIENT]
            to_earth = died & (e_left > 0)
            to_air = died & ~to_earth & (a_left > 0)
            to_void = died & ~to_earth & ~to_air
            stats.death_loss[IDX_AIR_NUTRIENT] += a_left[to_earth].sum()
            stats.death_loss[IDX_EARTH_NUTRIENT] += e_left[to_air].sum()

            keep_e = e_left[to_earth].copy()
            keep_a = a_left[to_air].copy()
            states[died] = 0.0
            types[to_earth] = CellType.EARTH
            states[:, :, IDX_EARTH_NUTRIENT][to_earth] = keep_e
            types[to_air] = CellType.AIR
            states[:, :, IDX_AIR_NUTRIENT][to_air] = keep_a
            types[to_void] = CellType.VOID
            ids[died] = NULL_AGENT_ID

    return Environment(types, states, ids), stats


def agent_positions(env: Environment) -> np.ndarray:
    return np.argwhere(is_agent(env.type_grid))


def step(env: Environment, programs: ProgramStore, config: EnvConfig,
         rng: StepRng, mutator=None, intercept: bool = False,
         ) -> tuple[Environment, ProgramStore, StepStats]:
    """One full world step; returns the new snapshot and its stats."""
    stats = StepStats(step=rng.step_index)
    positions = agent_positions(env)
    n = positions.shape[0]

    repro_interfaces = []
    if n > 0:
        types9, states9, same8 = gather_perception_batch(env, positions)
        ids_at = env.agent_id_grid[positions[:, 0], positions[:, 1]]
        jitter = rng.substream("agents").random((n, 8)) * DIR_JITTER

        spec_logits = np.zeros((n, 4))
        gift_fracs = np.zeros((n, 8, 2))
        dir_logits = np.zeros((n, 8))
        spawn_logit = np.zeros(n)
        split_frac = np.zeros(n)
        repro_logit = np.zeros(n)
        new_internal = states9[:, 4, 4:].copy()

        for agent_id in sorted(set(ids_at.tolist())):
            sel = np.nonzero(ids_at == agent_id)[0]
            entry = programs.get(int(agent_id))
            params = AgentParams(entry.arch, entry.logic)
            out = forward_batch(params, types9[sel], states9[sel], same8[sel])
            spec_logits[sel] = out["spec_logits"]
            gift_fracs[sel] = out["gift_fracs"]
            dir_logits[sel] = out["dir_logits"]
            spawn_logit[sel] = out["spawn_logit"]
            split_frac[sel] = out["split_frac"]
            repro_logit[sel] = out["repro_logit"]
            new_internal[sel] = out["new_internal"]
        dir_logits += jitter

        # parallel ops: sanitize + commit simultaneously
        own_types = types9[:, 4]
        stored = states9[:, 4, :2].copy()
        nbr_is_agent = is_agent(types9[:, list(range(4)) + list(range(5, 9))]).astype(float)
        # reorder columns to ops.OFFSETS order (identical ordering by construction)
        spec_target, gifts = _sanitize_parallel_arrays(
            own_types, stored, nbr_is_agent, spec_logits, gift_fracs, config)
        env, pstats = _apply_parallel_arrays(env, positions, spec_target, gifts,
                                             new_internal, config)
        stats.op_costs += pstats.op_cost
        stats.cap_losses += pstats.cap_loss

        # exclusive ops on the post-parallel snapshot
        spawn_interfaces = [
            ((int(py), int(px)), ExclusiveInterface(float(spawn_logit[i]),
                                                    dir_logits[i], float(split_frac[i])))
            for i, (py, px) in enumerate(positions)
            if spawn_logit[i] > 0.0
        ]
        repro_interfaces = [
            ((int(py), int(px)), ReproduceInterface(float(repro_logit[i])))
            for i, (py, px) in enumerate(positions)
            if repro_logit[i] > 0.0
        ]
    else:
        spawn_interfaces = []

    ops = propose_air(env, rng.substream("air"))
    ops += propose_earth(env, rng.substream("earth"))
    ops += propose_spawn(spawn_interfaces, env, rng.substream("spawn"), config)
    env, xstats = resolve_exclusive(env, ops, rng.substream("resolve"))
    stats.op_costs += xstats.loss
    stats.births += xstats.n_spawned

    repro_ops = propose_reproduce(repro_interfaces, env, config)
    env, programs, rstats = reproduce_pipeline(
        env, repro_ops, programs, mutator, rng.substream("reproduce"), config,
        intercept=intercept)
    stats.n_repro_attempts = rstats.attempts
    stats.n_repro_selected = rstats.selected
    stats.n_repro_success = rstats.placed
    stats.n_repro_failed_no_ground = rstats.failed_no_ground
    stats.n_repro_failed_table_full = rstats.failed_table_full
    stats.intercepted_successes = rstats.intercepted_successes
    stats.births += 2 * rstats.placed
    stats.op_costs += rstats.op_cost + rstats.loss

    env = gravity_step(env)
    for _ in range(config.struct_iterations_per_step):
        env = structural_step(env, config)
    env = aging_step(env)
    env, estats = energy_step(env, config, rng.substream("energy"))

    stats.generated += estats.generated
    stats.dissipated += estats.dissipated
    stats.cap_losses += estats.cap_loss
    stats.death_losses += estats.death_loss
    stats.deaths = estats.deaths
    stats.n_agents = int(np.count_nonzero(is_agent(env.type_grid)))
    rng.advance()
    return env, programs, stats

"""Operation records, interface sanitization, and conflict resolution.

Cells never touch the grid directly. Agent logic emits untrusted interfaces;
this module converts them into physics-legal operations, accumulates them,
and commits them atomically (one winner per contested cell).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cells import (
    IDX_AGE,
    IDX_AIR_NUTRIENT,
    IDX_EARTH_NUTRIENT,
    NULL_AGENT_ID,
    CellType,
    is_agent,
)
from .config import EnvConfig
from .env import REPLACEABLE, Environment, find_seed_site, live_agent_ids
from .programs import ProgramStore

# 8-neighborhood scan order, row-major without the center.
OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))

# Specialization slots an agent can request: none/keep, then the three roles.
SPEC_TARGETS = (None, CellType.AGENT_ROOT, CellType.AGENT_LEAF, CellType.AGENT_FLOWER)


# --- interfaces (untrusted agent output) -----------------------------------

@dataclass
class ParallelInterface:
    spec_logits: np.ndarray        # (4,) none/root/leaf/flower
    gift_fracs: np.ndarray         # (8, 2) requested gift fraction per neighbor/channel
    new_internal: np.ndarray       # (k,) replacement internal state


@dataclass
class ExclusiveInterface:
    spawn_logit: float
    dir_logits: np.ndarray         # (8,)
    split_frac: float              # share of post-cost nutrients given to the child


@dataclass
class ReproduceInterface:
    trigger_logit: float


# --- validated operations ---------------------------------------------------

@dataclass
class ParallelOp:
    pos: tuple[int, int]
    new_internal: np.ndarray
    specialize_to: CellType | None
    gifts: np.ndarray              # (8, 2) absolute amounts, >= 0


@dataclass
class CellWrite:
    cell_type: CellType
    state: np.ndarray
    agent_id: int


@dataclass
class ExclusiveOp:
    kind: str                      # "air" | "earth" | "spawn"
    actor_pos: tuple[int, int]
    target_pos: tuple[int, int]
    target_write: CellWrite
    actor_write: CellWrite | None  # None: actor cell untouched


@dataclass
class ReproduceOp:
    pos: tuple[int, int]
    agent_id: int
    remaining: tuple[float, float]  # nutrients left after reproduce_cost


@dataclass
class ParallelStats:
    spec_count: int = 0
    op_cost: np.ndarray = field(default_factory=lambda: np.zeros(2))
    cap_loss: np.ndarray = field(default_factory=lambda: np.zeros(2))


@dataclass
class ExclusiveStats:
    n_ops: int = 0
    n_applied: int = 0
    n_invalidated: int = 0
    n_spawned: int = 0
    loss: np.ndarray = field(default_factory=lambda: np.zeros(2))
    write_log: list = field(default_factory=list)


@dataclass
class ReproStats:
    attempts: int = 0
    selected: int = 0
    placed: int = 0
    failed_no_ground: int = 0
    failed_table_full: int = 0
    intercepted_successes: int = 0
    op_cost: np.ndarray = field(default_factory=lambda: np.zeros(2))
    loss: np.ndarray = field(default_factory=lambda: np.zeros(2))


# --- parallel ops -----------------------------------------------------------

def _sanitize_parallel_arrays(own_type, stored, nbr_is_agent, spec_logits,
                              gift_fracs, config: EnvConfig):
    """Vectorized sanitization core shared by the record API and the step loop.

    All arrays are batched over N actors. Returns (spec_target, gift_amounts)
    where spec_target is -1 for "keep current".
    """
    n = own_type.shape[0]
    logits = np.nan_to_num(np.asarray(spec_logits, dtype=np.float64),
                           nan=-np.inf, posinf=1e30, neginf=-1e30)
    target_idx = np.argmax(logits, axis=1)

    target_type = np.zeros(n, dtype=np.int64)
    for i, t in enumerate(SPEC_TARGETS[1:], start=1):
        target_type[target_idx == i] = int(t)

    cost_e, cost_a = config.specialize_cost
    can_pay = (stored[:, 0] >= cost_e) & (stored[:, 1] >= cost_a)
    wants = (target_idx != 0) & (target_type != own_type)
    specializing = wants & can_pay
    spec_target = np.where(specializing, target_type, -1)

    avail = stored.copy()
    avail[specializing, 0] -= cost_e
    avail[specializing, 1] -= cost_a
    np.clip(avail, 0.0, None, out=avail)

    fracs = np.nan_to_num(np.asarray(gift_fracs, dtype=np.float64),
                          nan=0.0, posinf=1.0, neginf=0.0)
    np.clip(fracs, 0.0, 1.0, out=fracs)
    fracs *= nbr_is_agent[:, :, None]
    # frac * avail/8 bounds each edge; the donor additionally never sheds more
    # than half its stock per step, so it cannot gift itself to death
    gifts = fracs * (avail[:, None, :] / 8.0)
    total = gifts.sum(axis=1)
    limit = avail / 2.0
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(total > limit, limit / np.maximum(total, 1e-300), 1.0)
    gifts *= scale[:, None, :]
    return spec_target, gifts


def sanitize_parallel(interface: ParallelInterface, env: Environment,
                      pos: tuple[int, int], config: EnvConfig) -> ParallelOp:
    """Clamp an untrusted interface into an always-valid ParallelOp."""
    y, x = pos
    own_type = np.array([env.type_grid[y, x]], dtype=np.int64)
    stored = env.state_grid[y, x, :2][None, :].copy()
    nbr_agent = np.zeros((1, 8))
    for i, (dy, dx) in enumerate(OFFSETS):
        ny, nx = y + dy, x + dx
        if 0 <= ny < env.height and 0 <= nx < env.width:
            nbr_agent[0, i] = float(is_agent(int(env.type_grid[ny, nx])))
    spec_target, gifts = _sanitize_parallel_arrays(
        own_type, stored, nbr_agent, interface.spec_logits[None, :],
        interface.gift_fracs[None, :, :], config)
    target = None if spec_target[0] < 0 else CellType(int(spec_target[0]))
    return ParallelOp(pos=pos, new_internal=np.asarray(interface.new_internal, dtype=np.float64),
                      specialize_to=target, gifts=gifts[0])


def _apply_parallel_arrays(env: Environment, positions, spec_target, gifts,
                           new_internal, config: EnvConfig):
    """Commit a batch of sanitized parallel ops simultaneously."""
    types, states, ids = env.writable_copies()
    stats = ParallelStats()
    ys, xs = positions[:, 0], positions[:, 1]

    specializing = spec_target >= 0
    cost = np.asarray(config.specialize_cost)
    if specializing.any():
        types[ys[specializing], xs[specializing]] = spec_target[specializing].astype(np.uint8)
        stats.spec_count = int(specializing.sum())
        stats.op_cost += cost * stats.spec_count

    if new_internal is not None and new_internal.shape[1] > 0:
        states[ys, xs, 4:] = new_internal

    # debit donors, then accumulate credits, then clamp at the cell cap
    debits = gifts.sum(axis=1)  # (n, 2)
    debits[specializing] += cost
    for ch in (0, 1):
        states[ys, xs, ch] -= debits[:, ch]

    h, w = types.shape
    credit = np.zeros((h, w, 2))
    for i, (dy, dx) in enumerate(OFFSETS):
        ny, nx = ys + dy, xs + dx
        ok = (ny >= 0) & (ny < h) & (nx >= 0) & (nx < w)
        np.add.at(credit, (ny[ok], nx[ok]), gifts[ok, i, :])
    states[:, :, :2] += credit

    over = states[:, :, :2] - config.max_nutrient_cell
    np.clip(over, 0.0, None, out=over)
    stats.cap_loss += over.sum(axis=(0, 1))
    np.clip(states[:, :, :2], 0.0, config.max_nutrient_cell, out=states[:, :, :2])

    return Environment(types, states, ids), stats


def apply_parallel(env: Environment, ops: list[ParallelOp],
                   config: EnvConfig) -> tuple[Environment, ParallelStats]:
    """Apply parallel ops; gifts accumulate additively, order-independent."""
    if not ops:
        return env, ParallelStats()
    positions = np.array([op.pos for op in ops], dtype=np.int64)
    spec_target = np.array(
        [-1 if op.specialize_to is None else int(op.specialize_to) for op in ops],
        dtype=np.int64)
    gifts = np.stack([op.gifts for op in ops])
    k = env.state_size - 4
    new_internal = np.stack([np.resize(op.new_internal, k) for op in ops]) if k else None
    return _apply_parallel_arrays(env, positions, spec_target, gifts, new_internal, config)


# --- exclusive ops ----------------------------------------------------------

def _cell_write_from(env: Environment, pos: tuple[int, int]) -> CellWrite:
    y, x = pos
    return CellWrite(CellType(int(env.type_grid[y, x])),
                     env.state_grid[y, x].copy(),
                     int(env.agent_id_grid[y, x]))


def propose_air(env: Environment, rng: np.random.Generator) -> list[ExclusiveOp]:
    """Each Air cell next to Void proposes one new Air cell in a random Void."""
    t = env.type_grid
    h, w = t.shape
    void = t == CellType.VOID
    air_ys, air_xs = np.nonzero(t == CellType.AIR)
    ops: list[ExclusiveOp] = []
    s = env.state_size
    for y, x in zip(air_ys.tolist(), air_xs.tolist()):
        choices = [(y + dy, x + dx) for dy, dx in OFFSETS
                   if 0 <= y + dy < h and 0 <= x + dx < w and void[y + dy, x + dx]]
        if not choices:
            continue
        target = choices[int(rng.integers(len(choices)))]
        ops.append(ExclusiveOp(
            kind="air", actor_pos=(y, x), target_pos=target,
            target_write=CellWrite(CellType.AIR, np.zeros(s), NULL_AGENT_ID),
            actor_write=None))
    return ops


def propose_earth(env: Environment, rng: np.random.Generator) -> list[ExclusiveOp]:
    """Falling-sand side shift: supported Earth that could fall diagonally
    swaps into the free side cell; gravity then drops it."""
    t = env.type_grid
    h, w = t.shape
    intangible = ((t == CellType.VOID) | (t == CellType.AIR))
    ops: list[ExclusiveOp] = []
    earth_ys, earth_xs = np.nonzero(t == CellType.EARTH)
    for y, x in zip(earth_ys.tolist(), earth_xs.tolist()):
        if y + 1 >= h or intangible[y + 1, x]:
            continue  # unsupported: straight fall is gravity's job
        sides = []
        for dx in (-1, 1):
            nx = x + dx
            if 0 <= nx < w and intangible[y, nx] and y + 1 < h and intangible[y + 1, nx]:
                sides.append(dx)
        if not sides:
            continue
        dx = sides[0] if len(sides) == 1 else sides[int(rng.integers(2))]
        target = (y, x + dx)
        ops.append(ExclusiveOp(
            kind="earth", actor_pos=(y, x), target_pos=target,
            target_write=_cell_write_from(env, (y, x)),
            actor_write=_cell_write_from(env, target)))
    return ops


def propose_spawn(interfaces: list[tuple[tuple[int, int], ExclusiveInterface]],
                  env: Environment, rng: np.random.Generator,
                  config: EnvConfig) -> list[ExclusiveOp]:
    """Validate agent spawn wishes into ExclusiveOps.

    Drops the op when the actor lacks funds or has no replaceable neighbor;
    otherwise aims at the best-scored legal direction.
    """
    t = env.type_grid
    h, w = t.shape
    cost = np.asarray(config.spawn_cost)
    ops: list[ExclusiveOp] = []
    for pos, iface in interfaces:
        if not np.isfinite(iface.spawn_logit) or iface.spawn_logit <= 0.0:
            continue
        y, x = pos
        stored = env.state_grid[y, x, :2]
        if stored[0] < cost[0] or stored[1] < cost[1]:
            continue
        logits = np.nan_to_num(np.asarray(iface.dir_logits, dtype=np.float64),
                               nan=-np.inf, posinf=1e30, neginf=-1e30).copy()
        legal = False
        for i, (dy, dx) in enumerate(OFFSETS):
            ny, nx = y + dy, x + dx
            if not (0 <= ny < h and 0 <= nx < w) or t[ny, nx] not in REPLACEABLE:
                logits[i] = -np.inf
            else:
                legal = True
        if not legal:
            continue
        direction = int(np.argmax(logits))
        dy, dx = OFFSETS[direction]
        target = (y + dy, x + dx)

        frac = float(np.nan_to_num(iface.split_frac, nan=0.5))
        frac = min(max(frac, 0.0), 1.0)
        post = stored - cost
        child_nut = post * frac
        actor_nut = post - child_nut

        s = env.state_size
        child_state = np.zeros(s)
        child_state[IDX_EARTH_NUTRIENT] = child_nut[0]
        child_state[IDX_AIR_NUTRIENT] = child_nut[1]
        child_state[IDX_AGE] = env.state_grid[y, x, IDX_AGE]  # age runs in the lineage
        actor = _cell_write_from(env, pos)
        actor.state[IDX_EARTH_NUTRIENT] = actor_nut[0]
        actor.state[IDX_AIR_NUTRIENT] = actor_nut[1]
        ops.append(ExclusiveOp(
            kind="spawn", actor_pos=pos, target_pos=target,
            target_write=CellWrite(CellType.AGENT_UNSPECIALIZED, child_state,
                                   int(env.agent_id_grid[y, x])),
            actor_write=actor))
    return ops


def resolve_exclusive(env: Environment, ops: list[ExclusiveOp],
                      rng: np.random.Generator) -> tuple[Environment, ExclusiveStats]:
    """Atomic commit: one uniformly random winner per contested target cell.

    A winner whose actor cell is itself the target of another winner is
    invalidated before commit (single pass over the winner set, so mutual
    overwrites cancel each other).
    """
    stats = ExclusiveStats(n_ops=len(ops))
    if not ops:
        return env, stats

    by_target: dict[tuple[int, int], list[ExclusiveOp]] = {}
    for op in ops:
        by_target.setdefault(op.target_pos, []).append(op)

    winners: list[ExclusiveOp] = []
    for target in sorted(by_target):
        group = by_target[target]
        winners.append(group[0] if len(group) == 1 else group[int(rng.integers(len(group)))])

    winner_targets = {op.target_pos for op in winners}
    valid = [op for op in winners if op.actor_pos not in winner_targets]
    stats.n_invalidated = len(winners) - len(valid)

    before = env.state_grid[:, :, :2].sum(axis=(0, 1))
    types, states, ids = env.writable_copies()
    for op in valid:
        for pos, write in ((op.target_pos, op.target_write), (op.actor_pos, op.actor_write)):
            if write is None:
                continue
            y, x = pos
            types[y, x] = write.cell_type
            states[y, x] = write.state
            ids[y, x] = write.agent_id
            stats.write_log.append(pos)
        stats.n_applied += 1
        if op.kind == "spawn":
            stats.n_spawned += 1
    out = Environment(types, states, ids)
    stats.loss += before - out.state_grid[:, :, :2].sum(axis=(0, 1))
    return out, stats


# --- reproduce ops ----------------------------------------------------------

def propose_reproduce(interfaces: list[tuple[tuple[int, int], ReproduceInterface]],
                      env: Environment, config: EnvConfig) -> list[ReproduceOp]:
    """Keep only triggered flowers that can pay the cost."""
    cost = config.reproduce_cost
    ops: list[ReproduceOp] = []
    for pos, iface in interfaces:
        if not np.isfinite(iface.trigger_logit) or iface.trigger_logit <= 0.0:
            continue
        y, x = pos
        if env.type_grid[y, x] != CellType.AGENT_FLOWER:
            continue
        stored = env.state_grid[y, x, :2]
        if stored[0] < cost[0] or stored[1] < cost[1]:
            continue
        ops.append(ReproduceOp(pos=pos, agent_id=int(env.agent_id_grid[y, x]),
                               remaining=(float(stored[0] - cost[0]),
                                          float(stored[1] - cost[1]))))
    return ops


def _adjacent_air_count(env: Environment, pos: tuple[int, int]) -> int:
    y, x = pos
    n = 0
    for dy, dx in OFFSETS:
        ny, nx = y + dy, x + dx
        if 0 <= ny < env.height and 0 <= nx < env.width \
                and env.type_grid[ny, nx] == CellType.AIR:
            n += 1
    return n


def _select_weighted(ops: list[ReproduceOp], weights: list[int], budget: int,
                     rng: np.random.Generator) -> list[int]:
    """Sample up to `budget` op indices without replacement, p proportional to weight."""
    picked: list[int] = []
    w = np.asarray(weights, dtype=np.float64)
    while len(picked) < budget and w.sum() > 0:
        p = w / w.sum()
        idx = int(rng.choice(len(ops), p=p))
        picked.append(idx)
        w[idx] = 0.0
    return picked


def reproduce_pipeline(env: Environment, repro_ops: list[ReproduceOp],
                       programs: ProgramStore, mutator, rng: np.random.Generator,
                       config: EnvConfig, intercept: bool = False,
                       ) -> tuple[Environment, ProgramStore, ReproStats]:
    """Select flowers (weighted by adjacent Air), consume them, try to seed.

    With intercept=True no seed is ever placed; a selection counts as a
    successful reproduction when the remainder clears seed_min_nutrient on
    both channels. Selected flowers are consumed either way.
    """
    from .mutators import spawn_child_params

    stats = ReproStats(attempts=len(repro_ops))
    if not repro_ops:
        return env, programs, stats

    weights = [_adjacent_air_count(env, op.pos) for op in repro_ops]
    picked = _select_weighted(repro_ops, weights, config.max_reproduce_per_step, rng)
    if not picked:
        return env, programs, stats

    programs = programs.clone()
    cost = np.asarray(config.reproduce_cost)
    for idx in picked:
        op = repro_ops[idx]
        stats.selected += 1
        stats.op_cost += cost
        y, x = op.pos
        types, states, ids = env.writable_copies()
        types[y, x] = CellType.VOID
        states[y, x] = 0.0
        ids[y, x] = NULL_AGENT_ID
        env = Environment(types, states, ids)

        remaining = np.asarray(op.remaining)
        if intercept:
            if remaining[0] >= config.seed_min_nutrient and remaining[1] >= config.seed_min_nutrient:
                stats.intercepted_successes += 1
            stats.loss += remaining
            continue

        columns = [c for c in (x - 1, x, x + 1) if 0 <= c < env.width]
        site_col, site = None, None
        for c in rng.permutation(columns).tolist():
            found = find_seed_site(env, c)
            if found is not None:
                site_col, site = c, found
                break
        if site is None:
            stats.failed_no_ground += 1
            stats.loss += remaining
            continue

        parent = programs.get(op.agent_id)
        if mutator is None:
            child_id, child_entry = op.agent_id, parent
        else:
            if programs.is_full:
                programs.release_dead(live_agent_ids(env))
            if programs.is_full:
                stats.failed_table_full += 1
                stats.loss += remaining
                continue
            child_entry = spawn_child_params(parent, mutator, rng)
            child_id = programs.mint(child_entry)

        types, states, ids = env.writable_copies()
        half = remaining / 2.0
        for sy in site:
            # seed cells overwrite replaceable cells; their old nutrients are lost
            stats.loss += states[sy, site_col, :2].copy()
            types[sy, site_col] = CellType.AGENT_UNSPECIALIZED
            states[sy, site_col] = 0.0
            states[sy, site_col, IDX_EARTH_NUTRIENT] = half[0]
            states[sy, site_col, IDX_AIR_NUTRIENT] = half[1]
            ids[sy, site_col] = child_id
        env = Environment(types, states, ids)
        stats.placed += 1
    return env, programs, stats

"""Agent logic: perception encoding and the two cell policies.

Two architectures share one interface contract:

* "minimal": an affine map over hand-picked features. Per-neighbor outputs
  (gift fractions, spawn direction score) use one weight block tied across
  all 8 neighbors; global outputs (specialization, spawn/reproduce triggers,
  spawn split) read aggregate features. ~230 parameters.
* "extended": the minimal map plus a tanh hidden layer whose output weights
  start at zero, so at initialization it behaves exactly like the minimal
  policy. It can also read and write 8 internal state channels. ~12k params.

The initialization weights are hand-set so that a fresh two-cell seed
specializes into root+leaf, routes nutrient surplus to needier cells of the
same organism, grows shoots up and roots down, converts rich tip cells into
flowers, and triggers reproduction once a flower has stockpiled enough.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cells import (
    IDX_AGE,
    IDX_AIR_NUTRIENT,
    IDX_EARTH_NUTRIENT,
    IDX_STRUCTURAL,
    N_CELL_TYPES,
    CellType,
    is_agent,
)
from .env import Environment
from .ops import OFFSETS, ExclusiveInterface, ParallelInterface, ReproduceInterface

# Fixed feature scales. The hand-designed weights assume the preset family's
# magnitudes (nutrient cap 10, maturity around a few hundred steps); evolution
# is free to re-scale around them.
NUTRIENT_SCALE = 0.1
AGE_SCALE = 1.0 / 600.0
STRUCT_SCALE = 0.005
DIR_JITTER = 1e-3

OFFSETS9 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1),
            (1, -1), (1, 0), (1, 1))
CENTER9 = 4
NEIGHBOR_IDX9 = (0, 1, 2, 3, 5, 6, 7, 8)  # 9-cell order -> ops.OFFSETS order

BELOW_SLOTS = (5, 6, 7)  # ops.OFFSETS indices (1,-1),(1,0),(1,1)
ABOVE_SLOTS = (0, 1, 2)

# --- minimal architecture layout -------------------------------------------

FN_TYPE0 = 0          # 10 one-hot neighbor type
FN_SAME = 10
FN_NBR_E = 11
FN_NBR_A = 12
FN_OWN_E = 13
FN_OWN_A = 14
FN_DIFF_E = 15
FN_DIFF_A = 16
FN_NBR_AGE = 17
FN_NBR_STRUCT = 18
FN_POS0 = 19          # 8 one-hot neighbor slot
FN_ROOT_BELOW = 27    # own-root x below-slot interaction
FN_SHOOT_ABOVE = 28   # own-shoot x above-slot interaction
FN_OWN_FLOWER = 29    # flowers hoard: gate their outgoing gifts
FN_DIM = 30

RN_GIFT_E, RN_GIFT_A, RN_DIR = 0, 1, 2
RN_DIM = 3

FG_SPEC0 = 0          # 4 one-hot own specialization
FG_OWN_E = 4
FG_OWN_A = 5
FG_AGE = 6
FG_COUNT0 = 7         # 10 neighbor type counts / 8
FG_SAME_COUNT = 17
FG_STRUCT = 18
FG_OWN_MIN = 19       # min(earth, air): solvency on both channels
FG_BIAS = 20
FG_DIM = 21

RG_NONE, RG_ROOT, RG_LEAF, RG_FLOWER = 0, 1, 2, 3
RG_SPAWN, RG_SPLIT, RG_REPRO = 4, 5, 6
RG_DIM = 7

MINIMAL_LEN = RN_DIM * FN_DIM + RN_DIM + RG_DIM * FG_DIM  # 230

# --- extended architecture layout -------------------------------------------

EXT_HIDDEN = 64
EXT_INTERNAL = 8
EXT_CELL_FEAT = N_CELL_TYPES + 4            # onehot + e + a + age + integrity
EXT_IN = 9 * EXT_CELL_FEAT + 8 + EXT_INTERNAL  # 142
EXT_OUT = RG_DIM + 8 * RN_DIM + EXT_INTERNAL   # 39
EXTENDED_LEN = (MINIMAL_LEN + EXT_HIDDEN * EXT_IN + EXT_HIDDEN
                + EXT_OUT * EXT_HIDDEN + EXT_OUT)


@dataclass(frozen=True)
class AgentParams:
    arch: str
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=np.float32)
        if self.arch == "minimal":
            expected = MINIMAL_LEN
        elif self.arch == "extended":
            expected = EXTENDED_LEN
        else:
            raise ValueError(f"unknown architecture {self.arch!r}")
        if v.size != expected:
            raise ValueError(f"{self.arch} expects {expected} params, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("agent params must be finite")
        object.__setattr__(self, "vector", v)
        v.flags.writeable = False


@dataclass(frozen=True)
class Perception:
    """A cell's whole world: its 3x3 neighborhood, ids reduced to a mask."""

    types: np.ndarray      # (3, 3) int
    states: np.ndarray     # (3, 3, S) float
    same_mask: np.ndarray  # (8,) bool, ops.OFFSETS order


def perceive(env: Environment, pos: tuple[int, int]) -> Perception:
    y, x = pos
    h, w = env.height, env.width
    s = env.state_size
    types = np.full((3, 3), int(CellType.OUT_OF_BOUNDS), dtype=np.int64)
    states = np.zeros((3, 3, s))
    ids = np.zeros((3, 3), dtype=np.uint32)
    for j, (dy, dx) in enumerate(OFFSETS9):
        ny, nx = y + dy, x + dx
        if 0 <= ny < h and 0 <= nx < w:
            types[1 + dy, 1 + dx] = env.type_grid[ny, nx]
            states[1 + dy, 1 + dx] = env.state_grid[ny, nx]
            ids[1 + dy, 1 + dx] = env.agent_id_grid[ny, nx]
    own_id = ids[1, 1]
    flat_ids = ids.reshape(9)
    same = (flat_ids[list(NEIGHBOR_IDX9)] == own_id) & (flat_ids[list(NEIGHBOR_IDX9)] != 0) \
        & (own_id != 0)
    return Perception(types=types, states=states, same_mask=same)


def gather_perception_batch(env: Environment, positions: np.ndarray):
    """(types9, states9, same8) arrays for N cells, padded with OutOfBounds."""
    h, w = env.height, env.width
    s = env.state_size
    tpad = np.full((h + 2, w + 2), int(CellType.OUT_OF_BOUNDS), dtype=np.int64)
    tpad[1:-1, 1:-1] = env.type_grid
    spad = np.zeros((h + 2, w + 2, s))
    spad[1:-1, 1:-1] = env.state_grid
    ipad = np.zeros((h + 2, w + 2), dtype=np.uint32)
    ipad[1:-1, 1:-1] = env.agent_id_grid

    ys, xs = positions[:, 0] + 1, positions[:, 1] + 1
    n = positions.shape[0]
    types9 = np.empty((n, 9), dtype=np.int64)
    states9 = np.empty((n, 9, s))
    ids9 = np.empty((n, 9), dtype=np.uint32)
    for j, (dy, dx) in enumerate(OFFSETS9):
        types9[:, j] = tpad[ys + dy, xs + dx]
        states9[:, j] = spad[ys + dy, xs + dx]
        ids9[:, j] = ipad[ys + dy, xs + dx]
    own = ids9[:, CENTER9]
    nbr = ids9[:, list(NEIGHBOR_IDX9)]
    same8 = (nbr == own[:, None]) & (nbr != 0) & (own[:, None] != 0)
    return types9, states9, same8


# --- feature construction ----------------------------------------------------

def _minimal_features(types9, states9, same8):
    n = types9.shape[0]
    own_t = types9[:, CENTER9]
    own_e = states9[:, CENTER9, IDX_EARTH_NUTRIENT] * NUTRIENT_SCALE
    own_a = states9[:, CENTER9, IDX_AIR_NUTRIENT] * NUTRIENT_SCALE

    fN = np.zeros((n, 8, FN_DIM))
    for i, j in enumerate(NEIGHBOR_IDX9):
        t = types9[:, j]
        fN[np.arange(n), i, FN_TYPE0 + t] = 1.0
        fN[:, i, FN_SAME] = same8[:, i]
        ne = states9[:, j, IDX_EARTH_NUTRIENT] * NUTRIENT_SCALE
        na = states9[:, j, IDX_AIR_NUTRIENT] * NUTRIENT_SCALE
        fN[:, i, FN_NBR_E] = ne
        fN[:, i, FN_NBR_A] = na
        fN[:, i, FN_OWN_E] = own_e
        fN[:, i, FN_OWN_A] = own_a
        fN[:, i, FN_DIFF_E] = own_e - ne
        fN[:, i, FN_DIFF_A] = own_a - na
        fN[:, i, FN_NBR_AGE] = np.clip(states9[:, j, IDX_AGE] * AGE_SCALE, 0.0, 2.0)
        fN[:, i, FN_NBR_STRUCT] = states9[:, j, IDX_STRUCTURAL] * STRUCT_SCALE
        fN[:, i, FN_POS0 + i] = 1.0
    is_root = own_t == CellType.AGENT_ROOT
    is_shoot = (own_t == CellType.AGENT_LEAF) | (own_t == CellType.AGENT_FLOWER)
    for slot in BELOW_SLOTS:
        fN[is_root, slot, FN_ROOT_BELOW] = 1.0
    for slot in ABOVE_SLOTS:
        fN[is_shoot, slot, FN_SHOOT_ABOVE] = 1.0
    fN[own_t == CellType.AGENT_FLOWER, :, FN_OWN_FLOWER] = 1.0

    g = np.zeros((n, FG_DIM))
    spec_idx = np.clip(own_t - int(CellType.AGENT_UNSPECIALIZED), 0, 3)
    g[np.arange(n), FG_SPEC0 + spec_idx] = is_agent(own_t)
    g[:, FG_OWN_E] = own_e
    g[:, FG_OWN_A] = own_a
    g[:, FG_AGE] = np.clip(states9[:, CENTER9, IDX_AGE] * AGE_SCALE, 0.0, 2.0)
    for j in NEIGHBOR_IDX9:
        g[np.arange(n), FG_COUNT0 + types9[:, j]] += 1.0 / 8.0
    g[:, FG_SAME_COUNT] = same8.sum(axis=1) / 8.0
    g[:, FG_STRUCT] = states9[:, CENTER9, IDX_STRUCTURAL] * STRUCT_SCALE
    g[:, FG_OWN_MIN] = np.minimum(own_e, own_a)
    g[:, FG_BIAS] = 1.0
    return fN, g


def _extended_features(types9, states9, same8):
    n = types9.shape[0]
    feats = np.zeros((n, EXT_IN))
    col = 0
    for j in range(9):
        t = types9[:, j]
        feats[np.arange(n), col + t] = 1.0
        feats[:, col + N_CELL_TYPES + 0] = states9[:, j, IDX_EARTH_NUTRIENT] * NUTRIENT_SCALE
        feats[:, col + N_CELL_TYPES + 1] = states9[:, j, IDX_AIR_NUTRIENT] * NUTRIENT_SCALE
        feats[:, col + N_CELL_TYPES + 2] = np.clip(states9[:, j, IDX_AGE] * AGE_SCALE, 0, 2)
        feats[:, col + N_CELL_TYPES + 3] = states9[:, j, IDX_STRUCTURAL] * STRUCT_SCALE
        col += EXT_CELL_FEAT
    feats[:, col:col + 8] = same8
    col += 8
    k = states9.shape[2] - 4
    take = min(k, EXT_INTERNAL)
    if take > 0:
        feats[:, col:col + take] = np.clip(states9[:, CENTER9, 4:4 + take], -3.0, 3.0)
    return feats


# --- forward pass ------------------------------------------------------------

def _split_minimal(vector: np.ndarray):
    v = np.asarray(vector, dtype=np.float64)
    off = 0
    wn = v[off:off + RN_DIM * FN_DIM].reshape(RN_DIM, FN_DIM); off += RN_DIM * FN_DIM
    bn = v[off:off + RN_DIM]; off += RN_DIM
    wg = v[off:off + RG_DIM * FG_DIM].reshape(RG_DIM, FG_DIM); off += RG_DIM * FG_DIM
    return wn, bn, wg, off


def _split_extended(vector: np.ndarray):
    v = np.asarray(vector, dtype=np.float64)
    _, _, _, off = _split_minimal(v[:MINIMAL_LEN])
    w1 = v[off:off + EXT_HIDDEN * EXT_IN].reshape(EXT_HIDDEN, EXT_IN)
    off += EXT_HIDDEN * EXT_IN
    b1 = v[off:off + EXT_HIDDEN]; off += EXT_HIDDEN
    w2 = v[off:off + EXT_OUT * EXT_HIDDEN].reshape(EXT_OUT, EXT_HIDDEN)
    off += EXT_OUT * EXT_HIDDEN
    b2 = v[off:off + EXT_OUT]
    return w1, b1, w2, b2


def forward_batch(params: AgentParams, types9, states9, same8) -> dict:
    """Raw policy outputs for N cells (no rng jitter).

    Returns spec_logits (N,4), gift_fracs (N,8,2), dir_logits (N,8),
    spawn_logit (N,), split_frac (N,), repro_logit (N,), new_internal (N,k).
    """
    n = types9.shape[0]
    fN, g = _minimal_features(types9, states9, same8)
    wn, bn, wg, _ = _split_minimal(params.vector[:MINIMAL_LEN])
    out_n = fN @ wn.T + bn           # (N, 8, 3)
    out_g = g @ wg.T                 # (N, 7)

    k = states9.shape[2] - 4
    new_internal = states9[:, CENTER9, 4:].copy()

    if params.arch == "extended":
        w1, b1, w2, b2 = _split_extended(params.vector)
        h = np.tanh(_extended_features(types9, states9, same8) @ w1.T + b1)
        corr = h @ w2.T + b2         # (N, 39)
        out_g = out_g + corr[:, :RG_DIM]
        out_n = out_n + corr[:, RG_DIM:RG_DIM + 8 * RN_DIM].reshape(n, 8, RN_DIM)
        take = min(k, EXT_INTERNAL)
        if take > 0:
            delta = corr[:, RG_DIM + 8 * RN_DIM:RG_DIM + 8 * RN_DIM + take]
            new_internal[:, :take] = new_internal[:, :take] + delta

    return {
        "spec_logits": out_g[:, :4],
        "gift_fracs": out_n[:, :, (RN_GIFT_E, RN_GIFT_A)],
        "dir_logits": out_n[:, :, RN_DIR],
        "spawn_logit": out_g[:, RG_SPAWN],
        "split_frac": 0.5 + out_g[:, RG_SPLIT],
        "repro_logit": out_g[:, RG_REPRO],
        "new_internal": new_internal,
    }


def _forward_one(params: AgentParams, perception: Perception) -> dict:
    types9 = perception.types.reshape(1, 9)
    states9 = perception.states.reshape(1, 9, -1)
    same8 = perception.same_mask.reshape(1, 8)
    return forward_batch(params, types9, states9, same8)


def run_parallel(params: AgentParams, perception: Perception,
                 rng: np.random.Generator) -> ParallelInterface:
    out = _forward_one(params, perception)
    return ParallelInterface(spec_logits=out["spec_logits"][0],
                             gift_fracs=out["gift_fracs"][0],
                             new_internal=out["new_internal"][0])


def run_exclusive(params: AgentParams, perception: Perception,
                  rng: np.random.Generator) -> ExclusiveInterface:
    out = _forward_one(params, perception)
    dir_logits = out["dir_logits"][0] + rng.random(8) * DIR_JITTER
    return ExclusiveInterface(spawn_logit=float(out["spawn_logit"][0]),
                              dir_logits=dir_logits,
                              split_frac=float(out["split_frac"][0]))


def run_reproduce(params: AgentParams, perception: Perception,
                  rng: np.random.Generator) -> ReproduceInterface:
    out = _forward_one(params, perception)
    return ReproduceInterface(trigger_logit=float(out["repro_logit"][0]))


# --- hand-designed initializations -------------------------------------------

def _minimal_init_vector() -> np.ndarray:
    wn = np.zeros((RN_DIM, FN_DIM))
    bn = np.zeros(RN_DIM)
    wg = np.zeros((RG_DIM, FG_DIM))

    # Nutrient routing: equalize down big gradients, route earth upward to the
    # canopy and air downward to the roots, keep pumping into flowers, and let
    # flowers hoard what they get.
    for row, diff in ((RN_GIFT_E, FN_DIFF_E), (RN_GIFT_A, FN_DIFF_A)):
        wn[row, diff] = 6.0
        wn[row, FN_SAME] = 3.0
        wn[row, FN_TYPE0 + CellType.AGENT_FLOWER] = 2.0
        wn[row, FN_OWN_FLOWER] = -5.0
        bn[row] = -3.02
    wn[RN_GIFT_E, FN_POS0 + 1] = 0.8   # earth up the trunk
    wn[RN_GIFT_E, FN_POS0 + 0] = 0.4
    wn[RN_GIFT_E, FN_POS0 + 2] = 0.4
    wn[RN_GIFT_A, FN_POS0 + 6] = 0.6   # air down to the roots
    wn[RN_GIFT_A, FN_POS0 + 5] = 0.3
    wn[RN_GIFT_A, FN_POS0 + 7] = 0.3

    # Spawn aim: prefer open space, shoots up, roots down (into earth).
    wn[RN_DIR, FN_TYPE0 + CellType.VOID] = 1.0
    wn[RN_DIR, FN_TYPE0 + CellType.AIR] = 1.0
    wn[RN_DIR, FN_TYPE0 + CellType.EARTH] = 0.55
    wn[RN_DIR, FN_ROOT_BELOW] = 0.8
    wn[RN_DIR, FN_SHOOT_ABOVE] = 0.6
    wn[RN_DIR, FN_POS0 + 1] = 0.25   # straight up
    wn[RN_DIR, FN_POS0 + 0] = 0.1
    wn[RN_DIR, FN_POS0 + 2] = 0.1

    # Specialization: roots and flowers are sticky; leaves may still flower.
    wg[RG_NONE, FG_SPEC0 + 1] = 2.2
    wg[RG_NONE, FG_SPEC0 + 2] = 0.8
    wg[RG_NONE, FG_SPEC0 + 3] = 6.0  # flowers never re-specialize
    wg[RG_NONE, FG_BIAS] = 0.5

    wg[RG_ROOT, FG_SPEC0 + 0] = 1.0
    wg[RG_ROOT, FG_COUNT0 + CellType.EARTH] = 4.0
    wg[RG_ROOT, FG_BIAS] = -1.2

    wg[RG_LEAF, FG_SPEC0 + 0] = 1.0
    wg[RG_LEAF, FG_COUNT0 + CellType.AIR] = 4.0
    wg[RG_LEAF, FG_OWN_E] = -1.5
    wg[RG_LEAF, FG_OWN_A] = -1.5
    wg[RG_LEAF, FG_BIAS] = -1.2

    # Flowers grow out of rich (both channels), air-facing cells backed by
    # enough of their own organism; lone tips keep extending instead.
    wg[RG_FLOWER, FG_SPEC0 + 0] = 1.0
    wg[RG_FLOWER, FG_SPEC0 + 2] = 1.0
    wg[RG_FLOWER, FG_OWN_MIN] = 5.0
    wg[RG_FLOWER, FG_AGE] = 2.5
    wg[RG_FLOWER, FG_COUNT0 + CellType.AIR] = 1.2
    wg[RG_FLOWER, FG_COUNT0 + CellType.EARTH] = -2.0
    wg[RG_FLOWER, FG_COUNT0 + CellType.AGENT_FLOWER] = -6.0
    wg[RG_FLOWER, FG_SAME_COUNT] = 2.0
    wg[RG_FLOWER, FG_BIAS] = -3.3

    # Spawn only when solvent on both channels (min > ~2x spawn cost);
    # flowers hoard instead.
    wg[RG_SPAWN, FG_OWN_MIN] = 6.0
    wg[RG_SPAWN, FG_SPEC0 + 3] = -5.0
    wg[RG_SPAWN, FG_BIAS] = -2.64

    # Split evenly with the child (validator clamps to [0, 1]).
    # RG_SPLIT row stays zero: interface adds 0.5.

    # Reproduce once the flower has stockpiled well past the cost on both
    # channels, so the remainder makes a viable seed.
    wg[RG_REPRO, FG_OWN_MIN] = 5.0
    wg[RG_REPRO, FG_SPEC0 + 3] = 1.0
    wg[RG_REPRO, FG_AGE] = 0.8
    wg[RG_REPRO, FG_BIAS] = -4.2

    return np.concatenate([wn.ravel(), bn, wg.ravel()]).astype(np.float32)


def init_minimal() -> AgentParams:
    return AgentParams("minimal", _minimal_init_vector())


def init_extended() -> AgentParams:
    """Minimal weights plus a zeroed-out correction head: identical behavior
    at init, but mutations can light up the hidden layer."""
    base = _minimal_init_vector()
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(20230714)))
    w1 = (gen.standard_normal((EXT_HIDDEN, EXT_IN)) / np.sqrt(EXT_IN)).astype(np.float32)
    b1 = np.zeros(EXT_HIDDEN, dtype=np.float32)
    w2 = np.zeros((EXT_OUT, EXT_HIDDEN), dtype=np.float32)
    b2 = np.zeros(EXT_OUT, dtype=np.float32)
    vec = np.concatenate([base, w1.ravel(), b1, w2.ravel(), b2])
    return AgentParams("extended", vec)


def make_params(arch: str, vector: np.ndarray) -> AgentParams:
    return AgentParams(arch, vector)


# --- params file -------------------------------------------------------------

PARAMS_MAGIC = b"GGAP"
PARAMS_VERSION = 1


def save_params(params: AgentParams, path) -> None:
    import struct
    arch = params.arch.encode()
    with open(path, "wb") as f:
        f.write(PARAMS_MAGIC)
        f.write(struct.pack("<IB", PARAMS_VERSION, len(arch)))
        f.write(arch)
        f.write(struct.pack("<I", params.vector.size))
        f.write(params.vector.astype("<f4").tobytes())


def load_params(path) -> AgentParams:
    import struct
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != PARAMS_MAGIC:
        raise ValueError("not an agent params file")
    version, arch_len = struct.unpack_from("<IB", blob, 4)
    if version != PARAMS_VERSION:
        raise ValueError(f"unsupported params version {version}")
    off = 9
    arch = blob[off:off + arch_len].decode(); off += arch_len
    (n,) = struct.unpack_from("<I", blob, off); off += 4
    vec = np.frombuffer(blob, dtype="<f4", count=n, offset=off).copy()
    return AgentParams(arch, vec)

"""The Environment: three same-shaped grids and the operations that build it."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .blueprint import CHAR_TO_TYPE, EnvBlueprint
from .cells import (
    IDX_AGE,
    IDX_AIR_NUTRIENT,
    IDX_EARTH_NUTRIENT,
    NULL_AGENT_ID,
    CellType,
    is_agent,
)
from .config import EnvConfig

SNAPSHOT_MAGIC = b"GGEN"
SNAPSHOT_VERSION = 1

# Cell types a seed (or spawned agent) may overwrite.
REPLACEABLE = (CellType.VOID, CellType.AIR, CellType.EARTH)


class SeedPlacementFailed(RuntimeError):
    pass


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Environment:
    """Immutable world snapshot. Mutations build a new Environment."""

    type_grid: np.ndarray   # (H, W) uint8
    state_grid: np.ndarray  # (H, W, state_size) float64
    agent_id_grid: np.ndarray  # (H, W) uint32

    def __post_init__(self):
        t, s, a = self.type_grid, self.state_grid, self.agent_id_grid
        if t.shape != a.shape or s.shape[:2] != t.shape:
            raise ValueError(f"grid shapes differ: {t.shape}, {s.shape}, {a.shape}")
        _frozen(t)
        _frozen(s)
        _frozen(a)

    @property
    def height(self) -> int:
        return self.type_grid.shape[0]

    @property
    def width(self) -> int:
        return self.type_grid.shape[1]

    @property
    def state_size(self) -> int:
        return self.state_grid.shape[2]

    def writable_copies(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.type_grid.copy(), self.state_grid.copy(), self.agent_id_grid.copy()

    def replace(self, type_grid=None, state_grid=None, agent_id_grid=None) -> "Environment":
        return Environment(
            self.type_grid if type_grid is None else type_grid,
            self.state_grid if state_grid is None else state_grid,
            self.agent_id_grid if agent_id_grid is None else agent_id_grid,
        )


def new_environment(blueprint: EnvBlueprint, config: EnvConfig) -> Environment:
    """Materialize a blueprint: materials only, zero state, null agent ids.

    Seed columns are not applied here; the bootstrap places seeds explicitly
    so agent ids and program entries stay in sync.
    """
    h, w = blueprint.height, blueprint.width
    types = np.zeros((h, w), dtype=np.uint8)
    for y, row in enumerate(blueprint.rows):
        for x, ch in enumerate(row):
            types[y, x] = CHAR_TO_TYPE[ch]
    states = np.zeros((h, w, config.state_size), dtype=np.float64)
    ids = np.zeros((h, w), dtype=np.uint32)
    return Environment(types, states, ids)


def find_seed_site(env: Environment, column: int) -> tuple[int, int] | None:
    """Topmost fertile site in a column: two vertically contiguous replaceable
    cells, the upper one air-connected and the lower one earth-connected.

    Prefers the strict air-over-earth interface (the lower seed cell replaces
    the top Earth cell, burying the future root in the soil); falls back to a
    looser earth-adjacent site on rough terrain. Returns (y_top, y_bottom).
    """
    h = env.height
    if not (0 <= column < env.width):
        return None
    t = env.type_grid
    loose = None
    for y in range(h - 1):
        top, bottom = t[y, column], t[y + 1, column]
        if top not in REPLACEABLE or bottom not in REPLACEABLE:
            continue
        if not (top == CellType.AIR or _has_4_neighbor(t, y, column, CellType.AIR)):
            continue
        if bottom == CellType.EARTH:
            return y, y + 1
        if loose is None and (_has_4_neighbor(t, y + 1, column, CellType.EARTH)):
            loose = (y, y + 1)
    return loose


def _has_4_neighbor(types: np.ndarray, y: int, x: int, wanted: CellType) -> bool:
    h, w = types.shape
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        ny, nx = y + dy, x + dx
        if 0 <= ny < h and 0 <= nx < w and types[ny, nx] == wanted:
            return True
    return False


def place_seed(env: Environment, column: int, agent_id: int,
               per_cell_nutrients: tuple[float, float]) -> Environment:
    """Write a two-cell unspecialized seed at the air/earth interface.

    Raises SeedPlacementFailed (without touching the environment) when the
    column has no fertile interface.
    """
    if agent_id == NULL_AGENT_ID:
        raise ValueError("seeds need a non-null agent id")
    site = find_seed_site(env, column)
    if site is None:
        raise SeedPlacementFailed(f"no fertile interface in column {column}")
    types, states, ids = env.writable_copies()
    for y in site:
        types[y, column] = CellType.AGENT_UNSPECIALIZED
        states[y, column] = 0.0
        states[y, column, IDX_EARTH_NUTRIENT] = per_cell_nutrients[0]
        states[y, column, IDX_AIR_NUTRIENT] = per_cell_nutrients[1]
        states[y, column, IDX_AGE] = 0.0
        ids[y, column] = agent_id
    return Environment(types, states, ids)


def count_agents(env: Environment) -> int:
    return int(np.count_nonzero(is_agent(env.type_grid)))


def is_extinct(env: Environment) -> bool:
    return count_agents(env) == 0


def live_agent_ids(env: Environment) -> set[int]:
    mask = is_agent(env.type_grid)
    return {int(i) for i in np.unique(env.agent_id_grid[mask])} - {NULL_AGENT_ID}


# --- snapshot file format -------------------------------------------------
# header: magic, version u32, H u32, W u32, state_size u32
# body: row-major type bytes (u8), states (f32 LE), agent ids (u32 LE)

def serialize_env(env: Environment) -> bytes:
    head = SNAPSHOT_MAGIC + struct.pack(
        "<IIII", SNAPSHOT_VERSION, env.height, env.width, env.state_size)
    body = (env.type_grid.astype(np.uint8).tobytes()
            + env.state_grid.astype("<f4").tobytes()
            + env.agent_id_grid.astype("<u4").tobytes())
    return head + body


def deserialize_env(blob: bytes) -> Environment:
    if blob[:4] != SNAPSHOT_MAGIC:
        raise ValueError("not an environment snapshot")
    version, h, w, s = struct.unpack_from("<IIII", blob, 4)
    if version != SNAPSHOT_VERSION:
        raise ValueError(f"unsupported snapshot version {version}")
    off = 4 + 16
    n = h * w
    types = np.frombuffer(blob, dtype=np.uint8, count=n, offset=off).reshape(h, w).copy()
    off += n
    states = np.frombuffer(blob, dtype="<f4", count=n * s, offset=off).reshape(h, w, s)
    states = states.astype(np.float64)
    off += n * s * 4
    ids = np.frombuffer(blob, dtype="<u4", count=n, offset=off).reshape(h, w).copy()
    return Environment(types, states, ids)

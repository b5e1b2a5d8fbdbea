"""Cell types and the per-cell state vector layout."""

from __future__ import annotations

from enum import IntEnum

import numpy as np


class CellType(IntEnum):
    VOID = 0
    AIR = 1
    EARTH = 2
    IMMOVABLE = 3
    SUN = 4
    OUT_OF_BOUNDS = 5  # perception padding only, never stored in a grid
    AGENT_UNSPECIALIZED = 6
    AGENT_ROOT = 7
    AGENT_LEAF = 8
    AGENT_FLOWER = 9


N_CELL_TYPES = 10

AGENT_TYPES = (
    CellType.AGENT_UNSPECIALIZED,
    CellType.AGENT_ROOT,
    CellType.AGENT_LEAF,
    CellType.AGENT_FLOWER,
)

INTANGIBLE_TYPES = (CellType.VOID, CellType.AIR, CellType.SUN)

# State vector layout: fixed so snapshot files are portable.
IDX_EARTH_NUTRIENT = 0
IDX_AIR_NUTRIENT = 1
IDX_AGE = 2
IDX_STRUCTURAL = 3
N_CORE_STATE = 4  # internal channels follow, config.state_size = 4 + k

NULL_AGENT_ID = 0


def is_agent(types: np.ndarray | int) -> np.ndarray | bool:
    t = np.asarray(types)
    out = t >= CellType.AGENT_UNSPECIALIZED
    return bool(out) if out.ndim == 0 else out


def is_intangible(types: np.ndarray | int) -> np.ndarray | bool:
    t = np.asarray(types)
    out = (t == CellType.VOID) | (t == CellType.AIR) | (t == CellType.SUN)
    return bool(out) if out.ndim == 0 else out


def is_gravity_affected(types: np.ndarray | int) -> np.ndarray | bool:
    t = np.asarray(types)
    out = (t == CellType.EARTH) | is_agent(t)
    return bool(out) if out.ndim == 0 else out


# Earth and agents both propagate structural integrity.
is_structural_propagator = is_gravity_affected

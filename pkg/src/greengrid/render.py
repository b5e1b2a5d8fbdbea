"""Frame rendering: fixed palette, nutrient-scaled earth/air brightness."""

from __future__ import annotations

import numpy as np

from .cells import IDX_AIR_NUTRIENT, IDX_EARTH_NUTRIENT, CellType
from .config import EnvConfig
from .env import Environment

N_LEVELS = 8

_BASE = {
    CellType.VOID: (16, 16, 22),
    CellType.IMMOVABLE: (104, 104, 110),
    CellType.SUN: (255, 222, 84),
    CellType.OUT_OF_BOUNDS: (0, 0, 0),
    CellType.AGENT_UNSPECIALIZED: (202, 202, 206),
    CellType.AGENT_ROOT: (168, 112, 78),
    CellType.AGENT_LEAF: (74, 164, 84),
    CellType.AGENT_FLOWER: (236, 120, 180),
}
_EARTH_DARK, _EARTH_BRIGHT = np.array((66, 45, 26)), np.array((172, 124, 76))
_AIR_DARK, _AIR_BRIGHT = np.array((34, 38, 50)), np.array((152, 172, 206))


def _ramp(dark: np.ndarray, bright: np.ndarray, levels: int) -> list[tuple[int, int, int]]:
    out = []
    for i in range(levels):
        f = i / (levels - 1)
        out.append(tuple(int(round(v)) for v in dark + f * (bright - dark)))
    return out


def build_palette() -> list[tuple[int, int, int]]:
    """Stable indexed palette: 8 fixed entries, then earth and air ramps."""
    palette = [_BASE[CellType.VOID], _BASE[CellType.IMMOVABLE], _BASE[CellType.SUN],
               _BASE[CellType.OUT_OF_BOUNDS], _BASE[CellType.AGENT_UNSPECIALIZED],
               _BASE[CellType.AGENT_ROOT], _BASE[CellType.AGENT_LEAF],
               _BASE[CellType.AGENT_FLOWER]]
    palette.extend(_ramp(_EARTH_DARK, _EARTH_BRIGHT, N_LEVELS))
    palette.extend(_ramp(_AIR_DARK, _AIR_BRIGHT, N_LEVELS))
    return palette


PALETTE = build_palette()
_FIXED_INDEX = {
    CellType.VOID: 0, CellType.IMMOVABLE: 1, CellType.SUN: 2,
    CellType.OUT_OF_BOUNDS: 3, CellType.AGENT_UNSPECIALIZED: 4,
    CellType.AGENT_ROOT: 5, CellType.AGENT_LEAF: 6, CellType.AGENT_FLOWER: 7,
}
EARTH_LEVEL0 = 8
AIR_LEVEL0 = 8 + N_LEVELS


def render_indexed(env: Environment, config: EnvConfig) -> np.ndarray:
    """Palette indices per cell; earth/air binned by nutrient fraction."""
    t = env.type_grid
    idx = np.zeros(t.shape, dtype=np.uint8)
    for ct, pi in _FIXED_INDEX.items():
        idx[t == ct] = pi
    cap = max(config.max_nutrient_cell, 1e-9)
    for ct, ch, base in ((CellType.EARTH, IDX_EARTH_NUTRIENT, EARTH_LEVEL0),
                         (CellType.AIR, IDX_AIR_NUTRIENT, AIR_LEVEL0)):
        mask = t == ct
        frac = np.clip(env.state_grid[:, :, ch] / cap, 0.0, 1.0)
        level = np.minimum((frac * N_LEVELS).astype(np.uint8), N_LEVELS - 1)
        idx[mask] = base + level[mask]
    return idx


def render_frame(env: Environment, config: EnvConfig) -> np.ndarray:
    """RGB uint8 image (H, W, 3)."""
    idx = render_indexed(env, config)
    lut = np.array(PALETTE, dtype=np.uint8)
    return lut[idx]


def save_png(frame: np.ndarray, path, scale: int = 4) -> None:
    from PIL import Image
    img = Image.fromarray(frame, mode="RGB")
    if scale > 1:
        img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    img.save(path)


def save_gif(frames: list[np.ndarray], path, scale: int = 4,
             duration_ms: int = 60) -> None:
    from PIL import Image
    imgs = []
    for frame in frames:
        img = Image.fromarray(frame, mode="RGB")
        if scale > 1:
            img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
        imgs.append(img)
    imgs[0].save(path, save_all=True, append_images=imgs[1:],
                 duration=duration_ms, loop=0)

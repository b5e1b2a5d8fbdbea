"""World blueprints: a text layout of materials plus seed columns.

Legend (one character per cell):
    V = Void, A = Air, E = Earth, I = Immovable, S = Sun
Seed columns are listed separately; they mark where the bootstrap places
two-cell seeds at the air/earth interface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .cells import CellType

CHAR_TO_TYPE = {
    "V": CellType.VOID,
    "A": CellType.AIR,
    "E": CellType.EARTH,
    "I": CellType.IMMOVABLE,
    "S": CellType.SUN,
}
TYPE_TO_CHAR = {v: k for k, v in CHAR_TO_TYPE.items()}

# Fertility requires all five of these somewhere in the world (seeds supply
# the agent material).
REQUIRED_MATERIALS = (CellType.AIR, CellType.EARTH, CellType.IMMOVABLE, CellType.SUN)


class BlueprintError(ValueError):
    pass


@dataclass(frozen=True)
class EnvBlueprint:
    rows: tuple[str, ...]
    seed_columns: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not self.rows:
            raise BlueprintError("blueprint needs at least one row")
        width = len(self.rows[0])
        if width == 0:
            raise BlueprintError("blueprint rows must be non-empty")
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise BlueprintError(
                    f"row {i} has width {len(row)}, expected {width}")
            bad = set(row) - set(CHAR_TO_TYPE)
            if bad:
                raise BlueprintError(f"row {i} has unknown material chars {sorted(bad)}")
        for c in self.seed_columns:
            if not (0 <= c < width):
                raise BlueprintError(f"seed column {c} outside width {width}")

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.rows[0])

    def is_fertile(self) -> bool:
        """All five required materials present (agents come from seed columns)."""
        chars = set("".join(self.rows))
        have = {CHAR_TO_TYPE[c] for c in chars}
        return all(m in have for m in REQUIRED_MATERIALS) and bool(self.seed_columns)

    def to_text(self) -> str:
        lines = ["# greengrid blueprint v1",
                 "# legend: V=void A=air E=earth I=immovable S=sun"]
        if self.seed_columns:
            lines.append("seeds: " + ",".join(str(c) for c in self.seed_columns))
        lines.extend(self.rows)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EnvBlueprint":
        rows: list[str] = []
        seeds: tuple[int, ...] = ()
        for line in text.splitlines():
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if line.startswith("seeds:"):
                body = line.split(":", 1)[1].strip()
                seeds = tuple(int(tok) for tok in body.split(",") if tok.strip()) if body else ()
                continue
            rows.append(line)
        return cls(rows=tuple(rows), seed_columns=seeds)

"""ProgramStore: bounded map from agent id to parameter records."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .cells import NULL_AGENT_ID

STORE_MAGIC = b"GGPS"
STORE_VERSION = 1


class ProgramStoreFull(RuntimeError):
    pass


@dataclass(frozen=True)
class ProgramEntry:
    """One organism's parameters: agent logic plus its mutator's own state."""

    arch: str                     # "minimal" | "extended"
    logic: np.ndarray             # float32 flat vector
    mutator_kind: str = "none"    # "none" | "basic" | "adaptive"
    mutator_state: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.float32))

    def __post_init__(self):
        object.__setattr__(self, "logic", np.asarray(self.logic, dtype=np.float32))
        object.__setattr__(self, "mutator_state",
                           np.asarray(self.mutator_state, dtype=np.float32))
        self.logic.flags.writeable = False
        self.mutator_state.flags.writeable = False


class ProgramStore:
    """Mutable id -> ProgramEntry map with a hard capacity.

    The capacity bounds how many unique lineages can exist at once; reclaiming
    entries of extinct ids is the caller's call (see reproduce_pipeline).
    """

    def __init__(self, max_programs: int):
        if max_programs < 1:
            raise ValueError("max_programs must be >= 1")
        self.max_programs = int(max_programs)
        self._entries: dict[int, ProgramEntry] = {}
        self._next_id = 1

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, agent_id: int) -> bool:
        return int(agent_id) in self._entries

    def get(self, agent_id: int) -> ProgramEntry:
        return self._entries[int(agent_id)]

    def ids(self) -> list[int]:
        return sorted(self._entries)

    @property
    def is_full(self) -> bool:
        return len(self._entries) >= self.max_programs

    def mint(self, entry: ProgramEntry) -> int:
        """Insert a new entry under a fresh id."""
        if self.is_full:
            raise ProgramStoreFull(f"program table at capacity {self.max_programs}")
        agent_id = self._next_id
        self._next_id += 1
        self._entries[agent_id] = entry
        return agent_id

    def release_dead(self, live_ids: set[int]) -> int:
        """Drop entries whose id no longer appears in the grid; returns count."""
        dead = [i for i in self._entries if i not in live_ids]
        for i in dead:
            del self._entries[i]
        return len(dead)

    def clone(self) -> "ProgramStore":
        c = ProgramStore(self.max_programs)
        c._entries = dict(self._entries)
        c._next_id = self._next_id
        return c

    # --- file format: header + per-entry records --------------------------

    def to_bytes(self) -> bytes:
        out = [STORE_MAGIC, struct.pack("<III", STORE_VERSION, self.max_programs,
                                        self._next_id),
               struct.pack("<I", len(self._entries))]
        for agent_id in sorted(self._entries):
            e = self._entries[agent_id]
            arch = e.arch.encode()
            kind = e.mutator_kind.encode()
            out.append(struct.pack("<IBB", agent_id, len(arch), len(kind)))
            out.append(arch)
            out.append(kind)
            out.append(struct.pack("<II", e.logic.size, e.mutator_state.size))
            out.append(e.logic.astype("<f4").tobytes())
            out.append(e.mutator_state.astype("<f4").tobytes())
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ProgramStore":
        if blob[:4] != STORE_MAGIC:
            raise ValueError("not a program store file")
        version, max_programs, next_id = struct.unpack_from("<III", blob, 4)
        if version != STORE_VERSION:
            raise ValueError(f"unsupported program store version {version}")
        (n_entries,) = struct.unpack_from("<I", blob, 16)
        store = cls(max_programs)
        store._next_id = next_id
        off = 20
        for _ in range(n_entries):
            agent_id, arch_len, kind_len = struct.unpack_from("<IBB", blob, off)
            off += 6
            arch = blob[off:off + arch_len].decode(); off += arch_len
            kind = blob[off:off + kind_len].decode(); off += kind_len
            n_logic, n_mut = struct.unpack_from("<II", blob, off)
            off += 8
            logic = np.frombuffer(blob, dtype="<f4", count=n_logic, offset=off).copy()
            off += 4 * n_logic
            mut = np.frombuffer(blob, dtype="<f4", count=n_mut, offset=off).copy()
            off += 4 * n_mut
            store._entries[agent_id] = ProgramEntry(arch, logic, kind, mut)
        return store

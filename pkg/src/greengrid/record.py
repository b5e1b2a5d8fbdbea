"""Run recording and bit-exact replay.

A RunRecord is a directory: manifest.json, config.json, blueprint.txt,
programs.bin (initial store), stats.csv, and snapshots/step_NNNNNN.env taken
every snapshot_every steps (step 0 always included). Replaying re-simulates
from the recorded inputs and compares each snapshot byte for byte.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .blueprint import EnvBlueprint
from .config import EnvConfig
from .env import Environment, deserialize_env, serialize_env
from .mutators import MutatorConfig
from .physics import StepStats, step
from .programs import ProgramStore
from .rng import StepRng

RECORD_VERSION = 1


@dataclass
class RunRecord:
    path: Path
    config: EnvConfig
    blueprint: EnvBlueprint
    programs: ProgramStore
    seed: int
    n_steps: int
    snapshot_every: int
    mutator: MutatorConfig | None

    @property
    def snapshot_steps(self) -> list[int]:
        steps = list(range(0, self.n_steps + 1, self.snapshot_every))
        if steps[-1] != self.n_steps:
            steps.append(self.n_steps)
        return steps

    def snapshot_path(self, step_index: int) -> Path:
        return self.path / "snapshots" / f"step_{step_index:06d}.env"

    def load_snapshot(self, step_index: int) -> Environment:
        return deserialize_env(self.snapshot_path(step_index).read_bytes())


def _mutator_to_json(mutator: MutatorConfig | None) -> dict | None:
    if mutator is None:
        return None
    return {"kind": mutator.kind, "base_sigma": mutator.base_sigma,
            "meta_update_prob": mutator.meta_update_prob,
            "meta_sigma": mutator.meta_sigma}


def _mutator_from_json(raw: dict | None) -> MutatorConfig | None:
    if raw is None:
        return None
    return MutatorConfig(**raw)


def record_run(out_dir, env0: Environment, programs0: ProgramStore,
               config: EnvConfig, blueprint: EnvBlueprint, seed: int,
               n_steps: int, snapshot_every: int = 100,
               mutator: MutatorConfig | None = None, on_step=None,
               ) -> tuple[RunRecord, Environment, list[StepStats]]:
    """Simulate and persist a replayable record."""
    path = Path(out_dir)
    (path / "snapshots").mkdir(parents=True, exist_ok=True)
    (path / "config.json").write_text(config.to_json())
    (path / "blueprint.txt").write_text(blueprint.to_text())
    (path / "programs.bin").write_bytes(programs0.to_bytes())
    manifest = {
        "version": RECORD_VERSION, "seed": seed, "n_steps": n_steps,
        "snapshot_every": snapshot_every, "mutator": _mutator_to_json(mutator),
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2))

    record = RunRecord(path, config, blueprint, programs0.clone(), seed,
                       n_steps, snapshot_every, mutator)
    snap_steps = set(record.snapshot_steps)

    # run from the snapshot-roundtripped state so replay starts bit-identical
    env, programs = deserialize_env(serialize_env(env0)), programs0.clone()
    rng = StepRng(seed)
    history: list[StepStats] = []
    record.snapshot_path(0).write_bytes(serialize_env(env))
    lines = [StepStats.CSV_HEADER]
    for i in range(1, n_steps + 1):
        env, programs, stats = step(env, programs, config, rng, mutator=mutator)
        history.append(stats)
        lines.append(stats.csv_row())
        if i in snap_steps:
            record.snapshot_path(i).write_bytes(serialize_env(env))
        if on_step is not None:
            on_step(i, env, stats)
    (path / "stats.csv").write_text("\n".join(lines) + "\n")
    return record, env, history


def load_record(record_dir) -> RunRecord:
    path = Path(record_dir)
    manifest = json.loads((path / "manifest.json").read_text())
    if manifest["version"] != RECORD_VERSION:
        raise ValueError(f"unsupported record version {manifest['version']}")
    config = EnvConfig.from_json((path / "config.json").read_text())
    blueprint = EnvBlueprint.from_text((path / "blueprint.txt").read_text())
    programs = ProgramStore.from_bytes((path / "programs.bin").read_bytes())
    return RunRecord(path, config, blueprint, programs, manifest["seed"],
                     manifest["n_steps"], manifest["snapshot_every"],
                     _mutator_from_json(manifest["mutator"]))


def replay(record: RunRecord) -> tuple[bool, list[str]]:
    """Re-simulate from recorded inputs; report any snapshot divergence."""
    env = record.load_snapshot(0)
    programs = record.programs.clone()
    rng = StepRng(record.seed)
    snap_steps = set(record.snapshot_steps)
    problems: list[str] = []
    for i in range(1, record.n_steps + 1):
        env, programs, _ = step(env, programs, record.config, rng,
                                mutator=record.mutator)
        if i in snap_steps:
            want = record.snapshot_path(i).read_bytes()
            got = serialize_env(env)
            if want != got:
                problems.append(f"snapshot diverged at step {i}")
    return not problems, problems

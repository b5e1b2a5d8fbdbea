"""Interactive evolution session service (HTTP + JSON).

A session holds one parent organism. Each generation spawns n_candidates
children through the mutator, runs each alone in a Petri dish with
intercepted reproduction, and keeps the rendered frames plus the would-be
reproduction count. The human picks one; deploy evaluates the final lineage
in a real environment. State machine: start -> choose* -> deploy (terminal).
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .agents import AgentParams
from .agents import init_extended, init_minimal
from .evolve import evaluate
from .mutators import MutatorConfig, initial_mutator_state, spawn_child_params
from .presets import PRESET_NAMES, make_petri, make_preset, seeded_world
from .programs import ProgramEntry
from .record import record_run
from .render import PALETTE, render_indexed
from .rng import derive_seed, stream
from .evolve import petri_run

API_VERSION = 1
PETRI_FRAME_STRIDE = 2  # keep every 2nd frame of the 300-step dish run


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        self.status, self.code, self.message = status, code, message
        super().__init__(message)


@dataclass
class Candidate:
    entry: ProgramEntry
    n_repro: int
    frames: list[np.ndarray]  # indexed-color frames


@dataclass
class Session:
    session_id: str
    preset: str
    mutator: MutatorConfig
    seed: int
    n_candidates: int
    n_petri_steps: int
    parent: ProgramEntry
    generation: int = 0
    candidates: list[Candidate] = field(default_factory=list)
    history: list[int] = field(default_factory=list)
    deployed: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)


def _petri_candidate(preset_name: str, entry: ProgramEntry, seed: int,
                     n_steps: int) -> Candidate:
    config, blueprint = make_petri(preset_name)
    params = AgentParams(entry.arch, entry.logic)
    frames: list[np.ndarray] = []

    def on_frame(env, stats):
        if stats.step % PETRI_FRAME_STRIDE == 0:
            frames.append(render_indexed(env, config))

    n_repro, _ = petri_run(params, (config, blueprint), seed, n_steps,
                           on_frame=on_frame)
    return Candidate(entry=entry, n_repro=n_repro, frames=frames)


def _spawn_generation(session: Session) -> None:
    """Candidates are a pure function of (parent, seed, generation, index):
    the mutator sees no fitness and no ordering information."""
    candidates = []
    for i in range(session.n_candidates):
        rng = stream(derive_seed(session.seed, f"gen:{session.generation}"), i, "candidate")
        child = spawn_child_params(session.parent, session.mutator, rng)
        run_seed = derive_seed(session.seed, f"petri:{session.generation}:{i}")
        candidates.append(_petri_candidate(session.preset, child, run_seed,
                                           session.n_petri_steps))
    session.candidates = candidates


class SessionManager:
    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, preset: str, arch: str, mutator_kind: str, sigma: float | None,
               n_candidates: int, seed: int, n_petri_steps: int = 300) -> Session:
        if preset not in PRESET_NAMES:
            raise ServiceError(400, "unknown_preset", f"unknown preset {preset!r}")
        if mutator_kind not in ("basic", "adaptive"):
            raise ServiceError(400, "unknown_mutator", f"unknown mutator {mutator_kind!r}")
        if not (1 <= n_candidates <= 16):
            raise ServiceError(400, "bad_candidates", "n_candidates must be in 1..16")
        params = init_extended() if arch == "extended" else init_minimal()
        if sigma is None:
            sigma = 0.001 if arch == "extended" else 0.01
        mutator = MutatorConfig(kind=mutator_kind, base_sigma=sigma)
        parent = ProgramEntry(params.arch, params.vector, mutator.kind,
                              initial_mutator_state(mutator, params.vector.size))
        session = Session(session_id=uuid.uuid4().hex, preset=preset,
                          mutator=mutator, seed=seed, n_candidates=n_candidates,
                          n_petri_steps=n_petri_steps, parent=parent)
        _spawn_generation(session)
        with self._lock:
            self._sessions[session.session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self._sessions.get(session_id)
        if session is None:
            raise ServiceError(404, "no_such_session", f"session {session_id} not found")
        return session

    def choose(self, session_id: str, index: int) -> Session:
        session = self.get(session_id)
        with session.lock:
            if session.deployed:
                raise ServiceError(409, "session_closed",
                                   "session already deployed; start a new one")
            if not (0 <= index < len(session.candidates)):
                raise ServiceError(400, "bad_choice",
                                   f"candidate index {index} out of range")
            session.parent = session.candidates[index].entry
            session.history.append(index)
            session.generation += 1
            _spawn_generation(session)
        return session

    def deploy(self, session_id: str, preset: str | None, width: int, height: int,
               steps: int, reps: int, out_dir: str | None):
        session = self.get(session_id)
        with session.lock:
            if session.deployed:
                raise ServiceError(409, "session_closed", "session already deployed")
            preset_name = preset or session.preset
            if preset_name not in PRESET_NAMES:
                raise ServiceError(400, "unknown_preset", f"unknown preset {preset_name!r}")
            config, blueprint = make_preset(preset_name, height, width)
            params = AgentParams(session.parent.arch, session.parent.logic)
            report = evaluate((config, blueprint), params, session.mutator,
                              seed=derive_seed(session.seed, "deploy"),
                              n_reps=reps, n_steps=steps)

            # one rendered run for the browser's replay viewer
            from .evolve import run_world
            env, programs = seeded_world(config, blueprint, params, session.mutator)
            frames: list[np.ndarray] = [render_indexed(env, config)]
            stride = max(1, steps // 48)

            def keep(env_i, stats):
                if stats.step % stride == 0:
                    frames.append(render_indexed(env_i, config))

            run_world(env, programs, config, derive_seed(session.seed, "deploy:view"),
                      steps, mutator=session.mutator, on_step=keep)

            record_path = None
            if out_dir is not None:
                env2, programs2 = seeded_world(config, blueprint, params, session.mutator)
                record, _, _ = record_run(out_dir, env2, programs2, config, blueprint,
                                          derive_seed(session.seed, "deploy:record"),
                                          steps, snapshot_every=max(1, steps // 10),
                                          mutator=session.mutator)
                record_path = str(record.path)
            session.deployed = True
            return report, record_path, frames


def _session_summary(session: Session) -> dict:
    return {
        "version": API_VERSION,
        "session_id": session.session_id,
        "preset": session.preset,
        "mutator": session.mutator.kind,
        "generation": session.generation,
        "n_candidates": len(session.candidates),
        "candidates": [{"index": i, "n_repro": c.n_repro, "n_frames": len(c.frames)}
                       for i, c in enumerate(session.candidates)],
        "history": list(session.history),
        "deployed": session.deployed,
    }


def create_app(static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="greengrid interactive evolution", version=str(API_VERSION))
    manager = SessionManager()
    app.state.manager = manager

    @app.exception_handler(ServiceError)
    async def service_error(_, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.post("/sessions")
    def create_session(body: dict):
        session = manager.create(
            preset=body.get("preset", "pestilence"),
            arch=body.get("arch", "minimal"),
            mutator_kind=body.get("mutator", "basic"),
            sigma=body.get("sigma"),
            n_candidates=int(body.get("n_candidates", 8)),
            seed=int(body.get("seed", 0)),
            n_petri_steps=int(body.get("n_petri_steps", 300)),
        )
        return {"version": API_VERSION, "session_id": session.session_id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_summary(manager.get(session_id))

    @app.get("/sessions/{session_id}/candidates/{index}/frames")
    def get_frames(session_id: str, index: int):
        session = manager.get(session_id)
        if not (0 <= index < len(session.candidates)):
            raise ServiceError(400, "bad_candidate", f"candidate {index} out of range")
        c = session.candidates[index]
        return {
            "version": API_VERSION,
            "n_repro": c.n_repro,
            "palette": [list(rgb) for rgb in PALETTE],
            "height": int(c.frames[0].shape[0]) if c.frames else 0,
            "width": int(c.frames[0].shape[1]) if c.frames else 0,
            "frames": [f.ravel().tolist() for f in c.frames],
        }

    @app.post("/sessions/{session_id}/choice")
    def choose(session_id: str, body: dict):
        if "index" not in body:
            raise ServiceError(400, "bad_choice", "body needs an 'index' field")
        session = manager.choose(session_id, int(body["index"]))
        return _session_summary(session)

    @app.post("/sessions/{session_id}/deploy")
    def deploy(session_id: str, body: dict):
        report, record_path, frames = manager.deploy(
            session_id,
            preset=body.get("preset"),
            width=int(body.get("width", 96)),
            height=int(body.get("height", 48)),
            steps=int(body.get("steps", 1000)),
            reps=int(body.get("reps", 16)),
            out_dir=body.get("out_dir"),
        )
        payload = {
            "version": API_VERSION,
            "report": report.to_dict(),
            "replay": {
                "palette": [list(rgb) for rgb in PALETTE],
                "height": int(frames[0].shape[0]),
                "width": int(frames[0].shape[1]),
                "frames": [f.ravel().tolist() for f in frames],
            },
        }
        if record_path is not None:
            payload["record_path"] = record_path
        return payload

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

"""Evaluation harness, fitness, PGPE, and the two meta-evolution loops."""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .agents import AgentParams
from .blueprint import EnvBlueprint
from .cells import NULL_AGENT_ID, is_agent
from .config import EnvConfig
from .env import Environment, count_agents, is_extinct
from .mutators import MutatorConfig
from .physics import StepStats, step
from .presets import make_petri, make_preset, seeded_world
from .programs import ProgramStore
from .rng import StepRng, derive_seed

DEATH_PENALTY = 1_000_000.0


# --- evaluation ---------------------------------------------------------------

@dataclass
class ReplicaResult:
    total_agents: int
    extinct: bool


@dataclass
class EvalReport:
    replicas: list[ReplicaResult]

    @property
    def totals(self) -> np.ndarray:
        return np.array([r.total_agents for r in self.replicas], dtype=np.float64)

    @property
    def mean_total(self) -> float:
        return float(self.totals.mean()) if self.replicas else 0.0

    @property
    def std_total(self) -> float:
        return float(self.totals.std()) if self.replicas else 0.0

    @property
    def extinction_count(self) -> int:
        return sum(r.extinct for r in self.replicas)

    @property
    def extinction_pct(self) -> float:
        n = len(self.replicas)
        return 100.0 * self.extinction_count / n if n else 0.0

    def to_dict(self) -> dict:
        return {
            "total_agents_mean": self.mean_total,
            "total_agents_std": self.std_total,
            "extinction_pct": self.extinction_pct,
            "replicas": [{"total_agents": r.total_agents, "extinct": r.extinct}
                         for r in self.replicas],
        }


def run_world(env: Environment, programs: ProgramStore, config: EnvConfig,
              seed: int, n_steps: int, mutator: MutatorConfig | None = None,
              intercept: bool = False, on_step=None,
              ) -> tuple[Environment, ProgramStore, list[StepStats]]:
    """Drive a world for n_steps with a fresh labeled rng stream."""
    rng = StepRng(seed)
    history: list[StepStats] = []
    for _ in range(n_steps):
        env, programs, stats = step(env, programs, config, rng,
                                    mutator=mutator, intercept=intercept)
        history.append(stats)
        if on_step is not None:
            on_step(env, stats)
        if stats.n_agents == 0:
            break
    return env, programs, history


def _one_replica(args) -> ReplicaResult:
    config, blueprint, logic, mutator, seed, n_steps = args
    env, programs = seeded_world(config, blueprint, logic, mutator)
    env, _, history = run_world(env, programs, config, seed, n_steps, mutator)
    total = sum(s.n_agents for s in history)
    # an early-terminated run stayed extinct for the remaining steps
    return ReplicaResult(total_agents=total, extinct=is_extinct(env))


def evaluate(preset: tuple[EnvConfig, EnvBlueprint], logic_params: AgentParams,
             mutator: MutatorConfig | None, seed: int, n_reps: int = 16,
             n_steps: int = 1000, n_jobs: int = 1) -> EvalReport:
    """Run independent replicas and aggregate occupancy + extinction."""
    config, blueprint = preset
    jobs = [(config, blueprint, logic_params, mutator,
             derive_seed(seed, f"replica:{i}"), n_steps) for i in range(n_reps)]
    if n_jobs > 1 and n_reps > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_one_replica, jobs))
    else:
        results = [_one_replica(j) for j in jobs]
    return EvalReport(replicas=results)


def fitness(total_agents: float, extinct: int) -> float:
    """Occupancy minus a huge penalty for dying out."""
    return float(total_agents) - float(extinct) * DEATH_PENALTY


# --- PGPE ----------------------------------------------------------------------

@dataclass
class PgpeConfig:
    center_lr: float = 1.5
    std_lr: float = 0.15
    init_std: float = 0.02
    std_min: float = 1e-4
    std_max: float = 1.0


@dataclass
class PgpeState:
    center: np.ndarray
    std: np.ndarray
    config: PgpeConfig = field(default_factory=PgpeConfig)
    step_count: int = 0
    # Adam accumulators for the center update
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    @classmethod
    def init(cls, center: np.ndarray, config: PgpeConfig | None = None) -> "PgpeState":
        config = config or PgpeConfig()
        center = np.asarray(center, dtype=np.float64)
        return cls(center=center.copy(),
                   std=np.full(center.shape, config.init_std),
                   config=config,
                   m=np.zeros_like(center), v=np.zeros_like(center))


def pgpe_sample(state: PgpeState, pop: int, rng: np.random.Generator) -> np.ndarray:
    """Symmetric (mirrored) population: pop/2 noise vectors, +/- around center."""
    if pop % 2 != 0:
        raise ValueError("population size must be even for mirrored sampling")
    eps = rng.standard_normal((pop // 2, state.center.size)) * state.std
    return np.concatenate([state.center + eps, state.center - eps], axis=0)


def _centered_ranks(values: np.ndarray) -> np.ndarray:
    """Fitness shaping: average ranks mapped to [-0.5, 0.5]; ties share ranks
    so a flat population produces a zero gradient."""
    from scipy.stats import rankdata
    n = values.size
    if n < 2:
        return np.zeros_like(values, dtype=np.float64)
    ranks = rankdata(values, method="average") - 1.0
    return ranks / (n - 1) - 0.5


def pgpe_step(state: PgpeState, fitnesses: np.ndarray,
              samples: np.ndarray) -> PgpeState:
    """One PGPE update from a mirrored population evaluated elsewhere."""
    fitnesses = np.asarray(fitnesses, dtype=np.float64)
    if fitnesses.size != samples.shape[0]:
        raise ValueError("need one fitness per sample")
    half = fitnesses.size // 2
    eps = samples[:half] - state.center  # reconstruct the noise

    shaped = _centered_ranks(fitnesses)
    r_plus, r_minus = shaped[:half], shaped[half:]
    d_trend = (r_plus - r_minus) / 2.0                       # direction signal
    baseline = shaped.mean()
    d_scale = (r_plus + r_minus) / 2.0 - baseline            # spread signal

    std = state.std
    # noise-scaled updates: step sizes anneal together with the search std
    grad_center = (d_trend[:, None] * eps).mean(axis=0)
    grad_std = (d_scale[:, None] * (eps ** 2 - std ** 2) / np.maximum(std, 1e-12)
                ).mean(axis=0)

    cfg = state.config
    t = state.step_count + 1
    center = state.center + cfg.center_lr * grad_center
    new_std = np.clip(std + cfg.std_lr * grad_std, cfg.std_min, cfg.std_max)
    return PgpeState(center=center, std=new_std, config=cfg, step_count=t,
                     m=state.m, v=state.v)


# --- end-to-end meta-evolution ---------------------------------------------------

@dataclass
class MetaLogEntry:
    outer_step: int
    best_fitness: float
    mean_fitness: float
    wall_time: float

    def to_json(self) -> str:
        return json.dumps({"outer_step": self.outer_step,
                           "best_fitness": self.best_fitness,
                           "mean_fitness": self.mean_fitness,
                           "wall_time": self.wall_time})


def _eval_candidate_e2e(args) -> float:
    config, blueprint, arch, vector, mutator, seed, n_steps = args
    logic = AgentParams(arch, np.asarray(vector, dtype=np.float32))
    env, programs = seeded_world(config, blueprint, logic, mutator)
    env, _, history = run_world(env, programs, config, seed, n_steps, mutator)
    total = sum(s.n_agents for s in history)
    return fitness(total, int(is_extinct(env)))


def meta_evolve_e2e(preset: tuple[EnvConfig, EnvBlueprint], init_params: AgentParams,
                    seed: int, pop: int = 32, outer: int = 30, n_steps: int = 1000,
                    mutator: MutatorConfig | None = None, n_jobs: int = 1,
                    log=None, checkpoint=None,
                    ) -> tuple[AgentParams, list[MetaLogEntry]]:
    """Full-run meta-evolution: each candidate lives an entire world."""
    config, blueprint = preset
    state = PgpeState.init(init_params.vector.astype(np.float64))
    best_vec = init_params.vector.copy()
    best_fit = _eval_candidate_e2e((config, blueprint, init_params.arch,
                                    best_vec, mutator,
                                    derive_seed(seed, "e2e:init"), n_steps))
    history: list[MetaLogEntry] = []
    t0 = time.monotonic()
    for outer_step in range(outer):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, f"e2e:{outer_step}")))
        samples = pgpe_sample(state, pop, rng)
        jobs = [(config, blueprint, init_params.arch, samples[i], mutator,
                 derive_seed(seed, f"e2e:{outer_step}:{i}"), n_steps)
                for i in range(pop)]
        if n_jobs > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                fits = np.array(list(pool.map(_eval_candidate_e2e, jobs)))
        else:
            fits = np.array([_eval_candidate_e2e(j) for j in jobs])
        state = pgpe_step(state, fits, samples)
        i_best = int(np.argmax(fits))
        if fits[i_best] > best_fit:
            best_fit = float(fits[i_best])
            best_vec = samples[i_best].astype(np.float32)
        entry = MetaLogEntry(outer_step, best_fit, float(fits.mean()),
                             time.monotonic() - t0)
        history.append(entry)
        if log is not None:
            log(entry)
        if checkpoint is not None:
            checkpoint(outer_step, AgentParams(init_params.arch, best_vec))
    return AgentParams(init_params.arch, best_vec), history


# --- Petri dish ------------------------------------------------------------------

def petri_run(logic_params: AgentParams, preset: tuple[EnvConfig, EnvBlueprint],
              seed: int, n_steps: int = 300, on_frame=None,
              ) -> tuple[int, list[int]]:
    """Single organism in a small dish with intercepted reproduction.

    Returns the number of successful (intercepted) reproductions and the
    agent-cell count trace, one entry per step.
    """
    config, blueprint = preset
    env, programs = seeded_world(config, blueprint, logic_params, mutator=None)
    rng = StepRng(seed)
    trace: list[int] = []
    n_success = 0
    for _ in range(n_steps):
        env, programs, stats = step(env, programs, config, rng,
                                    mutator=None, intercept=True)
        trace.append(stats.n_agents)
        n_success += stats.intercepted_successes
        if on_frame is not None:
            on_frame(env, stats)
    return n_success, trace


def petri_fitness(trace: list[int], n_repro: int, target: int = 50,
                  repro_weight: float = 10.0) -> float:
    """Stay near the target cell count; reward would-be reproductions."""
    error = sum(abs(c - target) for c in trace)
    return -float(error) + repro_weight * float(n_repro)


def _eval_candidate_petri(args) -> float:
    config, blueprint, arch, vector, seed, n_steps, target = args
    logic = AgentParams(arch, np.asarray(vector, dtype=np.float32))
    n_repro, trace = petri_run(logic, (config, blueprint), seed, n_steps)
    if len(trace) < n_steps:  # pad: an extinct dish keeps scoring zero cells
        trace = trace + [0] * (n_steps - len(trace))
    return petri_fitness(trace, n_repro, target)


def meta_evolve_petri(preset_name_or_pair, init_params: AgentParams, seed: int,
                      pop: int = 64, outer: int = 50, n_steps: int = 300,
                      target: int = 50, n_jobs: int = 1, log=None,
                      checkpoint=None) -> tuple[AgentParams, list[MetaLogEntry]]:
    """Cheap meta-evolution inside the dish; deploy the winner elsewhere."""
    if isinstance(preset_name_or_pair, str):
        config, blueprint = make_petri(preset_name_or_pair)
    else:
        config, blueprint = preset_name_or_pair
    state = PgpeState.init(init_params.vector.astype(np.float64))
    best_vec = init_params.vector.copy()
    best_fit = _eval_candidate_petri((config, blueprint, init_params.arch, best_vec,
                                      derive_seed(seed, "petri:init"), n_steps, target))
    init_fit = best_fit
    history: list[MetaLogEntry] = []
    t0 = time.monotonic()
    for outer_step in range(outer):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, f"petri:{outer_step}")))
        samples = pgpe_sample(state, pop, rng)
        jobs = [(config, blueprint, init_params.arch, samples[i],
                 derive_seed(seed, f"petri:{outer_step}:{i}"), n_steps, target)
                for i in range(pop)]
        if n_jobs > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                fits = np.array(list(pool.map(_eval_candidate_petri, jobs)))
        else:
            fits = np.array([_eval_candidate_petri(j) for j in jobs])
        state = pgpe_step(state, fits, samples)
        i_best = int(np.argmax(fits))
        if fits[i_best] > best_fit:
            best_fit = float(fits[i_best])
            best_vec = samples[i_best].astype(np.float32)
        entry = MetaLogEntry(outer_step, best_fit, float(fits.mean()),
                             time.monotonic() - t0)
        history.append(entry)
        if log is not None:
            log(entry)
        if checkpoint is not None:
            checkpoint(outer_step, AgentParams(init_params.arch, best_vec))
    result = AgentParams(init_params.arch, best_vec)
    return result, history

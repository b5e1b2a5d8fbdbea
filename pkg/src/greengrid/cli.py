"""Command-line entry points: run, eval, meta, replay, serve."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .agents import AgentParams, init_extended, init_minimal, load_params, save_params
from .evolve import evaluate, meta_evolve_e2e, meta_evolve_petri
from .mutators import MutatorConfig
from .presets import PRESET_NAMES, make_preset, seeded_world
from .record import load_record, record_run, replay
from .render import render_frame, save_gif, save_png


def _load_or_init_params(args) -> AgentParams:
    if args.params is not None:
        path = Path(args.params)
        if not path.exists():
            raise SystemExit(f"params file not found: {path}")
        return load_params(path)
    return init_extended() if args.arch == "extended" else init_minimal()


def _mutator_from_args(args) -> MutatorConfig | None:
    if args.mutator == "none":
        return None
    sigma = args.sigma
    if sigma is None:
        # defaults follow the architecture presets: 0.01 minimal, 0.001 extended
        sigma = 0.001 if args.arch == "extended" else 0.01
    return MutatorConfig(kind=args.mutator, base_sigma=sigma)


def cmd_run(args) -> int:
    config, blueprint = make_preset(args.preset, args.height, args.width)
    params = _load_or_init_params(args)
    mutator = _mutator_from_args(args)
    env, programs = seeded_world(config, blueprint, params, mutator)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    frames = []

    def on_step(i, env_i, stats):
        if i % args.snapshot_every == 0 or i == args.steps:
            frames.append(render_frame(env_i, config))
        if args.verbose and i % 100 == 0:
            print(f"step {i}: {stats.n_agents} agents", flush=True)

    record, env, history = record_run(
        out / "record", env, programs, config, blueprint, args.seed,
        args.steps, snapshot_every=args.snapshot_every, mutator=mutator,
        on_step=on_step)
    save_png(render_frame(env, config), out / "final.png")
    if frames:
        save_gif(frames, out / "run.gif")
    total = sum(s.n_agents for s in history)
    print(f"run finished: {history[-1].n_agents} agents at step {args.steps}, "
          f"{total} agent-cell-steps, record at {record.path}")
    return 0


def cmd_eval(args) -> int:
    config, blueprint = make_preset(args.preset, args.height, args.width)
    params = _load_or_init_params(args)
    mutator = _mutator_from_args(args)
    report = evaluate((config, blueprint), params, mutator, seed=args.seed,
                      n_reps=args.reps, n_steps=args.steps, n_jobs=args.jobs)
    header = f"{'config name':<14} {'logic':<10} {'mutator':<10} {'total agents':<22} {'extinction %':<12}"
    print(header)
    print("-" * len(header))
    mname = args.mutator
    print(f"{args.preset:<14} {params.arch:<10} {mname:<10} "
          f"{report.mean_total:>10.0f} ± {report.std_total:<9.0f} "
          f"{report.extinction_pct:<12.2f}")
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_dict(), indent=2))
    return 0


def cmd_meta(args) -> int:
    params = _load_or_init_params(args)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "train_log.jsonl"
    log_file = open(log_path, "a")

    def log(entry):
        log_file.write(entry.to_json() + "\n")
        log_file.flush()
        print(f"outer {entry.outer_step}: best {entry.best_fitness:.1f} "
              f"mean {entry.mean_fitness:.1f}", flush=True)

    def checkpoint(outer_step, best):
        if (outer_step + 1) % args.checkpoint_every == 0:
            save_params(best, out / f"checkpoint_{outer_step:04d}.params")

    if args.mode == "petri":
        best, _ = meta_evolve_petri(args.preset, params, seed=args.seed,
                                    pop=args.pop, outer=args.outer,
                                    n_jobs=args.jobs, log=log, checkpoint=checkpoint)
    else:
        preset = make_preset(args.preset, args.height, args.width)
        best, _ = meta_evolve_e2e(preset, params, seed=args.seed, pop=args.pop,
                                  outer=args.outer, n_steps=args.steps,
                                  mutator=_mutator_from_args(args),
                                  n_jobs=args.jobs, log=log, checkpoint=checkpoint)
    log_file.close()
    save_params(best, out / "best.params")
    print(f"best params written to {out / 'best.params'}")
    return 0


def cmd_replay(args) -> int:
    record = load_record(args.record)
    ok, problems = replay(record)
    if ok:
        print(f"replay OK: {len(record.snapshot_steps)} snapshots bit-identical")
        return 0
    for p in problems:
        print(f"replay FAILED: {p}", file=sys.stderr)
    return 1


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app
    app = create_app(static_dir=args.static_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def _add_world_args(p, steps_default=1000):
    p.add_argument("--preset", required=True, choices=PRESET_NAMES)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=48)
    p.add_argument("--steps", type=int, default=steps_default)
    p.add_argument("--seed", type=int, default=0)


def _add_params_args(p):
    p.add_argument("--params", default=None, help="agent params file (default: hand-designed init)")
    p.add_argument("--arch", choices=("minimal", "extended"), default="minimal")
    p.add_argument("--mutator", choices=("basic", "adaptive", "none"), default="basic")
    p.add_argument("--sigma", type=float, default=None,
                   help="basic/adaptive mutation sigma (default 0.01 minimal, 0.001 extended)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="greengrid",
                                     description="plant biome simulator and evolution tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate and write a replayable RunRecord")
    _add_world_args(p)
    _add_params_args(p)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--snapshot-every", type=int, default=100)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("eval", help="evaluate a candidate over replicas")
    _add_world_args(p)
    _add_params_args(p)
    p.add_argument("--reps", type=int, default=16)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--json-out", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("meta", help="meta-evolve agent parameters")
    p.add_argument("--mode", choices=("e2e", "petri"), required=True)
    _add_world_args(p)
    _add_params_args(p)
    p.add_argument("--pop", type=int, default=32)
    p.add_argument("--outer", type=int, default=30)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--checkpoint-every", type=int, default=5)
    p.set_defaults(fn=cmd_meta)

    p = sub.add_parser("replay", help="verify a RunRecord replays bit-exactly")
    p.add_argument("record")
    p.set_defaults(fn=cmd_replay)

    p = sub.add_parser("serve", help="run the interactive evolution service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--static-dir", default=None,
                   help="directory with the browser UI build to serve at /")
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

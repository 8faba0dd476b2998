"""Command-line driver: train, eval, compare, sweep-users, sweep-rho, validate."""
from __future__ import annotations

import argparse
import csv
import logging
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import selfcheck
from .config import RunConfig, dump_config, load_config, with_overrides
from .mac_env import LeoRachEnv
from .metrics import (
    MetricsRecord,
    signaling_cost,
    sweep_users,
    utilization_grid,
    write_cost_csv,
    write_grid_csv,
    write_metrics_csv,
    write_metrics_stream,
    write_slots_csv,
)
from .neural import load_checkpoint, save_checkpoint
from .protocols import ERACH, VARIANTS, ProtocolAgent
from .training import evaluate, train

log = logging.getLogger("leorach")

EVAL_EPISODE = -1  # episode tag of an aggregate evaluation record


class CliError(Exception):
    pass


# -- shared pieces --------------------------------------------------------

def _seeds(cfg: RunConfig, seed: int | None) -> list[int]:
    return [seed] if seed is not None else list(cfg.run.seeds)


def _run_id(variant: str, seed: int, interference: bool = True) -> str:
    return f"{variant}-s{seed}" + ("" if interference else "-nointerf")


def _agent_for(cfg: RunConfig, segments=None) -> ProtocolAgent:
    env = LeoRachEnv(cfg.env_config())
    agent = ProtocolAgent(cfg.protocol, env.num_users, env.obs_dim, env.num_satellites + 1, seed=0)
    if segments is not None:
        agent.load_segments(segments)
    return agent


def _train_one(cfg: RunConfig, seed: int, out: Path) -> Path:
    variant = cfg.protocol.variant
    run_id = _run_id(variant, seed, cfg.env.interference)
    result = train(cfg.env_config(), cfg.protocol, cfg.train, seed, cfg.cost_model())
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"{run_id}.npz"
    save_checkpoint(ckpt, result.best_segments)
    write_metrics_csv(out / f"{run_id}.train.metrics.v1.csv", result.history, run_id)
    write_metrics_csv(out / f"{run_id}.evals.metrics.v1.csv", result.evaluations, run_id)
    log.info("%s: best eval throughput %.4g bit/s -> %s", run_id, result.best_eval_throughput, ckpt)
    return ckpt


def _eval_one(cfg: RunConfig, seed: int, segments, out: Path | None,
              run_id: str) -> MetricsRecord:
    agent = _agent_for(cfg, segments)
    env_cfg = cfg.env_config()
    thr, col, outcomes = evaluate(agent, env_cfg, cfg.run.eval_episodes, cfg.run.eval_seed)
    bits = signaling_cost(cfg.protocol.variant, env_cfg.num_users, cfg.cost_model())
    record = MetricsRecord(thr, col, bits, EVAL_EPISODE, cfg.protocol.variant, seed)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        write_metrics_csv(out / f"{run_id}.eval.metrics.v1.csv", [record], run_id)
        write_slots_csv(out / f"{run_id}.slots.csv", outcomes)
        grid = utilization_grid(outcomes, env_cfg.constellation.num_satellites,
                                env_cfg.budget.num_pilots)
        write_grid_csv(out / f"{run_id}.grid.csv", grid)
    return record


def _train_and_eval(job):
    cfg, seed, out = job
    ckpt = _train_one(cfg, seed, out)
    run_id = _run_id(cfg.protocol.variant, seed, cfg.env.interference)
    return run_id, _eval_one(cfg, seed, load_checkpoint(ckpt), out, run_id)


def _map(fn, jobs, workers: int):
    if workers <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


# -- subcommands ----------------------------------------------------------

def cmd_train(cfg: RunConfig, args) -> int:
    out = Path(args.out or cfg.run.out_dir)
    for seed in _seeds(cfg, args.seed):
        _train_one(cfg, seed, out)
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    out = Path(args.out or cfg.run.out_dir)
    seeds = _seeds(cfg, args.seed)
    if args.checkpoint and len(seeds) != 1:
        raise CliError("--checkpoint needs a single --seed")
    for seed in seeds:
        run_id = _run_id(cfg.protocol.variant, seed, cfg.env.interference)
        path = Path(args.checkpoint) if args.checkpoint else out / f"{run_id}.npz"
        if not path.exists():
            raise CliError(f"checkpoint not found: {path}")
        rec = _eval_one(cfg, seed, load_checkpoint(path), out, run_id)
        print(f"{run_id}: throughput {rec.avg_network_throughput / 1e6:.2f} Mbit/s, "
              f"collision {rec.collision_probability:.2f} %")
    return 0


def compare_jobs(cfg: RunConfig, seeds, out: Path, include_no_interference: bool = True):
    jobs = [(with_overrides(cfg, variant=v, interference=True), s, out)
            for v in VARIANTS for s in seeds]
    if include_no_interference:
        jobs += [(with_overrides(cfg, variant=ERACH, interference=False), s, out) for s in seeds]
    return jobs


def summarize(results) -> list[tuple[str, float, float, float, int]]:
    """Rows (label, median Mbit/s, mean collision %, bits/slot, runs)."""
    groups: dict[str, list[MetricsRecord]] = {}
    for run_id, rec in results:
        label = rec.variant + (" w.o. interference" if run_id.endswith("-nointerf") else "")
        groups.setdefault(label, []).append(rec)
    return [(label,
             statistics.median(r.avg_network_throughput for r in recs) / 1e6,
             statistics.fmean(r.collision_probability for r in recs),
             recs[0].signaling_bits_per_slot, len(recs))
            for label, recs in groups.items()]


def cmd_compare(cfg: RunConfig, args) -> int:
    out = Path(args.out or cfg.run.out_dir)
    results = _map(_train_and_eval, compare_jobs(cfg, _seeds(cfg, args.seed), out), args.workers)
    results.sort(key=lambda x: x[0])
    write_metrics_stream(out / "compare.metrics.v1.csv", results)
    rows = summarize(results)
    with open(out / "compare.summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("label", "median_throughput_mbps", "mean_collision_pct",
                    "signaling_bits_per_slot", "runs"))
        w.writerows(rows)
    print(f"{'protocol':<28}{'Avg. Txpt. (Mbit/s)':>22}{'Collision (%)':>16}")
    for label, thr, col, _, _ in rows:
        print(f"{label:<28}{thr:>22.2f}{col:>16.2f}")
    return 0


def cmd_sweep_users(cfg: RunConfig, args) -> int:
    out = Path(args.out or cfg.run.out_dir)
    rows = sweep_users(cfg.sweep.user_counts, cfg.cost_model())
    write_cost_csv(out / "sweep_users.csv", rows)
    print(f"wrote {len(rows)} rows to {out / 'sweep_users.csv'}")
    return 0


def cmd_sweep_rho(cfg: RunConfig, args) -> int:
    """rho_grid entries are fractions of R_max."""
    out = Path(args.out or cfg.run.out_dir)
    r_max = cfg.env_config().r_max
    jobs = []
    for frac in cfg.sweep.rho_grid:
        if frac < 0:
            raise CliError("rho_grid entries must be non-negative")
        sub = replace(cfg, env=replace(cfg.env, rho=frac * r_max))
        jobs += [(sub, s, out / f"rho_{frac:g}") for s in _seeds(cfg, args.seed)]
    results = _map(_train_and_eval, jobs, args.workers)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep_rho.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rho_fraction", "rho_bps", "variant", "seed", "avg_throughput_bps",
                    "collision_pct"))
        for (sub, seed, _), (_, rec) in zip(jobs, results):
            w.writerow((repr(sub.env.rho / r_max), repr(sub.env.rho), rec.variant, seed,
                        repr(rec.avg_network_throughput), repr(rec.collision_probability)))
    print(f"wrote {len(results)} rows to {out / 'sweep_rho.csv'}")
    return 0


def cmd_validate(cfg: RunConfig, args) -> int:
    results = selfcheck.run_all()
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise CliError(f"self-checks failed: {', '.join(failed)}")
    return 0


COMMANDS = {
    "train": cmd_train, "eval": cmd_eval, "compare": cmd_compare,
    "sweep-users": cmd_sweep_users, "sweep-rho": cmd_sweep_rho, "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--seed", type=int, help="run a single seed instead of run.seeds")
    common.add_argument("--out", help="output directory (default: run.out_dir)")
    common.add_argument("--interference", choices=("on", "off"))
    common.add_argument("--variant", choices=VARIANTS)
    common.add_argument("--workers", type=int, default=1, help="parallel processes")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="leorach", parents=[common],
                                     description="Learned random access on a LEO lane.")
    parser.add_argument("--dump-defaults", action="store_true",
                        help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "eval":
            p.add_argument("--checkpoint", help="checkpoint path (default: <out>/<run_id>.npz)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.dump_defaults:
        sys.stdout.write(dump_config(RunConfig()))
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = load_config(args.config)
        interference = None if args.interference is None else args.interference == "on"
        cfg = with_overrides(cfg, interference=interference, variant=args.variant)
        return COMMANDS[args.command](cfg, args)
    except (CliError, ValueError, OSError) as exc:
        print(f"leorach {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

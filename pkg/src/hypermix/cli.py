"""Experiment command line: train, eval, dump-hypergraph, and compare.

Run directories are append-or-create: rerunning into a fresh directory never
mutates previous runs, and (config, seed) fully determines every output.
Set ``HYPERMIX_LOG`` to error/info/debug to control verbosity.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import agents as ag
from . import mixers as mx
from .autodiff import Var
from .config import Config, load_config
from .envs import make_env
from .errors import (CheckpointError, ConfigError, ContractError,
                     TrainingError, UnsupportedMixerError)
from .hypergraph import build_hypergraph, onehot_hypergraph, write_hypergraph_csv
from .nn import load_checkpoint_into
from .rng import Rng
from .training import collect_episode, evaluate_policy, init_run_stores, run_training

log = logging.getLogger("hypermix")


def _setup_logging() -> None:
    level = os.environ.get("HYPERMIX_LOG", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO,
              "debug": logging.DEBUG}
    if level not in levels:
        raise ConfigError(f"HYPERMIX_LOG must be one of {sorted(levels)}")
    logging.basicConfig(level=levels[level],
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _run_one_seed(args) -> dict:
    cfg_dict, seed, out_dir = args
    cfg = Config.from_dict(cfg_dict)
    return run_training(cfg, seed, out_dir)


def _train_runs(cfg: Config, jobs: list[tuple[int, Path]], workers: int) -> list[dict]:
    payload = [(cfg.to_dict(), seed, str(out)) for seed, out in jobs]
    if workers <= 1 or len(payload) == 1:
        return [_run_one_seed(p) for p in payload]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one_seed, payload))


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seeds=[args.seed])
    out = Path(args.out)
    sweep = cfg.hyperedge_sweep
    results = []
    if sweep:
        for m in sweep:
            sub = cfg.replace(hyperedges=m, hyperedge_sweep=None)
            jobs = [(seed, out / f"m_{m}" / f"seed_{seed}") for seed in sub.seeds]
            results += _train_runs(sub, jobs, args.workers)
    else:
        jobs = [(seed, out / f"seed_{seed}") for seed in cfg.seeds]
        results = _train_runs(cfg, jobs, args.workers)
    for res in results:
        log.info("seed %s finished after %s episodes (%.1fs): %s",
                 res["seed"], res["episodes"], res["wall_seconds"], res["final"])
    print(json.dumps({"runs": len(results)}))
    return 0


def _load_run(config_path, checkpoint_path):
    cfg = load_config(config_path)
    env = make_env(cfg.env)
    store, _ = init_run_stores(cfg, env, seed=cfg.seeds[0])
    load_checkpoint_into(store, checkpoint_path)
    return cfg, env, store


def cmd_eval(args) -> int:
    cfg, env, store = _load_run(args.config, args.checkpoint)
    rng = Rng(args.seed).split("cli-eval")
    stats = evaluate_policy(env, store, args.episodes, rng, cfg.agent_hidden)
    print(f"mean_return={stats['mean_return']:.6f} "
          f"success_rate={stats['success_rate']:.6f}")
    print(json.dumps(stats, sort_keys=True))
    return 0


def cmd_dump_hypergraph(args) -> int:
    cfg, env, store = _load_run(args.config, args.checkpoint)
    if cfg.mixer not in ("hgcn-mix", "hgcn-mix-oh"):
        raise UnsupportedMixerError(
            f"mixer {cfg.mixer!r} has no hypergraph to dump"
        )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = Rng(args.seed)
    ep = collect_episode(env, store, 0.0, rng.split("env"), rng.split("explore"),
                         cfg.agent_hidden)
    pv = store.bind(None)
    n = env.spec.n_agents
    written = []
    for t in range(ep.length):
        if cfg.mixer == "hgcn-mix-oh":
            hg = onehot_hypergraph(n)
        else:
            hg = build_hypergraph(Var(ep.obs[t]), pv["mix.gen.w"], pv["mix.gen.b"])
        path = out / f"step_{t:04d}.csv"
        write_hypergraph_csv(path, hg.H.value)
        written.append(str(path))
    print(json.dumps({"steps": ep.length, "files": written}))
    return 0


def _percentiles(values: np.ndarray) -> tuple[float, float, float]:
    # linear-interpolation percentiles over the seed axis
    return (float(np.percentile(values, 50)),
            float(np.percentile(values, 25)),
            float(np.percentile(values, 75)))


def aggregate_metrics(run_dirs: list[Path], mixer: str) -> list[dict]:
    """Median and 25-75 percentile of success rate across seed runs."""
    series = []
    for run in run_dirs:
        records = [json.loads(line)
                   for line in (run / "metrics.jsonl").read_text().splitlines()]
        series.append(records)
    lengths = {len(s) for s in series}
    if len(lengths) != 1:
        raise ConfigError(
            f"mismatched eval grids across seeds for mixer {mixer!r}:"
            f" lengths {sorted(lengths)}"
        )
    rows = []
    for i in range(lengths.pop()):
        episodes = {s[i]["episode"] for s in series}
        if len(episodes) != 1:
            raise ConfigError(
                f"mismatched eval grids for mixer {mixer!r} at index {i}"
            )
        success = np.array([s[i]["success_rate"] for s in series])
        returns = np.array([s[i]["mean_return"] for s in series])
        med, p25, p75 = _percentiles(success)
        rows.append({
            "mixer": mixer,
            "episode": episodes.pop(),
            "step_median": float(np.median([s[i]["step"] for s in series])),
            "success_median": med,
            "success_p25": p25,
            "success_p75": p75,
            "return_median": float(np.median(returns)),
        })
    return rows


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    mixers = [m.strip() for m in args.mixers.split(",") if m.strip()]
    for m in mixers:
        mx.validate_mixer_kind(m)
    seeds = list(range(args.seeds))
    out_csv = Path(args.out)
    work = out_csv.parent / (out_csv.stem + "_runs")
    all_rows = []
    for mixer in mixers:
        sub = cfg.replace(mixer=mixer, seeds=seeds, stop_on_success=False,
                          hyperedge_sweep=None)
        jobs = [(seed, work / mixer / f"seed_{seed}") for seed in seeds]
        _train_runs(sub, jobs, args.workers)
        all_rows += aggregate_metrics([out for _, out in jobs], mixer)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    with out_csv.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(all_rows[0].keys()))
        writer.writeheader()
        writer.writerows(all_rows)
    print(json.dumps({"csv": str(out_csv), "rows": len(all_rows)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hypermix",
        description="Cooperative multi-agent Q-learning experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train per-seed runs from a config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed", type=int, default=None,
                         help="run only this seed")
    p_train.add_argument("--workers", type=int, default=1)
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint greedily")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", required=True)
    p_eval.add_argument("--episodes", type=int, default=32)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.set_defaults(fn=cmd_eval)

    p_dump = sub.add_parser("dump-hypergraph",
                            help="write per-step incidence CSVs for one episode")
    p_dump.add_argument("--checkpoint", required=True)
    p_dump.add_argument("--config", required=True)
    p_dump.add_argument("--seed", type=int, default=0)
    p_dump.add_argument("--out", required=True)
    p_dump.set_defaults(fn=cmd_dump_hypergraph)

    p_cmp = sub.add_parser("compare",
                           help="train mixers across seeds and aggregate a CSV")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--mixers", required=True,
                       help="comma-separated mixer kinds")
    p_cmp.add_argument("--seeds", type=int, required=True,
                       help="number of seeds (0..k-1)")
    p_cmp.add_argument("--out", required=True)
    p_cmp.add_argument("--workers", type=int, default=1)
    p_cmp.set_defaults(fn=cmd_compare)
    return parser


def main(argv=None) -> int:
    try:
        _setup_logging()
        args = build_parser().parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (CheckpointError, UnsupportedMixerError, ContractError,
            TrainingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Inspect the learned hypergraph over one corridor episode as ASCII heatmaps.

Agents whose observations share structure (or frozen agents, whose
observations are masked to the same value) produce matching incidence rows.
Run: python3 demos/05_dump_hypergraph.py
"""

import tempfile
from pathlib import Path

import numpy as np

from hypermix.config import Config
from hypermix.envs import make_env
from hypermix.hypergraph import read_hypergraph_csv
from hypermix.cli import main as cli_main
from hypermix.training import run_training

cfg = Config(
    env={"name": "grid", "n_agents": 4, "length": 4, "freeze": True},
    mixer="hgcn-mix",
    hyperedges=4,
    agent_hidden=16,
    hypernet_hidden=16,
    embed=8,
    episodes=300,
    eval_interval=300,
    eval_episodes=2,
    anneal_steps=1500,
    seeds=[0],
)

SHADES = " .:-=+*#%@"


def ascii_heatmap(H):
    top = H.max() or 1.0
    lines = []
    for i, row in enumerate(H):
        cells = "".join(SHADES[min(int(v / top * (len(SHADES) - 1e-9)),
                                   len(SHADES) - 1)] for v in row)
        lines.append(f"  agent {i} |{cells}|")
    return "\n".join(lines)


with tempfile.TemporaryDirectory() as tmp:
    run_dir = Path(tmp) / "run"
    run_training(cfg, seed=0, out_dir=run_dir)
    cfg_path = run_dir / "config.json"
    dump_dir = Path(tmp) / "dump"
    code = cli_main(["dump-hypergraph",
                     "--checkpoint", str(run_dir / "checkpoint"),
                     "--config", str(cfg_path),
                     "--seed", "5", "--out", str(dump_dir)])
    assert code == 0
    for path in sorted(dump_dir.glob("step_*.csv")):
        H = read_hypergraph_csv(path)
        print(f"\n{path.name}  (columns: {cfg.hyperedges} learned + "
              f"{H.shape[0]} self-edges)")
        print(ascii_heatmap(H))
        learned = H[:, :cfg.hyperedges]
        strong = (learned > 0.1).sum(axis=0)
        print(f"  agents above 0.1 per learned hyperedge: {strong.tolist()}")

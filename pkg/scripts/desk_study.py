#!/usr/bin/env python3
"""End-to-end desk-scale study: collect scripted play restricted to
{PushL, PushR, Lift}, train PLATO / Play-LMP / Play-GCBC over several seeds,
and evaluate them into a success-rate table.

Everything runs through the play2d CLI so each artifact (log, checkpoints,
metrics, tables) lands in --out with its config hash. Trainings run in
parallel worker processes with BLAS pinned to one thread each.

    python scripts/desk_study.py --out runs/desk --steps 50000 --seeds 0 1
"""

import argparse
import json
import subprocess
import sys
import time
from pathlib import Path

from play2d.primitives import KIND_ORDER

STUDY_PRIMS = ("PushL", "PushR", "Lift")
VARIANTS = ("PLATO", "LMP", "GCBC")


def desk_overrides(steps: int, weights: str) -> list[str]:
    return ["--set", "model.policy_hidden", "32",
            "--set", "model.posterior_hidden", "48",
            "--set", "model.prior_width", "64",
            "--set", "model.train_steps", str(steps),
            "--set", "primitives.weights", weights]


def cli(args: list[str], **kw) -> subprocess.CompletedProcess:
    return subprocess.run([sys.executable, "-m", "play2d.cli"] + args, **kw)


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--episodes", type=int, default=300)
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1])
    ap.add_argument("--eval-episodes", type=int, default=40)
    ap.add_argument("--jobs", type=int, default=2)
    ap.add_argument("--collect-seed", type=int, default=11)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    weights = json.dumps([1 / 3 if k.value in STUDY_PRIMS else 0.0
                          for k in KIND_ORDER])
    overrides = desk_overrides(args.steps, weights)

    data = out / "play.playlog"
    if not data.exists():
        print(f"== collecting {args.episodes} episodes")
        cli(["collect", "--episodes", str(args.episodes),
             "--seed", str(args.collect_seed), "--out", str(data)]
            + overrides, check=True)

    jobs = [(v, s, out / f"{v.lower()}_{s}.ckpt")
            for v in VARIANTS for s in args.seeds]
    queue = [j for j in jobs if not j[2].exists()]
    running: list[tuple] = []
    t0 = time.time()
    import os
    env = dict(os.environ, OMP_NUM_THREADS="1", OPENBLAS_NUM_THREADS="1")
    while queue or running:
        while queue and len(running) < args.jobs:
            variant, seed, ckpt = queue.pop(0)
            print(f"== training {variant} seed {seed} -> {ckpt.name}")
            proc = subprocess.Popen(
                [sys.executable, "-m", "play2d.cli", "train",
                 "--data", str(data), "--variant", variant,
                 "--seed", str(seed), "--out", str(ckpt)] + overrides,
                env=env)
            running.append((variant, seed, proc))
        for item in list(running):
            variant, seed, proc = item
            if proc.poll() is not None:
                running.remove(item)
                if proc.returncode != 0:
                    print(f"!! {variant} seed {seed} failed", file=sys.stderr)
                    return proc.returncode
        time.sleep(2)
    print(f"== trainings done in {(time.time() - t0) / 60:.1f} min")

    ckpt_args: list[str] = []
    for _, _, ckpt in jobs:
        ckpt_args += ["--ckpt", str(ckpt)]
    cli(["eval"] + ckpt_args
        + ["--episodes", str(args.eval_episodes),
           "--primitives", ",".join(STUDY_PRIMS),
           "--seed", "77", "--jobs", str(args.jobs),
           "--out", str(out / "eval")] + overrides, check=True)
    print((out / "eval" / "table.txt").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())

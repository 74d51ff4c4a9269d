#!/usr/bin/env python3
"""Contact-signal robustness sweep: inject false interactions at several
percentages, retrain PLATO on each corrupted signal, and evaluate.

    python scripts/contact_ablation.py --data runs/desk/play.playlog \
        --out runs/fc --pcts 4 8 12 --steps 50000
"""

import argparse
import json
import subprocess
import sys
from pathlib import Path

from play2d.primitives import KIND_ORDER

STUDY_PRIMS = ("PushL", "PushR", "Lift")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--pcts", type=float, nargs="+", default=[4.0, 8.0, 12.0])
    ap.add_argument("--steps", type=int, default=50_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--eval-episodes", type=int, default=40)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    weights = json.dumps([1 / 3 if k.value in STUDY_PRIMS else 0.0
                          for k in KIND_ORDER])
    overrides = ["--set", "model.policy_hidden", "32",
                 "--set", "model.posterior_hidden", "48",
                 "--set", "model.prior_width", "64",
                 "--set", "model.train_steps", str(args.steps),
                 "--set", "primitives.weights", weights]

    ckpts = []
    for pct in args.pcts:
        ckpt = out / f"plato_fc{pct:g}.ckpt"
        print(f"== ablate-contact pct={pct:g}")
        subprocess.run(
            [sys.executable, "-m", "play2d.cli", "ablate-contact",
             "--data", args.data, "--pct", str(pct),
             "--seed", str(args.seed), "--out", str(ckpt)] + overrides,
            check=True)
        ckpts += ["--ckpt", str(ckpt)]

    subprocess.run(
        [sys.executable, "-m", "play2d.cli", "eval"] + ckpts
        + ["--episodes", str(args.eval_episodes),
           "--primitives", ",".join(STUDY_PRIMS),
           "--seed", "99", "--out", str(out / "eval")] + overrides,
        check=True)
    print((out / "eval" / "table.txt").read_text())
    return 0


if __name__ == "__main__":
    sys.exit(main())

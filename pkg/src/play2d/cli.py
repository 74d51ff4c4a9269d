"""Command-line entry point: data collection, segmentation stats, training,
evaluation, the contact ablation, latent export, replay verification, and the
teleoperation server.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import evalharness as E
from . import models as M
from . import playlog
from . import primitives as P
from . import segment as S
from . import sim
from .config import (RunConfig, apply_overrides, config_hash, config_to_dict,
                     load_config, world_hash)
from .errors import ConfigurationError, DataError, Play2dError


def _load_run_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if args.set:
        cfg = apply_overrides(cfg, [(k, v) for k, v in args.set])
    cfg.validate()
    return cfg


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run config JSON (defaults used if absent)")
    p.add_argument("--set", nargs=2, action="append", metavar=("KEY", "VALUE"),
                   default=[],
                   help="dot-path override, e.g. --set model.beta 1e-3")


def _parse_kinds(raw: str | None):
    if not raw:
        return list(P.KIND_ORDER)
    by_name = {k.value.lower(): k for k in P.KIND_ORDER}
    out = []
    for name in raw.split(","):
        key = name.strip().lower()
        if key not in by_name:
            raise ConfigurationError(
                f"unknown primitive {name!r}; valid: "
                f"{[k.value for k in P.KIND_ORDER]}")
        out.append(by_name[key])
    return out


# -- collect ------------------------------------------------------------------


def cmd_collect(args) -> int:
    cfg = _load_run_config(args)
    duration = args.episodes * cfg.primitives.max_episode_steps
    extra = {"config": config_to_dict(cfg), "world_hash": world_hash(cfg)}
    log, labels = P.generate_play(cfg.world, cfg.primitives, args.seed,
                                  duration, config_hash=config_hash(cfg),
                                  extra_manifest=extra)
    playlog.save(log, args.out)
    labels_path = str(args.out) + ".labels.json"
    with open(labels_path, "w", encoding="utf-8") as f:
        json.dump([[l.to_json() for l in ep] for ep in labels], f)
    report = playlog.validate(log)
    if not report.ok:
        raise DataError(f"generated log failed validation: {report.message}")
    contact = np.concatenate([ep.contact for ep in log.episodes]) \
        if log.episodes else np.zeros(0)
    n_int = sum(len(S.segment_episode(ep.contact, cfg.smoothing).interactions)
                for ep in log.episodes)
    print(f"wrote {args.out}: {log.n_episodes} episodes, {log.n_steps} steps")
    print(f"contact fraction: {contact.mean() if contact.size else 0.0:.3f}; "
          f"interactions under default smoothing: {n_int}")
    print(f"labels side-channel: {labels_path}")
    print(f"config hash: {config_hash(cfg)}")
    return 0


# -- train --------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = _load_run_config(args)
    if args.beta is not None:
        cfg = apply_overrides(cfg, [("model.beta", repr(args.beta))])
    variant = M.MethodVariant(args.variant)
    log = playlog.load(args.data)
    bundle, rows = M.train(log, cfg.model, cfg.smoothing, variant, args.seed)
    M.save_bundle(args.out, bundle, config_hash=config_hash(cfg),
                  extra={"seed": args.seed, "world_hash": world_hash(cfg)})
    metrics_path = str(args.out) + ".metrics.csv"
    with open(metrics_path, "w", encoding="utf-8") as f:
        f.write(f"# variant={variant.value} seed={args.seed} "
                f"beta={cfg.model.beta:g} config_hash={config_hash(cfg)}\n")
        f.write("step,total,l_int,l_pre,kl\n")
        for r in rows:
            f.write(r.csv() + "\n")
    final = rows[-1] if rows else None
    print(f"wrote {args.out} ({variant.value}, seed {args.seed})")
    if final:
        print(f"final loss: total={final.total:.5f} l_int={final.l_int:.5f} "
              f"l_pre={final.l_pre:.5f} kl={final.kl:.5f}")
    print(f"metrics: {metrics_path}")
    return 0


# -- eval ---------------------------------------------------------------------


def _method_label(header: dict) -> str:
    label = header["variant"]
    if "false_contact_pct" in header:
        label += f"-FC({header['false_contact_pct']:.0f}%)"
    return label


def _eval_one(job):
    """Worker: evaluate one checkpoint (runs in a separate process)."""
    ckpt_path, cfg_dict, kinds_names, episodes, seed = job
    from .config import config_from_dict
    cfg = config_from_dict(cfg_dict)
    bundle, header = M.load_bundle(ckpt_path)
    kinds = [P.PrimitiveKind(k) for k in kinds_names]
    results = E.evaluate_bundle(bundle, cfg.world, cfg.primitives, cfg.eval,
                                kinds, episodes, seed)
    return (_method_label(header), header.get("seed", 0), ckpt_path,
            [(r.primitive, r.success, r.steps_used, r.final_pos_error,
              r.final_rot_error) for r in results])


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    kinds = _parse_kinds(args.primitives)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    absent = []
    for path in args.ckpt:
        if not Path(path).exists():
            absent.append(path)
            continue
        _, header = M.load_bundle(path)
        ck_world = header.get("world_hash", "")
        if ck_world and ck_world != world_hash(cfg) and not args.force:
            raise ConfigurationError(
                f"{path}: checkpoint world hash {ck_world} does not match "
                f"this config ({world_hash(cfg)}); pass --force to override")
        jobs.append((path, config_to_dict(cfg), [k.value for k in kinds],
                     args.episodes, args.seed))

    if args.jobs > 1 and len(jobs) > 1:
        import multiprocessing as mp
        with mp.get_context("spawn").Pool(args.jobs) as pool:
            outcomes = pool.map(_eval_one, jobs)
    else:
        outcomes = [_eval_one(j) for j in jobs]

    table = E.SuccessTable()
    rows_csv = []
    by_variant: dict = {}
    for variant, seed, path, results in outcomes:
        by_variant.setdefault(variant, {}).setdefault(seed, results)
        for i, (prim, success, steps, pe, re_) in enumerate(results):
            rows_csv.append([variant, prim, seed, i, int(success), steps,
                             f"{pe:.6f}", f"{re_:.6f}"])
    for variant, seeds in by_variant.items():
        for kind in kinds:
            rates = []
            for seed, results in sorted(seeds.items()):
                hits = [s for (prim, s, *_rest) in results
                        if prim == kind.value]
                rates.append(float(np.mean(hits)) if hits else 0.0)
            table.add(variant, kind.value, rates)
    for path in absent:
        table.mark_absent(f"absent:{Path(path).name}", kinds[0].value)

    results_path = out_dir / "results.csv"
    with open(results_path, "w", encoding="utf-8") as f:
        f.write("method,primitive,seed,episode,success,steps,pos_error,"
                "rot_error\n")
        for row in rows_csv:
            f.write(",".join(str(v) for v in row) + "\n")
    table_path = out_dir / "table.txt"
    with open(table_path, "w", encoding="utf-8") as f:
        f.write(f"# config_hash={config_hash(cfg)}\n")
        f.write(table.to_text())
    with open(out_dir / "table.csv", "w", encoding="utf-8") as f:
        table.to_csv(f)
    print(table.to_text())
    for variant in by_variant:
        print(f"{variant} mean over primitives: "
              f"{table.mean_over_primitives(variant):.1f}%")
    if absent:
        print(f"absent checkpoints: {absent}")
    print(f"wrote {results_path} and {table_path}")
    return 0


# -- segment-stats --------------------------------------------------------------


def cmd_segment_stats(args) -> int:
    cfg = _load_run_config(args)
    log = playlog.load(args.data)
    segs = [S.segment_episode(ep.contact, cfg.smoothing)
            for ep in log.episodes]
    n_int = sum(len(s.interactions) for s in segs)
    lengths = [it.length for s in segs for it in s.interactions]
    covered = sum(min(it.c_e + 1, s.length) - it.c_s
                  for s in segs for it in s.interactions)
    total = sum(s.length for s in segs)
    print(f"episodes: {log.n_episodes}; steps: {log.n_steps}")
    print(f"interactions: {n_int} "
          f"({n_int / max(log.n_episodes, 1):.2f} per episode)")
    if lengths:
        arr = np.asarray(lengths)
        print(f"interaction length: min={arr.min()} p50={np.median(arr):.0f} "
              f"mean={arr.mean():.1f} max={arr.max()}")
        hist, edges = np.histogram(arr, bins=10)
        for h, lo, hi in zip(hist, edges[:-1], edges[1:]):
            print(f"  [{lo:6.1f},{hi:6.1f}): {h}")
    print(f"phase coverage: {covered}/{total} steps inside interactions "
          f"({covered / max(total, 1):.3f})")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write("episode,interaction,c_s,c_e,length\n")
            for e, s in enumerate(segs):
                for k, it in enumerate(s.interactions):
                    f.write(f"{e},{k},{it.c_s},{it.c_e},{it.length}\n")
        print(f"wrote {args.out}")
    return 0


# -- ablate-contact ---------------------------------------------------------


def cmd_ablate_contact(args) -> int:
    cfg = _load_run_config(args)
    log = playlog.load(args.data)
    rng = np.random.default_rng(args.seed)
    corrupted, report = S.inject_false_contacts_dataset(
        log, rng, args.pct, cfg.smoothing)
    print(f"requested false-interaction pct: {report.requested_pct:.1f}")
    print(f"achieved false-interaction pct: {report.achieved_pct:.2f} "
          f"({report.injected} runs injected)")
    if args.out:
        bundle, rows = M.train(log, cfg.model, cfg.smoothing,
                               M.MethodVariant.PLATO, args.seed,
                               contacts_override=corrupted)
        M.save_bundle(args.out, bundle, config_hash=config_hash(cfg),
                      extra={"seed": args.seed,
                             "world_hash": world_hash(cfg),
                             "false_contact_pct": report.achieved_pct})
        final = rows[-1] if rows else None
        if final and all(math.isfinite(v) for v in
                         (final.total, final.l_int, final.l_pre, final.kl)):
            print(f"corrupted-data training finished with finite losses "
                  f"(total={final.total:.5f})")
        print(f"wrote {args.out}")
    return 0


# -- export-latents -----------------------------------------------------------


def cmd_export_latents(args) -> int:
    cfg = _load_run_config(args)
    bundle, _ = M.load_bundle(args.ckpt)
    kinds = _parse_kinds(args.primitives)
    with open(args.out, "w", encoding="utf-8", newline="") as f:
        rows = E.export_latents(bundle, cfg.world, cfg.primitives, cfg.eval,
                                kinds, args.episodes, args.seed, f)
    print(f"wrote {args.out}: {rows} rows, latent dim "
          f"{bundle.config.latent_dim}")
    return 0


# -- export-csv ---------------------------------------------------------------


def cmd_export_csv(args) -> int:
    log = playlog.load(args.data)
    with open(args.out, "w", encoding="utf-8") as f:
        playlog.export_csv(log, f)
    print(f"wrote {args.out}")
    return 0


# -- replay -------------------------------------------------------------------


def cmd_replay(args) -> int:
    log = playlog.load(args.data)
    if not (0 <= args.episode < log.n_episodes):
        raise DataError(f"episode {args.episode} out of range "
                        f"(log has {log.n_episodes})")
    extra = log.extra
    if "config" not in extra or "base_seed" not in extra:
        raise DataError("log manifest lacks the generating config; "
                        "replay needs logs written by `collect`")
    from .config import config_from_dict
    cfg = config_from_dict(extra["config"])
    world = sim.world_new(cfg.world, P._episode_seed(extra["base_seed"],
                                                     args.episode))
    ep = log.episodes[args.episode]
    mismatches = 0
    first_bad = None
    for t in range(len(ep)):
        obs = sim.observe(world)
        stored = np.concatenate([ep.robot[t], ep.objects[t]])
        if not np.array_equal(obs.astype(np.float32), stored):
            mismatches += 1
            if first_bad is None:
                first_bad = t
        action = sim.Action(
            target_position=(float(ep.actions[t, 0]), float(ep.actions[t, 1])),
            grab=bool(ep.actions[t, 2] > 0.5))
        _, contact = sim.step(world, action)
        if bool(ep.contact[t]) != contact:
            mismatches += 1
            if first_bad is None:
                first_bad = t
    if mismatches:
        print(f"replay mismatch: {mismatches} records differ "
              f"(first at step {first_bad})")
        return 3
    print(f"replay ok: episode {args.episode}, {len(ep)} steps bit-identical")
    return 0


# -- teleop-serve --------------------------------------------------------------


def cmd_teleop_serve(args) -> int:
    from .teleop import run_server
    cfg = _load_run_config(args)
    print(f"teleop server on ws://{args.host}:{args.port} "
          f"(control {cfg.world.control_rate:g} Hz, render 20 Hz)")
    run_server(cfg, args.host, args.port, seed=args.seed)
    return 0


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="play2d",
        description="2D learning-from-play workbench: collect, segment, "
                    "train, evaluate, teleoperate.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", help="generate scripted play data")
    _add_common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--episodes", type=int, default=300)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train", help="train a method on a play log")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--variant", default="PLATO",
                   choices=[v.value for v in M.MethodVariant])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=None,
                   help="override model.beta")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate checkpoints on primitives")
    _add_common(p)
    p.add_argument("--ckpt", action="append", required=True,
                   help="checkpoint path (repeatable)")
    p.add_argument("--episodes", type=int, default=50)
    p.add_argument("--primitives", default=None,
                   help="comma-separated primitive names (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--force", action="store_true",
                   help="evaluate despite world-config hash mismatch")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("segment-stats", help="interaction statistics of a log")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default=None, help="optional CSV path")
    p.set_defaults(func=cmd_segment_stats)

    p = sub.add_parser("ablate-contact",
                       help="inject false contacts and retrain")
    _add_common(p)
    p.add_argument("--data", required=True)
    p.add_argument("--pct", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None,
                   help="checkpoint path (omit to only measure injection)")
    p.set_defaults(func=cmd_ablate_contact)

    p = sub.add_parser("export-latents",
                       help="prior latents per eval episode, labeled")
    _add_common(p)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--episodes", type=int, default=20)
    p.add_argument("--primitives", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_latents)

    p = sub.add_parser("export-csv", help="dump a play log as CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_csv)

    p = sub.add_parser("replay", help="re-simulate a logged episode and "
                                      "verify bit-equality")
    p.add_argument("--data", required=True)
    p.add_argument("--episode", type=int, default=0)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("teleop-serve", help="websocket teleoperation server")
    _add_common(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_teleop_serve)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except Play2dError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())

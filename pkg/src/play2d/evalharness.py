"""Evaluation protocol: run a scripted primitive to produce a goal object
state, rewind the world, roll out the learned policy against that goal, and
score success; aggregate per-(method, primitive) tables across seeds.

Goals are captured at the end of the primitive's manipulation phase (the
achieved task state: block pushed over, held aloft, tipped) rather than after
retreat, when gravity may have already returned the object near its start.
References whose object barely moved are discarded and resampled so neither a
perfect replay nor a do-nothing policy can score vacuous successes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import models as M
from . import primitives as P
from . import sim
from .errors import DataError
from .sim import Action, WorldConfig, WorldState, observe


@dataclass(frozen=True)
class SuccessMetric:
    eps_pos: float             # position tolerance, length units
    eps_rot: float             # orientation tolerance, radians
    min_progress: float = 0.5  # fraction of the goal displacement required
    max_steps: int = 60

    def validate(self) -> None:
        assert self.eps_pos > 0 and self.eps_rot > 0 and self.max_steps > 0


@dataclass(frozen=True)
class EvalConfig:
    eps_pos_factor: float = 1.5    # x ego_radius
    eps_rot_deg: float = 15.0
    min_progress: float = 0.5
    max_steps_factor: float = 3.0  # x reference primitive horizon
    episodes_per_primitive: int = 50
    goal_resample_limit: int = 25

    def metric_for(self, world_cfg: WorldConfig, reference_steps: int,
                   h_int: int) -> SuccessMetric:
        return SuccessMetric(
            eps_pos=self.eps_pos_factor * world_cfg.ego_radius,
            eps_rot=math.radians(self.eps_rot_deg),
            min_progress=self.min_progress,
            max_steps=max(int(self.max_steps_factor * reference_steps),
                          int(self.max_steps_factor * h_int)))


_ROTATION_KINDS = (P.PrimitiveKind.TIP, P.PrimitiveKind.SIDE_ROTATE)


@dataclass
class GoalSpec:
    """A reference task: initial world snapshot plus the goal it produced."""

    snapshot: sim.WorldSnapshot
    o_g: np.ndarray              # object part of the observation at the goal
    kind: P.PrimitiveKind
    reference_spec: P.PrimitiveSpec
    reference_steps: int
    reference_actions: list[Action]
    init_block_pos: tuple[float, float]
    init_block_angle: float
    goal_block_pos: tuple[float, float]
    goal_block_angle: float


def _wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def make_goal(world: WorldState, kind: P.PrimitiveKind,
              prim_cfg: P.PrimitivesConfig, rng: np.random.Generator,
              eval_cfg: EvalConfig) -> GoalSpec | None:
    """Run `kind` from the current state, capture the achieved object state as
    the goal, and rewind. Returns None when the primitive is infeasible here
    or barely changed the object (caller resamples a fresh world)."""
    if not P._feasible(world, 0, kind, prim_cfg):
        return None
    snap = sim.snapshot(world)
    spec = P.sample_primitive(rng, world, prim_cfg, kind=kind)
    if spec.kind != kind:
        sim.restore_into(world, snap)
        return None
    block0 = world.blocks[spec.target_block]
    init_pos = block0.position
    init_angle = block0.angle

    actions: list[Action] = []
    policy = P.ScriptedPolicy(spec, prim_cfg, rng)
    steps = 0
    last_manip_obs = None
    last_manip_state = None
    while steps < 250:
        action, phase = policy.act(world)
        if phase == P.ScriptPhase.DONE:
            break
        applied = P._quantized(action)
        actions.append(applied)
        sim.step(world, applied)
        if phase == P.ScriptPhase.MANIPULATE:
            b = world.blocks[spec.target_block]
            last_manip_obs = observe(world)
            last_manip_state = (b.position, b.angle)
        steps += 1

    ok = last_manip_obs is not None
    if ok:
        goal_pos, goal_angle = last_manip_state
        drot = abs(_wrap_angle(goal_angle - init_angle))
        eps_pos = eval_cfg.eps_pos_factor * world.config.ego_radius
        eps_rot = math.radians(eval_cfg.eps_rot_deg)
        if kind in _ROTATION_KINDS:
            ok = drot >= 2.0 * eps_rot
        else:
            # The displacement must be real and along the task direction.
            dx = goal_pos[0] - init_pos[0]
            dy = goal_pos[1] - init_pos[1]
            if kind in (P.PrimitiveKind.PUSH_R, P.PrimitiveKind.PULL_R):
                ok = dx >= 2.0 * eps_pos
            elif kind in (P.PrimitiveKind.PUSH_L, P.PrimitiveKind.PULL_L):
                ok = -dx >= 2.0 * eps_pos
            else:  # LIFT
                ok = dy >= 2.0 * eps_pos
    result = None
    if ok:
        result = GoalSpec(
            snapshot=snap,
            o_g=last_manip_obs[sim.ROBOT_STATE_DIM:],
            kind=kind,
            reference_spec=spec,
            reference_steps=steps,
            reference_actions=actions[:],
            init_block_pos=init_pos,
            init_block_angle=init_angle,
            goal_block_pos=goal_pos,
            goal_block_angle=goal_angle)
    sim.restore_into(world, snap)
    return result


def sample_goal(world_cfg: WorldConfig, kind: P.PrimitiveKind,
                prim_cfg: P.PrimitivesConfig, eval_cfg: EvalConfig,
                rng: np.random.Generator) -> tuple[WorldState, GoalSpec]:
    """Fresh worlds until one yields a usable goal for `kind`."""
    for _ in range(eval_cfg.goal_resample_limit):
        seed = int(rng.integers(0, 2 ** 62))
        world = sim.world_new(world_cfg, seed)
        goal = make_goal(world, kind, prim_cfg, rng, eval_cfg)
        if goal is not None:
            return world, goal
    raise DataError(f"could not build a valid goal for {kind.value} after "
                    f"{eval_cfg.goal_resample_limit} worlds")


def _success(kind: P.PrimitiveKind, goal: GoalSpec, world: WorldState,
             metric: SuccessMetric) -> bool:
    b = world.blocks[goal.reference_spec.target_block]
    if kind in _ROTATION_KINDS:
        if abs(_wrap_angle(b.angle - goal.goal_block_angle)) > metric.eps_rot:
            return False
        # Rotation analog of the positional progress guard: the block must
        # have turned toward the goal angle, not merely been knocked through
        # the tolerance band in a random direction.
        goal_turn = _wrap_angle(goal.goal_block_angle - goal.init_block_angle)
        turned = (b.angle - goal.init_block_angle) * math.copysign(
            1.0, goal_turn)
        return turned >= metric.min_progress * abs(goal_turn)
    gx, gy = goal.goal_block_pos
    ix, iy = goal.init_block_pos
    px, py = b.position
    if math.hypot(px - gx, py - gy) > metric.eps_pos:
        return False
    goal_disp = math.hypot(gx - ix, gy - iy)
    ux, uy = (gx - ix) / goal_disp, (gy - iy) / goal_disp
    progress = (px - ix) * ux + (py - iy) * uy
    return progress >= metric.min_progress * goal_disp


@dataclass
class EvalResult:
    primitive: str
    success: bool
    steps_used: int
    final_pos_error: float
    final_rot_error: float


def run_episode(policy_step, goal: GoalSpec, metric: SuccessMetric
                ) -> EvalResult:
    """Roll `policy_step(obs, o_g, t) -> Action` from the goal's start state
    until first success or the step budget runs out."""
    world = sim.restore(goal.snapshot)
    success = False
    steps = 0
    for t in range(metric.max_steps):
        obs = observe(world)
        action = policy_step(obs, goal.o_g, t)
        sim.step(world, action)
        steps = t + 1
        if _success(goal.kind, goal, world, metric):
            success = True
            break
    b = world.blocks[goal.reference_spec.target_block]
    pos_err = math.hypot(b.position[0] - goal.goal_block_pos[0],
                         b.position[1] - goal.goal_block_pos[1])
    rot_err = abs(_wrap_angle(b.angle - goal.goal_block_angle))
    return EvalResult(primitive=goal.kind.value, success=success,
                      steps_used=steps, final_pos_error=pos_err,
                      final_rot_error=rot_err)


def replay_policy(goal: GoalSpec):
    """The reference primitive's own action sequence as a policy (open loop)."""
    def step_fn(obs, o_g, t):
        if t < len(goal.reference_actions):
            return goal.reference_actions[t]
        return Action(target_position=(float(obs[0]), float(obs[1])),
                      grab=False)
    return step_fn


def bundle_policy(bundle: M.ModelBundle, seed: int):
    """Wrap a trained bundle as a policy_step function with its own cache."""
    cache = M.new_cache(seed)

    def step_fn(obs, o_g, t):
        raw = M.act(bundle, obs, o_g, cache)
        grab = bool(raw[2] > 0.5)
        return Action(target_position=(float(raw[0]), float(raw[1])),
                      grab=grab)
    return step_fn


def evaluate_bundle(bundle: M.ModelBundle, world_cfg: WorldConfig,
                    prim_cfg: P.PrimitivesConfig, eval_cfg: EvalConfig,
                    kinds, n_episodes: int, seed: int
                    ) -> list[EvalResult]:
    """n_episodes fresh goal worlds per primitive kind, scored first-hit."""
    results = []
    for kind in kinds:
        for ep in range(n_episodes):
            rng = np.random.default_rng(np.random.SeedSequence(
                entropy=seed, spawn_key=(P.KIND_ORDER.index(kind), ep)))
            _, goal = sample_goal(world_cfg, kind, prim_cfg, eval_cfg, rng)
            metric = eval_cfg.metric_for(world_cfg, goal.reference_steps,
                                         bundle.config.h_int)
            policy = bundle_policy(bundle, seed=int(rng.integers(2 ** 31)))
            results.append(run_episode(policy, goal, metric))
    return results


# -- aggregation -------------------------------------------------------------


@dataclass
class SuccessTable:
    """mean(std-err) success percentages per (method, primitive)."""

    methods: list[str] = field(default_factory=list)
    primitives: list[str] = field(default_factory=list)
    # (method, primitive) -> (mean_pct, stderr_pct, n_seeds); None = absent
    cells: dict = field(default_factory=dict)

    def add(self, method: str, primitive: str,
            per_seed_rates: list[float]) -> None:
        if method not in self.methods:
            self.methods.append(method)
        if primitive not in self.primitives:
            self.primitives.append(primitive)
        rates = np.asarray(per_seed_rates, dtype=np.float64) * 100.0
        mean = float(rates.mean())
        stderr = float(rates.std(ddof=1) / math.sqrt(len(rates))) \
            if len(rates) > 1 else 0.0
        self.cells[(method, primitive)] = (mean, stderr, len(rates))

    def mark_absent(self, method: str, primitive: str) -> None:
        if method not in self.methods:
            self.methods.append(method)
        if primitive not in self.primitives:
            self.primitives.append(primitive)
        self.cells[(method, primitive)] = None

    def mean_over_primitives(self, method: str) -> float:
        vals = [self.cells[(method, p)][0] for p in self.primitives
                if self.cells.get((method, p)) is not None]
        return float(np.mean(vals)) if vals else float("nan")

    def to_text(self) -> str:
        width = max([len(m) for m in self.methods] + [8])
        cols = [f"{p:>14s}" for p in self.primitives]
        lines = [" " * width + "".join(cols)]
        for m in self.methods:
            row = [f"{m:<{width}s}"]
            for p in self.primitives:
                cell = self.cells.get((m, p))
                if cell is None:
                    row.append(f"{'absent':>14s}")
                else:
                    mean, se, _ = cell
                    row.append(f"{f'{mean:.1f}({se:.1f})':>14s}")
            lines.append("".join(row))
        return "\n".join(lines) + "\n"

    def to_csv(self, fileobj: io.TextIOBase) -> None:
        writer = csv.writer(fileobj)
        writer.writerow(["method", "primitive", "mean_pct", "stderr_pct",
                         "n_seeds"])
        for m in self.methods:
            for p in self.primitives:
                cell = self.cells.get((m, p))
                if cell is None:
                    writer.writerow([m, p, "", "", 0])
                else:
                    writer.writerow([m, p, f"{cell[0]:.4f}",
                                     f"{cell[1]:.4f}", cell[2]])


def results_csv_rows(method: str, seed: int, results: list[EvalResult]):
    for i, r in enumerate(results):
        yield [method, r.primitive, seed, i, int(r.success), r.steps_used,
               f"{r.final_pos_error:.6f}", f"{r.final_rot_error:.6f}"]


def export_latents(bundle: M.ModelBundle, world_cfg: WorldConfig,
                   prim_cfg: P.PrimitivesConfig, eval_cfg: EvalConfig,
                   kinds, n_episodes: int, seed: int,
                   fileobj: io.TextIOBase) -> int:
    """One CSV row per evaluation episode: primitive label plus the latent the
    prior proposes at the episode's first step."""
    writer = csv.writer(fileobj)
    latent_dim = bundle.config.latent_dim if bundle.variant.uses_latent else 0
    writer.writerow(["primitive"] + [f"z{i}" for i in range(latent_dim)])
    rows = 0
    for kind in kinds:
        for ep in range(n_episodes):
            rng = np.random.default_rng(np.random.SeedSequence(
                entropy=seed, spawn_key=(P.KIND_ORDER.index(kind), ep)))
            _, goal = sample_goal(world_cfg, kind, prim_cfg, eval_cfg, rng)
            cache = M.new_cache(int(rng.integers(2 ** 31)))
            world = sim.restore(goal.snapshot)
            M.act(bundle, observe(world), goal.o_g, cache)
            z = cache.z if cache.z is not None else np.zeros(0)
            writer.writerow([kind.value] + [f"{v:.8g}" for v in z.ravel()])
            rows += 1
    return rows

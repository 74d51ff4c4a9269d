"""Scripted demonstrator: noisy, parameterized manipulation primitives chained
back-to-back in one world to generate unlabeled play.

Each primitive is a small phase machine (Approach, Engage, Manipulate,
Retreat, Done) that servos the ego with incremental waypoint targets; speed,
reach offsets, manipulation magnitude, waypoint jitter, and per-step action
noise are all sampled per execution so repeated primitives vary widely.
Primitive boundaries are written to a separate labels side-channel only; the
play log itself carries no task information beyond (state, action, contact).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from . import playlog
from . import sim
from .playlog import PlayLog, StepRecord
from .sim import (ACTION_DIM, Action, BLOCK_STATE_DIM, ROBOT_STATE_DIM,
                  WorldConfig, WorldState, observe, world_new)


class PrimitiveKind(enum.Enum):
    PUSH_L = "PushL"
    PUSH_R = "PushR"
    PULL_L = "PullL"
    PULL_R = "PullR"
    LIFT = "Lift"
    TIP = "Tip"
    SIDE_ROTATE = "SideRotate"


KIND_ORDER = tuple(PrimitiveKind)


class ScriptPhase(enum.Enum):
    APPROACH = "Approach"
    ENGAGE = "Engage"
    MANIPULATE = "Manipulate"
    RETREAT = "Retreat"
    DONE = "Done"


@dataclass(frozen=True)
class PrimitivesConfig:
    """Sampling ranges for the scripted demonstrator."""

    weights: tuple[float, ...] = tuple([1.0 / 7] * 7)  # in KIND_ORDER order
    push_distance_frac: tuple[float, float] = (0.15, 0.45)   # of arena width
    lift_height_frac: tuple[float, float] = (0.2, 0.5)       # of arena height
    rotate_angle_deg: tuple[float, float] = (30.0, 120.0)
    tip_angle_deg: tuple[float, float] = (25.0, 50.0)
    speed_scale_range: tuple[float, float] = (0.5, 1.5)
    base_speed: float = 1.1          # manipulate-phase servo speed, units/s
    approach_speed: float = 2.4
    waypoint_jitter_std: float = 0.06
    action_noise_std: float = 0.1    # 1% of the default arena width
    dwell_range: tuple[int, int] = (3, 10)
    stall_timeout: int = 30          # control steps without progress
    min_room: float = 1.0            # free travel needed for a push/pull dir
    max_episode_steps: int = 100

    def validate(self) -> None:
        if len(self.weights) != len(KIND_ORDER):
            raise ConfigurationError(
                f"weights must have {len(KIND_ORDER)} entries")
        if any(w < 0 for w in self.weights):
            raise ConfigurationError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ConfigurationError("weights must sum to 1")
        if self.max_episode_steps < 2:
            raise ConfigurationError("max_episode_steps must be >= 2")


@dataclass(frozen=True)
class PrimitiveSpec:
    """Fully determines one scripted execution given the world."""

    kind: PrimitiveKind
    target_block: int
    approach_offset: tuple[float, float]
    magnitude: float        # distance (push/pull), height (lift), angle (rad)
    speed_scale: float
    waypoint_jitter_std: float
    action_noise_std: float
    dwell_steps: int


def _block_room(world: WorldState, idx: int, direction: int) -> float:
    """Free horizontal travel for the block toward direction (+1 right)."""
    b = world.blocks[idx]
    extent = max(b.half_extents)
    if direction > 0:
        return world.config.arena_width - extent - b.position[0]
    return b.position[0] - extent


def _tippable(world: WorldState, idx: int) -> bool:
    hx, hy = world.blocks[idx].half_extents
    # Pushing near the top tips rather than slides when the base is narrow
    # relative to the contact height (Coulomb friction bound, with margin for
    # the bumpy contact of a moving pusher).
    return hx <= 0.9 * hy


def _feasible(world: WorldState, idx: int, kind: PrimitiveKind,
              cfg: PrimitivesConfig) -> bool:
    if kind in (PrimitiveKind.PUSH_L, PrimitiveKind.PULL_L):
        return _block_room(world, idx, -1) >= cfg.min_room
    if kind in (PrimitiveKind.PUSH_R, PrimitiveKind.PULL_R):
        return _block_room(world, idx, +1) >= cfg.min_room
    if kind == PrimitiveKind.TIP:
        return _tippable(world, idx)
    if kind == PrimitiveKind.SIDE_ROTATE:
        b = world.blocks[idx]
        top = b.position[1] + max(b.half_extents)
        return top + 2 * max(b.half_extents) < world.config.arena_height
    return True  # Lift


_OPPOSITE = {
    PrimitiveKind.PUSH_L: PrimitiveKind.PUSH_R,
    PrimitiveKind.PUSH_R: PrimitiveKind.PUSH_L,
    PrimitiveKind.PULL_L: PrimitiveKind.PULL_R,
    PrimitiveKind.PULL_R: PrimitiveKind.PULL_L,
}


def sample_primitive(rng: np.random.Generator, world: WorldState,
                     cfg: PrimitivesConfig,
                     kind: PrimitiveKind | None = None) -> PrimitiveSpec:
    """Draw a primitive spec; infeasible direction choices flip to the
    opposite direction, anything else falls back to Lift after bounded
    resampling. Pass `kind` to force the primitive family."""
    cfg.validate()
    idx = 0 if len(world.blocks) == 1 else int(rng.integers(len(world.blocks)))
    chosen = kind
    if chosen is None:
        chosen = KIND_ORDER[int(rng.choice(len(KIND_ORDER), p=cfg.weights))]
    if not _feasible(world, idx, chosen, cfg):
        flipped = _OPPOSITE.get(chosen)
        if flipped is not None and _feasible(world, idx, flipped, cfg):
            chosen = flipped
        elif kind is None:
            for _ in range(8):
                retry = KIND_ORDER[int(rng.choice(len(KIND_ORDER), p=cfg.weights))]
                if _feasible(world, idx, retry, cfg):
                    chosen = retry
                    break
            else:
                chosen = PrimitiveKind.LIFT
        # Forced kind that stays infeasible executes best-effort.

    wcfg = world.config
    if chosen in (PrimitiveKind.PUSH_L, PrimitiveKind.PUSH_R,
                  PrimitiveKind.PULL_L, PrimitiveKind.PULL_R):
        lo, hi = cfg.push_distance_frac
        magnitude = float(rng.uniform(lo, hi)) * wcfg.arena_width
        direction = +1 if chosen in (PrimitiveKind.PUSH_R, PrimitiveKind.PULL_R) else -1
        room = _block_room(world, idx, direction)
        magnitude = min(magnitude, max(0.85 * room, 0.1))
    elif chosen == PrimitiveKind.LIFT:
        lo, hi = cfg.lift_height_frac
        magnitude = float(rng.uniform(lo, hi)) * wcfg.arena_height
        b = world.blocks[idx]
        headroom = wcfg.arena_height - (b.position[1] + b.half_extents[1]) \
            - 2 * wcfg.ego_radius - 0.3
        magnitude = min(magnitude, max(headroom, 0.3))
    elif chosen == PrimitiveKind.TIP:
        lo, hi = cfg.tip_angle_deg
        magnitude = math.radians(float(rng.uniform(lo, hi)))
        if _block_room(world, idx, +1) < _block_room(world, idx, -1):
            magnitude = -magnitude
        # Positive angle: block top moves right (pushed from the left).
    else:  # SIDE_ROTATE
        lo, hi = cfg.rotate_angle_deg
        magnitude = math.radians(float(rng.uniform(lo, hi)))
        if rng.random() < 0.5:
            magnitude = -magnitude
        room_needed = 2.2 * max(world.blocks[idx].half_extents)
        if magnitude > 0 and _block_room(world, idx, -1) < room_needed:
            magnitude = -magnitude
        elif magnitude < 0 and _block_room(world, idx, +1) < room_needed:
            magnitude = -magnitude

    return PrimitiveSpec(
        kind=chosen,
        target_block=idx,
        approach_offset=(float(rng.normal(0, 0.1)), float(rng.normal(0, 0.1))),
        magnitude=magnitude,
        speed_scale=float(rng.uniform(*cfg.speed_scale_range)),
        waypoint_jitter_std=cfg.waypoint_jitter_std,
        action_noise_std=cfg.action_noise_std,
        dwell_steps=int(rng.integers(cfg.dwell_range[0], cfg.dwell_range[1] + 1)),
    )


class ScriptedPolicy:
    """Phase-machine controller executing one PrimitiveSpec."""

    def __init__(self, spec: PrimitiveSpec, cfg: PrimitivesConfig,
                 rng: np.random.Generator):
        self.spec = spec
        self.cfg = cfg
        self.rng = rng
        self.phase = ScriptPhase.APPROACH
        self.phase_timer = 0
        self.total_steps = 0
        self.dwell_left = spec.dwell_steps
        # Grab primitives press the grab action early, while still closing in
        # (the tether only engages once actually in reach). The press distance
        # varies widely, like a human holding the key the whole way in or only
        # at the last moment; most executions press well before contact so the
        # logged grab intent cannot be read off the tether state.
        self.grab_early_dist = float(rng.uniform(0.3, 8.0))
        self.manipulate_steps = 0
        self._route: list[tuple[float, float]] | None = None
        self._route_idx = 0
        self._start_block_pos: tuple[float, float] | None = None
        self._start_block_angle: float | None = None
        self._arc: tuple[float, float, float, float] | None = None
        self._sweep = 0.0
        self._progress_ref = 0.0
        self._stall_counter = 0
        self._retreat_point: tuple[float, float] | None = None

    # -- helpers ---------------------------------------------------------

    def _speed(self, world: WorldState, approach: bool) -> float:
        base = self.cfg.approach_speed if approach else self.cfg.base_speed
        return min(base * self.spec.speed_scale, world.config.ego_max_speed)

    def _jitter(self, point: tuple[float, float]) -> tuple[float, float]:
        std = self.spec.waypoint_jitter_std
        return (point[0] + float(self.rng.normal(0, std)),
                point[1] + float(self.rng.normal(0, std)))

    def _servo(self, world: WorldState, waypoint: tuple[float, float],
               speed: float, grab: bool) -> Action:
        ex, ey = world.ego.position
        dx = waypoint[0] - ex
        dy = waypoint[1] - ey
        dist = math.hypot(dx, dy)
        step_len = speed * world.config.control_dt
        if dist > step_len:
            tx = ex + dx / dist * step_len
            ty = ey + dy / dist * step_len
        else:
            tx, ty = waypoint
        std = self.spec.action_noise_std
        tx += float(self.rng.normal(0, std))
        ty += float(self.rng.normal(0, std))
        cfgw = world.config
        tx = min(max(tx, 0.0), cfgw.arena_width)
        ty = min(max(ty, 0.0), cfgw.arena_height)
        return Action(target_position=(tx, ty), grab=grab)

    def _near(self, world: WorldState, point: tuple[float, float],
              tol: float = 0.12) -> bool:
        ex, ey = world.ego.position
        return math.hypot(point[0] - ex, point[1] - ey) <= tol

    def _enter(self, phase: ScriptPhase) -> None:
        self.phase = phase
        self.phase_timer = 0
        self._route = None
        self._route_idx = 0
        self._stall_counter = 0

    def _direction(self) -> int:
        if self.spec.kind in (PrimitiveKind.PUSH_R, PrimitiveKind.PULL_R):
            return +1
        if self.spec.kind in (PrimitiveKind.PUSH_L, PrimitiveKind.PULL_L):
            return -1
        return +1 if self.spec.magnitude >= 0 else -1

    def _approach_point(self, world: WorldState) -> tuple[float, float]:
        b = world.blocks[self.spec.target_block]
        bx, by = b.position
        hx, hy = b.half_extents
        r = world.config.ego_radius
        kind = self.spec.kind
        off = self.spec.approach_offset
        if kind in (PrimitiveKind.PUSH_L, PrimitiveKind.PUSH_R):
            side = -self._direction()
            # Push slightly below center so floor friction cannot roll the
            # block over the contact point.
            y = max(r + 0.01, by - 0.35 * hy)
            p = (bx + side * (hx + r + 0.35), y)
        elif kind in (PrimitiveKind.PULL_L, PrimitiveKind.PULL_R):
            side = self._direction()
            p = (bx + side * (hx + r + 0.3), by)
        elif kind == PrimitiveKind.TIP:
            side = -self._direction()
            # Contact near the top edge maximizes the tipping lever arm.
            y = by + 0.9 * hy
            p = (bx + side * (hx + r + 0.35), y)
        elif kind == PrimitiveKind.SIDE_ROTATE:
            # Grab the top face off-center, biased away from the pivot corner
            # (positive rotation pivots on the bottom-left corner).
            grab_x = bx + self._direction() * 0.35 * hx
            p = (grab_x, by + hy + r + 0.18)
        else:  # LIFT
            p = (bx, by + hy + r + 0.18)
        px = p[0] + off[0]
        py = p[1] + abs(off[1])
        cfgw = world.config
        return (min(max(px, r), cfgw.arena_width - r),
                min(max(py, r), cfgw.arena_height - r))

    def _plan_route(self, world: WorldState) -> list[tuple[float, float]]:
        """Waypoints to the approach point that go over the block instead of
        plowing through it when the ego starts on the far side."""
        wp = self._jitter(self._approach_point(world))
        b = world.blocks[self.spec.target_block]
        r = world.config.ego_radius
        bx = b.position[0]
        span = max(b.half_extents) + r + 0.15
        ex, ey = world.ego.position
        clear_y = min(b.position[1] + max(b.half_extents) + r + 0.35,
                      world.config.arena_height - r)
        crosses = (min(ex, wp[0]) < bx + span) and (max(ex, wp[0]) > bx - span)
        if not crosses:
            return [wp]
        route: list[tuple[float, float]] = []
        if ey < clear_y - 0.05:
            route.append((ex, clear_y))
        if wp[1] >= clear_y - 0.05:
            route.append(wp)
        else:
            route.append((wp[0], clear_y))
            route.append(wp)
        return route

    def _grab_point(self, world: WorldState) -> tuple[float, float]:
        b = world.blocks[self.spec.target_block]
        bx, by = b.position
        hx, hy = b.half_extents
        kind = self.spec.kind
        if kind in (PrimitiveKind.PULL_L, PrimitiveKind.PULL_R):
            return (bx + self._direction() * (hx - 0.02), by)
        if kind == PrimitiveKind.SIDE_ROTATE:
            return (bx + self._direction() * 0.35 * hx, by + hy - 0.02)
        return (bx, by + hy - 0.02)  # LIFT: top face

    # -- phase logic -----------------------------------------------------

    def _early_grab(self, world: WorldState, grabbing: bool) -> bool:
        """Hold the grab action while closing in on the attachment point, so
        logged grab intent is not a mirror of the tether state."""
        if not grabbing:
            return False
        gx, gy = self._grab_point(world)
        ex, ey = world.ego.position
        return math.hypot(gx - ex, gy - ey) <= self.grab_early_dist

    def act(self, world: WorldState) -> tuple[Action, ScriptPhase]:
        """Next action for the current world; phase returned for diagnostics."""
        self.total_steps += 1
        self.phase_timer += 1
        kind = self.spec.kind
        b = world.blocks[self.spec.target_block]
        grabbing = kind in (PrimitiveKind.PULL_L, PrimitiveKind.PULL_R,
                            PrimitiveKind.LIFT, PrimitiveKind.SIDE_ROTATE)

        if self.phase == ScriptPhase.APPROACH:
            if self._route is None:
                self._route = self._plan_route(world)
                self._route_idx = 0
            while (self._route_idx < len(self._route) - 1
                   and self._near(world, self._route[self._route_idx],
                                  tol=0.2)):
                self._route_idx += 1
            waypoint = self._route[self._route_idx]
            final = self._route_idx == len(self._route) - 1
            if (final and self._near(world, waypoint)) \
                    or self.phase_timer > 90 or world.ego.tether_active:
                self._enter(ScriptPhase.ENGAGE)
            else:
                return (self._servo(world, waypoint,
                                    self._speed(world, True),
                                    self._early_grab(world, grabbing)),
                        self.phase)

        if self.phase == ScriptPhase.ENGAGE:
            if grabbing:
                if world.ego.tether_active:
                    self._begin_manipulate(world)
                elif self.phase_timer > 50:
                    self._enter(ScriptPhase.RETREAT)
                else:
                    # Track the grab point gently, grab held, so the tether
                    # closes at the first moment of reach.
                    point = self._grab_point(world)
                    return (self._servo(world, point,
                                        0.6 * self._speed(world, False),
                                        self._early_grab(world, True)),
                            self.phase)
            else:
                if world.contact:
                    self._begin_manipulate(world)
                elif self.phase_timer > 50:
                    self._enter(ScriptPhase.RETREAT)
                else:
                    bx, by = b.position
                    probe = (bx, world.ego.position[1])
                    return (self._servo(world, probe,
                                        self._speed(world, False), False),
                            self.phase)

        if self.phase == ScriptPhase.MANIPULATE:
            action = self._manipulate(world)
            if action is not None:
                return action, self.phase

        if self.phase == ScriptPhase.RETREAT:
            if self._retreat_point is None:
                ex, ey = world.ego.position
                bx = b.position[0]
                away = -1.0 if bx >= ex else 1.0
                self._retreat_point = self._jitter(
                    (ex + away * 0.9, min(ey + 0.5,
                                          world.config.arena_height - 0.3)))
            if self._near(world, self._retreat_point, tol=0.2) \
                    or self.phase_timer > 25:
                self._enter(ScriptPhase.DONE)
            else:
                return (self._servo(world, self._retreat_point,
                                    self._speed(world, True), False),
                        self.phase)

        # DONE: hold position, no grab.
        return (Action(target_position=world.ego.position, grab=False),
                ScriptPhase.DONE)

    def _begin_manipulate(self, world: WorldState) -> None:
        b = world.blocks[self.spec.target_block]
        self._enter(ScriptPhase.MANIPULATE)
        self._start_block_pos = b.position
        self._start_block_angle = b.angle
        self._progress_ref = 0.0
        if self.spec.kind == PrimitiveKind.SIDE_ROTATE \
                and world.ego.tether_active:
            sign = self._direction()
            corners = sim.block_corners(b)
            # Pivot on the lower corner the block rolls over: the leftmost of
            # the two lowest corners for CCW rotation, rightmost for CW.
            low = sorted(corners, key=lambda c: c[1])[:2]
            pivot = min(low, key=lambda c: sign * c[0])
            _, local = world.ego.tether_anchor
            ca, sa = math.cos(b.angle), math.sin(b.angle)
            anchor = (b.position[0] + ca * local[0] - sa * local[1],
                      b.position[1] + sa * local[0] + ca * local[1])
            self._arc = (pivot[0], pivot[1], anchor[0], anchor[1])
            self._sweep = 0.0

    def _manipulate(self, world: WorldState) -> Action | None:
        kind = self.spec.kind
        b = world.blocks[self.spec.target_block]
        speed = self._speed(world, False)
        self.manipulate_steps += 1
        if self.manipulate_steps > 150:
            self._enter(ScriptPhase.RETREAT)
            return None

        if kind in (PrimitiveKind.PUSH_L, PrimitiveKind.PUSH_R,
                    PrimitiveKind.PULL_L, PrimitiveKind.PULL_R):
            moved = (b.position[0] - self._start_block_pos[0]) * self._direction()
            if moved >= abs(self.spec.magnitude):
                self._enter(ScriptPhase.RETREAT)
                return None
            if moved <= self._progress_ref + 1e-3:
                self._stall_counter += 1
            else:
                self._stall_counter = 0
                self._progress_ref = moved
            if self._stall_counter > self.cfg.stall_timeout:
                self._enter(ScriptPhase.RETREAT)
                return None
            ex, ey = world.ego.position
            grab = kind in (PrimitiveKind.PULL_L, PrimitiveKind.PULL_R)
            step_len = speed * world.config.control_dt
            y = ey if grab else max(world.config.ego_radius + 0.01,
                                    b.position[1] - 0.35 * b.half_extents[1])
            return self._servo(world, (ex + self._direction() * (step_len + 0.2), y),
                               speed, grab)

        if kind == PrimitiveKind.LIFT:
            raised = b.position[1] - self._start_block_pos[1]
            if raised >= self.spec.magnitude:
                if self.dwell_left > 0:
                    self.dwell_left -= 1
                    return self._servo(world, world.ego.position, 0.0, True)
                self._enter(ScriptPhase.RETREAT)
                return None
            if raised <= self._progress_ref + 1e-3:
                self._stall_counter += 1
            else:
                self._stall_counter = 0
                self._progress_ref = raised
            if self._stall_counter > self.cfg.stall_timeout:
                self._enter(ScriptPhase.RETREAT)
                return None
            ex, ey = world.ego.position
            step_len = speed * world.config.control_dt
            return self._servo(world, (ex, ey + step_len + 0.2), speed, True)

        if kind == PrimitiveKind.TIP:
            turned = (b.angle - self._start_block_angle) * -self._direction()
            # Pushing rightward tips the block clockwise (negative angle).
            if turned >= abs(self.spec.magnitude):
                self._enter(ScriptPhase.RETREAT)
                return None
            if turned <= self._progress_ref + 1e-3:
                self._stall_counter += 1
            else:
                self._stall_counter = 0
                self._progress_ref = turned
            if self._stall_counter > self.cfg.stall_timeout \
                    or self.manipulate_steps > 100:
                self._enter(ScriptPhase.RETREAT)
                return None
            tip_speed = 0.45 * speed  # sustained press, not a launch
            ex, ey = world.ego.position
            step_len = tip_speed * world.config.control_dt
            # Aim slightly downward into the top edge: loads the base with
            # extra normal force so the block tips instead of scooting.
            y = b.position[1] + 0.85 * b.half_extents[1] - 0.05
            return self._servo(world,
                               (ex + self._direction() * (step_len + 0.12), y),
                               tip_speed, False)

        # SIDE_ROTATE: one face-roll at most; past ~95 degrees the pivot
        # changes corner and gravity finishes the roll anyway.
        target_turn = min(abs(self.spec.magnitude), math.radians(95.0))
        turned = (b.angle - self._start_block_angle) * self._direction()
        if turned >= target_turn or self._arc is None:
            if self.dwell_left > 0 and world.ego.tether_active:
                # Hold the grab in place so the pin absorbs the block's
                # momentum before release; otherwise it whips on letting go.
                self.dwell_left -= 1
                return self._servo(world, world.ego.position, 0.0, True)
            self._enter(ScriptPhase.RETREAT)
            return None
        px, py, ax, ay = self._arc
        radius = math.hypot(ax - px, ay - py)
        arc_speed = 0.7 * speed
        omega = arc_speed / max(radius, 0.3)
        self._sweep += omega * world.config.control_dt
        if self._sweep > target_turn * 1.3 + 0.3:
            self._enter(ScriptPhase.RETREAT)
            return None
        # Rotate the grab anchor around the pivot corner; the ego rides at
        # its fixed tether offset from the anchor.
        rot = self._direction() * self._sweep
        c, s = math.cos(rot), math.sin(rot)
        rx, ry = ax - px, ay - py
        anchor_t = (px + c * rx - s * ry, py + s * rx + c * ry)
        ox, oy = world.ego.tether_ego_offset or (0.0, 0.0)
        point = (anchor_t[0] - ox, anchor_t[1] - oy)
        return self._servo(world, point, arc_speed, True)


def primitive_policy(controller: ScriptedPolicy, world: WorldState
                     ) -> tuple[Action, ScriptPhase]:
    """Functional wrapper over ScriptedPolicy.act for symmetry with the sim API."""
    return controller.act(world)


@dataclass
class PrimitiveLabel:
    kind: str
    start_step: int
    end_step: int

    def to_json(self) -> dict:
        return {"kind": self.kind, "start_step": self.start_step,
                "end_step": self.end_step}


def run_primitive(world: WorldState, spec: PrimitiveSpec,
                  cfg: PrimitivesConfig, rng: np.random.Generator,
                  max_steps: int = 250, on_step=None) -> int:
    """Execute one primitive to Done (or step budget); returns steps taken.

    `on_step(world_before_obs, action, contact, phase)` is invoked per control
    step when given.
    """
    policy = ScriptedPolicy(spec, cfg, rng)
    steps = 0
    while steps < max_steps:
        action, phase = policy.act(world)
        if phase == ScriptPhase.DONE:
            break
        obs = observe(world)
        applied = _quantized(action)
        _, contact = sim.step(world, applied)
        if on_step is not None:
            on_step(obs, applied, contact, phase)
        steps += 1
    return steps


def _quantized(action: Action) -> Action:
    """Round the target through float32 so logged actions replay bit-exactly."""
    return Action(target_position=(float(np.float32(action.target_position[0])),
                                   float(np.float32(action.target_position[1]))),
                  grab=action.grab)


def _episode_seed(seed: int, episode: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(episode,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def generate_play(world_cfg: WorldConfig, prim_cfg: PrimitivesConfig,
                  seed: int, duration_steps: int, config_hash: str = "",
                  extra_manifest: dict | None = None
                  ) -> tuple[PlayLog, list[list[PrimitiveLabel]]]:
    """Chain random primitives in continuous episodes of play.

    Episodes are cut at prim_cfg.max_episode_steps with a fresh world per
    episode; within an episode the world never resets, so consecutive
    primitives share state. Returns the log and per-episode boundary labels
    (diagnostics only; not part of the log file).
    """
    prim_cfg.validate()
    world_cfg.validate()
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=seed, spawn_key=(0x9E3779B9,)))
    layout_robot = ROBOT_STATE_DIM
    layout_object = BLOCK_STATE_DIM * world_cfg.n_blocks
    extra = {"base_seed": seed, "max_episode_steps": prim_cfg.max_episode_steps}
    extra.update(extra_manifest or {})
    log = playlog.new_log(layout_robot, layout_object, ACTION_DIM,
                          world_cfg.control_dt, config_hash=config_hash,
                          extra=extra)
    labels: list[list[PrimitiveLabel]] = []

    remaining = duration_steps
    episode = 0
    while remaining >= 2:
        ep_len = min(prim_cfg.max_episode_steps, remaining)
        world = world_new(world_cfg, _episode_seed(seed, episode))
        records: list[StepRecord] = []
        ep_labels: list[PrimitiveLabel] = []

        def record(obs, applied, contact, phase):
            records.append(StepRecord(
                robot_state=obs[:layout_robot],
                object_state=obs[layout_robot:],
                action=np.array([applied.target_position[0],
                                 applied.target_position[1],
                                 1.0 if applied.grab else 0.0]),
                contact=contact))

        while len(records) < ep_len:
            spec = sample_primitive(rng, world, prim_cfg)
            start = len(records)
            run_primitive(world, spec, prim_cfg, rng,
                          max_steps=ep_len - len(records), on_step=record)
            if len(records) > start:
                ep_labels.append(PrimitiveLabel(spec.kind.value, start,
                                                len(records) - 1))
        playlog.append_episode(log, records)
        labels.append(ep_labels)
        remaining -= ep_len
        episode += 1
    return log, labels

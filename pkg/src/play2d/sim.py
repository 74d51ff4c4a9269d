"""Deterministic 2D rigid-body world: gravity, walls, rectangular blocks, and a
kinematic circular ego agent with a grab tether.

Blocks integrate with semi-implicit Euler at a fixed substep rate; block-wall
and block-ego contacts are resolved with sequential impulses (Coulomb friction,
Baumgarte positional bias). The ego is kinematic: it servos toward an absolute
target position at bounded speed and acts as an infinitely heavy body in the
contact solver. The tether is a rigid pin joint anchored at the nearest block
surface point, so off-center grabs transmit torque.

All state is plain Python floats, so trajectories are bit-reproducible for a
fixed (config, seed, action sequence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, FormatError, InputError

SNAPSHOT_VERSION = 1

# Contact solver constants. Velocity-level Baumgarte recovers a fraction of
# penetration per substep; slop leaves a thin resting skin so stacks settle.
# Wall contacts are stiff and uncapped so a block squeezed by the kinematic
# ego can never be driven through the arena boundary; ego contacts cap their
# bias velocity so deep overruns cannot catapult the block (the bias is a
# correction term, not a physical force).
BAUMGARTE_BETA = 0.2
WALL_BAUMGARTE_BETA = 0.4
EGO_BIAS_CAP = 1.0
CONTACT_SLOP = 0.005
SOLVER_ITERATIONS = 8

# Surface distance at or below which the robot-block contact flag is raised.
CONTACT_EPSILON = 0.02

# Test-facing bound: resolved states never leave a block embedded in a wall
# deeper than this.
PENETRATION_TOLERANCE = 0.05

_PLACEMENT_ATTEMPTS = 1000
_PLACEMENT_GAP = 0.05

ROBOT_STATE_DIM = 5  # [x, y, vx, vy, tether]
BLOCK_STATE_DIM = 10  # [x, y, sin, cos, vx, vy, omega, hx, hy, mass]
ACTION_DIM = 3  # [target_x, target_y, grab]


@dataclass(frozen=True)
class WorldConfig:
    """Static world parameters. All lengths share one arbitrary unit."""

    arena_width: float = 10.0
    arena_height: float = 6.0
    gravity: float = 9.8
    dt: float = 1.0 / 240.0
    control_rate: float = 10.0
    grab_radius: float = 0.5
    ego_radius: float = 0.25
    ego_max_speed: float = 3.0
    friction_coeff: float = 0.6
    restitution: float = 0.0
    n_blocks: int = 1
    block_size_range: tuple[float, float] = (0.25, 0.5)
    block_mass_range: tuple[float, float] = (0.5, 2.0)
    obs_noise_std: float = 0.0

    def validate(self) -> None:
        if not (self.dt > 0):
            raise ConfigurationError("dt must be > 0")
        if not (self.grab_radius > 0):
            raise ConfigurationError("grab_radius must be > 0")
        if not (self.ego_radius > 0 and self.ego_max_speed > 0):
            raise ConfigurationError("ego_radius and ego_max_speed must be > 0")
        if self.n_blocks < 1:
            raise ConfigurationError("n_blocks must be >= 1")
        if not (0 < self.block_size_range[0] <= self.block_size_range[1]):
            raise ConfigurationError("block_size_range must satisfy 0 < min <= max")
        if not (0 < self.block_mass_range[0] <= self.block_mass_range[1]):
            raise ConfigurationError("block_mass_range must satisfy 0 < min <= max")
        if self.arena_width <= 0 or self.arena_height <= 0:
            raise ConfigurationError("arena dimensions must be positive")
        if self.control_rate <= 0:
            raise ConfigurationError("control_rate must be > 0")
        if self.substeps < 1:
            raise ConfigurationError("dt too coarse for control_rate")

    @property
    def substeps(self) -> int:
        """Physics substeps per control action."""
        return max(1, round(1.0 / (self.dt * self.control_rate)))

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_rate


@dataclass
class EgoState:
    position: tuple[float, float]
    velocity: tuple[float, float] = (0.0, 0.0)
    tether_active: bool = False
    # Anchor on the grabbed block: (block index, attachment point in the block
    # frame). Present iff tether_active.
    tether_anchor: tuple[int, tuple[float, float]] | None = None
    # World-frame offset from ego center to the pinned point, fixed at grab
    # time (the ego never rotates). Present iff tether_active.
    tether_ego_offset: tuple[float, float] | None = None


@dataclass
class BlockState:
    position: tuple[float, float]
    angle: float
    lin_velocity: tuple[float, float]
    ang_velocity: float
    half_extents: tuple[float, float]
    mass: float

    @property
    def inv_mass(self) -> float:
        return 1.0 / self.mass

    @property
    def inertia(self) -> float:
        hx, hy = self.half_extents
        return self.mass * (hx * hx + hy * hy) / 3.0

    @property
    def inv_inertia(self) -> float:
        return 1.0 / self.inertia


@dataclass(frozen=True)
class Action:
    target_position: tuple[float, float]
    grab: bool = False


class WorldState:
    """Mutable simulation state. Single-owner; step() mutates in place."""

    __slots__ = ("config", "ego", "blocks", "step_index", "contact", "_rng")

    def __init__(self, config: WorldConfig, ego: EgoState, blocks: list[BlockState],
                 step_index: int, contact: bool, rng: np.random.Generator):
        self.config = config
        self.ego = ego
        self.blocks = blocks
        self.step_index = step_index
        self.contact = contact
        self._rng = rng


@dataclass
class WorldSnapshot:
    """Frozen copy of a WorldState, restorable bit-exactly (RNG included)."""

    version: int
    config: WorldConfig
    ego: EgoState
    blocks: list[BlockState]
    step_index: int
    contact: bool
    rng_state: dict


def _rot(angle: float, vx: float, vy: float) -> tuple[float, float]:
    c = math.cos(angle)
    s = math.sin(angle)
    return (c * vx - s * vy, s * vx + c * vy)


def _rot_inv(angle: float, vx: float, vy: float) -> tuple[float, float]:
    c = math.cos(angle)
    s = math.sin(angle)
    return (c * vx + s * vy, -s * vx + c * vy)


def block_corners(block: BlockState) -> list[tuple[float, float]]:
    """World-frame corner positions of an oriented block."""
    px, py = block.position
    hx, hy = block.half_extents
    out = []
    for sx, sy in ((-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)):
        wx, wy = _rot(block.angle, sx * hx, sy * hy)
        out.append((px + wx, py + wy))
    return out


def closest_point_on_block(block: BlockState, point: tuple[float, float]
                           ) -> tuple[tuple[float, float], float]:
    """Closest point on the block surface to `point` and the signed distance.

    Distance is negative when `point` lies inside the block.
    """
    px, py = block.position
    hx, hy = block.half_extents
    lx, ly = _rot_inv(block.angle, point[0] - px, point[1] - py)
    cx = min(max(lx, -hx), hx)
    cy = min(max(ly, -hy), hy)
    if cx == lx and cy == ly:
        # Inside: project to the nearest face.
        dx = hx - abs(lx)
        dy = hy - abs(ly)
        if dx < dy:
            cx = hx if lx >= 0 else -hx
            dist = -dx
        else:
            cy = hy if ly >= 0 else -hy
            dist = -dy
    else:
        dist = math.hypot(lx - cx, ly - cy)
    wx, wy = _rot(block.angle, cx, cy)
    return (px + wx, py + wy), dist


def ego_block_distance(world: WorldState, block: BlockState) -> float:
    """Signed distance from the ego disc surface to the block surface."""
    _, d = closest_point_on_block(block, world.ego.position)
    return d - world.config.ego_radius


class _Contact:
    """One contact point between a block and a wall or the ego disc."""

    __slots__ = ("block", "px", "py", "nx", "ny", "depth", "ovx", "ovy",
                 "mass_n", "mass_t", "jn", "jt", "bias")

    def __init__(self, block: BlockState, px: float, py: float,
                 nx: float, ny: float, depth: float,
                 ovx: float, ovy: float, dt: float, restitution: float,
                 beta: float = BAUMGARTE_BETA, bias_cap: float = math.inf):
        self.block = block
        self.px = px
        self.py = py
        self.nx = nx  # normal points from the other body into the block
        self.ny = ny
        self.depth = depth
        self.ovx = ovx  # velocity of the other body at the contact point
        self.ovy = ovy
        rx = px - block.position[0]
        ry = py - block.position[1]
        inv_m = block.inv_mass
        inv_i = block.inv_inertia
        rn = rx * ny - ry * nx
        self.mass_n = 1.0 / (inv_m + inv_i * rn * rn)
        tx, ty = -ny, nx
        rt = rx * ty - ry * tx
        self.mass_t = 1.0 / (inv_m + inv_i * rt * rt)
        self.jn = 0.0
        self.jt = 0.0
        bias = min(beta / dt * max(depth - CONTACT_SLOP, 0.0), bias_cap)
        if restitution > 0.0:
            vn = self._rel_normal_vel()
            if vn < -1.0:
                bias = max(bias, -restitution * vn)
        self.bias = bias

    def _rel_normal_vel(self) -> float:
        b = self.block
        rx = self.px - b.position[0]
        ry = self.py - b.position[1]
        w = b.ang_velocity
        vx = b.lin_velocity[0] - w * ry - self.ovx
        vy = b.lin_velocity[1] + w * rx - self.ovy
        return vx * self.nx + vy * self.ny

    def solve(self, friction: float) -> None:
        b = self.block
        rx = self.px - b.position[0]
        ry = self.py - b.position[1]
        w = b.ang_velocity
        bvx, bvy = b.lin_velocity
        vx = bvx - w * ry - self.ovx
        vy = bvy + w * rx - self.ovy

        vn = vx * self.nx + vy * self.ny
        dj = (self.bias - vn) * self.mass_n
        jn0 = self.jn
        self.jn = max(jn0 + dj, 0.0)
        dj = self.jn - jn0
        inv_m = b.inv_mass
        inv_i = b.inv_inertia
        ix = dj * self.nx
        iy = dj * self.ny
        bvx += ix * inv_m
        bvy += iy * inv_m
        w += (rx * iy - ry * ix) * inv_i

        tx, ty = -self.ny, self.nx
        vx = bvx - w * ry - self.ovx
        vy = bvy + w * rx - self.ovy
        vt = vx * tx + vy * ty
        dj = -vt * self.mass_t
        max_t = friction * self.jn
        jt0 = self.jt
        self.jt = min(max(jt0 + dj, -max_t), max_t)
        dj = self.jt - jt0
        ix = dj * tx
        iy = dj * ty
        b.lin_velocity = (bvx + ix * inv_m, bvy + iy * inv_m)
        b.ang_velocity = w + (rx * iy - ry * ix) * inv_i


def _collect_contacts(world: WorldState, dt: float) -> list[_Contact]:
    cfg = world.config
    contacts: list[_Contact] = []
    e = cfg.restitution
    margin = CONTACT_SLOP
    wb = WALL_BAUMGARTE_BETA
    for block in world.blocks:
        for (cx, cy) in block_corners(block):
            if cy < margin:
                contacts.append(_Contact(block, cx, cy, 0.0, 1.0, -cy,
                                         0.0, 0.0, dt, e, beta=wb))
            if cy > cfg.arena_height - margin:
                contacts.append(_Contact(block, cx, cy, 0.0, -1.0,
                                         cy - cfg.arena_height,
                                         0.0, 0.0, dt, e, beta=wb))
            if cx < margin:
                contacts.append(_Contact(block, cx, cy, 1.0, 0.0, -cx,
                                         0.0, 0.0, dt, e, beta=wb))
            if cx > cfg.arena_width - margin:
                contacts.append(_Contact(block, cx, cy, -1.0, 0.0,
                                         cx - cfg.arena_width,
                                         0.0, 0.0, dt, e, beta=wb))
        point, dist = closest_point_on_block(block, world.ego.position)
        depth = cfg.ego_radius - dist
        if depth > -margin:
            ex, ey = world.ego.position
            if dist > 1e-12:
                nx = (point[0] - ex) / dist
                ny = (point[1] - ey) / dist
            else:
                # Ego center inside the block: separate by moving the block so
                # the nearest face travels away from the ego.
                dx = ex - point[0]
                dy = ey - point[1]
                norm = math.hypot(dx, dy)
                if norm > 1e-12:
                    nx, ny = dx / norm, dy / norm
                else:
                    nx, ny = 0.0, 1.0
            evx, evy = world.ego.velocity
            contacts.append(_Contact(block, point[0], point[1], nx, ny, depth,
                                     evx, evy, dt, e, bias_cap=EGO_BIAS_CAP))
    return contacts


class _TetherJoint:
    """Pin joint holding a block-frame anchor to a fixed offset from the ego."""

    __slots__ = ("block", "rx", "ry", "tx", "ty", "m00", "m01", "m11",
                 "bias_x", "bias_y", "evx", "evy")

    def __init__(self, world: WorldState, dt: float):
        ego = world.ego
        idx, local = ego.tether_anchor  # type: ignore[misc]
        block = world.blocks[idx]
        self.block = block
        wx, wy = _rot(block.angle, local[0], local[1])
        self.rx = wx
        self.ry = wy
        ax = block.position[0] + wx
        ay = block.position[1] + wy
        ox, oy = ego.tether_ego_offset  # type: ignore[misc]
        tx = ego.position[0] + ox
        ty = ego.position[1] + oy
        inv_m = block.inv_mass
        inv_i = block.inv_inertia
        # Effective-mass matrix K = inv_m * I + inv_i * skew(r) skew(r)^T.
        self.m00 = inv_m + inv_i * wy * wy
        self.m01 = -inv_i * wx * wy
        self.m11 = inv_m + inv_i * wx * wx
        beta = BAUMGARTE_BETA / dt
        self.bias_x = beta * (tx - ax)
        self.bias_y = beta * (ty - ay)
        self.evx, self.evy = ego.velocity

    def solve(self) -> None:
        b = self.block
        w = b.ang_velocity
        vx = b.lin_velocity[0] - w * self.ry - self.evx - self.bias_x
        vy = b.lin_velocity[1] + w * self.rx - self.evy - self.bias_y
        det = self.m00 * self.m11 - self.m01 * self.m01
        jx = -(self.m11 * vx - self.m01 * vy) / det
        jy = -(self.m00 * vy - self.m01 * vx) / det
        inv_m = b.inv_mass
        b.lin_velocity = (b.lin_velocity[0] + jx * inv_m,
                          b.lin_velocity[1] + jy * inv_m)
        b.ang_velocity = w + (self.rx * jy - self.ry * jx) * b.inv_inertia


def _engage_tether(world: WorldState) -> None:
    cfg = world.config
    ego = world.ego
    best = None
    # Grab reach is measured from the ego center to the block surface.
    best_dist = cfg.grab_radius
    for i, block in enumerate(world.blocks):
        point, dist = closest_point_on_block(block, ego.position)
        if dist <= best_dist:
            best = (i, block, point)
            best_dist = dist
    if best is None:
        return
    i, block, point = best
    local = _rot_inv(block.angle, point[0] - block.position[0],
                     point[1] - block.position[1])
    ego.tether_active = True
    ego.tether_anchor = (i, (local[0], local[1]))
    ego.tether_ego_offset = (point[0] - ego.position[0], point[1] - ego.position[1])


def _release_tether(ego: EgoState) -> None:
    ego.tether_active = False
    ego.tether_anchor = None
    ego.tether_ego_offset = None


def _substep(world: WorldState, target: tuple[float, float]) -> bool:
    cfg = world.config
    dt = cfg.dt
    ego = world.ego

    # Kinematic ego: move toward the target at bounded speed.
    ex, ey = ego.position
    dx = target[0] - ex
    dy = target[1] - ey
    dist = math.hypot(dx, dy)
    if dist > 1e-12:
        speed = min(cfg.ego_max_speed, dist / dt)
        vx = dx / dist * speed
        vy = dy / dist * speed
    else:
        vx = vy = 0.0
    nx = min(max(ex + vx * dt, cfg.ego_radius), cfg.arena_width - cfg.ego_radius)
    ny = min(max(ey + vy * dt, cfg.ego_radius), cfg.arena_height - cfg.ego_radius)
    ego.velocity = ((nx - ex) / dt, (ny - ey) / dt)
    ego.position = (nx, ny)

    for block in world.blocks:
        block.lin_velocity = (block.lin_velocity[0],
                              block.lin_velocity[1] - cfg.gravity * dt)

    contacts = _collect_contacts(world, dt)
    joint = _TetherJoint(world, dt) if ego.tether_active else None
    mu = cfg.friction_coeff
    for _ in range(SOLVER_ITERATIONS):
        if joint is not None:
            joint.solve()
        for c in contacts:
            c.solve(mu)

    touching = False
    for block in world.blocks:
        bx, by = block.position
        block.position = (bx + block.lin_velocity[0] * dt,
                          by + block.lin_velocity[1] * dt)
        block.angle += block.ang_velocity * dt
        if not touching:
            if ego_block_distance(world, block) <= CONTACT_EPSILON:
                touching = True
    return touching or ego.tether_active


def step(world: WorldState, action: Action) -> tuple[WorldState, bool]:
    """Advance one control step. Returns the (mutated) world and contact flag.

    The contact flag is true when the ego touched a block during any substep
    or the tether is active.
    """
    tx, ty = action.target_position
    if not (math.isfinite(tx) and math.isfinite(ty)):
        raise InputError(f"non-finite action target: {action.target_position}")
    cfg = world.config
    target = (min(max(tx, 0.0), cfg.arena_width),
              min(max(ty, 0.0), cfg.arena_height))

    if action.grab and not world.ego.tether_active:
        _engage_tether(world)
    elif not action.grab and world.ego.tether_active:
        _release_tether(world.ego)

    contact = False
    for _ in range(cfg.substeps):
        if _substep(world, target):
            contact = True
    world.step_index += 1
    world.contact = contact
    return world, contact


def world_new(config: WorldConfig, seed: int) -> WorldState:
    """Build a randomized world: blocks resting on the floor, ego collision-free.

    Identical (config, seed) pairs produce bit-identical states.
    """
    config.validate()
    rng = np.random.default_rng(seed)
    lo, hi = config.block_size_range
    mlo, mhi = config.block_mass_range
    blocks: list[BlockState] = []
    for _ in range(config.n_blocks):
        placed = False
        for _ in range(_PLACEMENT_ATTEMPTS):
            hx = float(rng.uniform(lo, hi))
            hy = float(rng.uniform(lo, hi))
            mass = float(rng.uniform(mlo, mhi))
            x_lo = hx + _PLACEMENT_GAP
            x_hi = config.arena_width - hx - _PLACEMENT_GAP
            if x_hi <= x_lo:
                continue
            x = float(rng.uniform(x_lo, x_hi))
            if any(abs(x - b.position[0]) <= hx + b.half_extents[0] + _PLACEMENT_GAP
                   for b in blocks):
                continue
            blocks.append(BlockState(position=(x, hy), angle=0.0,
                                     lin_velocity=(0.0, 0.0), ang_velocity=0.0,
                                     half_extents=(hx, hy), mass=mass))
            placed = True
            break
        if not placed:
            raise ConfigurationError(
                f"could not place block {len(blocks)} after "
                f"{_PLACEMENT_ATTEMPTS} attempts (arena too crowded)")

    ego = None
    r = config.ego_radius
    for _ in range(_PLACEMENT_ATTEMPTS):
        ex = float(rng.uniform(r, config.arena_width - r))
        ey = float(rng.uniform(r, config.arena_height - r))
        probe = (ex, ey)
        clear = True
        for b in blocks:
            _, dist = closest_point_on_block(b, probe)
            if dist - r <= _PLACEMENT_GAP:
                clear = False
                break
        if clear:
            ego = EgoState(position=probe)
            break
    if ego is None:
        raise ConfigurationError(
            f"could not place ego after {_PLACEMENT_ATTEMPTS} attempts")

    return WorldState(config=config, ego=ego, blocks=blocks,
                      step_index=0, contact=False, rng=rng)


@dataclass(frozen=True)
class ObservationLayout:
    """Index layout of the flat observation vector."""

    robot_dim: int
    object_dim: int
    n_blocks: int

    @property
    def total_dim(self) -> int:
        return self.robot_dim + self.object_dim

    @property
    def robot_slice(self) -> slice:
        return slice(0, self.robot_dim)

    @property
    def object_slice(self) -> slice:
        return slice(self.robot_dim, self.total_dim)


def observation_layout(config: WorldConfig) -> ObservationLayout:
    return ObservationLayout(robot_dim=ROBOT_STATE_DIM,
                             object_dim=BLOCK_STATE_DIM * config.n_blocks,
                             n_blocks=config.n_blocks)


def observe(world: WorldState) -> np.ndarray:
    """Flat state vector: robot fields then per-block fields.

    Robot: [x, y, vx, vy, tether]. Block: [x, y, sin a, cos a, vx, vy, omega,
    half_w, half_h, mass]. Gaussian noise of std obs_noise_std is added to
    pose fields (robot x/y and block x/y/sin/cos) when configured.
    """
    cfg = world.config
    ego = world.ego
    out = np.empty(ROBOT_STATE_DIM + BLOCK_STATE_DIM * len(world.blocks),
                   dtype=np.float64)
    out[0] = ego.position[0]
    out[1] = ego.position[1]
    out[2] = ego.velocity[0]
    out[3] = ego.velocity[1]
    out[4] = 1.0 if ego.tether_active else 0.0
    for i, b in enumerate(world.blocks):
        o = ROBOT_STATE_DIM + BLOCK_STATE_DIM * i
        out[o + 0] = b.position[0]
        out[o + 1] = b.position[1]
        out[o + 2] = math.sin(b.angle)
        out[o + 3] = math.cos(b.angle)
        out[o + 4] = b.lin_velocity[0]
        out[o + 5] = b.lin_velocity[1]
        out[o + 6] = b.ang_velocity
        out[o + 7] = b.half_extents[0]
        out[o + 8] = b.half_extents[1]
        out[o + 9] = b.mass
    if cfg.obs_noise_std > 0.0:
        std = cfg.obs_noise_std
        out[0] += std * world._rng.standard_normal()
        out[1] += std * world._rng.standard_normal()
        for i in range(len(world.blocks)):
            o = ROBOT_STATE_DIM + BLOCK_STATE_DIM * i
            out[o:o + 4] += std * world._rng.standard_normal(4)
    return out


def _copy_ego(ego: EgoState) -> EgoState:
    return EgoState(position=ego.position, velocity=ego.velocity,
                    tether_active=ego.tether_active,
                    tether_anchor=ego.tether_anchor,
                    tether_ego_offset=ego.tether_ego_offset)


def _copy_block(b: BlockState) -> BlockState:
    return BlockState(position=b.position, angle=b.angle,
                      lin_velocity=b.lin_velocity, ang_velocity=b.ang_velocity,
                      half_extents=b.half_extents, mass=b.mass)


def snapshot(world: WorldState) -> WorldSnapshot:
    """Frozen copy of the full world, RNG state included."""
    return WorldSnapshot(version=SNAPSHOT_VERSION,
                         config=world.config,
                         ego=_copy_ego(world.ego),
                         blocks=[_copy_block(b) for b in world.blocks],
                         step_index=world.step_index,
                         contact=world.contact,
                         rng_state=world._rng.bit_generator.state)


def restore(snap: WorldSnapshot) -> WorldState:
    """Rebuild a world from a snapshot; inverse of snapshot()."""
    if snap.version != SNAPSHOT_VERSION:
        raise FormatError(f"snapshot version {snap.version} != {SNAPSHOT_VERSION}")
    rng = np.random.default_rng()
    rng.bit_generator.state = snap.rng_state
    return WorldState(config=snap.config,
                      ego=_copy_ego(snap.ego),
                      blocks=[_copy_block(b) for b in snap.blocks],
                      step_index=snap.step_index,
                      contact=snap.contact,
                      rng=rng)


def restore_into(world: WorldState, snap: WorldSnapshot) -> WorldState:
    """Rewind an existing world to a snapshot taken from it."""
    if snap.version != SNAPSHOT_VERSION:
        raise FormatError(f"snapshot version {snap.version} != {SNAPSHOT_VERSION}")
    world.ego = _copy_ego(snap.ego)
    world.blocks = [_copy_block(b) for b in snap.blocks]
    world.step_index = snap.step_index
    world.contact = snap.contact
    world._rng.bit_generator.state = snap.rng_state
    return world

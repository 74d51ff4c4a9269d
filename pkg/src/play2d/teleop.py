"""Realtime teleoperation server: keyboard state in, world frames out.

Wire protocol (text frames, JSON):
  server -> client, at the render rate (default 20 Hz):
    {"t": step, "ego": [x, y, vx, vy], "tether": bool,
     "blocks": [[x, y, theta, w, h], ...], "contact": bool,
     "recording": bool}
  client -> server, on input change:
    {"keys": {"left": bool, "right": bool, "up": bool, "down": bool},
     "grab": bool}
  client -> server, control messages:
    {"cmd": "record_start" | "record_stop" | "reset" | "save",
     "path": optional}

Held keys move a persistent target point at ego_max_speed; the simulator runs
at the world's control rate and records (state, action, contact) per control
step while recording. "save" writes the recorded episodes as a standard play
log file.
"""

from __future__ import annotations

import asyncio
import json
import math

import numpy as np

from . import playlog, sim
from .config import RunConfig, config_hash
from .primitives import _episode_seed, _quantized
from .sim import ACTION_DIM, Action, BLOCK_STATE_DIM, ROBOT_STATE_DIM, observe


class TeleopSession:
    """Simulation, input integration, and recording state for one server."""

    def __init__(self, cfg: RunConfig, seed: int):
        self.cfg = cfg
        self.seed = seed
        self.episode_counter = 0
        self.world = sim.world_new(cfg.world, _episode_seed(seed, 0))
        self.target = list(self.world.ego.position)
        self.keys = {"left": False, "right": False, "up": False, "down": False}
        self.grab = False
        self.recording = False
        self.current: list[playlog.StepRecord] = []
        wc = cfg.world
        self.log = playlog.new_log(
            ROBOT_STATE_DIM, BLOCK_STATE_DIM * wc.n_blocks, ACTION_DIM,
            wc.control_dt, config_hash=config_hash(cfg),
            extra={"source": "teleop", "base_seed": seed})
        self.last_save: str | None = None

    # -- input ---------------------------------------------------------------

    def set_keys(self, keys: dict, grab) -> None:
        for name in self.keys:
            if name in keys:
                self.keys[name] = bool(keys[name])
        if grab is not None:
            self.grab = bool(grab)

    def command(self, cmd: str, path: str | None = None) -> dict:
        if cmd == "record_start":
            if not self.recording:
                self.recording = True
                self.current = []
            return {"ack": "record_start"}
        if cmd == "record_stop":
            self._flush_episode()
            self.recording = False
            return {"ack": "record_stop", "episodes": self.log.n_episodes}
        if cmd == "reset":
            self.episode_counter += 1
            self._flush_episode()
            self.world = sim.world_new(
                self.cfg.world, _episode_seed(self.seed, self.episode_counter))
            self.target = list(self.world.ego.position)
            return {"ack": "reset"}
        if cmd == "save":
            # Mid-recording saves flush the open episode; recording continues
            # into a fresh one.
            self._flush_episode()
            out = path or "teleop.playlog"
            playlog.save(self.log, out)
            self.last_save = out
            return {"ack": "save", "path": out,
                    "episodes": self.log.n_episodes}
        return {"error": f"unknown command {cmd!r}"}

    def _flush_episode(self) -> None:
        if len(self.current) >= 2:
            playlog.append_episode(self.log, self.current)
        self.current = []

    # -- simulation ------------------------------------------------------------

    def tick(self) -> None:
        """One control step: integrate held keys into the target, step, record."""
        wc = self.cfg.world
        dx = (1 if self.keys["right"] else 0) - (1 if self.keys["left"] else 0)
        dy = (1 if self.keys["up"] else 0) - (1 if self.keys["down"] else 0)
        if dx or dy:
            norm = math.hypot(dx, dy)
            step_len = wc.ego_max_speed * wc.control_dt
            self.target[0] += dx / norm * step_len
            self.target[1] += dy / norm * step_len
        else:
            # No keys held: the target snaps to the ego so it stops cleanly.
            self.target[0], self.target[1] = self.world.ego.position
        self.target[0] = min(max(self.target[0], 0.0), wc.arena_width)
        self.target[1] = min(max(self.target[1], 0.0), wc.arena_height)

        action = _quantized(Action(target_position=(self.target[0],
                                                    self.target[1]),
                                   grab=self.grab))
        obs = observe(self.world)
        _, contact = sim.step(self.world, action)
        if self.recording:
            self.current.append(playlog.StepRecord(
                robot_state=obs[:ROBOT_STATE_DIM],
                object_state=obs[ROBOT_STATE_DIM:],
                action=np.array([action.target_position[0],
                                 action.target_position[1],
                                 1.0 if action.grab else 0.0]),
                contact=contact))

    def frame(self) -> dict:
        w = self.world
        return {
            "t": w.step_index,
            "ego": [w.ego.position[0], w.ego.position[1],
                    w.ego.velocity[0], w.ego.velocity[1]],
            "tether": bool(w.ego.tether_active),
            "blocks": [[b.position[0], b.position[1], b.angle,
                        b.half_extents[0], b.half_extents[1]]
                       for b in w.blocks],
            "contact": bool(w.contact),
            "recording": bool(self.recording),
        }


class TeleopServer:
    def __init__(self, cfg: RunConfig, seed: int = 0, render_rate: float = 20.0):
        self.session = TeleopSession(cfg, seed)
        self.render_rate = render_rate
        self.clients: set = set()
        self._stop = asyncio.Event()

    async def handle_client(self, ws) -> None:
        self.clients.add(ws)
        try:
            async for raw in ws:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send(json.dumps({"error": "bad json"}))
                    continue
                if "cmd" in msg:
                    reply = self.session.command(msg["cmd"], msg.get("path"))
                    await ws.send(json.dumps(reply))
                elif "keys" in msg or "grab" in msg:
                    self.session.set_keys(msg.get("keys", {}), msg.get("grab"))
        finally:
            self.clients.discard(ws)

    async def _sim_loop(self) -> None:
        period = self.session.cfg.world.control_dt
        loop = asyncio.get_running_loop()
        next_t = loop.time()
        while not self._stop.is_set():
            self.session.tick()
            next_t += period
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_t = loop.time()  # fell behind; don't spiral

    async def _frame_loop(self) -> None:
        period = 1.0 / self.render_rate
        while not self._stop.is_set():
            if self.clients:
                frame = json.dumps(self.session.frame())
                for ws in list(self.clients):
                    try:
                        await ws.send(frame)
                    except Exception:
                        self.clients.discard(ws)
            await asyncio.sleep(period)

    async def serve(self, host: str = "127.0.0.1", port: int = 8765,
                    ready: asyncio.Event | None = None) -> None:
        from websockets.asyncio.server import serve as ws_serve
        async with ws_serve(self.handle_client, host, port):
            if ready is not None:
                ready.set()
            sim_task = asyncio.create_task(self._sim_loop())
            frame_task = asyncio.create_task(self._frame_loop())
            try:
                await self._stop.wait()
            finally:
                sim_task.cancel()
                frame_task.cancel()

    def stop(self) -> None:
        self._stop.set()


def run_server(cfg: RunConfig, host: str, port: int, seed: int = 0) -> None:
    server = TeleopServer(cfg, seed=seed)
    try:
        asyncio.run(server.serve(host=host, port=port))
    except KeyboardInterrupt:
        pass

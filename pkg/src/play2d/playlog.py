"""On-disk play dataset: append-only episodes of (state, action, contact) steps.

File layout: 8-byte magic ``PLAYLOG1``, little-endian u32 manifest length, a
UTF-8 JSON manifest, then packed step records for every episode back to back.
A record is float32 little-endian fields in manifest order — robot state,
object state, action — plus one contact byte. The manifest carries the field
dims, an episode length table, and the generating config, so a file is fully
self-describing and episodes can be read without loading the whole payload.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InputError

MAGIC = b"PLAYLOG1"
FORMAT_VERSION = 1


@dataclass
class StepRecord:
    robot_state: np.ndarray
    object_state: np.ndarray
    action: np.ndarray
    contact: bool


@dataclass
class Episode:
    """One episode as column arrays (float32 states/actions, uint8 contact)."""

    robot: np.ndarray   # (L, robot_dim)
    objects: np.ndarray  # (L, object_dim)
    actions: np.ndarray  # (L, action_dim)
    contact: np.ndarray  # (L,) uint8

    def __len__(self) -> int:
        return self.robot.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Episode):
            return NotImplemented
        return (self.robot.tobytes() == other.robot.tobytes()
                and self.objects.tobytes() == other.objects.tobytes()
                and self.actions.tobytes() == other.actions.tobytes()
                and self.contact.tobytes() == other.contact.tobytes())


@dataclass
class PlayLog:
    robot_dim: int
    object_dim: int
    action_dim: int
    dt: float
    config_hash: str = ""
    extra: dict = field(default_factory=dict)
    episodes: list[Episode] = field(default_factory=list)

    @property
    def n_episodes(self) -> int:
        return len(self.episodes)

    @property
    def episode_lengths(self) -> list[int]:
        return [len(ep) for ep in self.episodes]

    @property
    def n_steps(self) -> int:
        return sum(self.episode_lengths)

    def record_size(self) -> int:
        return 4 * (self.robot_dim + self.object_dim + self.action_dim) + 1

    def manifest(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "robot_dim": self.robot_dim,
            "object_dim": self.object_dim,
            "action_dim": self.action_dim,
            "dt": self.dt,
            "config_hash": self.config_hash,
            "episode_lengths": self.episode_lengths,
            "extra": self.extra,
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, PlayLog):
            return NotImplemented
        return self.manifest() == other.manifest() and self.episodes == other.episodes


def new_log(robot_dim: int, object_dim: int, action_dim: int, dt: float,
            config_hash: str = "", extra: dict | None = None) -> PlayLog:
    return PlayLog(robot_dim=robot_dim, object_dim=object_dim,
                   action_dim=action_dim, dt=dt, config_hash=config_hash,
                   extra=dict(extra or {}))


def append_episode(log: PlayLog, steps) -> PlayLog:
    """Append one episode; `steps` is a list of StepRecord or an Episode."""
    if isinstance(steps, Episode):
        ep = steps
    else:
        if len(steps) == 0:
            raise InputError("episode must contain at least 2 steps")
        ep = Episode(
            robot=np.asarray([s.robot_state for s in steps], dtype=np.float32),
            objects=np.asarray([s.object_state for s in steps], dtype=np.float32),
            actions=np.asarray([s.action for s in steps], dtype=np.float32),
            contact=np.asarray([1 if s.contact else 0 for s in steps], dtype=np.uint8),
        )
    if len(ep) < 2:
        raise InputError(f"episode must contain at least 2 steps, got {len(ep)}")
    if ep.robot.shape != (len(ep), log.robot_dim):
        raise InputError(f"robot state dim {ep.robot.shape[1:]} != ({log.robot_dim},)")
    if ep.objects.shape != (len(ep), log.object_dim):
        raise InputError(f"object state dim {ep.objects.shape[1:]} != ({log.object_dim},)")
    if ep.actions.shape != (len(ep), log.action_dim):
        raise InputError(f"action dim {ep.actions.shape[1:]} != ({log.action_dim},)")
    if ep.contact.shape != (len(ep),):
        raise InputError("contact must be one flag per step")
    log.episodes.append(ep)
    return log


def _episode_bytes(log: PlayLog, ep: Episode) -> bytes:
    rec = np.empty((len(ep), log.robot_dim + log.object_dim + log.action_dim),
                   dtype="<f4")
    rec[:, :log.robot_dim] = ep.robot
    rec[:, log.robot_dim:log.robot_dim + log.object_dim] = ep.objects
    rec[:, log.robot_dim + log.object_dim:] = ep.actions
    out = np.empty((len(ep), rec.shape[1] * 4 + 1), dtype=np.uint8)
    out[:, :-1] = rec.view(np.uint8).reshape(len(ep), -1)
    out[:, -1] = ep.contact
    return out.tobytes()


def _episode_from_bytes(log: PlayLog, raw: bytes, length: int) -> Episode:
    width = log.robot_dim + log.object_dim + log.action_dim
    flat = np.frombuffer(raw, dtype=np.uint8).reshape(length, width * 4 + 1)
    rec = flat[:, :-1].copy().view("<f4").reshape(length, width)
    return Episode(
        robot=rec[:, :log.robot_dim].copy(),
        objects=rec[:, log.robot_dim:log.robot_dim + log.object_dim].copy(),
        actions=rec[:, log.robot_dim + log.object_dim:].copy(),
        contact=flat[:, -1].copy(),
    )


def save(log: PlayLog, path) -> None:
    manifest = json.dumps(log.manifest(), sort_keys=True,
                          separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(manifest)))
        f.write(manifest)
        for ep in log.episodes:
            f.write(_episode_bytes(log, ep))


def _read_header(f) -> tuple[dict, PlayLog]:
    magic = f.read(len(MAGIC))
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    raw_len = f.read(4)
    if len(raw_len) < 4:
        raise FormatError("truncated header")
    (mlen,) = struct.unpack("<I", raw_len)
    raw = f.read(mlen)
    if len(raw) < mlen:
        raise FormatError("truncated manifest")
    try:
        manifest = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable manifest: {exc}") from exc
    version = manifest.get("version")
    if version != FORMAT_VERSION:
        raise FormatError(f"format version {version} != {FORMAT_VERSION}")
    log = PlayLog(robot_dim=manifest["robot_dim"],
                  object_dim=manifest["object_dim"],
                  action_dim=manifest["action_dim"],
                  dt=manifest["dt"],
                  config_hash=manifest.get("config_hash", ""),
                  extra=manifest.get("extra", {}))
    return manifest, log


def load(path) -> PlayLog:
    """Read a full log into memory; inverse of save()."""
    with open(path, "rb") as f:
        manifest, log = _read_header(f)
        rec_size = log.record_size()
        for k, length in enumerate(manifest["episode_lengths"]):
            raw = f.read(rec_size * length)
            if len(raw) < rec_size * length:
                raise FormatError(f"truncated payload in episode {k}")
            log.episodes.append(_episode_from_bytes(log, raw, length))
        if f.read(1):
            raise FormatError("trailing bytes after final episode")
    return log


def iter_episodes(path):
    """Stream (index, Episode) pairs without holding the whole file in memory."""
    with open(path, "rb") as f:
        manifest, log = _read_header(f)
        rec_size = log.record_size()
        for k, length in enumerate(manifest["episode_lengths"]):
            raw = f.read(rec_size * length)
            if len(raw) < rec_size * length:
                raise FormatError(f"truncated payload in episode {k}")
            yield k, _episode_from_bytes(log, raw, length)


@dataclass
class ValidationReport:
    ok: bool
    message: str
    episode: int | None = None
    step: int | None = None
    fieldname: str | None = None


def validate(log: PlayLog) -> ValidationReport:
    """Check structural invariants and finiteness of every float field."""
    for k, ep in enumerate(log.episodes):
        if len(ep) < 2:
            return ValidationReport(False, f"episode {k} shorter than 2 steps",
                                    episode=k)
        for name, arr, dim in (("robot_state", ep.robot, log.robot_dim),
                               ("object_state", ep.objects, log.object_dim),
                               ("action", ep.actions, log.action_dim)):
            if arr.shape != (len(ep), dim):
                return ValidationReport(False,
                                        f"episode {k}: {name} shape {arr.shape}",
                                        episode=k, fieldname=name)
            finite = np.isfinite(arr)
            if not finite.all():
                s, j = np.argwhere(~finite)[0]
                return ValidationReport(
                    False, f"non-finite {name}[{j}] at episode {k} step {s}",
                    episode=k, step=int(s), fieldname=name)
        bad = (ep.contact > 1)
        if bad.any():
            s = int(np.argmax(bad))
            return ValidationReport(False,
                                    f"contact byte out of range at episode {k} "
                                    f"step {s}", episode=k, step=s,
                                    fieldname="contact")
        grab = ep.actions[:, -1]
        if not np.isin(grab, (0.0, 1.0)).all():
            s = int(np.argmax(~np.isin(grab, (0.0, 1.0))))
            return ValidationReport(False,
                                    f"grab field not in {{0,1}} at episode {k} "
                                    f"step {s}", episode=k, step=s,
                                    fieldname="action")
    return ValidationReport(True, f"ok: {log.n_episodes} episodes, "
                                  f"{log.n_steps} steps")


def export_csv(log: PlayLog, fileobj: io.TextIOBase) -> None:
    """Flat CSV dump (one row per step) for manual inspection."""
    cols = (["episode", "step"]
            + [f"r{i}" for i in range(log.robot_dim)]
            + [f"o{i}" for i in range(log.object_dim)]
            + [f"a{i}" for i in range(log.action_dim)]
            + ["contact"])
    fileobj.write(",".join(cols) + "\n")
    for k, ep in enumerate(log.episodes):
        for s in range(len(ep)):
            row = ([str(k), str(s)]
                   + [repr(float(v)) for v in ep.robot[s]]
                   + [repr(float(v)) for v in ep.objects[s]]
                   + [repr(float(v)) for v in ep.actions[s]]
                   + [str(int(ep.contact[s]))])
            fileobj.write(",".join(row) + "\n")

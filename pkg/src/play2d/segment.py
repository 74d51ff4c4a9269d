"""Turning raw per-step contact flags into interaction phases and training
windows.

An episode is split into alternating phases: pre-interaction (approach),
interaction (contiguous contact after smoothing), and post-interaction, where
the post phase of interaction k is by construction the same index range as the
pre phase of interaction k+1. Training windows are sampled around interactions
with a soft boundary of S steps so the window set covers the contact border,
and goals are drawn from the end of the interaction through its post phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DataError
from .playlog import PlayLog


@dataclass(frozen=True)
class SmoothingConfig:
    """gap_fill: bridge false-gaps up to this many steps inside contact;
    min_len: discard contact runs shorter than this."""

    gap_fill: int = 3
    min_len: int = 2

    def validate(self) -> None:
        if self.gap_fill < 0:
            raise ConfigurationError("gap_fill must be >= 0")
        if self.min_len < 1:
            raise ConfigurationError("min_len must be >= 1")


@dataclass(frozen=True)
class InteractionInterval:
    c_s: int  # first contact step
    c_e: int  # last contact step (inclusive)

    @property
    def length(self) -> int:
        return self.c_e - self.c_s + 1


@dataclass
class PhaseSegmentation:
    """Interactions of one episode plus derived pre/post phase bounds."""

    length: int
    interactions: list[InteractionInterval]

    def pre_start(self, k: int) -> int:
        """First index of the pre phase of interaction k (end of k-1, plus 1)."""
        if k == 0:
            return 0
        return self.interactions[k - 1].c_e + 1

    def post_end(self, k: int) -> int:
        """Last index of the post phase of interaction k."""
        if k == len(self.interactions) - 1:
            return self.length - 1
        return self.interactions[k + 1].c_s - 1


def _runs(values: np.ndarray) -> list[tuple[int, int, bool]]:
    """Maximal constant runs as (start, end_inclusive, value)."""
    out = []
    n = len(values)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        out.append((i, j, bool(values[i])))
        i = j + 1
    return out


def smooth_contact(raw, cfg: SmoothingConfig) -> np.ndarray:
    """Fill short false-gaps flanked by contact, then drop short contact runs."""
    cfg.validate()
    x = np.asarray(raw, dtype=bool).copy()
    n = len(x)
    if n == 0:
        return x
    # Pass 1: fill interior false-runs of length <= gap_fill.
    for (i, j, v) in _runs(x):
        if not v and i > 0 and j < n - 1 and (j - i + 1) <= cfg.gap_fill:
            x[i:j + 1] = True
    # Pass 2: zero true-runs shorter than min_len.
    for (i, j, v) in _runs(x):
        if v and (j - i + 1) < cfg.min_len:
            x[i:j + 1] = False
    return x


def find_interactions(contact) -> list[InteractionInterval]:
    """Maximal contiguous true-runs of an (already smoothed) contact signal."""
    x = np.asarray(contact, dtype=bool)
    return [InteractionInterval(i, j) for (i, j, v) in _runs(x) if v]


def segment_episode(contact, cfg: SmoothingConfig) -> PhaseSegmentation:
    x = np.asarray(contact, dtype=bool)
    smoothed = smooth_contact(x, cfg)
    return PhaseSegmentation(length=len(x),
                             interactions=find_interactions(smoothed))


@dataclass(frozen=True)
class WindowSample:
    episode: int
    interaction: int
    int_start: int   # first index of the interaction window (length h_int)
    pre_start: int   # first real index of the pre window
    pre_padding: int  # leading steps synthesized by repeating the first state
    goal_index: int

    @property
    def padded(self) -> bool:
        return self.pre_padding > 0


@dataclass
class SegmentedDataset:
    """Per-episode segmentations plus a flat interaction table for sampling."""

    segmentations: list[PhaseSegmentation]
    # Rows: episode, k, c_s, c_e, pre_start, post_end, episode_length.
    table: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        rows = []
        for e, seg in enumerate(self.segmentations):
            for k, it in enumerate(seg.interactions):
                rows.append((e, k, it.c_s, it.c_e, seg.pre_start(k),
                             seg.post_end(k), seg.length))
        self.table = (np.asarray(rows, dtype=np.int64) if rows
                      else np.empty((0, 7), dtype=np.int64))

    @property
    def n_interactions(self) -> int:
        return self.table.shape[0]


def segment_dataset(log: PlayLog, cfg: SmoothingConfig) -> SegmentedDataset:
    return SegmentedDataset([segment_episode(ep.contact, cfg)
                             for ep in log.episodes])


def window_ranges(c_s: int, c_e: int, pre_start: int, length: int,
                  h_int: int, h_pre: int, soft: int
                  ) -> tuple[int, int, int, int]:
    """Valid start ranges for interaction and pre windows.

    The interaction window of length h_int starts anywhere in
    [c_s - soft, c_e + soft - h_int] and the pre window of length h_pre in
    [pre_start, c_s + soft - h_pre], both clamped to the episode. Returns
    (int_lo, int_hi, pre_lo, pre_hi), inclusive bounds; a pre range with
    pre_hi < pre_lo means the pre phase is too short and needs left padding.
    """
    int_lo = max(0, c_s - soft)
    int_hi = min(length, c_e + soft) - h_int
    pre_lo = pre_start
    pre_hi = min(c_s + soft, length) - h_pre
    return int_lo, int_hi, pre_lo, pre_hi


def sample_window(ds: SegmentedDataset, rng: np.random.Generator,
                  h_int: int, h_pre: int, soft: int) -> WindowSample:
    """Draw one training window; interactions are chosen uniformly."""
    if ds.n_interactions == 0:
        raise DataError("dataset has no interactions to sample from")
    for _ in range(256):
        row = ds.table[rng.integers(0, ds.n_interactions)]
        e, k, c_s, c_e, pre_start, post_end, length = (int(v) for v in row)
        int_lo, int_hi, pre_lo, pre_hi = window_ranges(
            c_s, c_e, pre_start, length, h_int, h_pre, soft)
        if int_hi < int_lo:
            continue  # interval too short even with the soft boundary
        int_start = int(rng.integers(int_lo, int_hi + 1))
        if pre_hi >= pre_lo:
            pre_start_idx = int(rng.integers(pre_lo, pre_hi + 1))
            padding = 0
        else:
            pre_start_idx = pre_lo
            padding = pre_lo - pre_hi
        goal_index = int(rng.integers(c_e, post_end + 1))
        return WindowSample(episode=e, interaction=k, int_start=int_start,
                            pre_start=pre_start_idx, pre_padding=padding,
                            goal_index=goal_index)
    raise DataError("no interaction admits a valid window at this horizon")


def interaction_flags(length: int, seg: PhaseSegmentation) -> np.ndarray:
    out = np.zeros(length, dtype=bool)
    for it in seg.interactions:
        out[it.c_s:it.c_e + 1] = True
    return out


@dataclass
class InjectionReport:
    requested_pct: float
    achieved_pct: float
    injected: int


def inject_false_contacts(contacts, rng: np.random.Generator,
                          target_pct: float, cfg: SmoothingConfig,
                          n_inject: int | None = None
                          ) -> tuple[np.ndarray, int]:
    """Insert synthetic contact runs into the blank regions of one episode.

    Runs are placed clear of real contact (beyond gap_fill) with lengths drawn
    from the episode's own true-run length distribution so they survive
    smoothing as standalone false interactions. Returns the new signal and the
    number of runs actually placed.
    """
    if not (0 <= target_pct < 50):
        raise ConfigurationError("target_pct must be in [0, 50)")
    x = np.asarray(contacts, dtype=bool).copy()
    base = segment_episode(x, cfg).interactions
    if n_inject is None:
        if target_pct == 0 or not base:
            return x, 0
        frac = target_pct / 100.0
        n_inject = int(round(frac / (1.0 - frac) * len(base)))
    if n_inject == 0 or not base:
        return x, 0
    lengths = np.asarray([it.length for it in base], dtype=np.int64)

    placed = 0
    occupied = x.copy()  # real or synthetic contact plus exclusion margin
    margin = cfg.gap_fill + 1
    for _ in range(n_inject * 64):
        if placed >= n_inject:
            break
        run_len = max(int(rng.choice(lengths)), cfg.min_len)
        free = ~occupied
        # Candidate starts where the run plus margins stays clear.
        ok = np.ones(len(x) - run_len + 1, dtype=bool) if len(x) >= run_len \
            else np.zeros(0, dtype=bool)
        if ok.size == 0:
            break
        window = np.lib.stride_tricks.sliding_window_view(free, run_len)
        ok &= window.all(axis=1)
        for s in np.flatnonzero(ok):
            lo = max(0, s - margin)
            hi = min(len(x), s + run_len + margin)
            if not occupied[lo:s].any() and not occupied[s + run_len:hi].any():
                continue
            ok[s] = False
        starts = np.flatnonzero(ok)
        if starts.size == 0:
            break
        s = int(rng.choice(starts))
        x[s:s + run_len] = True
        occupied[max(0, s - margin):min(len(x), s + run_len + margin)] = True
        placed += 1
    return x, placed


def inject_false_contacts_dataset(log: PlayLog, rng: np.random.Generator,
                                  target_pct: float, cfg: SmoothingConfig
                                  ) -> tuple[list[np.ndarray], InjectionReport]:
    """Corrupt a whole dataset so the requested fraction of segmented
    interactions are synthetic. Best-effort: the report carries the measured
    fraction after re-segmentation."""
    if not (0 <= target_pct < 50):
        raise ConfigurationError("target_pct must be in [0, 50)")
    signals = [ep.contact.astype(bool).copy() for ep in log.episodes]
    base_total = sum(len(segment_episode(s, cfg).interactions) for s in signals)
    if target_pct == 0 or base_total == 0:
        return signals, InjectionReport(target_pct, 0.0, 0)
    frac = target_pct / 100.0
    want = int(round(frac / (1.0 - frac) * base_total))

    order = rng.permutation(len(signals))
    placed_total = 0
    out = list(signals)
    per_ep = np.zeros(len(signals), dtype=np.int64)
    # Round-robin placement: one run per episode per sweep until the quota.
    for sweep in range(64):
        progress = False
        for e in order:
            if placed_total >= want:
                break
            new, placed = inject_false_contacts(out[e], rng, target_pct, cfg,
                                                n_inject=1)
            if placed:
                out[e] = new
                per_ep[e] += 1
                placed_total += 1
                progress = True
        if placed_total >= want or not progress:
            break

    after_total = sum(len(segment_episode(s, cfg).interactions) for s in out)
    false_count = after_total - base_total
    achieved = 100.0 * false_count / after_total if after_total else 0.0
    return out, InjectionReport(target_pct, achieved, placed_total)

"""Play log format: round trips, streaming, forced corruption, validation."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from play2d import playlog
from play2d.errors import FormatError, InputError
from play2d.playlog import (Episode, StepRecord, append_episode, iter_episodes,
                            load, new_log, save, validate)


def make_log(rng, n_episodes, rd=5, od=10, ad=3):
    log = new_log(rd, od, ad, dt=0.1, config_hash="cafe")
    for _ in range(n_episodes):
        length = int(rng.integers(2, 40))
        ep = Episode(
            robot=rng.standard_normal((length, rd)).astype(np.float32),
            objects=rng.standard_normal((length, od)).astype(np.float32),
            actions=np.concatenate(
                [rng.standard_normal((length, ad - 1)).astype(np.float32),
                 rng.integers(0, 2, (length, 1)).astype(np.float32)], axis=1),
            contact=rng.integers(0, 2, length).astype(np.uint8))
        append_episode(log, ep)
    return log


class TestRoundTrip:
    def test_empty_log(self, tmp_path):
        log = new_log(5, 10, 3, dt=0.1)
        p = tmp_path / "e.playlog"
        save(log, p)
        assert load(p) == log

    def test_many_episode_round_trip_byte_equal(self, tmp_path):
        rng = np.random.default_rng(0)
        log = make_log(rng, 50)
        p1 = tmp_path / "a.playlog"
        p2 = tmp_path / "b.playlog"
        save(log, p1)
        loaded = load(p1)
        assert loaded == log
        save(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_lengths_preserved_large(self, tmp_path):
        rng = np.random.default_rng(1)
        log = make_log(rng, 1000, rd=2, od=3, ad=3)
        p = tmp_path / "big.playlog"
        save(log, p)
        loaded = load(p)
        assert loaded.episode_lengths == log.episode_lengths

    def test_streaming_matches_full_load(self, tmp_path):
        rng = np.random.default_rng(2)
        log = make_log(rng, 12)
        p = tmp_path / "s.playlog"
        save(log, p)
        full = load(p)
        for k, ep in iter_episodes(p):
            assert ep == full.episodes[k]


@given(st.integers(0, 2 ** 31), st.integers(0, 6))
@settings(max_examples=30, deadline=None)
def test_round_trip_property(seed, n_eps):
    rng = np.random.default_rng(seed)
    log = make_log(rng, n_eps, rd=2, od=4, ad=3)
    buf = io.BytesIO()

    import tempfile, os
    fd, path = tempfile.mkstemp()
    os.close(fd)
    try:
        save(log, path)
        assert load(path) == log
    finally:
        os.unlink(path)
    del buf


class TestErrors:
    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x"
        p.write_bytes(b"NOTMAGIC" + b"\0" * 64)
        with pytest.raises(FormatError, match="magic"):
            load(p)

    def test_bad_version(self, tmp_path):
        rng = np.random.default_rng(0)
        log = make_log(rng, 1)
        p = tmp_path / "v.playlog"
        save(log, p)
        raw = bytearray(p.read_bytes())
        # Manifest is JSON right after the 12-byte prefix; bump the version.
        text = raw[12:].decode("utf-8", errors="ignore")
        patched = text.replace('"version":1', '"version":9', 1)
        p.write_bytes(raw[:12] + patched.encode("utf-8"))
        with pytest.raises(FormatError, match="version"):
            load(p)

    def test_truncation_names_episode(self, tmp_path):
        rng = np.random.default_rng(3)
        log = make_log(rng, 3)
        p = tmp_path / "t.playlog"
        save(log, p)
        raw = p.read_bytes()
        # Cut into the last episode's payload.
        p.write_bytes(raw[:-(log.record_size() + 1)])
        with pytest.raises(FormatError, match="episode 2"):
            load(p)

    def test_append_dim_mismatch(self):
        log = new_log(5, 10, 3, dt=0.1)
        steps = [StepRecord(robot_state=np.zeros(5), object_state=np.zeros(10),
                            action=np.zeros(4), contact=False)
                 for _ in range(3)]
        with pytest.raises(InputError, match="action"):
            append_episode(log, steps)

    def test_append_too_short(self):
        log = new_log(5, 10, 3, dt=0.1)
        steps = [StepRecord(robot_state=np.zeros(5), object_state=np.zeros(10),
                            action=np.zeros(3), contact=False)]
        with pytest.raises(InputError, match="2 steps"):
            append_episode(log, steps)


class TestValidate:
    def test_fresh_log_passes(self):
        rng = np.random.default_rng(5)
        log = make_log(rng, 5)
        report = validate(log)
        assert report.ok, report.message

    def test_nan_located(self):
        rng = np.random.default_rng(6)
        log = make_log(rng, 5)
        step_idx = len(log.episodes[3]) - 1
        log.episodes[3].objects[step_idx, 2] = np.nan
        report = validate(log)
        assert not report.ok
        assert report.episode == 3 and report.step == step_idx

    def test_contact_range(self):
        rng = np.random.default_rng(7)
        log = make_log(rng, 2)
        log.episodes[1].contact[4] = 2
        report = validate(log)
        assert not report.ok
        assert report.fieldname == "contact"

    def test_grab_binary(self):
        rng = np.random.default_rng(8)
        log = make_log(rng, 2)
        log.episodes[0].actions[1, -1] = 0.5
        report = validate(log)
        assert not report.ok


def test_export_csv_header_and_rows():
    rng = np.random.default_rng(9)
    log = make_log(rng, 2, rd=2, od=3, ad=3)
    buf = io.StringIO()
    playlog.export_csv(log, buf)
    lines = buf.getvalue().strip().split("\n")
    assert lines[0].startswith("episode,step,r0,r1,o0")
    assert len(lines) == 1 + log.n_steps

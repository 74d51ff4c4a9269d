"""Segmentation: brute-force reference oracles for smoothing and interaction
extraction, hand-derived phase examples, window-sampling arithmetic, and
false-contact injection accounting."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from play2d import segment as S
from play2d.errors import DataError
from play2d.segment import (SegmentedDataset, SmoothingConfig,
                            find_interactions, inject_false_contacts,
                            sample_window, segment_episode, smooth_contact,
                            window_ranges)

# -- brute-force references ---------------------------------------------------


def smooth_reference(raw, gap_fill, min_len):
    """Index-by-index reference: fill bounded interior gaps, then drop short
    runs, both by explicit scanning."""
    x = list(bool(v) for v in raw)
    n = len(x)
    out = list(x)
    # Fill: a false index flips true iff it sits in a false-run of length
    # <= gap_fill with true neighbours on both sides.
    i = 0
    while i < n:
        if not x[i]:
            j = i
            while j + 1 < n and not x[j + 1]:
                j += 1
            if i > 0 and j < n - 1 and (j - i + 1) <= gap_fill:
                for k in range(i, j + 1):
                    out[k] = True
            i = j + 1
        else:
            i += 1
    # Drop short true-runs.
    final = list(out)
    i = 0
    while i < n:
        if out[i]:
            j = i
            while j + 1 < n and out[j + 1]:
                j += 1
            if (j - i + 1) < min_len:
                for k in range(i, j + 1):
                    final[k] = False
            i = j + 1
        else:
            i += 1
    return np.asarray(final, dtype=bool)


def intervals_reference(contact):
    out = []
    start = None
    for i, v in enumerate(list(contact) + [False]):
        if v and start is None:
            start = i
        elif not v and start is not None:
            out.append((start, i - 1))
            start = None
    return out


# -- smoothing ----------------------------------------------------------------


class TestSmoothContact:
    def test_hand_example_gap_fill(self):
        raw = [0, 0, 1, 1, 0, 1, 1, 1, 0]
        out = smooth_contact(raw, SmoothingConfig(gap_fill=1, min_len=1))
        assert out.tolist() == [False, False, True, True, True, True, True,
                                True, False]

    def test_hand_example_min_len(self):
        out = smooth_contact([0, 1, 0], SmoothingConfig(gap_fill=0, min_len=2))
        assert out.tolist() == [False, False, False]

    def test_matches_reference_on_random_sequences(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            n = int(rng.integers(0, 60))
            raw = rng.random(n) < rng.uniform(0.1, 0.9)
            gap = int(rng.integers(0, 5))
            ml = int(rng.integers(1, 5))
            got = smooth_contact(raw, SmoothingConfig(gap_fill=gap, min_len=ml))
            want = smooth_reference(raw, gap, ml)
            assert np.array_equal(got, want)

    def test_leading_trailing_gaps_not_filled(self):
        out = smooth_contact([0, 1, 1, 0], SmoothingConfig(gap_fill=5, min_len=1))
        assert out.tolist() == [False, True, True, False]


@given(st.lists(st.booleans(), max_size=80), st.integers(0, 4),
       st.integers(1, 4))
@settings(max_examples=200, deadline=None)
def test_smooth_property_matches_reference(raw, gap, ml):
    got = smooth_contact(raw, SmoothingConfig(gap_fill=gap, min_len=ml))
    assert np.array_equal(got, smooth_reference(raw, gap, ml))
    assert len(got) == len(raw)


# -- interactions --------------------------------------------------------------


class TestFindInteractions:
    def test_all_false(self):
        assert find_interactions([0, 0, 0]) == []

    def test_single_run(self):
        out = find_interactions([0, 0, 1, 1, 1, 0, 0])
        assert [(i.c_s, i.c_e) for i in out] == [(2, 4)]

    def test_matches_reference(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            raw = rng.random(int(rng.integers(0, 50))) < 0.5
            got = [(i.c_s, i.c_e) for i in find_interactions(raw)]
            assert got == intervals_reference(raw)


# -- phases --------------------------------------------------------------------


class TestSegmentEpisode:
    def test_hand_example_phases(self):
        contact = [0, 0, 1, 1, 0, 0, 1, 1, 1, 0]
        seg = segment_episode(contact, SmoothingConfig(gap_fill=0, min_len=1))
        assert [(i.c_s, i.c_e) for i in seg.interactions] == [(2, 3), (6, 8)]
        assert seg.pre_start(0) == 0
        assert seg.pre_start(1) == 4          # post_1 == pre_2 == [4, 5]
        assert seg.interactions[1].c_s - 1 == 5
        assert seg.post_end(0) == 5
        assert seg.post_end(1) == 9

    def test_all_contact_episode(self):
        seg = segment_episode([1] * 8, SmoothingConfig(gap_fill=0, min_len=1))
        assert [(i.c_s, i.c_e) for i in seg.interactions] == [(0, 7)]
        assert seg.pre_start(0) == 0          # empty pre phase

    def test_no_contact_yields_empty(self):
        seg = segment_episode([0] * 8, SmoothingConfig())
        assert seg.interactions == []

    def test_partition_property_random(self):
        rng = np.random.default_rng(2)
        cfg = SmoothingConfig(gap_fill=0, min_len=1)
        for _ in range(1000):
            n = int(rng.integers(1, 60))
            contact = rng.random(n) < rng.uniform(0.1, 0.9)
            seg = segment_episode(contact, cfg)
            owner = np.zeros(n, dtype=int)
            for k, it in enumerate(seg.interactions):
                owner[it.c_s:it.c_e + 1] += 1
                pre = range(seg.pre_start(k), it.c_s)
                for i in pre:
                    owner[i] += 1
            if seg.interactions:
                # Trailing post of the last interaction.
                last = seg.interactions[-1]
                owner[last.c_e + 1:] += 1
            else:
                owner += 1
            assert (owner == 1).all()


# -- window sampling -------------------------------------------------------------


class TestWindowRanges:
    def test_documented_arithmetic(self):
        # c_s=50, c_e=90, H=20, S=10, episode length 200, pre phase from 0:
        # interaction starts span [40, 80], pre starts span [0, 40].
        int_lo, int_hi, pre_lo, pre_hi = window_ranges(
            c_s=50, c_e=90, pre_start=0, length=200, h_int=20, h_pre=20,
            soft=10)
        assert (int_lo, int_hi) == (40, 80)
        assert (pre_lo, pre_hi) == (0, 40)

    def test_clamped_to_episode(self):
        int_lo, int_hi, _, _ = window_ranges(
            c_s=5, c_e=90, pre_start=0, length=95, h_int=20, h_pre=20, soft=10)
        assert int_lo == 0
        assert int_hi == 95 - 20

    def test_rule_arithmetic_random(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            h = int(rng.integers(4, 30))
            soft = h // 2
            length = int(rng.integers(h + 1, 400))
            c_s = int(rng.integers(0, length - 1))
            c_e = int(rng.integers(c_s, length - 1))
            pre_start = int(rng.integers(0, c_s + 1))
            int_lo, int_hi, pre_lo, pre_hi = window_ranges(
                c_s, c_e, pre_start, length, h, h, soft)
            assert int_lo == max(0, c_s - soft)
            assert int_hi == min(length, c_e + soft) - h
            assert pre_lo == pre_start
            assert pre_hi == min(c_s + soft, length) - h

    def test_soft_boundary_coverage(self):
        # With S = H/2 the reachable interaction windows cover the contact
        # border region around [c_s - S, c_e + S).
        h, soft = 20, 10
        c_s, c_e, length = 50, 90, 200
        int_lo, int_hi, _, _ = window_ranges(c_s, c_e, 0, length, h, h, soft)
        covered = set()
        for start in range(int_lo, int_hi + 1):
            covered.update(range(start, start + h))
        assert covered == set(range(c_s - soft, c_e + soft))


def synthetic_dataset(contacts_list):
    return SegmentedDataset([segment_episode(c, SmoothingConfig(0, 1))
                             for c in contacts_list])


class TestSampleWindow:
    def test_sample_bounds(self):
        contact = np.zeros(200, dtype=bool)
        contact[50:91] = True
        ds = synthetic_dataset([contact])
        rng = np.random.default_rng(0)
        for _ in range(500):
            w = sample_window(ds, rng, h_int=20, h_pre=20, soft=10)
            assert 40 <= w.int_start <= 80
            assert 0 <= w.pre_start <= 40
            assert 90 <= w.goal_index <= 199
            assert w.pre_padding == 0

    def test_sample_uniformity_chi2(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        contact = np.zeros(200, dtype=bool)
        contact[50:91] = True
        ds = synthetic_dataset([contact])
        rng = np.random.default_rng(1)
        starts = np.array([sample_window(ds, rng, 20, 20, 10).int_start
                           for _ in range(100_000)])
        hist = np.bincount(starts - 40, minlength=41)
        _, p = scipy_stats.chisquare(hist)
        assert p > 0.01

    def test_short_pre_phase_pads(self):
        contact = np.zeros(60, dtype=bool)
        contact[4:40] = True  # pre phase has only 4 steps
        ds = synthetic_dataset([contact])
        rng = np.random.default_rng(2)
        w = sample_window(ds, rng, h_int=20, h_pre=20, soft=10)
        assert w.pre_padding > 0
        assert w.pre_start == 0

    def test_goal_at_or_after_interaction_end(self):
        rng = np.random.default_rng(3)
        contacts = []
        for _ in range(50):
            c = np.random.default_rng(len(contacts)).random(120) < 0.4
            contacts.append(c)
        ds = synthetic_dataset(contacts)
        if ds.n_interactions == 0:
            pytest.skip("no interactions in synthetic data")
        for _ in range(2000):
            w = sample_window(ds, rng, h_int=4, h_pre=4, soft=2)
            seg = ds.segmentations[w.episode]
            it = seg.interactions[w.interaction]
            assert w.goal_index >= it.c_e
            assert w.goal_index <= seg.post_end(w.interaction)

    def test_no_interactions_raises(self):
        ds = synthetic_dataset([np.zeros(50, dtype=bool)])
        with pytest.raises(DataError):
            sample_window(ds, np.random.default_rng(0), 4, 4, 2)


# -- false-contact injection ----------------------------------------------------


class TestInjectFalseContacts:
    def test_zero_pct_identity(self):
        rng = np.random.default_rng(0)
        contact = np.zeros(100, dtype=bool)
        contact[20:40] = True
        out, placed = inject_false_contacts(contact, rng, 0.0,
                                            SmoothingConfig())
        assert placed == 0
        assert np.array_equal(out, contact)

    def test_injected_runs_avoid_real_interactions(self):
        rng = np.random.default_rng(1)
        cfg = SmoothingConfig(gap_fill=3, min_len=2)
        contact = np.zeros(300, dtype=bool)
        contact[50:80] = True
        contact[200:230] = True
        out, placed = inject_false_contacts(contact, rng, 30.0, cfg)
        assert placed >= 1
        # Original interactions unchanged after re-segmentation.
        segs = segment_episode(out, cfg).interactions
        spans = [(i.c_s, i.c_e) for i in segs]
        assert (50, 79) in spans and (200, 229) in spans
        assert len(spans) == 2 + placed

    def test_dataset_injection_hits_target(self):
        from play2d.playlog import Episode, new_log, append_episode
        rng = np.random.default_rng(2)
        cfg = SmoothingConfig(gap_fill=3, min_len=2)
        log = new_log(2, 3, 3, dt=0.1)
        gen = np.random.default_rng(7)
        for _ in range(60):
            n = 120
            contact = np.zeros(n, dtype=np.uint8)
            # Two clean interactions per episode.
            a = int(gen.integers(10, 30))
            contact[a:a + int(gen.integers(5, 15))] = 1
            b = int(gen.integers(60, 90))
            contact[b:b + int(gen.integers(5, 15))] = 1
            append_episode(log, Episode(
                robot=np.zeros((n, 2), dtype=np.float32),
                objects=np.zeros((n, 3), dtype=np.float32),
                actions=np.zeros((n, 3), dtype=np.float32),
                contact=contact))
        signals, report = S.inject_false_contacts_dataset(log, rng, 8.0, cfg)
        assert 7.0 <= report.achieved_pct <= 9.0

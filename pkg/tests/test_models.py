"""Learning methods: loss decomposition, variant input contracts, full-model
gradient checks on tiny dims, batch sampling properties, training determinism,
and quick overfit sanity."""

import numpy as np
import pytest

import play2d.tensorcore as tc
from play2d import models as M
from play2d.errors import DataError, InputError
from play2d.models import (ArrayDataset, MethodVariant, ModelConfig,
                           build_bundle, gcbc_loss, lmp_loss, plato_batch,
                           plato_loss, window_batch)
from play2d.playlog import Episode, append_episode, new_log
from play2d.segment import SegmentedDataset, SmoothingConfig, segment_episode

RD, OD, AD = 3, 4, 3
TINY = ModelConfig(h_int=4, h_pre=4, latent_dim=2, policy_hidden=3,
                   posterior_hidden=3, prior_width=4, resample_interval=4,
                   batch_size=2, storage_float32=False)


def synthetic_log(rng, n_episodes=12, length=40, contact_period=10):
    """Episodes with a deterministic contact pattern so segmentation always
    finds interactions."""
    log = new_log(RD, OD, AD, dt=0.1)
    for _ in range(n_episodes):
        contact = np.zeros(length, dtype=np.uint8)
        for s in range(8, length - 8, contact_period * 2):
            contact[s:s + contact_period] = 1
        append_episode(log, Episode(
            robot=rng.standard_normal((length, RD)).astype(np.float32),
            objects=rng.standard_normal((length, OD)).astype(np.float32),
            actions=np.concatenate(
                [rng.standard_normal((length, AD - 1)),
                 rng.integers(0, 2, (length, 1))],
                axis=1).astype(np.float32),
            contact=contact))
    return log


def segmented(log, cfg=SmoothingConfig(gap_fill=0, min_len=1)):
    return SegmentedDataset([segment_episode(ep.contact, cfg)
                             for ep in log.episodes])


@pytest.fixture(scope="module")
def tiny_setup():
    rng = np.random.default_rng(0)
    log = synthetic_log(rng)
    data = ArrayDataset.from_log(log, np.float64)
    seg = segmented(log)
    return log, data, seg


class TestBatches:
    def test_goal_never_precedes_interaction_end(self, tiny_setup):
        log, data, seg = tiny_setup
        rng = np.random.default_rng(1)
        for _ in range(20):
            batch = plato_batch(data, seg, rng, TINY, RD, batch_size=16)
            for i in range(16):
                row = batch.goal_rows[i]
                int_row = batch.int_rows[i]
                # goal row >= c_e >= interaction window start, in dataset rows
                assert row >= int_row

    def test_fixed_seed_deterministic(self, tiny_setup):
        log, data, seg = tiny_setup
        b1 = plato_batch(data, seg, np.random.default_rng(5), TINY, RD)
        b2 = plato_batch(data, seg, np.random.default_rng(5), TINY, RD)
        assert np.array_equal(b1.s_int, b2.s_int)
        assert np.array_equal(b1.goal_rows, b2.goal_rows)

    def test_goal_offsets_uniform_over_post_phase(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        # One interaction with a known post phase; offsets must be uniform.
        log = new_log(RD, OD, AD, dt=0.1)
        length = 60
        contact = np.zeros(length, dtype=np.uint8)
        contact[10:30] = 1  # c_e = 29, post spans [29, 59] for sampling
        rng = np.random.default_rng(2)
        append_episode(log, Episode(
            robot=rng.standard_normal((length, RD)).astype(np.float32),
            objects=rng.standard_normal((length, OD)).astype(np.float32),
            actions=rng.standard_normal((length, AD)).astype(np.float32),
            contact=contact))
        data = ArrayDataset.from_log(log, np.float64)
        seg = segmented(log)
        draws = []
        rng = np.random.default_rng(3)
        for _ in range(1000):
            batch = plato_batch(data, seg, rng, TINY, RD, batch_size=100)
            draws.extend(batch.goal_rows.tolist())
        hist = np.bincount(np.asarray(draws) - 29, minlength=31)
        _, p = scipy_stats.chisquare(hist)
        assert p > 0.01

    def test_window_batch_hindsight_goal_is_last_object_state(self, tiny_setup):
        log, data, seg = tiny_setup
        rng = np.random.default_rng(4)
        batch = window_batch(data, rng, TINY, RD, batch_size=8)
        assert np.array_equal(batch.o_h, batch.s[:, -1, RD:])


class TestLossContracts:
    def test_weight_zeroing(self, tiny_setup):
        log, data, seg = tiny_setup
        cfg = ModelConfig(**{**TINY.__dict__, "alpha": 0.0, "beta": 0.0})
        bundle = build_bundle(MethodVariant.PLATO, cfg, RD, OD, AD, seed=0)
        rng = np.random.default_rng(0)
        batch = plato_batch(data, seg, rng, cfg, RD)
        parts = plato_loss(batch, bundle, np.random.default_rng(1))
        assert parts.total_value == pytest.approx(parts.l_int, rel=1e-12)

    def test_decomposition_identity(self, tiny_setup):
        log, data, seg = tiny_setup
        bundle = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=0)
        rng = np.random.default_rng(0)
        batch = plato_batch(data, seg, rng, TINY, RD)
        parts = plato_loss(batch, bundle, np.random.default_rng(1))
        recombined = (parts.l_int + TINY.alpha * parts.l_pre
                      + TINY.beta * parts.kl)
        assert parts.total_value == pytest.approx(recombined, rel=1e-12)

    def test_forced_equal_distributions_zero_kl(self, tiny_setup):
        # Prior layers copied so both heads see zero hidden input and share
        # bias parameters: identical distributions, KL exactly zero.
        log, data, seg = tiny_setup
        bundle = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=0)
        p = bundle.params
        for name in ("post.mu", "post.ls", "prior.mu", "prior.ls"):
            p[f"{name}.w"].data[...] = 0.0
        p["post.mu.b"].data[...] = 0.7
        p["prior.mu.b"].data[...] = 0.7
        p["post.ls.b"].data[...] = -0.3
        p["prior.ls.b"].data[...] = -0.3
        rng = np.random.default_rng(0)
        batch = plato_batch(data, seg, rng, TINY, RD)
        parts = plato_loss(batch, bundle, np.random.default_rng(1))
        assert parts.kl == pytest.approx(0.0, abs=1e-12)

    def test_variant_guards(self, tiny_setup):
        log, data, seg = tiny_setup
        rng = np.random.default_rng(0)
        batch = plato_batch(data, seg, rng, TINY, RD)
        lmp = build_bundle(MethodVariant.LMP, TINY, RD, OD, AD, seed=0)
        with pytest.raises(InputError):
            plato_loss(batch, lmp, rng)
        wb = window_batch(data, rng, TINY, RD)
        plato = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=0)
        with pytest.raises(InputError):
            lmp_loss(wb, plato, rng)
        with pytest.raises(InputError):
            gcbc_loss(wb, plato)

    def test_gcbc_perfect_prediction_zero_loss(self):
        cfg = TINY
        bundle = build_bundle(MethodVariant.GCBC, cfg, RD, OD, AD, seed=0)
        # Zero all params: policy outputs exactly zero; zero targets -> 0 loss.
        bundle.params.flat_data.fill(0.0)
        b = 2
        batch = M.WindowBatch(
            s=np.zeros((b, cfg.h_int, RD + OD)),
            a=np.zeros((b, cfg.h_int, AD)),
            o_h=np.zeros((b, OD)))
        parts = gcbc_loss(batch, bundle)
        assert parts.total_value == 0.0

    def test_gcbc_constant_zero_policy_loss_is_mean_abs(self):
        cfg = TINY
        bundle = build_bundle(MethodVariant.GCBC, cfg, RD, OD, AD, seed=0)
        bundle.params.flat_data.fill(0.0)
        rng = np.random.default_rng(3)
        a = rng.standard_normal((2, cfg.h_int, AD))
        batch = M.WindowBatch(s=np.zeros((2, cfg.h_int, RD + OD)), a=a,
                              o_h=np.zeros((2, OD)))
        parts = gcbc_loss(batch, bundle)
        assert parts.total_value == pytest.approx(np.abs(a).mean(), rel=1e-9)

    def test_lmp_degenerate_goal_finite(self, tiny_setup):
        # Window where the object never moves: o_1 equals o_H; loss finite.
        log = new_log(RD, OD, AD, dt=0.1)
        length = 20
        objects = np.tile(np.arange(OD, dtype=np.float32), (length, 1))
        rng = np.random.default_rng(5)
        append_episode(log, Episode(
            robot=rng.standard_normal((length, RD)).astype(np.float32),
            objects=objects,
            actions=rng.standard_normal((length, AD)).astype(np.float32),
            contact=np.zeros(length, dtype=np.uint8)))
        data = ArrayDataset.from_log(log, np.float64)
        bundle = build_bundle(MethodVariant.LMP, TINY, RD, OD, AD, seed=0)
        batch = window_batch(data, np.random.default_rng(0), TINY, RD)
        assert np.array_equal(batch.o_h, batch.s[:, -1, RD:])
        parts = lmp_loss(batch, bundle, np.random.default_rng(1))
        assert np.isfinite(parts.total_value)

    def test_lmp_beta_zero_pure_reconstruction(self, tiny_setup):
        log, data, seg = tiny_setup
        cfg = ModelConfig(**{**TINY.__dict__, "beta": 0.0})
        bundle = build_bundle(MethodVariant.LMP, cfg, RD, OD, AD, seed=0)
        batch = window_batch(data, np.random.default_rng(0), cfg, RD)
        parts = lmp_loss(batch, bundle, np.random.default_rng(1))
        assert parts.total_value == pytest.approx(parts.l_int, rel=1e-12)


class TestFullGradients:
    @pytest.mark.parametrize("variant", [MethodVariant.PLATO,
                                         MethodVariant.PLATO_PRE,
                                         MethodVariant.PLATO_R,
                                         MethodVariant.LMP,
                                         MethodVariant.GCBC])
    def test_loss_gradients_match_finite_differences(self, tiny_setup, variant):
        log, data, seg = tiny_setup
        bundle = build_bundle(variant, TINY, RD, OD, AD, seed=2)
        rng = np.random.default_rng(7)
        if variant.interaction_based:
            batch = plato_batch(data, seg, rng, TINY, RD)
        else:
            batch = window_batch(data, rng, TINY, RD)
        noise_rng_seed = 11

        def loss_fn(as_tensor=False):
            noise_rng = np.random.default_rng(noise_rng_seed)
            if variant.interaction_based:
                parts = plato_loss(batch, bundle, noise_rng)
            elif variant is MethodVariant.LMP:
                parts = lmp_loss(batch, bundle, noise_rng)
            else:
                parts = gcbc_loss(batch, bundle)
            return parts.total if as_tensor else parts.total.item()

        err = tc.check_gradients(loss_fn, bundle.params, h=1e-5)
        assert err <= 1e-4, f"{variant}: rel err {err}"


class TestVariantContracts:
    def test_plato_prior_invariant_to_robot_state(self, tiny_setup):
        log, data, seg = tiny_setup
        bundle = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=3)
        rng = np.random.default_rng(0)
        obs = rng.standard_normal(RD + OD)
        o_g = rng.standard_normal(OD)
        cache1 = M.new_cache(7)
        a1 = M.act(bundle, obs, o_g, cache1)
        perturbed = obs.copy()
        perturbed[:RD] += rng.standard_normal(RD) * 10
        cache2 = M.new_cache(7)
        M.act(bundle, perturbed, o_g, cache2)
        assert np.array_equal(cache1.z, cache2.z)
        del a1

    def test_plato_r_prior_depends_on_robot_state(self, tiny_setup):
        log, data, seg = tiny_setup
        bundle = build_bundle(MethodVariant.PLATO_R, TINY, RD, OD, AD, seed=3)
        rng = np.random.default_rng(0)
        obs = rng.standard_normal(RD + OD)
        o_g = rng.standard_normal(OD)
        differing = 0
        for trial in range(100):
            cache1 = M.new_cache(7)
            cache2 = M.new_cache(7)
            M.act(bundle, obs, o_g, cache1)
            perturbed = obs.copy()
            perturbed[:RD] += np.random.default_rng(trial).standard_normal(RD)
            M.act(bundle, perturbed, o_g, cache2)
            if not np.array_equal(cache1.z, cache2.z):
                differing += 1
        assert differing >= 99

    def test_posterior_sees_states_only(self, tiny_setup):
        # Perturbing actions inside the windows leaves the posterior intact.
        log, data, seg = tiny_setup
        bundle = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=4)
        rng = np.random.default_rng(1)
        batch = plato_batch(data, seg, rng, TINY, RD)
        parts1 = plato_loss(batch, bundle, np.random.default_rng(2))
        batch.a_int = batch.a_int + 1.0
        parts2 = plato_loss(batch, bundle, np.random.default_rng(2))
        assert parts1.kl == parts2.kl  # latent untouched by action change
        assert parts1.l_int != parts2.l_int

    def test_prior_input_dims(self):
        for variant, dim in ((MethodVariant.PLATO, 2 * OD),
                             (MethodVariant.PLATO_PRE, 2 * OD),
                             (MethodVariant.PLATO_R, 2 * OD + RD),
                             (MethodVariant.LMP, RD + OD + OD)):
            b = build_bundle(variant, TINY, RD, OD, AD, seed=0)
            assert b.prior_input_dim() == dim


class TestTraining:
    def test_same_seed_identical_metrics(self):
        rng = np.random.default_rng(8)
        log = synthetic_log(rng, n_episodes=6)
        cfg = ModelConfig(**{**TINY.__dict__, "train_steps": 30,
                             "batch_size": 4})
        _, rows1 = M.train(log, cfg, SmoothingConfig(0, 1),
                           MethodVariant.PLATO, seed=5)
        _, rows2 = M.train(log, cfg, SmoothingConfig(0, 1),
                           MethodVariant.PLATO, seed=5)
        assert [r.csv() for r in rows1] == [r.csv() for r in rows2]

    def test_no_interactions_raises_data_error(self):
        rng = np.random.default_rng(9)
        log = synthetic_log(rng, n_episodes=3)
        for ep in log.episodes:
            ep.contact[:] = 0
        with pytest.raises(DataError):
            M.train(log, TINY, SmoothingConfig(0, 1), MethodVariant.PLATO,
                    seed=0)

    def test_gcbc_trains_without_segmentation(self):
        rng = np.random.default_rng(10)
        log = synthetic_log(rng, n_episodes=3)
        for ep in log.episodes:
            ep.contact[:] = 0
        cfg = ModelConfig(**{**TINY.__dict__, "train_steps": 5,
                             "batch_size": 4})
        bundle, rows = M.train(log, cfg, SmoothingConfig(0, 1),
                               MethodVariant.GCBC, seed=0)
        assert len(rows) == 5

    def test_kl_component_decreases_with_beta(self):
        # Fitting the same data with larger beta yields smaller final KL.
        rng = np.random.default_rng(11)
        log = synthetic_log(rng, n_episodes=8)
        finals = []
        for beta in (0.0, 0.01, 1.0):
            kls = []
            for seed in range(3):
                cfg = ModelConfig(**{**TINY.__dict__, "beta": beta,
                                     "train_steps": 500, "batch_size": 8,
                                     "learning_rate": 3e-3})
                _, rows = M.train(log, cfg, SmoothingConfig(0, 1),
                                  MethodVariant.PLATO, seed=seed)
                kls.append(np.mean([r.kl for r in rows[-50:]]))
            finals.append(np.mean(kls))
        assert finals[0] >= finals[1] >= finals[2]


class TestActInterface:
    def test_resample_schedule(self, tiny_setup):
        bundle = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=6)
        cache = M.new_cache(3)
        rng = np.random.default_rng(0)
        obs = rng.standard_normal(RD + OD)
        o_g = rng.standard_normal(OD)
        zs = []
        for t in range(3 * TINY.resample_interval):
            M.act(bundle, obs, o_g, cache)
            zs.append(cache.z.copy())
        # Exactly 3 distinct latents over 3T steps, constant within blocks.
        blocks = [np.asarray(zs[i * TINY.resample_interval:
                                (i + 1) * TINY.resample_interval])
                  for i in range(3)]
        for blk in blocks:
            assert np.allclose(blk, blk[0])
        assert not np.array_equal(blocks[0][0], blocks[1][0])
        assert not np.array_equal(blocks[1][0], blocks[2][0])

    def test_fixed_cache_seed_deterministic(self, tiny_setup):
        bundle = build_bundle(MethodVariant.PLATO, TINY, RD, OD, AD, seed=6)
        rng = np.random.default_rng(1)
        obs = rng.standard_normal(RD + OD)
        o_g = rng.standard_normal(OD)
        a1 = [M.act(bundle, obs, o_g, M.new_cache(9)) for _ in range(1)]
        a2 = [M.act(bundle, obs, o_g, M.new_cache(9)) for _ in range(1)]
        assert np.array_equal(a1, a2)


class TestCheckpointRoundTrip:
    def test_save_load_bundle(self, tmp_path, tiny_setup):
        bundle = build_bundle(MethodVariant.PLATO_R, TINY, RD, OD, AD, seed=7)
        path = tmp_path / "b.ckpt"
        M.save_bundle(path, bundle, config_hash="beef", extra={"seed": 7})
        loaded, header = M.load_bundle(path)
        assert loaded.variant is MethodVariant.PLATO_R
        assert header["config_hash"] == "beef"
        assert header["seed"] == 7
        assert loaded.config == ModelConfig(**{**TINY.__dict__,
                                               "storage_float32": False})
        rng = np.random.default_rng(2)
        obs = rng.standard_normal(RD + OD)
        o_g = rng.standard_normal(OD)
        a1 = M.act(bundle, obs, o_g, M.new_cache(1))
        a2 = M.act(loaded, obs, o_g, M.new_cache(1))
        assert np.allclose(a1, a2, atol=1e-6)

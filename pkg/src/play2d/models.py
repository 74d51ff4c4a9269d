"""Learning methods over play data: the interaction-centric variational method
(PLATO and its PRE/R ablations) plus the fixed-window baselines Play-LMP and
Play-GCBC, with shared training and test-time action selection.

All methods share one architecture family: a bidirectional GRU posterior
encoding a state window into a diagonal-Gaussian latent, an MLP prior
predicting that latent from start/goal information, and a unidirectional GRU
policy decoding per-step actions from [state ++ goal ++ latent]. The variants
differ only in how windows and goals are sampled and in the prior/posterior
inputs; those contracts are enforced structurally here.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, asdict

import numpy as np

from . import tensorcore as tc
from .errors import ConfigurationError, DataError, InputError, NumericError
from .playlog import PlayLog
from .segment import (SegmentedDataset, SmoothingConfig, sample_window,
                      segment_episode)


class MethodVariant(enum.Enum):
    PLATO = "PLATO"
    PLATO_PRE = "PLATO-PRE"
    PLATO_R = "PLATO-R"
    LMP = "LMP"
    GCBC = "GCBC"

    @property
    def uses_latent(self) -> bool:
        return self is not MethodVariant.GCBC

    @property
    def interaction_based(self) -> bool:
        return self in (MethodVariant.PLATO, MethodVariant.PLATO_PRE,
                        MethodVariant.PLATO_R)


@dataclass(frozen=True)
class ModelConfig:
    beta: float = 1e-3            # KL weight
    alpha: float = 1.0            # pre-interaction reconstruction weight
    h_int: int = 20               # interaction window, control steps (2 s)
    h_pre: int = 20
    latent_dim: int = 16
    policy_hidden: int = 64
    posterior_hidden: int = 128
    prior_width: int = 128
    resample_interval: int = 20   # test-time latent refresh period T
    learning_rate: float = 3e-4
    batch_size: int = 64
    train_steps: int = 50000
    storage_float32: bool = True
    soft_boundary: int = -1       # -1 means h_int // 2
    log_every: int = 1

    def validate(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ConfigurationError("alpha and beta must be >= 0")
        if self.resample_interval > self.h_int:
            raise ConfigurationError(
                f"resample_interval {self.resample_interval} must be <= "
                f"h_int {self.h_int}")
        if self.h_int < 1 or self.h_pre < 1 or self.latent_dim < 1:
            raise ConfigurationError("window lengths and latent dim must be >= 1")
        if self.batch_size < 1 or self.train_steps < 0:
            raise ConfigurationError("batch_size >= 1 and train_steps >= 0")

    @property
    def soft(self) -> int:
        return self.h_int // 2 if self.soft_boundary < 0 else self.soft_boundary

    @property
    def dtype(self):
        return np.float32 if self.storage_float32 else np.float64


@dataclass
class Normalization:
    """Per-field affine normalization fitted on the training set."""

    state_mean: np.ndarray
    state_std: np.ndarray
    action_mean: np.ndarray
    action_std: np.ndarray

    @classmethod
    def fit(cls, states: np.ndarray, actions: np.ndarray) -> "Normalization":
        return cls(
            state_mean=states.mean(axis=0).astype(np.float64),
            state_std=np.maximum(states.std(axis=0), 1e-3).astype(np.float64),
            action_mean=actions.mean(axis=0).astype(np.float64),
            action_std=np.maximum(actions.std(axis=0), 1e-3).astype(np.float64),
        )

    @classmethod
    def identity(cls, state_dim: int, action_dim: int) -> "Normalization":
        return cls(np.zeros(state_dim), np.ones(state_dim),
                   np.zeros(action_dim), np.ones(action_dim))

    def to_json(self) -> dict:
        return {k: v.tolist() for k, v in asdict(self).items()}

    @classmethod
    def from_json(cls, d: dict) -> "Normalization":
        return cls(**{k: np.asarray(v, dtype=np.float64) for k, v in d.items()})


@dataclass
class ModelBundle:
    variant: MethodVariant
    config: ModelConfig
    robot_dim: int
    object_dim: int
    action_dim: int
    params: tc.ParamSet
    norm: Normalization

    @property
    def state_dim(self) -> int:
        return self.robot_dim + self.object_dim

    @property
    def policy_input_dim(self) -> int:
        base = self.state_dim + self.object_dim
        return base + (self.config.latent_dim if self.variant.uses_latent else 0)

    def prior_input_dim(self) -> int:
        if self.variant in (MethodVariant.PLATO, MethodVariant.PLATO_PRE):
            return 2 * self.object_dim
        if self.variant is MethodVariant.PLATO_R:
            return 2 * self.object_dim + self.robot_dim
        if self.variant is MethodVariant.LMP:
            return self.state_dim + self.object_dim
        raise InputError(f"{self.variant} has no prior network")


def build_bundle(variant: MethodVariant, config: ModelConfig, robot_dim: int,
                 object_dim: int, action_dim: int, seed: int,
                 norm: Normalization | None = None) -> ModelBundle:
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=seed, spawn_key=(0x5EED,)))
    params = tc.ParamSet(dtype=config.dtype)
    bundle = ModelBundle(variant=variant, config=config, robot_dim=robot_dim,
                         object_dim=object_dim, action_dim=action_dim,
                         params=params,
                         norm=norm or Normalization.identity(
                             robot_dim + object_dim, action_dim))
    if variant.uses_latent:
        tc.stage_gru(params, "post.fwd", bundle.state_dim,
                     config.posterior_hidden, rng)
        tc.stage_gru(params, "post.bwd", bundle.state_dim,
                     config.posterior_hidden, rng)
        tc.stage_linear(params, "post.mu", 2 * config.posterior_hidden,
                        config.latent_dim, rng)
        tc.stage_linear(params, "post.ls", 2 * config.posterior_hidden,
                        config.latent_dim, rng, bias_init=-1.0)
        tc.stage_mlp(params, "prior.mlp",
                     [bundle.prior_input_dim(), config.prior_width,
                      config.prior_width], rng)
        tc.stage_linear(params, "prior.mu", config.prior_width,
                        config.latent_dim, rng)
        tc.stage_linear(params, "prior.ls", config.prior_width,
                        config.latent_dim, rng, bias_init=-1.0)
    tc.stage_gru(params, "pi.gru", bundle.policy_input_dim,
                 config.policy_hidden, rng)
    tc.stage_linear(params, "pi.head", config.policy_hidden, action_dim, rng)
    params.finalize()
    return bundle


# -- dataset arrays --------------------------------------------------------


@dataclass
class ArrayDataset:
    """Play log flattened to normalized float arrays for fast gathering."""

    states: np.ndarray        # (N, state_dim), normalized
    actions: np.ndarray       # (N, action_dim), normalized
    offsets: np.ndarray       # (n_episodes,) start row of each episode
    lengths: np.ndarray       # (n_episodes,)
    norm: Normalization
    window_cum: np.ndarray | None = None  # per horizon cache

    @classmethod
    def from_log(cls, log: PlayLog, dtype) -> "ArrayDataset":
        if log.n_episodes == 0:
            raise DataError("empty play log")
        states_raw = np.concatenate(
            [np.concatenate([ep.robot, ep.objects], axis=1)
             for ep in log.episodes], axis=0).astype(np.float64)
        actions_raw = np.concatenate([ep.actions for ep in log.episodes],
                                     axis=0).astype(np.float64)
        norm = Normalization.fit(states_raw, actions_raw)
        states = ((states_raw - norm.state_mean) / norm.state_std).astype(dtype)
        actions = ((actions_raw - norm.action_mean) / norm.action_std).astype(dtype)
        lengths = np.asarray(log.episode_lengths, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(lengths)[:-1]])
        return cls(states=states, actions=actions, offsets=offsets,
                   lengths=lengths, norm=norm)

    def window_table(self, horizon: int) -> np.ndarray:
        """Cumulative count of fixed-length windows per episode."""
        counts = np.maximum(self.lengths - horizon + 1, 0)
        return np.cumsum(counts)


# -- batches ----------------------------------------------------------------


@dataclass
class PlatoBatch:
    s_pre: np.ndarray   # (B, H_pre, state_dim)
    a_pre: np.ndarray
    s_int: np.ndarray   # (B, H_int, state_dim)
    a_int: np.ndarray
    o_g: np.ndarray     # (B, object_dim) goal object states
    o_1: np.ndarray     # (B, object_dim) object state at interaction start
    r_1: np.ndarray     # (B, robot_dim) robot state at interaction start
    goal_rows: np.ndarray  # absolute dataset rows of the sampled goals
    int_rows: np.ndarray   # absolute rows of interaction window starts
    padded: np.ndarray  # (B,) left-padding amounts of the pre windows


def plato_batch(data: ArrayDataset, seg: SegmentedDataset,
                rng: np.random.Generator, cfg: ModelConfig,
                robot_dim: int, batch_size: int | None = None) -> PlatoBatch:
    """Resolve sampled interaction windows into dense training arrays."""
    b = batch_size or cfg.batch_size
    h_i, h_p, soft = cfg.h_int, cfg.h_pre, cfg.soft
    int_rows = np.empty(b, dtype=np.int64)
    pre_rows = np.empty(b, dtype=np.int64)
    goal_rows = np.empty(b, dtype=np.int64)
    padded = np.empty(b, dtype=np.int64)
    for i in range(b):
        w = sample_window(seg, rng, h_i, h_p, soft)
        off = data.offsets[w.episode]
        int_rows[i] = off + w.int_start
        pre_rows[i] = off + w.pre_start
        goal_rows[i] = off + w.goal_index
        padded[i] = w.pre_padding
    idx_int = int_rows[:, None] + np.arange(h_i)[None, :]
    # Left padding repeats the first real state of a short pre phase.
    idx_pre = pre_rows[:, None] + np.maximum(
        np.arange(h_p)[None, :] - padded[:, None], 0)
    s_int = data.states[idx_int]
    a_int = data.actions[idx_int]
    s_pre = data.states[idx_pre]
    a_pre = data.actions[idx_pre]
    o_g = data.states[goal_rows, robot_dim:]
    o_1 = s_int[:, 0, robot_dim:]
    r_1 = s_int[:, 0, :robot_dim]
    return PlatoBatch(s_pre=s_pre, a_pre=a_pre, s_int=s_int, a_int=a_int,
                      o_g=o_g, o_1=o_1, r_1=r_1, goal_rows=goal_rows,
                      int_rows=int_rows, padded=padded)


@dataclass
class WindowBatch:
    s: np.ndarray       # (B, H, state_dim)
    a: np.ndarray       # (B, H, action_dim)
    o_h: np.ndarray     # (B, object_dim) hindsight goal: last object state


def window_batch(data: ArrayDataset, rng: np.random.Generator,
                 cfg: ModelConfig, robot_dim: int,
                 batch_size: int | None = None) -> WindowBatch:
    """Uniformly sampled contiguous fixed-horizon windows with hindsight goals."""
    b = batch_size or cfg.batch_size
    h = cfg.h_int
    cum = data.window_table(h)
    total = int(cum[-1])
    if total <= 0:
        raise DataError(f"no episode admits a window of length {h}")
    flat = rng.integers(0, total, size=b)
    ep = np.searchsorted(cum, flat, side="right")
    prev = np.concatenate([[0], cum[:-1]])
    start = data.offsets[ep] + (flat - prev[ep])
    idx = start[:, None] + np.arange(h)[None, :]
    s = data.states[idx]
    a = data.actions[idx]
    o_h = s[:, -1, robot_dim:]
    return WindowBatch(s=s, a=a, o_h=o_h)


# -- forward passes ---------------------------------------------------------


def _posterior(bundle: ModelBundle, seq: np.ndarray) -> tc.DiagGaussian:
    p = bundle.params
    code = tc.bigru_encode(tc.gru_view(p, "post.fwd"),
                           tc.gru_view(p, "post.bwd"),
                           seq, bundle.config.dtype)
    mu = tc.linear(tc.linear_view(p, "post.mu"), code)
    ls = tc.linear(tc.linear_view(p, "post.ls"), code)
    return tc.DiagGaussian(mu, ls)


def _prior(bundle: ModelBundle, inputs: np.ndarray) -> tc.DiagGaussian:
    p = bundle.params
    hidden = tc.mlp_forward(tc.mlp_view(p, "prior.mlp", 2),
                            tc.Tensor(inputs.astype(bundle.config.dtype,
                                                    copy=False)))
    mu = tc.linear(tc.linear_view(p, "prior.mu"), hidden)
    ls = tc.linear(tc.linear_view(p, "prior.ls"), hidden)
    return tc.DiagGaussian(mu, ls)


def prior_inputs(bundle: ModelBundle, o_start: np.ndarray, o_goal: np.ndarray,
                 r_start: np.ndarray | None = None,
                 s_start: np.ndarray | None = None) -> np.ndarray:
    """Assemble the variant-specific prior input block.

    The object-centric variants see object states only; the R ablation appends
    the robot state; LMP sees the full current state plus the goal.
    """
    v = bundle.variant
    if v in (MethodVariant.PLATO, MethodVariant.PLATO_PRE):
        return np.concatenate([o_start, o_goal], axis=-1)
    if v is MethodVariant.PLATO_R:
        if r_start is None:
            raise InputError("PLATO-R prior needs the robot state")
        return np.concatenate([o_start, o_goal, r_start], axis=-1)
    if v is MethodVariant.LMP:
        if s_start is None:
            raise InputError("LMP prior needs the full start state")
        return np.concatenate([s_start, o_goal], axis=-1)
    raise InputError(f"{v} has no prior network")


def _policy_actions(bundle: ModelBundle, s_seq: np.ndarray,
                    o_g: np.ndarray, z: tc.Tensor | None) -> tc.Tensor:
    """Roll the policy GRU over a window; returns (T*B, action_dim) predictions
    in time-major order. The goal (and latent, when present) enter every step
    through their own blocks of the input projection."""
    p = bundle.params
    gru = tc.gru_view(p, "pi.gru")
    dtype = bundle.config.dtype
    bsz, t, sd = s_seq.shape
    od = bundle.object_dim
    w_s = tc.narrow(gru.w_x, 0, 0, sd)
    w_g = tc.narrow(gru.w_x, 0, sd, od)
    flat = np.ascontiguousarray(np.swapaxes(s_seq, 0, 1)).reshape(t * bsz, sd)
    sw = tc.matmul(tc.Tensor(flat.astype(dtype, copy=False)), w_s)
    extra = tc.matmul(tc.Tensor(o_g.astype(dtype, copy=False)), w_g)
    if z is not None:
        w_z = tc.narrow(gru.w_x, 0, sd + od, bundle.config.latent_dim)
        extra = tc.add(extra, tc.matmul(z, w_z))
    extra = tc.add(extra, gru.b)
    h = tc.zeros_hidden(bsz, gru.hidden, dtype)
    hs = []
    for i in range(t):
        xw = tc.add(tc.narrow(sw, 0, i * bsz, bsz), extra)
        h = tc.gru_step_from_preact(gru, xw, h)
        hs.append(h)
    stacked = tc.concat(hs, axis=0)
    return tc.linear(tc.linear_view(p, "pi.head"), stacked)


def _mae(pred: tc.Tensor, target: np.ndarray, dtype) -> tc.Tensor:
    """Mean absolute error against a (B, T, A) target, time-major flattened."""
    t_major = np.ascontiguousarray(np.swapaxes(target, 0, 1))
    flat = t_major.reshape(-1, target.shape[-1]).astype(dtype, copy=False)
    return tc.abs_mean(tc.sub(pred, tc.Tensor(flat)))


@dataclass
class LossParts:
    total: tc.Tensor          # graph node for backward
    total_value: float        # exact float64 weighted sum of the components
    l_int: float
    l_pre: float
    kl: float


def plato_loss(batch: PlatoBatch, bundle: ModelBundle,
               rng: np.random.Generator) -> LossParts:
    """Interaction + pre-interaction reconstruction with a KL-regularized
    latent drawn from the interaction posterior."""
    if not bundle.variant.interaction_based:
        raise InputError(f"plato_loss does not apply to {bundle.variant}")
    cfg = bundle.config
    if bundle.variant is MethodVariant.PLATO_PRE:
        post_seq = np.concatenate([batch.s_pre, batch.s_int], axis=1)
    else:
        post_seq = batch.s_int
    post = _posterior(bundle, post_seq)
    prior = _prior(bundle, prior_inputs(bundle, batch.o_1, batch.o_g,
                                        r_start=batch.r_1))
    noise = rng.standard_normal(post.mu.shape)
    z = tc.reparam_sample(post, noise)
    pred_int = _policy_actions(bundle, batch.s_int, batch.o_g, z)
    l_int = _mae(pred_int, batch.a_int, cfg.dtype)
    pred_pre = _policy_actions(bundle, batch.s_pre, batch.o_g, z)
    l_pre = _mae(pred_pre, batch.a_pre, cfg.dtype)
    kl = tc.mean(tc.kl_diag(post, prior))
    total = tc.add(l_int, tc.add(tc.scale(l_pre, cfg.alpha),
                                 tc.scale(kl, cfg.beta)))
    li, lp, lk = l_int.item(), l_pre.item(), kl.item()
    return LossParts(total=total,
                     total_value=li + cfg.alpha * lp + cfg.beta * lk,
                     l_int=li, l_pre=lp, kl=lk)


def lmp_loss(batch: WindowBatch, bundle: ModelBundle,
             rng: np.random.Generator) -> LossParts:
    """Fixed-window ELBO: reconstruction plus KL against the (s_1, o_H) prior."""
    if bundle.variant is not MethodVariant.LMP:
        raise InputError(f"lmp_loss requires the LMP variant, got {bundle.variant}")
    cfg = bundle.config
    post = _posterior(bundle, batch.s)
    prior = _prior(bundle, prior_inputs(bundle, None, batch.o_h,
                                        s_start=batch.s[:, 0]))
    noise = rng.standard_normal(post.mu.shape)
    z = tc.reparam_sample(post, noise)
    pred = _policy_actions(bundle, batch.s, batch.o_h, z)
    recon = _mae(pred, batch.a, cfg.dtype)
    kl = tc.mean(tc.kl_diag(post, prior))
    total = tc.add(recon, tc.scale(kl, cfg.beta))
    li, lk = recon.item(), kl.item()
    return LossParts(total=total, total_value=li + cfg.beta * lk,
                     l_int=li, l_pre=0.0, kl=lk)


def gcbc_loss(batch: WindowBatch, bundle: ModelBundle) -> LossParts:
    """Plain goal-conditioned behavior cloning on fixed windows; no latent."""
    if bundle.variant is not MethodVariant.GCBC:
        raise InputError(f"gcbc_loss requires the GCBC variant, "
                         f"got {bundle.variant}")
    pred = _policy_actions(bundle, batch.s, batch.o_h, None)
    recon = _mae(pred, batch.a, bundle.config.dtype)
    return LossParts(total=recon, total_value=recon.item(),
                     l_int=recon.item(), l_pre=0.0, kl=0.0)


def compute_loss(bundle: ModelBundle, data: ArrayDataset,
                 seg: SegmentedDataset | None, rng: np.random.Generator
                 ) -> LossParts:
    if bundle.variant.interaction_based:
        batch = plato_batch(data, seg, rng, bundle.config, bundle.robot_dim)
        return plato_loss(batch, bundle, rng)
    batch = window_batch(data, rng, bundle.config, bundle.robot_dim)
    if bundle.variant is MethodVariant.LMP:
        return lmp_loss(batch, bundle, rng)
    return gcbc_loss(batch, bundle)


# -- training ---------------------------------------------------------------


@dataclass
class MetricsRow:
    step: int
    total: float
    l_int: float
    l_pre: float
    kl: float

    def csv(self) -> str:
        return (f"{self.step},{self.total:.10g},{self.l_int:.10g},"
                f"{self.l_pre:.10g},{self.kl:.10g}")


def train(log: PlayLog, model_cfg: ModelConfig, smoothing_cfg: SmoothingConfig,
          variant: MethodVariant, seed: int,
          contacts_override: list[np.ndarray] | None = None,
          progress=None) -> tuple[ModelBundle, list[MetricsRow]]:
    """Fit one variant on a play log; deterministic for a fixed seed.

    `contacts_override` substitutes the per-episode contact signals (used by
    the false-contact ablation) without touching states or actions.
    """
    model_cfg.validate()
    try:
        from threadpoolctl import threadpool_limits
        limiter = threadpool_limits(limits=1)  # small matmuls: threads hurt
    except ImportError:  # pragma: no cover
        limiter = None
    try:
        robot_dim = log.robot_dim
        data = ArrayDataset.from_log(log, model_cfg.dtype)
        seg = None
        if variant.interaction_based:
            signals = contacts_override if contacts_override is not None \
                else [ep.contact for ep in log.episodes]
            seg = SegmentedDataset([segment_episode(c, smoothing_cfg)
                                    for c in signals])
            if seg.n_interactions == 0:
                raise DataError(f"{variant.value} needs at least one "
                                "interaction in the dataset")
        bundle = build_bundle(variant, model_cfg, robot_dim, log.object_dim,
                              log.action_dim, seed)
        bundle.norm = data.norm
        rng = np.random.default_rng(np.random.SeedSequence(
            entropy=seed, spawn_key=(0x7A11,)))
        adam = tc.adam_init(bundle.params, lr=model_cfg.learning_rate)
        rows: list[MetricsRow] = []
        for step_i in range(model_cfg.train_steps):
            bundle.params.zero_grad()
            parts = compute_loss(bundle, data, seg, rng)
            if not math.isfinite(parts.total_value):
                raise NumericError(
                    f"non-finite loss at step {step_i}: total={parts.total_value} "
                    f"l_int={parts.l_int} l_pre={parts.l_pre} kl={parts.kl}")
            parts.total.backward()
            tc.adam_step(bundle.params, adam)
            if step_i % model_cfg.log_every == 0:
                rows.append(MetricsRow(step_i, parts.total_value, parts.l_int,
                                       parts.l_pre, parts.kl))
                if progress is not None:
                    progress(step_i, rows[-1])
        return bundle, rows
    finally:
        if limiter is not None:
            limiter.unregister()


def save_bundle(path, bundle: ModelBundle, config_hash: str = "",
                extra: dict | None = None) -> None:
    header = {
        "variant": bundle.variant.value,
        "model_config": asdict(bundle.config),
        "robot_dim": bundle.robot_dim,
        "object_dim": bundle.object_dim,
        "action_dim": bundle.action_dim,
        "normalization": bundle.norm.to_json(),
        "config_hash": config_hash,
    }
    header.update(extra or {})
    tc.save_checkpoint(path, bundle.params, header)


def load_bundle(path) -> tuple[ModelBundle, dict]:
    header, params = tc.load_checkpoint(path)
    cfg = ModelConfig(**header["model_config"])
    bundle = ModelBundle(variant=MethodVariant(header["variant"]),
                         config=cfg,
                         robot_dim=header["robot_dim"],
                         object_dim=header["object_dim"],
                         action_dim=header["action_dim"],
                         params=params,
                         norm=Normalization.from_json(header["normalization"]))
    return bundle, header


# -- test-time action selection ---------------------------------------------


@dataclass
class PolicyCache:
    """Mutable rollout state for act(): held latent, policy hidden, rng."""

    rng: np.random.Generator
    z: np.ndarray | None = None
    h: np.ndarray | None = None
    steps_since_resample: int = 0
    fresh: bool = True


def new_cache(seed: int) -> PolicyCache:
    return PolicyCache(rng=np.random.default_rng(seed))


def act(bundle: ModelBundle, obs: np.ndarray, o_g: np.ndarray,
        cache: PolicyCache) -> np.ndarray:
    """One policy step: returns the raw action vector [target_x, target_y,
    grab_logit]. Every resample_interval steps the latent is redrawn from the
    prior (variant-appropriate inputs) and the policy hidden state resets."""
    cfg = bundle.config
    dtype = cfg.dtype
    norm = bundle.norm
    s = ((np.asarray(obs, dtype=np.float64) - norm.state_mean)
         / norm.state_std)
    og = ((np.asarray(o_g, dtype=np.float64)
           - norm.state_mean[bundle.robot_dim:])
          / norm.state_std[bundle.robot_dim:])
    s = s.astype(dtype)[None, :]
    og = og.astype(dtype)[None, :]

    need_z = bundle.variant.uses_latent and (
        cache.fresh or cache.steps_since_resample >= cfg.resample_interval)
    if cache.fresh or need_z:
        cache.h = np.zeros((1, cfg.policy_hidden), dtype=dtype)
        cache.steps_since_resample = 0
        cache.fresh = False
        if bundle.variant.uses_latent:
            o_t = s[:, bundle.robot_dim:]
            r_t = s[:, :bundle.robot_dim]
            inputs = prior_inputs(bundle, o_t, og, r_start=r_t, s_start=s)
            prior = _prior(bundle, inputs)
            noise = cache.rng.standard_normal(prior.mu.shape)
            cache.z = tc.reparam_sample(prior, noise).data

    gru = tc.gru_view(bundle.params, "pi.gru")
    if bundle.variant.uses_latent:
        x = np.concatenate([s, og, cache.z.astype(dtype)], axis=1)
    else:
        x = np.concatenate([s, og], axis=1)
    h = tc.gru_cell(gru, tc.Tensor(x), tc.Tensor(cache.h))
    cache.h = h.data
    cache.steps_since_resample += 1
    out = tc.linear(tc.linear_view(bundle.params, "pi.head"), h).data[0]
    return out.astype(np.float64) * norm.action_std + norm.action_mean

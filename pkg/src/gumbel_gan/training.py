"""Adversarial and maximum-likelihood training loops, losses and Adam."""

import csv
import dataclasses
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .grammar import decode, recognize, smooth_inputs
from .network import (
    LstmParams,
    discriminate,
    discriminate_backward,
    draw_generator_noise,
    generate,
    generate_backward,
    mle_forward,
    sample_mle,
    save_checkpoint,
)
from .random import DEFAULT_SEED, AnnealSchedule, make_streams, tau_at

log = logging.getLogger(__name__)

PROB_CLAMP = 1e-7
LOSS_COLUMNS = ("iteration", "d_loss", "g_loss", "tau", "validity_rate", "wall_ms")
MLE_COLUMNS = ("iteration", "nll", "wall_ms")
ANNEAL_TARGETS = ("generator+inputs", "inputs-only")
NOISE_TARGETS = ("both", "hidden-only")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class GanConfig:
    learning_rate: float = 0.001
    batch_size: int = 200
    total_iters: int = 20_000
    schedule: AnnealSchedule = field(default_factory=AnnealSchedule)
    input_target_prob: float = 0.9
    gen_sample_size: Optional[int] = None  # None means batch_size
    anneal_target: str = "generator+inputs"
    noise_target: str = "both"
    hidden_size: int = 32
    seed: int = DEFAULT_SEED
    learned_start: bool = False
    eval_every: int = 500
    eval_samples: int = 200
    log_wall_time: bool = False

    def __post_init__(self):
        if isinstance(self.schedule, dict):
            self.schedule = AnnealSchedule(**self.schedule)
        if self.schedule.total_iters != self.total_iters:
            self.schedule = dataclasses.replace(self.schedule, total_iters=self.total_iters)
        counts = [self.batch_size, self.total_iters, self.hidden_size, self.eval_every, self.eval_samples]
        if self.gen_sample_size is not None:
            counts.append(self.gen_sample_size)
        if any(int(c) < 1 for c in counts):
            raise ValueError("all counts must be positive")
        if not 0 < self.input_target_prob < 1:
            raise ValueError("input_target_prob must be in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.anneal_target not in ANNEAL_TARGETS:
            raise ValueError(f"anneal_target must be one of {ANNEAL_TARGETS}")
        if self.noise_target not in NOISE_TARGETS:
            raise ValueError(f"noise_target must be one of {NOISE_TARGETS}")

    @property
    def fake_batch_size(self) -> int:
        return self.gen_sample_size or self.batch_size

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "GanConfig":
        return cls(**obj)


# --- losses -----------------------------------------------------------------

def _clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def d_loss(d_real: np.ndarray, d_fake: np.ndarray):
    """Discriminator loss and its gradients w.r.t. both probability inputs."""
    pr, pf = _clamp(d_real), _clamp(d_fake)
    m, k = d_real.shape[0], d_fake.shape[0]
    loss = -np.log(pr).sum() / m - np.log(1.0 - pf).sum() / k
    in_r = ((d_real > PROB_CLAMP) & (d_real < 1.0 - PROB_CLAMP)).astype(np.float64)
    in_f = ((d_fake > PROB_CLAMP) & (d_fake < 1.0 - PROB_CLAMP)).astype(np.float64)
    return float(loss), -in_r / (m * pr), in_f / (k * (1.0 - pf))


def g_loss(d_fake: np.ndarray):
    """Generator loss -mean(log(D / (1 - D))) and its gradient w.r.t. D."""
    pf = _clamp(d_fake)
    k = d_fake.shape[0]
    loss = -np.log(pf / (1.0 - pf)).sum() / k
    inside = ((d_fake > PROB_CLAMP) & (d_fake < 1.0 - PROB_CLAMP)).astype(np.float64)
    return float(loss), -inside / (k * pf * (1.0 - pf))


# --- Adam -------------------------------------------------------------------

@dataclass
class AdamState:
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_update(params, grads: Dict[str, np.ndarray], state: AdamState, lr: float):
    """One bias-corrected Adam step, in place. ``params`` is LstmParams or a dict."""
    tensors = params.tensors if isinstance(params, LstmParams) else params
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for name, g in grads.items():
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        tensors[name] -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params


# --- evaluation -------------------------------------------------------------

def discretize(params: LstmParams, mode: str, n: int, rng: np.random.Generator, tau: float = 1.0) -> List[str]:
    """Draw ``n`` sequences: per-step argmax of generator samples, or MLE sampling."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode == "gan":
        z_c, z_h = draw_generator_noise(params, n, rng)
        return decode(generate(params, z_c, z_h, tau, rng).discrete)
    if mode == "mle":
        return decode(sample_mle(params, n, rng))
    raise ValueError(f"mode must be 'gan' or 'mle', got {mode!r}")


def evaluate_validity(params: LstmParams, mode: str, n: int, rng: np.random.Generator, tau: float = 1.0) -> float:
    lines = discretize(params, mode, n, rng, tau)
    return sum(recognize(s) for s in lines) / len(lines)


# --- GAN --------------------------------------------------------------------

@dataclass
class TrainLogRecord:
    iteration: int
    d_loss: float
    g_loss: float
    tau: float
    wall_ms: float
    validity_rate: Optional[float] = None

    def row(self, with_time: bool) -> list:
        return [
            self.iteration,
            repr(self.d_loss),
            repr(self.g_loss),
            repr(self.tau),
            "" if self.validity_rate is None else repr(self.validity_rate),
            f"{self.wall_ms:.3f}" if with_time else "",
        ]


class GanTrainer:
    """Holds both players and their optimizers; one ``step`` is one loop iteration.

    The discriminator is updated first, then the generator on a fresh fake
    batch pushed through the updated discriminator.
    """

    def __init__(self, config: GanConfig, data: np.ndarray):
        if len(data) == 0:
            raise ValueError("dataset is empty")
        self.config = config
        self.data = data
        self.streams = make_streams(config.seed)
        H, d = config.hidden_size, data.shape[-1]
        init = self.streams["init"]
        self.gen = LstmParams.init(H, d, d, init,
                                   learned_c0=config.noise_target == "hidden-only",
                                   learned_start=config.learned_start)
        self.disc = LstmParams.init(H, d, 1, init)
        self.gen_opt = AdamState()
        self.disc_opt = AdamState()

    def taus(self, iteration: int):
        """(generator tau, input tau) at an iteration."""
        tau = tau_at(self.config.schedule, iteration)
        gen_tau = tau if self.config.anneal_target == "generator+inputs" else 1.0
        return gen_tau, tau

    def real_batch(self, tau_input: float) -> np.ndarray:
        idx = self.streams["batch"].integers(0, len(self.data), self.config.batch_size)
        return smooth_inputs(self.data[idx], self.config.input_target_prob, tau_input, self.streams["gumbel"])

    def fake_batch(self, tau: float):
        z_c, z_h = draw_generator_noise(self.gen, self.config.fake_batch_size, self.streams["noise"])
        return generate(self.gen, z_c, z_h, tau, self.streams["gumbel"])

    def discriminator_step(self, iteration: int) -> float:
        gen_tau, in_tau = self.taus(iteration)
        real = discriminate(self.disc, self.real_batch(in_tau))
        fake = discriminate(self.disc, self.fake_batch(gen_tau).soft)
        loss, _, _ = d_loss(real.prob, fake.prob)
        m, k = real.prob.shape[0], fake.prob.shape[0]
        # exact logit-space derivatives of the unclamped loss
        grads_r, _ = discriminate_backward(self.disc, real, -(1.0 - real.prob) / m)
        grads_f, _ = discriminate_backward(self.disc, fake, fake.prob / k)
        grads = {n: grads_r[n] + grads_f[n] for n in grads_r}
        self._update(self.disc, grads, self.disc_opt, "discriminator")
        return loss

    def generator_step(self, iteration: int) -> float:
        gen_tau, _ = self.taus(iteration)
        sample = self.fake_batch(gen_tau)
        out = discriminate(self.disc, sample.soft)
        loss, _ = g_loss(out.prob)
        k = out.prob.shape[0]
        # d/dlogit of -mean(log D/(1-D)) is -1/k
        _, d_seq = discriminate_backward(self.disc, out, np.full_like(out.logit, -1.0 / k))
        grads = generate_backward(self.gen, sample, d_seq)
        self._update(self.gen, grads, self.gen_opt, "generator")
        return loss

    def _update(self, params, grads, opt, who):
        try:
            adam_update(params, grads, opt, self.config.learning_rate)
        except FloatingPointError as e:
            raise TrainingDiverged(f"{who} update: {e}") from None

    def current_losses(self, iteration: int):
        """(d_loss, g_loss) on fresh batches without updating anything."""
        gen_tau, in_tau = self.taus(iteration)
        real = discriminate(self.disc, self.real_batch(in_tau))
        fake = discriminate(self.disc, self.fake_batch(gen_tau).soft)
        return d_loss(real.prob, fake.prob)[0], g_loss(fake.prob)[0]

    def step(self, iteration: int) -> TrainLogRecord:
        t0 = time.perf_counter()
        try:
            dl = self.discriminator_step(iteration)
            gl = self.generator_step(iteration)
        except FloatingPointError as e:
            raise TrainingDiverged(f"iteration {iteration}: {e}") from None
        if not (np.isfinite(dl) and np.isfinite(gl)):
            raise TrainingDiverged(f"non-finite loss at iteration {iteration}: d={dl}, g={gl}")
        return TrainLogRecord(iteration, dl, gl, tau_at(self.config.schedule, iteration),
                              (time.perf_counter() - t0) * 1000.0)

    def validity(self, iteration: int, n: Optional[int] = None) -> float:
        gen_tau, _ = self.taus(iteration)
        return evaluate_validity(self.gen, "gan", n or self.config.eval_samples, self.streams["eval"], gen_tau)

    def checkpoint(self, path, iteration: int) -> None:
        save_checkpoint(path, {"generator": self.gen, "discriminator": self.disc},
                        mode="gan", iteration=iteration, tau=self.taus(iteration)[0],
                        seed=self.config.seed, config=self.config.to_dict())


def train_gan(config: GanConfig, data: np.ndarray, out_dir) -> GanTrainer:
    """Run the adversarial loop, writing ``losses.csv`` and ``ckpt_<iter>.json`` to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trainer = GanTrainer(config, data)
    last_ckpt = None
    with open(out / "losses.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOSS_COLUMNS)
        for it in range(1, config.total_iters + 1):
            try:
                rec = trainer.step(it)
            except TrainingDiverged as e:
                raise TrainingDiverged(f"{e}; last good checkpoint: {last_ckpt}") from None
            if it % config.eval_every == 0 or it == config.total_iters:
                rec.validity_rate = trainer.validity(it)
                last_ckpt = out / f"ckpt_{it}.json"
                trainer.checkpoint(last_ckpt, it)
                log.info("iter %d d_loss %.4f g_loss %.4f tau %.3f validity %.3f",
                         it, rec.d_loss, rec.g_loss, rec.tau, rec.validity_rate)
            writer.writerow(rec.row(config.log_wall_time))
            fh.flush()
    return trainer


# --- MLE --------------------------------------------------------------------

@dataclass
class MleResult:
    params: LstmParams
    heldout_nll: float
    nll_log: List[float]


def split_holdout(data: np.ndarray, rng: np.random.Generator, frac: float = 0.1):
    perm = rng.permutation(len(data))
    n_hold = max(1, int(round(frac * len(data))))
    return data[perm[n_hold:]], data[perm[:n_hold]]


def train_mle(config: GanConfig, data: np.ndarray, out_dir=None) -> MleResult:
    """Teacher-forced Adam training on a 90/10 split; reports held-out NLL."""
    if len(data) < 2:
        raise ValueError("need at least two sequences for a held-out split")
    streams = make_streams(config.seed)
    train, held = split_holdout(data, streams["data"])
    params = LstmParams.init(config.hidden_size, data.shape[-1], data.shape[-1], streams["init"])
    opt = AdamState()
    batch_rng = streams["batch"]
    order = batch_rng.permutation(len(train))
    pos = 0
    nll_log = []
    writer = fh = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fh = open(out / "nll.csv", "w", newline="")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MLE_COLUMNS)
    try:
        for it in range(1, config.total_iters + 1):
            t0 = time.perf_counter()
            if pos + config.batch_size > len(train):
                order = batch_rng.permutation(len(train))
                pos = 0
            idx = order[pos:pos + config.batch_size]
            pos += config.batch_size
            try:
                nll, grads = mle_forward(params, train[idx])
                if not np.isfinite(nll):
                    raise FloatingPointError(f"non-finite NLL {nll}")
                adam_update(params, grads, opt, config.learning_rate)
            except FloatingPointError as e:
                raise TrainingDiverged(f"iteration {it}: {e}") from None
            nll_log.append(nll)
            if writer is not None:
                wall = f"{(time.perf_counter() - t0) * 1000.0:.3f}" if config.log_wall_time else ""
                writer.writerow([it, repr(nll), wall])
            if it % config.eval_every == 0:
                log.info("iter %d nll %.4f", it, nll)
    finally:
        if fh is not None:
            fh.close()
    heldout, _ = mle_forward(params, held)
    if out_dir is not None:
        save_checkpoint(Path(out_dir) / f"ckpt_{config.total_iters}.json", {"mle": params},
                        mode="mle", iteration=config.total_iters, heldout_nll=heldout,
                        seed=config.seed, config=config.to_dict())
    log.info("held-out NLL %.4f", heldout)
    return MleResult(params, heldout, nll_log)

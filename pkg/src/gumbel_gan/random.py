"""Seeded noise, Gumbel sampling and the temperature schedule."""

from dataclasses import dataclass
from typing import Dict, Optional, Tuple, Union

import numpy as np

from .numeric import softmax_backward, softmax_rows

DEFAULT_SEED = 20161109

# fixed offsets from the master seed, one stream per concern
STREAM_OFFSETS = {
    "data": 0,
    "init": 1,
    "noise": 2,
    "gumbel": 3,
    "batch": 4,
    "eval": 5,
}

Shape = Union[int, Tuple[int, ...]]

_U53 = float(2 ** 53)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def make_streams(master_seed: int) -> Dict[str, np.random.Generator]:
    return {name: make_rng(master_seed + off) for name, off in STREAM_OFFSETS.items()}


def uniform_noise(rng: np.random.Generator, shape: Shape) -> np.ndarray:
    """I.i.d. draws in the open interval (0, 1).

    Uses the midpoints (n + 0.5) / 2**53 so the endpoints are never produced.
    """
    n = rng.integers(0, 2 ** 53, size=shape, dtype=np.int64)
    return (n + 0.5) / _U53


def gumbel_from_uniform(u: np.ndarray) -> np.ndarray:
    return -np.log(-np.log(u))


def gumbel_noise(rng: np.random.Generator, shape: Shape) -> np.ndarray:
    """Standard Gumbel (location 0, scale 1) noise by inverse CDF."""
    return gumbel_from_uniform(uniform_noise(rng, shape))


def gumbel_max_sample(h: np.ndarray, rng: np.random.Generator):
    """Categorical sample(s) from softmax(h) via argmax(h + g).

    ``h`` of shape (d,) or (1, d) gives a single int; (m, d) gives an int
    array of length m, one independent draw per row. Ties go to the lowest
    index (numpy argmax semantics).
    """
    h = np.asarray(h, dtype=np.float64)
    idx = np.argmax(h + gumbel_noise(rng, h.shape), axis=-1)
    if h.ndim == 1 or h.shape[0] == 1:
        return int(np.ravel(idx)[0])
    return idx


def gumbel_softmax(h: np.ndarray, g: np.ndarray, tau: float) -> np.ndarray:
    """Relaxed sample softmax((h + g) / tau) for given noise ``g``."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    return softmax_rows((h + g) / tau)


def gumbel_softmax_backward(y: np.ndarray, grad: np.ndarray, tau: float) -> np.ndarray:
    """d(loss)/dh with the noise held fixed, given the sample ``y``."""
    return softmax_backward(y, grad) / tau


def gumbel_softmax_sample(
    h: np.ndarray,
    tau: float,
    rng: np.random.Generator,
    noise: Optional[np.ndarray] = None,
) -> np.ndarray:
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    h = np.asarray(h, dtype=np.float64)
    g = gumbel_noise(rng, h.shape) if noise is None else noise
    return gumbel_softmax(h, g, tau)


@dataclass(frozen=True)
class AnnealSchedule:
    tau_start: float = 5.0
    tau_end: float = 1.0
    anneal_iters: int = 10_000
    total_iters: int = 20_000

    def __post_init__(self):
        if not self.tau_start >= self.tau_end > 0:
            raise ValueError(f"need tau_start >= tau_end > 0, got {self.tau_start}, {self.tau_end}")
        if self.anneal_iters < 0 or self.total_iters < 1:
            raise ValueError("iteration counts must be non-negative / positive")


def tau_at(schedule: AnnealSchedule, iteration: int) -> float:
    """Linear from tau_start at iteration 0 to tau_end at anneal_iters, flat after."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    if schedule.anneal_iters == 0 or iteration >= schedule.anneal_iters:
        return float(schedule.tau_end)
    frac = iteration / schedule.anneal_iters
    return float(schedule.tau_start + (schedule.tau_end - schedule.tau_start) * frac)

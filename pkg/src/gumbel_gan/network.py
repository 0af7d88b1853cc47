"""Single-layer LSTM with manual backprop-through-time.

Three models share the same cell:

* generator: noise replaces (C0, h0), every step's Gumbel-softmax output is
  fed back as the next input;
* discriminator: reads a sequence of probability vectors from a zero state and
  emits P(real) from the final hidden state;
* MLE predictor: teacher-forced next-character model.

Row-vector convention throughout: a batch is (batch, features) and a gate
pre-activation is ``x @ W.T + h @ U.T + b``.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .grammar import CHAR_TO_INDEX, SEQ_LEN
from .numeric import (
    ShapeError,
    sigmoid,
    sigmoid_backward,
    softmax_cross_entropy,
    softmax_rows,
    tanh_backward,
)
from .random import gumbel_max_sample, gumbel_noise, gumbel_softmax, gumbel_softmax_backward, uniform_noise

GATES = ("i", "f", "o", "c")
INIT_SCALE = 0.08
FORGET_BIAS = 1.0


@dataclass
class LstmParams:
    """Named parameter arrays of one LSTM plus its output head.

    Gate weights are ``W<g>`` (H x d_in), ``U<g>`` (H x H), ``b<g>`` (H,)
    for g in i, f, o, c; the head is ``W_out`` (d_out x H) and ``b_out``.
    Optional extras: ``C0`` (learned initial cell, H) and ``x0`` (learned
    first input, d_in).
    """

    hidden: int
    input_size: int
    output_size: int
    tensors: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def zeros(cls, hidden: int, input_size: int, output_size: int,
              learned_c0: bool = False, learned_start: bool = False) -> "LstmParams":
        H, d = hidden, input_size
        t = {}
        for g in GATES:
            t["W" + g] = np.zeros((H, d))
            t["U" + g] = np.zeros((H, H))
            t["b" + g] = np.zeros(H)
        t["W_out"] = np.zeros((output_size, H))
        t["b_out"] = np.zeros(output_size)
        if learned_c0:
            t["C0"] = np.zeros(H)
        if learned_start:
            t["x0"] = np.zeros(d)
        return cls(hidden, input_size, output_size, t)

    @classmethod
    def init(cls, hidden: int, input_size: int, output_size: int, rng: np.random.Generator,
             learned_c0: bool = False, learned_start: bool = False) -> "LstmParams":
        p = cls.zeros(hidden, input_size, output_size, learned_c0, learned_start)
        for name in sorted(p.tensors):
            if name.startswith(("W", "U")):
                p.tensors[name] = rng.uniform(-INIT_SCALE, INIT_SCALE, p.tensors[name].shape)
        p.tensors["bf"][:] = FORGET_BIAS
        return p

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self) -> List[str]:
        return sorted(self.tensors)

    def zeros_like(self) -> Dict[str, np.ndarray]:
        return {k: np.zeros_like(v) for k, v in self.tensors.items()}

    def copy(self) -> "LstmParams":
        return LstmParams(self.hidden, self.input_size, self.output_size,
                          {k: v.copy() for k, v in self.tensors.items()})

    def to_dict(self) -> dict:
        return {
            "hidden": self.hidden,
            "input_size": self.input_size,
            "output_size": self.output_size,
            "tensors": {
                k: {"shape": list(v.shape), "values": [float(x) for x in v.reshape(-1)]}
                for k, v in sorted(self.tensors.items())
            },
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "LstmParams":
        tensors = {}
        for k, spec in obj["tensors"].items():
            arr = np.array(spec["values"], dtype=np.float64)
            tensors[k] = arr.reshape(spec["shape"])
        p = cls(int(obj["hidden"]), int(obj["input_size"]), int(obj["output_size"]), tensors)
        p.validate()
        return p

    def validate(self) -> None:
        H, d = self.hidden, self.input_size
        expected = {}
        for g in GATES:
            expected["W" + g] = (H, d)
            expected["U" + g] = (H, H)
            expected["b" + g] = (H,)
        expected["W_out"] = (self.output_size, H)
        expected["b_out"] = (self.output_size,)
        for k, shape in expected.items():
            if k not in self.tensors:
                raise ShapeError(f"missing parameter {k}")
            if self.tensors[k].shape != shape:
                raise ShapeError(f"parameter {k} has shape {self.tensors[k].shape}, expected {shape}")
        for k, shape in (("C0", (H,)), ("x0", (d,))):
            if k in self.tensors and self.tensors[k].shape != shape:
                raise ShapeError(f"parameter {k} has shape {self.tensors[k].shape}, expected {shape}")
        for k, v in self.tensors.items():
            if not np.all(np.isfinite(v)):
                raise FloatingPointError(f"parameter {k} has non-finite entries")


@dataclass
class LstmState:
    c: np.ndarray
    h: np.ndarray


# --- cell -------------------------------------------------------------------

def _stack(params: LstmParams):
    t = params.tensors
    W = np.concatenate([t["W" + g] for g in GATES], axis=0)
    U = np.concatenate([t["U" + g] for g in GATES], axis=0)
    b = np.concatenate([t["b" + g] for g in GATES])
    return W, U, b


def _unstack_into(grads: Dict[str, np.ndarray], dW, dU, db, H: int) -> None:
    for k, g in enumerate(GATES):
        s = slice(k * H, (k + 1) * H)
        grads["W" + g] += dW[s]
        grads["U" + g] += dU[s]
        grads["b" + g] += db[s]


def _cell_forward(W, U, b, H, c, h, x):
    a = x @ W.T + h @ U.T + b
    i = sigmoid(a[:, :H])
    f = sigmoid(a[:, H:2 * H])
    o = sigmoid(a[:, 2 * H:3 * H])
    g = np.tanh(a[:, 3 * H:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    h_new = o * tc
    cache = (x, c, h, i, f, o, g, tc)
    return c_new, h_new, cache


def _cell_backward(W, U, H, cache, dc_new, dh_new, acc):
    """Backprop one cell step. ``acc`` holds stacked (dW, dU, db) accumulators."""
    x, c, h, i, f, o, g, tc = cache
    do = dh_new * tc
    dc = dc_new + tanh_backward(tc, dh_new * o)
    di = dc * g
    df = dc * c
    dg = dc * i
    dc_prev = dc * f
    da = np.concatenate([
        sigmoid_backward(i, di),
        sigmoid_backward(f, df),
        sigmoid_backward(o, do),
        tanh_backward(g, dg),
    ], axis=1)
    dW, dU, db = acc
    dW += da.T @ x
    dU += da.T @ h
    db += da.sum(axis=0)
    return dc_prev, da @ U, da @ W


def _check_input(params: LstmParams, x: np.ndarray) -> None:
    if x.ndim != 2 or x.shape[1] != params.input_size:
        raise ShapeError(f"input of shape {x.shape} does not match input size {params.input_size}")


def lstm_step(params: LstmParams, state: LstmState, x: np.ndarray):
    """One LSTM step. Returns (new state, output logits, cache for backward)."""
    _check_input(params, x)
    if state.c.shape != (x.shape[0], params.hidden) or state.h.shape != state.c.shape:
        raise ShapeError(f"state shapes {state.c.shape}/{state.h.shape} do not match batch "
                         f"{x.shape[0]} and hidden size {params.hidden}")
    W, U, b = _stack(params)
    c, h, cache = _cell_forward(W, U, b, params.hidden, state.c, state.h, x)
    logits = h @ params["W_out"].T + params["b_out"]
    return LstmState(c, h), logits, cache


def lstm_step_backward(params: LstmParams, cache, d_logits, dc_new, dh_new):
    """Gradients of one ``lstm_step``: (param grads, dC_prev, dh_prev, dx)."""
    W, U, _ = _stack(params)
    H = params.hidden
    grads = params.zeros_like()
    h_new = cache[5] * cache[7]
    grads["W_out"] += d_logits.T @ h_new
    grads["b_out"] += d_logits.sum(axis=0)
    dh_total = dh_new + d_logits @ params["W_out"]
    acc = (np.zeros_like(W), np.zeros_like(U), np.zeros(4 * H))
    dc_prev, dh_prev, dx = _cell_backward(W, U, H, cache, dc_new, dh_total, acc)
    _unstack_into(grads, *acc, H)
    return grads, dc_prev, dh_prev, dx


# --- generator --------------------------------------------------------------

@dataclass
class GenSample:
    soft: np.ndarray        # (batch, steps, d) Gumbel-softmax outputs
    noise: np.ndarray       # (batch, steps, d) Gumbel noise used per step
    discrete: np.ndarray    # (batch, steps) argmax indices
    tau: float
    caches: list = field(default_factory=list, repr=False)


def _initial_input(params: LstmParams, batch: int) -> np.ndarray:
    if "x0" in params.tensors:
        return np.tile(params["x0"], (batch, 1))
    return np.zeros((batch, params.input_size))


def draw_generator_noise(params: LstmParams, batch: int, rng: np.random.Generator):
    """Uniform (0,1) noise for the initial state; z_c is None when C0 is learned."""
    z_h = uniform_noise(rng, (batch, params.hidden))
    z_c = None if "C0" in params.tensors else uniform_noise(rng, (batch, params.hidden))
    return z_c, z_h


def generate(params: LstmParams, z_c: Optional[np.ndarray], z_h: np.ndarray, tau: float,
             rng: Optional[np.random.Generator] = None, steps: int = SEQ_LEN,
             noise: Optional[np.ndarray] = None) -> GenSample:
    """Run the generator from (C0, h0) = (z_c, z_h), feeding each soft sample back.

    ``z_c=None`` uses the learned ``C0`` parameter. Pass ``noise`` of shape
    (batch, steps, d) to replay a fixed draw; otherwise it is drawn from ``rng``.
    """
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    batch = z_h.shape[0]
    d = params.output_size
    if z_c is None:
        z_c = np.tile(params["C0"], (batch, 1))
    if noise is None:
        noise = gumbel_noise(rng, (batch, steps, d))
    W, U, b = _stack(params)
    H = params.hidden
    c, h = z_c, z_h
    x = _initial_input(params, batch)
    soft = np.empty((batch, steps, d))
    caches = []
    for t in range(steps):
        c, h, cache = _cell_forward(W, U, b, H, c, h, x)
        logits = h @ params["W_out"].T + params["b_out"]
        y = gumbel_softmax(logits, noise[:, t], tau)
        soft[:, t] = y
        caches.append(cache)
        x = y
    return GenSample(soft, noise, soft.argmax(axis=-1), tau, caches)


def generate_backward(params: LstmParams, sample: GenSample, d_soft: np.ndarray) -> Dict[str, np.ndarray]:
    """Parameter gradients of a loss whose gradient w.r.t. ``sample.soft`` is ``d_soft``."""
    W, U, _ = _stack(params)
    H = params.hidden
    grads = params.zeros_like()
    acc = (np.zeros_like(W), np.zeros_like(U), np.zeros(4 * H))
    batch, steps, _ = d_soft.shape
    dc = np.zeros((batch, H))
    dh = np.zeros((batch, H))
    dx_next = np.zeros_like(d_soft[:, 0])
    for t in reversed(range(steps)):
        y = sample.soft[:, t]
        d_logits = gumbel_softmax_backward(y, d_soft[:, t] + dx_next, sample.tau)
        cache = sample.caches[t]
        h_t = cache[5] * cache[7]
        grads["W_out"] += d_logits.T @ h_t
        grads["b_out"] += d_logits.sum(axis=0)
        dh = dh + d_logits @ params["W_out"]
        dc, dh, dx_next = _cell_backward(W, U, H, cache, dc, dh, acc)
    _unstack_into(grads, *acc, H)
    if "C0" in grads:
        grads["C0"] += dc.sum(axis=0)
    if "x0" in grads:
        grads["x0"] += dx_next.sum(axis=0)
    return grads


# --- discriminator ----------------------------------------------------------

@dataclass
class DiscOutput:
    prob: np.ndarray     # (batch, 1)
    logit: np.ndarray    # (batch, 1)
    caches: list = field(default_factory=list, repr=False)


def discriminate(params: LstmParams, seq: np.ndarray) -> DiscOutput:
    """P(real) for each sequence in ``seq`` (batch, steps, d), read from the last hidden state."""
    if seq.ndim != 3 or seq.shape[2] != params.input_size:
        raise ShapeError(f"sequence batch of shape {seq.shape} does not match input size {params.input_size}")
    if params.output_size != 1:
        raise ShapeError("discriminator head must have output size 1")
    W, U, b = _stack(params)
    H = params.hidden
    batch, steps, _ = seq.shape
    c = np.zeros((batch, H))
    h = np.zeros((batch, H))
    caches = []
    for t in range(steps):
        c, h, cache = _cell_forward(W, U, b, H, c, h, seq[:, t])
        caches.append(cache)
    logit = h @ params["W_out"].T + params["b_out"]
    return DiscOutput(sigmoid(logit), logit, caches)


def discriminate_backward(params: LstmParams, out: DiscOutput, d_logit: np.ndarray):
    """Gradients given d(loss)/d(logit): (param grads, d(loss)/d(seq))."""
    W, U, _ = _stack(params)
    H = params.hidden
    grads = params.zeros_like()
    acc = (np.zeros_like(W), np.zeros_like(U), np.zeros(4 * H))
    last = out.caches[-1]
    h_last = last[5] * last[7]
    grads["W_out"] += d_logit.T @ h_last
    grads["b_out"] += d_logit.sum(axis=0)
    dh = d_logit @ params["W_out"]
    dc = np.zeros_like(dh)
    steps = len(out.caches)
    dseq = np.empty((dh.shape[0], steps, params.input_size))
    for t in reversed(range(steps)):
        dc, dh, dseq[:, t] = _cell_backward(W, U, H, out.caches[t], dc, dh, acc)
    _unstack_into(grads, *acc, H)
    return grads, dseq


def logit_grad_from_prob_grad(out: DiscOutput, d_prob: np.ndarray) -> np.ndarray:
    return sigmoid_backward(out.prob, d_prob)


# --- MLE predictor ----------------------------------------------------------

def mle_forward(params: LstmParams, seq: np.ndarray):
    """Teacher-forced NLL: steps 1..T-1 predict 2..T. Returns (nll, grads)."""
    if seq.ndim != 3 or seq.shape[1] < 2:
        raise ShapeError(f"need a (batch, steps>=2, d) batch, got {seq.shape}")
    if seq.shape[2] != params.input_size:
        raise ShapeError(f"sequence batch of shape {seq.shape} does not match input size {params.input_size}")
    W, U, b = _stack(params)
    H = params.hidden
    batch, steps, _ = seq.shape
    n_pred = steps - 1
    c = np.zeros((batch, H))
    h = np.zeros((batch, H))
    caches, d_logits = [], []
    nll = 0.0
    for t in range(n_pred):
        c, h, cache = _cell_forward(W, U, b, H, c, h, seq[:, t])
        logits = h @ params["W_out"].T + params["b_out"]
        loss, dl = softmax_cross_entropy(logits, seq[:, t + 1])
        nll += loss / n_pred
        caches.append(cache)
        d_logits.append(dl / n_pred)

    grads = params.zeros_like()
    acc = (np.zeros_like(W), np.zeros_like(U), np.zeros(4 * H))
    dc = np.zeros((batch, H))
    dh = np.zeros((batch, H))
    for t in reversed(range(n_pred)):
        cache = caches[t]
        h_t = cache[5] * cache[7]
        grads["W_out"] += d_logits[t].T @ h_t
        grads["b_out"] += d_logits[t].sum(axis=0)
        dh = dh + d_logits[t] @ params["W_out"]
        dc, dh, _ = _cell_backward(W, U, H, cache, dc, dh, acc)
    _unstack_into(grads, *acc, H)
    return nll, grads


def sample_mle(params: LstmParams, n: int, rng: np.random.Generator,
               steps: int = SEQ_LEN, seed_char: int = CHAR_TO_INDEX["x"]) -> np.ndarray:
    """Autoregressive sampling; returns (n, steps) indices starting with ``seed_char``."""
    W, U, b = _stack(params)
    H = params.hidden
    d = params.input_size
    out = np.empty((n, steps), dtype=np.int64)
    out[:, 0] = seed_char
    c = np.zeros((n, H))
    h = np.zeros((n, H))
    eye = np.eye(d)
    for t in range(1, steps):
        c, h, _ = _cell_forward(W, U, b, H, c, h, eye[out[:, t - 1]])
        logits = h @ params["W_out"].T + params["b_out"]
        out[:, t] = gumbel_max_sample(logits, rng)
    return out


def mle_step_probs(params: LstmParams, prefix: np.ndarray) -> np.ndarray:
    """Softmax over the next character after feeding one-hot ``prefix`` (batch, k, d)."""
    W, U, b = _stack(params)
    H = params.hidden
    c = np.zeros((prefix.shape[0], H))
    h = np.zeros_like(c)
    for t in range(prefix.shape[1]):
        c, h, _ = _cell_forward(W, U, b, H, c, h, prefix[:, t])
    return softmax_rows(h @ params["W_out"].T + params["b_out"])


# --- checkpoints ------------------------------------------------------------

def save_checkpoint(path, models: Dict[str, LstmParams], **meta) -> None:
    """Write a JSON document: model tensors (shape + flat float values) plus metadata."""
    doc = dict(meta)
    doc["models"] = {k: v.to_dict() for k, v in models.items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> Tuple[Dict[str, LstmParams], dict]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: not a valid checkpoint ({e})") from None
    if not isinstance(doc, dict) or "models" not in doc:
        raise ValueError(f"{path}: checkpoint has no 'models' section")
    try:
        models = {k: LstmParams.from_dict(v) for k, v in doc.pop("models").items()}
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"{path}: malformed parameters ({e})") from None
    return models, doc

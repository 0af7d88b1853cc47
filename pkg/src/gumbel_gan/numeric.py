"""Dense matrix ops with hand-written backward rules, plus a gradient checker.

Every forward function here has a matching ``*_backward`` that takes the
upstream gradient and returns gradients for the inputs. Arrays are float64
numpy arrays; nothing here mutates its arguments.
"""

from typing import Callable, Dict, Tuple

import numpy as np

LOG_CLAMP = 1e-12


class ShapeError(ValueError):
    pass


def as_matrix(a) -> np.ndarray:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    return m


def _same_shape(a: np.ndarray, b: np.ndarray, name: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{name}: shape mismatch {a.shape} vs {b.shape}")


# --- affine ---------------------------------------------------------------

def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def matmul_backward(a: np.ndarray, b: np.ndarray, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return grad @ b.T, a.T @ grad


# --- softmax ----------------------------------------------------------------

def softmax_rows(h: np.ndarray) -> np.ndarray:
    """Row-wise softmax over the last axis, stabilised by subtracting the row max."""
    h = np.asarray(h, dtype=np.float64)
    if not np.all(np.isfinite(h)):
        raise FloatingPointError("softmax_rows: non-finite input")
    e = np.exp(h - h.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(p: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # dH_ij = p_ij (G_ij - sum_k G_ik p_ik)
    return p * (grad - (grad * p).sum(axis=-1, keepdims=True))


# --- pointwise --------------------------------------------------------------

def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid_backward(s: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Backward of sigmoid given its *output* ``s``."""
    return grad * s * (1.0 - s)


def tanh(x: np.ndarray) -> np.ndarray:
    return np.tanh(x)


def tanh_backward(t: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Backward of tanh given its *output* ``t``."""
    return grad * (1.0 - t * t)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b, "add")
    return a + b


def add_backward(grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return grad, grad


def mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b, "mul")
    return a * b


def mul_backward(a: np.ndarray, b: np.ndarray, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return grad * b, grad * a


def scale(a: np.ndarray, c: float) -> np.ndarray:
    return a * c


def scale_backward(c: float, grad: np.ndarray) -> np.ndarray:
    return grad * c


_ELEMENTWISE = {
    "tanh": tanh,
    "sigmoid": sigmoid,
    "add": add,
    "mul": mul,
    "scale": scale,
}


def elementwise(op: str, *args):
    """Dispatch a pointwise op by name: tanh, sigmoid, add, mul or scale."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(*args)


# --- losses -----------------------------------------------------------------

def cross_entropy(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over rows of -sum_j target_j log pred_j, with pred clamped at 1e-12."""
    _same_shape(pred, target, "cross_entropy")
    m = pred.shape[0]
    return float(-(target * np.log(np.maximum(pred, LOG_CLAMP))).sum() / m)


def softmax_cross_entropy(logits: np.ndarray, target: np.ndarray) -> Tuple[float, np.ndarray]:
    """Fused softmax + cross-entropy. Returns the loss and d(loss)/d(logits)."""
    _same_shape(logits, target, "softmax_cross_entropy")
    p = softmax_rows(logits)
    m = logits.shape[0]
    return cross_entropy(p, target), (p - target) / m


# --- gradient checking ------------------------------------------------------

Params = Dict[str, np.ndarray]


def numerical_gradient(f: Callable[[Params], float], params: Params, eps: float = 1e-5) -> Params:
    """Central differences, perturbing one entry at a time in place."""
    num = {}
    for name, value in params.items():
        g = np.zeros_like(value)
        flat = value.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            fp = f(params)
            flat[i] = old - eps
            fm = f(params)
            flat[i] = old
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise FloatingPointError(f"grad_check: non-finite loss perturbing {name}[{i}]")
            g.reshape(-1)[i] = (fp - fm) / (2 * eps)
        num[name] = g
    return num


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def grad_check(
    f: Callable[[Params], Tuple[float, Params]],
    params: Params,
    eps: float = 1e-5,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f(params)`` must return ``(loss, grads)`` where ``grads`` has an entry
    for every key in ``params``. Parameters are perturbed in place and
    restored afterwards.
    """
    if not 1e-7 <= eps <= 1e-4:
        raise ValueError(f"grad_check: eps={eps} outside [1e-7, 1e-4]")
    loss, analytic = f(params)
    if not np.isfinite(loss):
        raise FloatingPointError("grad_check: non-finite loss at the base point")
    numeric = numerical_gradient(lambda p: f(p)[0], params, eps)
    return max(relative_error(np.asarray(analytic[k]), numeric[k]) for k in params)

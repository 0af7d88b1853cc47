"""The one-variable arithmetic grammar S -> x | S+S | S-S | S*S | S/S.

Sampling, a recognizer for padded strings, brute-force enumeration (used to
cross-check the recognizer), dataset file I/O and input smoothing.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Set, Union

import numpy as np

from .random import gumbel_softmax_sample

VOCAB = ("x", "+", "-", "*", "/", " ")
CHAR_TO_INDEX: Dict[str, int] = {c: i for i, c in enumerate(VOCAB)}
D = len(VOCAB)
SEQ_LEN = 12
OPERATORS = ("+", "-", "*", "/")
PAD = " "

ENUMERATION_LIMIT = 7


@dataclass(frozen=True)
class Grammar:
    """Production probabilities, in order x, S+S, S-S, S*S, S/S."""

    probs: Sequence[float] = field(default=(0.5, 0.125, 0.125, 0.125, 0.125))

    def __post_init__(self):
        if len(self.probs) != 5:
            raise ValueError("the grammar has exactly five productions")
        if any(p <= 0 for p in self.probs) or abs(sum(self.probs) - 1.0) > 1e-12:
            raise ValueError(f"production probabilities must be positive and sum to 1: {self.probs}")


def _expand(grammar: Grammar, rng: np.random.Generator, budget: int) -> Union[str, None]:
    # returns None once the partial derivation exceeds budget characters
    choice = rng.choice(5, p=np.asarray(grammar.probs))
    if choice == 0:
        return "x" if budget >= 1 else None
    left = _expand(grammar, rng, budget - 2)
    if left is None:
        return None
    right = _expand(grammar, rng, budget - 1 - len(left))
    if right is None:
        return None
    return left + OPERATORS[choice - 1] + right


def sample_expression(grammar: Grammar, max_len: int, rng: np.random.Generator) -> str:
    """Sample a derivation of S no longer than ``max_len``, rejecting overlong ones."""
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    while True:
        s = _expand(grammar, rng, max_len)
        if s is not None:
            return s


def pad(s: str, length: int = SEQ_LEN) -> str:
    if len(s) > length:
        raise ValueError(f"string {s!r} longer than {length}")
    return s + PAD * (length - len(s))


def recognize(s: str) -> bool:
    """True iff ``s`` is a nonempty expression followed only by spaces."""
    bad = set(s) - set(VOCAB)
    if bad:
        raise ValueError(f"characters outside the vocabulary: {sorted(bad)}")
    expr = s.rstrip(PAD)
    if not expr or len(expr) % 2 == 0:
        return False
    for i, c in enumerate(expr):
        if i % 2 == 0:
            if c != "x":
                return False
        elif c not in OPERATORS:
            return False
    return True


def enumerate_language(grammar: Grammar, up_to_len: int) -> Set[str]:
    """Every terminal string derivable from S with length <= up_to_len.

    Breadth-first over sentential forms, expanding the leftmost S and
    pruning forms already longer than the bound (no production shrinks).
    """
    if up_to_len > ENUMERATION_LIMIT:
        raise ValueError(f"up_to_len={up_to_len} exceeds the enumeration bound {ENUMERATION_LIMIT}")
    rhs = ["x"] + ["S" + op + "S" for op in OPERATORS]
    out: Set[str] = set()
    seen = {"S"}
    frontier = ["S"]
    while frontier:
        nxt = []
        for form in frontier:
            i = form.find("S")
            if i < 0:
                out.add(form)
                continue
            for r in rhs:
                new = form[:i] + r + form[i + 1:]
                if len(new) <= up_to_len and new not in seen:
                    seen.add(new)
                    nxt.append(new)
        frontier = nxt
    return out


# --- encoding and datasets --------------------------------------------------

def encode(lines: Sequence[str]) -> np.ndarray:
    """One-hot tensor of shape (n, length, d)."""
    idx = np.array([[CHAR_TO_INDEX[c] for c in line] for line in lines], dtype=np.int64)
    return np.eye(D)[idx]


def decode(indices: np.ndarray) -> List[str]:
    return ["".join(VOCAB[i] for i in row) for row in np.asarray(indices)]


def write_dataset(lines: Sequence[str], path) -> None:
    text = "".join(line + "\n" for line in lines)
    Path(path).write_text(text, encoding="utf-8")


def read_lines(path, length: int = SEQ_LEN) -> List[str]:
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ValueError(f"{path}: empty dataset")
    for i, line in enumerate(lines):
        if len(line) != length or set(line) - set(VOCAB):
            raise ValueError(f"{path}:{i + 1}: expected {length} vocabulary characters, got {line!r}")
    return lines


def read_dataset(path, length: int = SEQ_LEN) -> np.ndarray:
    return encode(read_lines(path, length))


def valid_prefix_length(s: str) -> int:
    """Length of the longest prefix of ``s`` that some valid padded string of len(s) starts with."""
    n = len(s)
    for i, c in enumerate(s):
        if i > 0 and s[i - 1] == PAD:
            ok = c == PAD
        elif i % 2 == 0:
            ok = c == "x"
        else:
            ok = c in OPERATORS or c == PAD
        # an operator in the last slot can never be completed
        if ok and i == n - 1 and c in OPERATORS:
            ok = False
        if not ok:
            return i
    return n


def sample_corpus(grammar: Grammar, n: int, max_len: int, rng: np.random.Generator) -> List[str]:
    if n < 1:
        raise ValueError("n must be >= 1")
    return [pad(sample_expression(grammar, max_len, rng), max_len) for _ in range(n)]


def make_dataset(grammar: Grammar, n: int, max_len: int, rng: np.random.Generator, path=None) -> np.ndarray:
    """Sample ``n`` padded expressions, optionally write them, return one-hot (n, max_len, d)."""
    lines = sample_corpus(grammar, n, max_len, rng)
    if path is not None:
        write_dataset(lines, path)
    return encode(lines)


# --- input smoothing --------------------------------------------------------

def smoothing_distribution(batch: np.ndarray, target_prob: float) -> np.ndarray:
    """Put ``target_prob`` on the true symbol and spread the rest evenly."""
    if not 0.0 < target_prob < 1.0:
        raise ValueError(f"target_prob must be in (0, 1), got {target_prob}")
    d = batch.shape[-1]
    other = (1.0 - target_prob) / (d - 1)
    return np.where(batch > 0.5, target_prob, other)


def smooth_inputs(batch: np.ndarray, target_prob: float, tau_input: float, rng: np.random.Generator) -> np.ndarray:
    """Replace one-hot steps with Gumbel-softmax samples around a smoothed target."""
    if tau_input <= 0:
        raise ValueError(f"tau_input must be positive, got {tau_input}")
    h = np.log(smoothing_distribution(batch, target_prob))
    return gumbel_softmax_sample(h, tau_input, rng)

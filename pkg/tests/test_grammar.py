import itertools
import math
import re
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gumbel_gan.grammar import (
    D,
    SEQ_LEN,
    VOCAB,
    Grammar,
    decode,
    encode,
    enumerate_language,
    make_dataset,
    pad,
    read_dataset,
    read_lines,
    recognize,
    sample_corpus,
    sample_expression,
    smooth_inputs,
    smoothing_distribution,
    valid_prefix_length,
)
from gumbel_gan.numeric import softmax_rows
from gumbel_gan.random import make_rng

EXPR = re.compile(r"x([-+*/]x)*")


class AlwaysX:
    """Stand-in rng that always picks the production S -> x."""

    def choice(self, n, p=None):
        return 0


def test_vocabulary_order_is_frozen():
    assert VOCAB == ("x", "+", "-", "*", "/", " ")
    assert D == 6


def test_grammar_probabilities_validated():
    with pytest.raises(ValueError):
        Grammar((0.5, 0.5, 0.0, 0.0, 0.0))
    with pytest.raises(ValueError):
        Grammar((0.5, 0.5))


def test_forced_base_case():
    assert sample_expression(Grammar(), 12, AlwaysX()) == "x"


def test_samples_are_odd_length_expressions():
    rng = make_rng(0)
    for _ in range(2000):
        s = sample_expression(Grammar(), 12, rng)
        assert EXPR.fullmatch(s)
        assert len(s) % 2 == 1 and len(s) <= 12
        assert recognize(pad(s))


def test_achievable_lengths():
    rng = make_rng(1)
    lengths = {len(sample_expression(Grammar(), 12, rng)) for _ in range(5000)}
    assert lengths == {1, 3, 5, 7, 9, 11}


def test_sample_expression_rejects_bad_bound():
    with pytest.raises(ValueError):
        sample_expression(Grammar(), 0, make_rng(0))


@pytest.mark.parametrize("s", ["x+x-x/x", "x-x*x*x*x", "x", "x/x*x-x+x-x"])
def test_recognize_accepts(s):
    assert recognize(pad(s))


@pytest.mark.parametrize("s", ["x+", "++x", "x x", "", "+", "xx", "x+x+x+x+x+x+", " x"])
def test_recognize_rejects(s):
    assert not recognize(pad(s))


def test_recognize_rejects_foreign_characters():
    with pytest.raises(ValueError):
        recognize("x+y" + " " * 9)


def test_enumeration_sizes():
    assert enumerate_language(Grammar(), 1) == {"x"}
    assert enumerate_language(Grammar(), 3) == {"x"} | {"x" + op + "x" for op in "+-*/"}
    assert len(enumerate_language(Grammar(), 5)) == 21
    assert len(enumerate_language(Grammar(), 7)) == 85


def test_enumeration_bound():
    with pytest.raises(ValueError):
        enumerate_language(Grammar(), 8)


@pytest.mark.parametrize("length", [5, 7])
def test_recognizer_agrees_with_enumeration(length):
    language = enumerate_language(Grammar(), length)
    for chars in itertools.product(VOCAB, repeat=length):
        s = "".join(chars)
        assert recognize(pad(s)) == (s.rstrip(" ") in language), s


def test_counts_by_length():
    counts = Counter(len(s) for s in enumerate_language(Grammar(), 7))
    assert counts == {1: 1, 3: 4, 5: 16, 7: 64}


@given(st.text(alphabet="".join(VOCAB), min_size=SEQ_LEN, max_size=SEQ_LEN))
def test_recognize_matches_regex(s):
    assert recognize(s) == bool(EXPR.fullmatch(s.rstrip(" ")))


@given(st.text(alphabet="".join(VOCAB), min_size=SEQ_LEN, max_size=SEQ_LEN))
def test_valid_prefix_length_brute_force(s):
    # brute force: longest prefix that some recognised string extends
    def extendable(prefix):
        if len(prefix) == SEQ_LEN:
            return recognize(prefix)
        body = prefix.rstrip(" ")
        if " " in body:
            return False
        if len(prefix) > len(body):
            return EXPR.fullmatch(body) is not None
        return EXPR.fullmatch(body) is not None or EXPR.fullmatch(body + "x") is not None

    expected = max(k for k in range(SEQ_LEN + 1) if extendable(s[:k]) or k == 0)
    assert valid_prefix_length(s) == expected
    assert (valid_prefix_length(s) == SEQ_LEN) == recognize(s)


def test_dataset_file_format(tmp_path):
    path = tmp_path / "train.txt"
    batch = make_dataset(Grammar(), 5000, 12, make_rng(2), path)
    raw = path.read_bytes()
    lines = raw.decode("ascii").split("\n")
    assert lines[-1] == "" and len(lines) == 5001
    assert all(len(line) == 12 for line in lines[:-1])
    assert all(recognize(line) for line in lines[:-1])
    assert batch.shape == (5000, 12, 6)
    np.testing.assert_array_equal(read_dataset(path), batch)


def test_single_forced_line(tmp_path):
    path = tmp_path / "one.txt"
    make_dataset(Grammar(), 1, 12, AlwaysX(), path)
    assert path.read_text() == "x           \n"


def test_encode_decode_round_trip():
    lines = sample_corpus(Grammar(), 50, 12, make_rng(3))
    onehot = encode(lines)
    np.testing.assert_allclose(onehot.sum(axis=-1), 1.0)
    assert decode(onehot.argmax(axis=-1)) == lines


def test_read_rejects_malformed(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("x+x\n")
    with pytest.raises(ValueError, match="bad.txt:1"):
        read_lines(path)


def test_smoothing_distribution_constants():
    onehot = encode(["x" + " " * 11])
    dist = smoothing_distribution(onehot, 0.9)
    np.testing.assert_allclose(dist[0, 0], [0.9, 0.02, 0.02, 0.02, 0.02, 0.02], atol=1e-15)
    h = np.log(dist[0, 0])
    np.testing.assert_allclose(h[0] - h[1:], math.log(45), atol=1e-12)
    np.testing.assert_allclose(softmax_rows(h[None])[0], dist[0, 0], atol=1e-15)


def test_smoothing_domain_errors():
    onehot = encode(["x" + " " * 11])
    with pytest.raises(ValueError):
        smooth_inputs(onehot, 1.0, 1.0, make_rng(0))
    with pytest.raises(ValueError):
        smooth_inputs(onehot, 0.9, 0.0, make_rng(0))


def test_smoothed_average_keeps_true_symbol():
    lines = sample_corpus(Grammar(), 10, 12, make_rng(4))
    onehot = encode(lines)
    rng = make_rng(5)
    total = np.zeros_like(onehot)
    for _ in range(10_000):
        total += smooth_inputs(onehot, 0.9, 1.0, rng)
    agree = (total.argmax(axis=-1) == onehot.argmax(axis=-1)).mean()
    assert agree >= 0.99


@pytest.mark.parametrize("tau", [0.3, 1.0, 5.0])
def test_smoothed_batches_row_stochastic(tau):
    onehot = encode(sample_corpus(Grammar(), 64, 12, make_rng(6)))
    y = smooth_inputs(onehot, 0.9, tau, make_rng(7))
    np.testing.assert_allclose(y.sum(axis=-1), 1.0, atol=1e-9)
    assert y.shape == onehot.shape

import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from gumbel_gan import numeric as nm


def rand(rng, *shape):
    return rng.standard_normal(shape)


def test_matmul_identity():
    b = np.array([[3.0, 4.0], [5.0, 6.0]])
    np.testing.assert_array_equal(nm.matmul(np.eye(2), b), b)


def test_matmul_row_by_column():
    assert nm.matmul(np.array([[1.0, 2.0]]), np.array([[3.0], [4.0]]))[0, 0] == 11.0


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(nm.ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
        nm.matmul(np.zeros((2, 3)), np.zeros((2, 3)))


def test_matmul_backward_matches_finite_differences():
    rng = np.random.default_rng(0)
    params = {"a": rand(rng, 4, 3), "b": rand(rng, 3, 2)}
    w = rand(rng, 4, 2)

    def f(p):
        out = nm.matmul(p["a"], p["b"])
        da, db = nm.matmul_backward(p["a"], p["b"], w)
        return float((out * w).sum()), {"a": da, "b": db}

    assert nm.grad_check(f, params) < 1e-6


@pytest.mark.parametrize("h, expected", [
    ([0.0, 0.0, 0.0, 0.0], [0.25, 0.25, 0.25, 0.25]),
    ([math.log(1), math.log(3)], [0.25, 0.75]),
])
def test_softmax_known_values(h, expected):
    np.testing.assert_allclose(nm.softmax_rows(np.array([h])), [expected], atol=1e-15)


def test_softmax_large_logits_against_mpmath():
    got = nm.softmax_rows(np.array([[1000.0, 0.0]]))
    mpmath.mp.dps = 50
    z = mpmath.exp(1000) + 1
    want = [float(mpmath.exp(1000) / z), float(1 / z)]
    assert np.all(np.isfinite(got))
    np.testing.assert_allclose(got[0], want, rtol=1e-15, atol=0)


def test_softmax_rejects_non_finite():
    with pytest.raises(FloatingPointError):
        nm.softmax_rows(np.array([[np.nan, 0.0]]))


def test_sigmoid_tanh_at_zero():
    assert nm.elementwise("sigmoid", np.zeros((1, 1)))[0, 0] == 0.5
    assert nm.elementwise("tanh", np.zeros((1, 1)))[0, 0] == 0.0


def test_sigmoid_extremes_do_not_overflow():
    with np.errstate(over="raise"):
        s = nm.sigmoid(np.array([[-800.0, 800.0]]))
    np.testing.assert_allclose(s, [[0.0, 1.0]])


def test_elementwise_shape_mismatch():
    with pytest.raises(nm.ShapeError):
        nm.elementwise("add", np.zeros((2, 2)), np.zeros((2, 3)))
    with pytest.raises(nm.ShapeError):
        nm.elementwise("mul", np.zeros((1, 2)), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        nm.elementwise("relu", np.zeros((1, 1)))


def _unary_case(fwd, bwd):
    def make(rng):
        params = {"x": rand(rng, 3, 3)}
        w = rand(rng, 3, 3)

        def f(p):
            y = fwd(p["x"])
            return float((y * w).sum()), {"x": bwd(y, w)}
        return f, params
    return make


def _binary_case(op):
    def make(rng):
        params = {"a": rand(rng, 3, 3), "b": rand(rng, 3, 3)}
        w = rand(rng, 3, 3)

        def f(p):
            if op == "add":
                y = nm.add(p["a"], p["b"])
                ga, gb = nm.add_backward(w)
            else:
                y = nm.mul(p["a"], p["b"])
                ga, gb = nm.mul_backward(p["a"], p["b"], w)
            return float((y * w).sum()), {"a": ga, "b": gb}
        return f, params
    return make


def _scale_case(rng):
    params = {"x": rand(rng, 3, 3)}
    w = rand(rng, 3, 3)
    c = 2.5

    def f(p):
        return float((nm.scale(p["x"], c) * w).sum()), {"x": nm.scale_backward(c, w)}
    return f, params


def _softmax_case(rng):
    params = {"h": rand(rng, 3, 5)}
    w = rand(rng, 3, 5)

    def f(p):
        y = nm.softmax_rows(p["h"])
        return float((y * w).sum()), {"h": nm.softmax_backward(y, w)}
    return f, params


def _softmax_ce_case(rng):
    params = {"h": rand(rng, 4, 6)}
    target = nm.softmax_rows(rand(rng, 4, 6))

    def f(p):
        loss, g = nm.softmax_cross_entropy(p["h"], target)
        return loss, {"h": g}
    return f, params


def _matmul_case(rng):
    params = {"a": rand(rng, 4, 3), "b": rand(rng, 3, 2)}
    w = rand(rng, 4, 2)

    def f(p):
        da, db = nm.matmul_backward(p["a"], p["b"], w)
        return float((nm.matmul(p["a"], p["b"]) * w).sum()), {"a": da, "b": db}
    return f, params


CASES = {
    "matmul": _matmul_case,
    "softmax": _softmax_case,
    "softmax_ce": _softmax_ce_case,
    "tanh": _unary_case(nm.tanh, nm.tanh_backward),
    "sigmoid": _unary_case(nm.sigmoid, nm.sigmoid_backward),
    "add": _binary_case("add"),
    "mul": _binary_case("mul"),
    "scale": _scale_case,
}


@pytest.mark.parametrize("name", sorted(CASES))
@pytest.mark.parametrize("seed", range(20))
def test_backward_rules_pass_grad_check(name, seed):
    f, params = CASES[name](np.random.default_rng(seed))
    assert nm.grad_check(f, params, eps=1e-5) < 1e-4


@pytest.mark.parametrize("name", ["tanh", "sigmoid", "add", "mul", "softmax_ce"])
def test_backward_rules_tight(name):
    f, params = CASES[name](np.random.default_rng(123))
    assert nm.grad_check(f, params) < 1e-6


def test_cross_entropy_perfect_prediction():
    eye = np.eye(6)
    assert nm.cross_entropy(eye, eye) == pytest.approx(0.0, abs=1e-12)


def test_cross_entropy_uniform_prediction():
    pred = np.full((3, 6), 1 / 6)
    target = np.eye(6)[[0, 2, 5]]
    assert nm.cross_entropy(pred, target) == pytest.approx(math.log(6), abs=1e-12)


def test_cross_entropy_clamps_zero_probability():
    pred = np.array([[1.0, 0.0]])
    target = np.array([[0.0, 1.0]])
    assert nm.cross_entropy(pred, target) == pytest.approx(-math.log(1e-12))


def test_grad_check_quadratic():
    def f(p):
        return float((p["t"] ** 2).sum()), {"t": 2 * p["t"]}

    params = {"t": np.array([1.0, 2.0, 3.0])}
    assert nm.grad_check(f, params) < 1e-9
    np.testing.assert_array_equal(params["t"], [1.0, 2.0, 3.0])


def test_grad_check_detects_wrong_gradient():
    def f(p):
        return float((p["t"] ** 2).sum()), {"t": 3 * p["t"]}

    assert nm.grad_check(f, {"t": np.array([1.0, 2.0])}) > 0.1


def test_grad_check_errors():
    with pytest.raises(FloatingPointError):
        nm.grad_check(lambda p: (float("nan"), {"t": p["t"]}), {"t": np.ones(2)})
    with pytest.raises(ValueError):
        nm.grad_check(lambda p: (0.0, {"t": p["t"]}), {"t": np.ones(2)}, eps=1e-2)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 7)), elements=finite))
def test_softmax_rows_are_distributions(h):
    p = nm.softmax_rows(h)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(p >= 0) and np.all(p <= 1)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 4), st.integers(1, 6)), elements=st.floats(-5, 5)))
def test_softmax_strictly_inside_unit_interval_for_moderate_logits(h):
    p = nm.softmax_rows(h)
    assert np.all(p > 0) and np.all(p < 1) or h.shape[1] == 1


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_matmul_associativity(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rand(rng, 3, 4), rand(rng, 4, 2), rand(rng, 2, 5)
    left = nm.matmul(nm.matmul(a, b), c)
    right = nm.matmul(a, nm.matmul(b, c))
    np.testing.assert_allclose(left, right, atol=1e-10, rtol=0)

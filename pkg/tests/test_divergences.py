import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from advdrop.divergences import DivergenceKind, div_eval, div_grad
from advdrop.errors import DomainError, ShapeError
from advdrop.harness.verify import central_difference, rel_error

from conftest import softmax_rows

KL, CE, QE = DivergenceKind.KL, DivergenceKind.CE, DivergenceKind.QE


def test_kl_identical_is_zero():
    assert div_eval(KL, [0.5, 0.5], [0.5, 0.5]) == 0.0


def test_kl_point_mass_against_uniform():
    assert div_eval(KL, [1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)


def test_qe_value():
    assert div_eval(QE, [1, 0], [0.8, 0.2]) == pytest.approx(0.08, abs=1e-12)


def test_ce_value():
    assert div_eval(CE, [1, 0], [0.8, 0.2]) == pytest.approx(0.223144, abs=1e-6)


def test_ce_grad_value():
    assert np.allclose(div_grad(CE, [1, 0], [0.8, 0.2]), [-1.25, 0.0], atol=1e-12)


def test_qe_grad_zero_at_minimum():
    assert not div_grad(QE, [0.3, 0.7], [0.3, 0.7]).any()


def test_rows_evaluate_independently():
    y = np.array([[1, 0], [0.5, 0.5]])
    yp = np.array([[0.5, 0.5], [0.5, 0.5]])
    assert np.allclose(div_eval(KL, y, yp), [math.log(2), 0.0])


def test_length_mismatch():
    with pytest.raises(ShapeError):
        div_eval(QE, [1, 0], [1, 0, 0])


@pytest.mark.parametrize("kind", [KL, CE])
def test_non_probability_rejected(kind):
    with pytest.raises(DomainError):
        div_eval(kind, [0.5, 0.6], [0.5, 0.5])


def test_qe_accepts_any_reals():
    assert div_eval(QE, [3.0, -1.0], [0.0, 0.0]) == 10.0


def test_parse_names():
    assert DivergenceKind.parse("kl") is KL
    assert DivergenceKind.parse("QE") is QE
    with pytest.raises(Exception):
        DivergenceKind.parse("js")


@pytest.mark.parametrize("kind", list(DivergenceKind))
def test_grad_matches_finite_differences(rng, kind):
    y = softmax_rows(rng.normal((3, 4)))
    yp = softmax_rows(rng.normal((3, 4)))

    def f():
        if kind is QE:
            return float(np.sum((y - yp) ** 2))
        if kind is CE:
            return float(-np.sum(y * np.log(yp)))
        return float(np.sum(y * (np.log(y) - np.log(yp))))

    assert rel_error(div_grad(kind, y, yp), central_difference(f, yp)) < 1e-6
    assert rel_error(div_grad(kind, y, yp, wrt="first"), central_difference(f, y)) < 1e-6


def test_log_clamp_keeps_values_finite():
    assert np.isfinite(div_eval(CE, [1, 0], [0.0, 1.0]))
    assert np.isfinite(div_grad(KL, [1, 0], [0.0, 1.0])).all()


probs = arrays(np.float64, 5, elements=st.floats(0.01, 1.0)).map(lambda a: a / a.sum())


@settings(max_examples=200, deadline=None)
@given(p=probs, q=probs)
def test_kl_nonnegative(p, q):
    d = float(div_eval(KL, p, q))
    assert d >= -1e-12
    if np.array_equal(p, q):
        assert abs(d) <= 1e-12


def test_kl_positive_on_thousand_random_pairs(rng):
    p = softmax_rows(rng.normal((1000, 6)))
    q = softmax_rows(rng.normal((1000, 6)))
    assert (div_eval(KL, p, q) > 0).all()
    assert np.max(np.abs(div_eval(KL, p, p))) <= 1e-12


@settings(max_examples=100, deadline=None)
@given(a=arrays(np.float64, 4, elements=st.floats(-5, 5)), b=arrays(np.float64, 4, elements=st.floats(-5, 5)))
def test_qe_symmetric(a, b):
    assert div_eval(QE, a, b) == div_eval(QE, b, a)

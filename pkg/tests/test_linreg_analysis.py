import itertools

import numpy as np
import pytest

from advdrop.errors import DomainError, ShapeError
from advdrop.harness.verify import linreg_records, random_linreg_problem
from advdrop.linreg_analysis import (LinRegProblem, add_closed_form_mask, add_decomposition, add_masks,
                                     at_decomposition, feature_scores, input_gradients, linreg_loss)
from advdrop.numerics import RngStream


def single(delta=0.0, k=0):
    return LinRegProblem(X=[[3.0, 1.0]], y=[0.0], w=[1.0, -2.0], delta=delta, k=k)


def test_loss_zero_case():
    assert linreg_loss(LinRegProblem(np.ones((3, 2)), np.zeros(3), np.zeros(2))) == 0.0


def test_loss_single_point():
    assert linreg_loss(single()) == 1.0


def test_loss_matches_loop(rng):
    p = LinRegProblem(rng.normal((7, 3)), rng.normal((7,)), rng.normal((3,)))
    ref = sum((p.y[i] - sum(p.X[i, j] * p.w[j] for j in range(3))) ** 2 for i in range(7))
    assert abs(linreg_loss(p) - ref) <= 1e-12


def test_shape_and_domain_checks():
    with pytest.raises(ShapeError):
        LinRegProblem(np.ones((2, 3)), np.ones(2), np.ones(2))
    with pytest.raises(DomainError):
        LinRegProblem(np.ones((2, 2)), np.ones(2), np.ones(2), delta=-1)
    with pytest.raises(DomainError):
        LinRegProblem(np.ones((2, 2)), np.ones(2), np.ones(2), k=3)


def test_input_gradient_convention():
    assert input_gradients(single()).tolist() == [[2.0, -4.0]]


def test_at_zero_noise_is_plain_loss():
    lhs, rhs = at_decomposition(single(delta=0.0))
    assert lhs == rhs == 1.0


def test_at_single_point_hand_value():
    lhs, rhs = at_decomposition(single(delta=0.1))
    assert lhs == pytest.approx(1.69, abs=1e-12)
    assert abs(lhs - rhs) < 1e-9


def test_at_identity_random_small(rng):
    p = LinRegProblem(rng.normal((5, 3)), rng.normal((5,)), rng.normal((3,)), delta=0.3)
    lhs, rhs = at_decomposition(p)
    assert abs(lhs - rhs) < 1e-9


def test_add_single_point_mask_and_value():
    p = single(k=1)
    assert feature_scores(p, 0).tolist() == [6.0, -4.0]
    assert add_closed_form_mask(p, 0).tolist() == [1.0, 0.0]
    lhs, rhs = add_decomposition(p)
    assert lhs == 9.0 and abs(lhs - rhs) < 1e-9


def test_add_zero_budget():
    p = single(k=0)
    assert add_closed_form_mask(p, 0).tolist() == [1.0, 1.0]
    assert add_decomposition(p) == (1.0, 1.0)


def test_add_positive_scores_never_dropped():
    p = LinRegProblem([[1.0, 2.0]], [-5.0], [1.0, 1.0], k=2)
    assert (feature_scores(p, 0) > 0).all()
    assert add_closed_form_mask(p, 0).tolist() == [1.0, 1.0]


def test_add_tie_drops_lower_index_first():
    p = LinRegProblem([[1.0, 1.0, 1.0]], [10.0], [1.0, 1.0, 1.0], k=2)
    assert (feature_scores(p, 0) == -14.0).all()
    assert add_closed_form_mask(p, 0).tolist() == [0.0, 0.0, 1.0]


def test_add_identity_random_small(rng):
    p = LinRegProblem(rng.normal((5, 4)), rng.normal((5,)), rng.normal((4,)), k=2)
    lhs, rhs = add_decomposition(p)
    assert abs(lhs - rhs) < 1e-9
    assert (np.sum(add_masks(p) == 0, axis=1) <= 2).all()


def test_add_monotone_in_k(rng):
    for _ in range(50):
        p = random_linreg_problem(rng)
        vals = []
        for k in range(p.X.shape[1] + 1):
            p.k = k
            vals.append(add_decomposition(p)[0])
        assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_closed_form_maximises_linearised_gain(rng):
    for _ in range(100):
        p = random_linreg_problem(rng)
        for i in range(p.X.shape[0]):
            s = feature_scores(p, i)
            best = max(-sum(s[list(c)]) for m in range(p.k + 1)
                       for c in itertools.combinations(range(len(s)), m))
            got = -np.sum(s[add_closed_form_mask(p, i) == 0])
            assert got == pytest.approx(best, abs=1e-12)


def test_closed_form_can_miss_exact_optimum():
    # dropping the positive-score feature overshoots the residual more than the linear gain predicts
    p = LinRegProblem([[1.0, -10.0]], [-8.0], [1.0, 1.0], k=1)  # residual 1
    assert add_closed_form_mask(p, 0).tolist() == [0.0, 1.0]
    assert add_decomposition(p)[0] == 4.0
    dropped_second = float((p.y[0] - p.X[0, 0] * p.w[0]) ** 2)
    assert dropped_second == 81.0


def test_records_report_both_sides():
    rec = linreg_records(10, seed=3)
    assert len(rec["at_pairs"]) == len(rec["add_pairs"]) == 10
    assert rec["at_max_gap"] < 1e-9 and rec["add_max_gap"] < 1e-9

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advdrop.errors import DomainError, ShapeError
from advdrop.numerics import RngStream, matmul, sample_bernoulli_mask, sample_gaussian


def test_matmul_identity():
    assert matmul([[1, 2], [3, 4]], [[1, 0], [0, 1]]).tolist() == [[1, 2], [3, 4]]


def test_matmul_row_by_column():
    assert matmul([[1, 2]], [[3], [4]]).tolist() == [[11]]


def test_matmul_rectangular():
    assert matmul([[1, 2], [3, 4]], [[5], [6]]).tolist() == [[17], [39]]


def test_matmul_mismatch_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_matmul_rejects_vectors():
    with pytest.raises(ShapeError):
        matmul(np.ones(3), np.ones((3, 1)))


def test_matmul_matches_triple_loop(rng):
    a, b = rng.normal((8, 8)), rng.normal((8, 8))
    ref = np.zeros((8, 8))
    for i in range(8):
        for j in range(8):
            for k in range(8):
                ref[i, j] += a[i, k] * b[k, j]
    assert np.max(np.abs(matmul(a, b) - ref)) <= 1e-12


def test_bernoulli_degenerate(rng):
    assert sample_bernoulli_mask(rng, 4, 1.0).tolist() == [1, 1, 1, 1]
    assert sample_bernoulli_mask(rng, 4, 0.0).tolist() == [0, 0, 0, 0]


def test_bernoulli_mean_within_three_sigma(rng):
    m = sample_bernoulli_mask(rng, 100_000, 0.5)
    assert 0.494 <= m.mean() <= 0.506
    assert set(np.unique(m)) <= {0.0, 1.0}


@pytest.mark.parametrize("q", [-0.1, 1.5, float("nan")])
def test_bernoulli_rejects_bad_probability(rng, q):
    with pytest.raises(DomainError):
        sample_bernoulli_mask(rng, 3, q)


def test_gaussian_zero_sigma(rng):
    assert not sample_gaussian(rng, (3, 2), 0.0).any()


def test_gaussian_variance(rng):
    v = sample_gaussian(rng, (100_000,), 1.0).var()
    assert 0.97 <= v <= 1.03


def test_gaussian_rejects_negative_sigma(rng):
    with pytest.raises(DomainError):
        sample_gaussian(rng, (2,), -1.0)


def test_fresh_streams_agree():
    a = sample_gaussian(RngStream(7), (5, 3), 0.4)
    b = sample_gaussian(RngStream(7), (5, 3), 0.4)
    assert np.array_equal(a, b)


def test_children_are_independent_of_parent_draws():
    s = RngStream(3)
    before = s.child(2).uniform((4,))
    s.uniform((100,))
    assert np.array_equal(before, s.child(2).uniform((4,)))
    assert not np.array_equal(s.child(1).uniform((4,)), s.child(2).uniform((4,)))


def test_counter_advances():
    s = RngStream(0)
    c0 = s.counter
    s.uniform((10,))
    assert s.counter != c0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), dim=st.integers(1, 50), q=st.floats(0, 1))
def test_bernoulli_is_binary_and_reproducible(seed, dim, q):
    a = sample_bernoulli_mask(RngStream(seed), dim, q)
    b = sample_bernoulli_mask(RngStream(seed), dim, q)
    assert np.array_equal(a, b)
    assert np.isin(a, (0.0, 1.0)).all()

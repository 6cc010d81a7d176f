import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cqspace.metrics import distance_measure
from cqspace.sir import SirConfig, SirError, sir, sir_directions, slice_labels


def angle_deg(a, b):
    c = abs(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return np.degrees(np.arccos(min(1.0, c)))


def test_recovers_linear_index():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(500, 5))
    d = sir_directions(x, x[:, 0], SirConfig(target_dim=1, n_slices=10))
    assert angle_deg(d[:, 0], np.eye(5)[0]) < 1.0
    assert d[0, 0] > 0


def test_null_model_flagged_by_eigenvalue_ratio():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(1000, 4))
    res = sir(x, rng.normal(size=1000))
    assert res.directions.shape == (4, 1)
    assert np.all(res.eigenvalues < 10 * 4 * 10 / 1000)
    signal = sir(x, x[:, 0] + 0.1 * rng.normal(size=1000))
    assert signal.eigenvalue_ratio > 10 * res.eigenvalue_ratio


def test_symmetric_link_blind_spot():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2000, 3))
    res = sir(x, x[:, 0] ** 2)
    assert res.eigenvalues[0] < 0.05


def test_slices_equal_frequency_with_leading_remainder():
    labels = slice_labels(np.arange(23.0)[::-1], 5)
    np.testing.assert_array_equal(np.bincount(labels), [5, 5, 5, 4, 4])
    assert labels[-1] == 0


def test_ties_go_to_lower_slice():
    y = np.array([0.0, 1, 2, 2, 2, 5, 6, 7, 8, 9, 10, 11])
    labels = slice_labels(y, 4)
    np.testing.assert_array_equal(labels, [0, 0, 0, 0, 0, 1, 2, 2, 2, 3, 3, 3])


def test_categorical_response_one_slice_per_label():
    y = np.repeat([3.0, 1.0, 7.0], 10)
    labels = slice_labels(y, 10)
    np.testing.assert_array_equal(np.bincount(labels), [10, 10, 10])
    assert labels[0] == 1 and labels[10] == 0 and labels[20] == 2


def test_errors():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(30, 3))
    with pytest.raises(SirError, match="n > p"):
        sir(x[:3], x[:3, 0])
    with pytest.raises(SirError, match="singular"):
        sir(np.column_stack([x[:, 0], x[:, 0]]), x[:, 1])
    with pytest.raises(SirError, match="fewer than 2"):
        sir(x, x[:, 0], SirConfig(n_slices=20))
    with pytest.raises(ValueError):
        SirConfig(n_slices=1)


def test_affine_invariance():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(400, 4))
    y = x[:, 0] + x[:, 1] + 0.5 * rng.normal(size=400)
    m = rng.normal(size=(4, 4)) + 3 * np.eye(4)
    cfg = SirConfig(target_dim=2)
    base = sir_directions(x, y, cfg)
    moved = sir_directions(x @ m + rng.normal(size=4), y, cfg)
    assert distance_measure(m @ moved, base) < 1e-6


@given(st.integers(0, 2**32 - 1))
def test_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(100, 3))
    y = np.tanh(x[:, 1]) + 0.3 * rng.normal(size=100)
    perm = rng.permutation(100)
    cfg = SirConfig(target_dim=2, n_slices=5)
    np.testing.assert_allclose(sir_directions(x[perm], y[perm], cfg), sir_directions(x, y, cfg), atol=1e-10)


@given(st.integers(0, 2**32 - 1), st.integers(1, 3))
def test_directions_unit_norm_and_orthogonal_in_whitened_scale(seed, d):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(120, 4)) @ rng.normal(size=(4, 4))
    y = x @ rng.normal(size=4) + rng.normal(size=120)
    b = sir_directions(x, y, SirConfig(target_dim=d))
    np.testing.assert_allclose(np.linalg.norm(b, axis=0), 1.0)
    cov = np.cov(x, rowvar=False)
    g = b.T @ cov @ b
    off = g - np.diag(np.diag(g))
    assert np.max(np.abs(off)) <= 1e-8 * np.max(np.abs(np.diag(g)))
    for col in b.T:
        assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0

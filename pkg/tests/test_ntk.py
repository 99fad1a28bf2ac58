import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ntklab.datagen import sample_sphere
from ntklab.exceptions import InsufficientDataError, InvalidArgumentError
from ntklab.network import NetConfig, gradient, init_weights
from ntklab.ntk import (KernelMatrix, assumption_gap, confusion_matrix, diagonal_dominance,
                        dot_product, empirical_ntk, kappa, kappa0, kappa1, laplace,
                        laplace_kernel, limiting_ntk, linear, ntk_2layer_closed, ntk_cross,
                        ntk_kernel)
from ntklab.numerics import RngStream

from _helpers import relu_pair_expectations, tensor_hermite_expectations


@pytest.mark.parametrize("fn, expected", [
    (kappa0, {1.0: 1.0, -1.0: 0.0, 0.0: 0.5}),
    (kappa1, {1.0: 1.0, -1.0: 0.0, 0.0: 1 / np.pi}),
])
def test_arc_cosine_endpoints(fn, expected):
    for u, v in expected.items():
        assert fn(u) == pytest.approx(v, abs=1e-15)


def test_arc_cosine_domain():
    assert kappa1(1.0 + 5e-13) == 1.0
    with pytest.raises(InvalidArgumentError):
        kappa0(1.0 + 1e-9)
    with pytest.raises(InvalidArgumentError):
        kappa1(np.nan)


@pytest.mark.parametrize("rho", [-0.9, 0.0, 0.5, 0.99])
def test_arc_cosine_gaussian_expectations(rho):
    k0, k1 = relu_pair_expectations(rho)
    assert k0 == pytest.approx(kappa0(rho), abs=1e-6)
    assert k1 == pytest.approx(kappa1(rho), abs=1e-6)
    t0, t1 = tensor_hermite_expectations(rho)
    assert t0 == pytest.approx(kappa0(rho), abs=2e-2)
    assert t1 == pytest.approx(kappa1(rho), abs=2e-2)


def test_two_layer_closed_examples():
    e = np.eye(3)
    assert ntk_2layer_closed(e[0], e[0]) == pytest.approx(2.0)
    assert ntk_2layer_closed(e[0], e[1]) == pytest.approx(1 / np.pi)
    assert ntk_2layer_closed(e[0], -e[0]) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(InvalidArgumentError):
        ntk_2layer_closed(np.zeros(3), e[0])


def test_limiting_two_layer_matches_closed_form():
    X = sample_sphere(64, 10, RngStream(0))
    K = limiting_ntk(X, 2).gram
    closed = np.array([[ntk_2layer_closed(a, b) for b in X] for a in X])
    assert np.max(np.abs(K - closed)) <= 1e-12


def test_limiting_two_layer_scaled_inputs():
    X = 3.0 * RngStream(1).generator().standard_normal((5, 4))
    K = limiting_ntk(X, 2).gram
    off = ~np.eye(5, dtype=bool)
    closed = np.array([[ntk_2layer_closed(a, b) for b in X] for a in X])
    assert np.allclose(K[off], closed[off], rtol=1e-12, atol=0)
    assert np.allclose(np.diag(K), 2 * (X * X).sum(1), rtol=1e-12, atol=0)


@pytest.mark.parametrize("L", [2, 3, 4, 6])
def test_limiting_diagonal_equals_depth(L):
    X = sample_sphere(5, 6, RngStream(2))
    K = limiting_ntk(X, L)
    assert np.allclose(np.diag(K.gram), L, atol=1e-12)
    assert K.min_eig() >= -1e-8 * np.trace(K.gram) / 5
    assert limiting_ntk(X[:1], L).gram.shape == (1, 1)


def test_limiting_rejects_zero_row_and_shallow():
    with pytest.raises(InvalidArgumentError):
        limiting_ntk(np.zeros((2, 3)), 2)
    with pytest.raises(InvalidArgumentError):
        limiting_ntk(np.eye(3), 1)


def test_cross_block_consistent_with_gram():
    X = sample_sphere(6, 4, RngStream(3))
    assert np.allclose(ntk_cross(X[:2], X, 3), limiting_ntk(X, 3).gram[:2])


def test_kernel_matrix_contract(tmp_path):
    K = limiting_ntk(sample_sphere(4, 3, RngStream(4)), 2)
    with pytest.raises(ValueError):
        K.gram[0, 0] = 1.0
    with pytest.raises(InvalidArgumentError):
        KernelMatrix(np.eye(2), "unknown")
    K.to_csv(tmp_path / "k.csv")
    assert np.allclose(np.loadtxt(tmp_path / "k.csv", delimiter=","), K.gram, rtol=0, atol=0)
    K.to_json(tmp_path / "k.json")
    assert K.summary()["n"] == 4


def test_empirical_ntk_basic():
    W = init_weights(NetConfig(3, 64, 5), RngStream(5))
    X = RngStream(6).generator().standard_normal((4, 5))
    K = empirical_ntk(W, X, parametrization="standard")
    for i, x in enumerate(X):
        sq = sum(np.sum(g * g) for g in gradient(W, x))
        assert K.gram[i, i] == pytest.approx(sq, rel=1e-12)
    assert np.array_equal(K.gram, K.gram.T)
    with pytest.raises(InvalidArgumentError):
        empirical_ntk(W, X[:, :3])


def test_empirical_ntk_pair_converges():
    X = sample_sphere(2, 6, RngStream(7))
    target = ntk_2layer_closed(X[0], X[1])
    errs = []
    for m in (256, 16384):
        W = init_weights(NetConfig(2, m, 6), RngStream(8).child(str(m)))
        errs.append(abs(empirical_ntk(W, X).gram[0, 1] - target) / abs(target))
    assert errs[1] <= 0.05
    assert errs[1] < errs[0]


def test_empirical_ntk_median_deviation_decreases():
    X = sample_sphere(32, 8, RngStream(9))
    K_lim = limiting_ntk(X, 2).gram
    meds = []
    for m in (512, 2048, 8192):
        devs = [np.mean(np.abs(empirical_ntk(init_weights(NetConfig(2, m, 8),
                                                          RngStream(s).child(str(m))), X).gram
                               - K_lim)) for s in range(10)]
        meds.append(np.median(devs))
    assert meds[0] > meds[1] > meds[2]


def test_laplace_examples():
    e = np.eye(3)
    assert laplace_kernel(e[0], e[0], 1.0) == 1.0
    assert laplace_kernel(e[0], -e[0], 1.0) == pytest.approx(np.exp(-2))
    assert laplace_kernel(e[0], e[1], 1.0) == pytest.approx(0.24312, abs=1e-5)
    with pytest.raises(InvalidArgumentError):
        laplace_kernel(e[0], e[1], 0.0)
    X = sample_sphere(10, 3, RngStream(10))
    via_dot = dot_product(lambda u: np.exp(-np.sqrt(2 * (1 - u))), "laplace")
    assert np.allclose(laplace(1.0)(X), via_dot(X), atol=1e-7)


def test_all_builders_psd():
    X = sample_sphere(40, 5, RngStream(11))
    for k in (ntk_kernel(3), laplace(2.0), linear()):
        K = k.gram(X)
        assert K.min_eig() >= -1e-8 * np.trace(K.gram) / 40
        assert np.all(np.linalg.eigvalsh(K.gram).imag == 0)


def test_gap_constant_blocks():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])
    labels = np.array([0, 0, 1, 1])
    gap, table = assumption_gap(X, labels, linear())
    assert np.allclose(table, np.eye(2))
    assert gap == pytest.approx(1.0)
    assert diagonal_dominance(table) == 2


def test_gap_insufficient_class():
    with pytest.raises(InsufficientDataError) as info:
        confusion_matrix(np.eye(3), np.array([0, 0, 1]), linear())
    assert info.value.label == 1


def test_gap_sign_labels_positive():
    for s in range(10):
        X = sample_sphere(4000, 8, RngStream(s).child("gap"))
        gap, _ = assumption_gap(X, np.where(X[:, 0] >= 0, 1, -1), ntk_kernel(2))
        assert gap > 0


def test_gap_shuffled_labels_near_zero():
    gen = RngStream(12).generator()
    gaps = []
    for _ in range(20):
        X = sample_sphere(400, 8, gen)
        gaps.append(assumption_gap(X, gen.choice([-1, 1], 400), ntk_kernel(2))[0])
    gaps = np.array(gaps)
    assert abs(gaps.mean()) <= 3 * gaps.std(ddof=1) / np.sqrt(len(gaps)) + 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(-1.0, 1.0))
def test_kappa_identity(u):
    assert kappa(u) == pytest.approx(u * kappa0(u) + kappa1(u), abs=1e-15)
    assert 0.0 <= kappa0(u) <= 1.0 and 0.0 <= kappa1(u) <= 1.0 + 1e-15


def test_diagonal_dominance_counts_rows():
    table = np.array([[1.0, 2.0], [0.0, 1.0]])
    assert diagonal_dominance(table) == 1

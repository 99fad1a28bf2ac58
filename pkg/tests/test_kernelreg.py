import json

import numpy as np
import pytest

from ntklab.datagen import make_rkhs_target, sample_regression, sample_sphere
from ntklab.exceptions import InvalidArgumentError, SingularMatrixError
from ntklab.kernelreg import KernelRegressor, config_hash, excess_risk, nn_vs_ntk_gap
from ntklab.network import NetConfig, init_weights, predict
from ntklab.ntk import dot_product, laplace, linear, ntk_kernel
from ntklab.numerics import RngStream


def test_scalar_solve():
    k = dot_product(lambda u: 2.0 * np.ones_like(u), "two")
    model = KernelRegressor(k).fit(np.array([[1.0]]), np.array([6.0]))
    assert model.coeffs == pytest.approx([3.0])
    assert model.predict(np.array([[1.0]])) == pytest.approx([6.0])


def test_zero_targets():
    X = sample_sphere(10, 4, RngStream(0))
    model = KernelRegressor().fit(X, np.zeros(10))
    assert np.all(model.coeffs == 0)
    assert np.all(model.predict(sample_sphere(5, 4, RngStream(1))) == 0)


def test_linear_kernel_orthonormal_inputs():
    y = np.array([1.0, -2.0, 0.5])
    model = KernelRegressor(linear()).fit(np.eye(3), y)
    assert np.allclose(model.predict(np.eye(3)), y)


def test_interpolation_and_linearity():
    X = sample_sphere(50, 8, RngStream(2))
    y = RngStream(3).generator().standard_normal(50)
    a = KernelRegressor(ntk_kernel(3)).fit(X, y)
    assert np.max(np.abs(a.predict(X) - y)) <= 1e-6 * np.max(np.abs(y))
    b = KernelRegressor(ntk_kernel(3)).fit(X, 2 * y)
    T = sample_sphere(7, 8, RngStream(4))
    assert np.allclose(b.predict(T), 2 * a.predict(T))


def test_laplace_far_point_decays():
    X = sample_sphere(5, 3, RngStream(5))
    model = KernelRegressor(laplace(1.0)).fit(X, np.ones(5))
    assert abs(model.predict(np.array([[1e4, 0.0, 0.0]]))[0]) < 1e-100


def test_dimension_mismatch():
    model = KernelRegressor().fit(sample_sphere(5, 3, RngStream(6)), np.ones(5))
    with pytest.raises(InvalidArgumentError):
        model.predict(np.ones((2, 4)))


def test_singular_system_propagates():
    X = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(SingularMatrixError):
        KernelRegressor(linear()).fit(X, np.array([1.0, 2.0]))
    model = KernelRegressor(linear(), jitter="auto").fit(np.eye(2), np.ones(2))
    assert model.jitter_used_ == pytest.approx(1e-10)


def _target(d=6, seed=7):
    return make_rkhs_target(d, ntk_kernel(2), RngStream(seed))


def test_excess_risk_of_target_and_offset():
    t = _target()
    zero = excess_risk(t, t, 500, RngStream(8))
    assert zero.excess_risk == 0.0 and zero.std_err == 0.0
    off = excess_risk(lambda X: t(X) + 1.0, t, 500, RngStream(8))
    assert off.excess_risk == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidArgumentError):
        excess_risk(t, t, 99, RngStream(8))


def test_excess_risk_std_err_scaling():
    t = _target()
    errs = [excess_risk(lambda X: np.zeros(len(X)), t, n, RngStream(9)).std_err
            for n in (1000, 4000, 16000)]
    slope = np.polyfit(np.log([1000, 4000, 16000]), np.log(errs), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.1)


def test_ridgeless_beats_zero_predictor():
    wins = 0
    for s in range(10):
        root = RngStream(s)
        t = make_rkhs_target(64, ntk_kernel(2), root.child("target"))
        X, y, _ = sample_regression(t, 256, root.child("train"))
        model = KernelRegressor(ntk_kernel(2)).fit(X, y)
        fitted = excess_risk(model, t, 1000, root.child("test")).excess_risk
        baseline = excess_risk(lambda Z: np.zeros(len(Z)), t, 1000, root.child("test")).excess_risk
        wins += fitted < baseline
    assert wins >= 9


def test_risk_report_json(tmp_path):
    t = _target()
    rep = excess_risk(t, t, 100, RngStream(10), config={"n": 3})
    rep.to_json(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert set(data) == {"excess_risk", "std_err", "n_test", "seed", "config_hash"}
    assert data["config_hash"] == config_hash({"n": 3})
    assert config_hash({"n": 3}) != config_hash({"n": 4})


def test_gap_baselines():
    X = sample_sphere(10, 4, RngStream(11))
    model = KernelRegressor().fit(X, np.zeros(10))
    W0 = init_weights(NetConfig(2, 64, 4), RngStream(12))
    T = sample_sphere(20, 4, RngStream(13))
    gmax, gmean = nn_vs_ntk_gap(W0, model, T)
    assert gmax == pytest.approx(np.max(np.abs(predict(W0, T))))
    assert gmean == pytest.approx(np.mean(np.abs(predict(W0, T))))
    assert nn_vs_ntk_gap(model, model, T) == (0.0, 0.0)

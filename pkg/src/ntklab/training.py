"""Logistic-loss SGD, training traces and classification metrics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger
from scipy.special import expit

from .exceptions import DivergenceError, InvalidArgumentError, PreconditionError
from .network import batch_backward, forward, predict, weight_distance
from .numerics import RngStream

__all__ = [
    "logistic_loss",
    "loss_derivative_g",
    "TrainConfig",
    "TrainTrace",
    "sgd_run",
    "gd_squared_loss",
    "empirical_risk",
    "train_error",
    "test_error",
    "margin_statistic",
    "classification_bound",
]

_DIVERGENCE_LIMIT = 1e8


def logistic_loss(z):
    """``log(1 + exp(-z))`` without overflow for large ``|z|``."""
    z = np.asarray(z, dtype=float)
    out = np.logaddexp(0.0, -z)
    return float(out) if out.ndim == 0 else out


def loss_derivative_g(z):
    """``g(z) = -l'(z) = 1 / (1 + exp(z))``."""
    out = expit(-np.asarray(z, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class TrainConfig:
    """SGD settings.

    ``parametrization="ntk"`` scales every hidden-layer step by ``2/m``, which
    is plain SGD on the standard-normal variables behind each hidden layer.
    ``"standard"`` applies the raw gradient to the stored weights.
    ``stop_train_error`` adds a second early-exit test on the 0-1 error.
    """

    alpha: float = 0.05
    epochs: int = 200
    stop_risk: float = 0.0
    shuffle: bool = True
    rng: RngStream = field(default_factory=lambda: RngStream(0))
    parametrization: str = "ntk"
    stop_train_error: float | None = None

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidArgumentError("step size alpha must be non-negative")
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be non-negative")
        if self.stop_risk < 0:
            raise InvalidArgumentError("stop_risk must be non-negative")
        if self.parametrization not in ("ntk", "standard"):
            raise InvalidArgumentError(f"unknown parametrization {self.parametrization!r}")


class TrainTrace:
    """Per-step training records, appended in strictly increasing step order."""

    columns = ("step", "risk", "point_loss", "margin", "train01")

    def __init__(self, depth):
        self.depth = depth
        self.rows = []

    def append(self, step, risk, point_loss, margin, train01, drifts):
        if self.rows and step <= self.rows[-1][0]:
            raise InvalidArgumentError("trace steps must be strictly increasing")
        self.rows.append((int(step), float(risk), float(point_loss), float(margin),
                          float(train01), tuple(float(v) for v in drifts)))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        if name == "drift":
            return np.array([r[5] for r in self.rows])
        idx = self.columns.index(name)
        return np.array([r[idx] for r in self.rows])

    @property
    def steps(self):
        return self.column("step")

    def margin_slope(self):
        """Least-squares slope of the margin statistic against step."""
        t, m = self.steps.astype(float), self.column("margin")
        ok = np.isfinite(m)
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(t[ok], m[ok], 1)[0])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "risk", "margin", "train01"]
                       + [f"drift_l{l}" for l in range(1, self.depth + 1)])
            for step, risk, _, margin, t01, drifts in self.rows:
                w.writerow([step, repr(risk), repr(margin), repr(t01)] + [repr(v) for v in drifts])
        return path


def _scores(W, X, y):
    return np.asarray(y, dtype=float) * predict(W, X)


def empirical_risk(W, data):
    """Mean logistic loss of ``y * f(x)`` over the training set."""
    return float(np.mean(logistic_loss(_scores(W, data.X, data.y))))


def _sign(f):
    return np.where(f >= 0, 1, -1)


def train_error(W, data):
    return float(np.mean(_sign(predict(W, data.X)) != data.y))


def test_error(W, test, use_clean=False):
    """Fraction of points whose label differs from ``sgn f(x)`` (``sgn 0 = +1``)."""
    if len(test) == 0:
        raise InvalidArgumentError("test set is empty")
    labels = test.y_clean if use_clean else test.y
    return float(np.mean(_sign(predict(W, test.X)) != labels))


def margin_statistic(W, X, y_clean):
    """Monte Carlo estimate of ``E[y_clean * f(x)]``."""
    return float(np.mean(np.asarray(y_clean, dtype=float) * predict(W, X)))


def classification_bound(eta, lambda_lc, margin, lip):
    """``eta + exp(-(lambda/4) (margin / lip)^2)``; needs a non-negative margin."""
    if margin < 0:
        raise PreconditionError("the bound needs a non-negative clean margin")
    if not lip > 0:
        raise InvalidArgumentError("Lipschitz constant must be positive")
    if np.isinf(margin):
        return float(eta)
    return float(eta + np.exp(-(lambda_lc / 4.0) * (margin / lip) ** 2))


def _layer_steps(cfg, W):
    if cfg.parametrization == "ntk":
        return cfg.alpha * W.config.ntk_scales()
    return np.full(W.config.L, cfg.alpha)


def sgd_run(W0, data, cfg, trace_every=None, margin_set=None, callback=None):
    """Train with one-sample logistic SGD.

    The first epoch visits samples in their stored order; later epochs are
    reshuffled when ``cfg.shuffle`` is set. Every ``trace_every`` steps (and
    at the start and end) the empirical risk, training 0-1 error, per-layer
    drift and, if ``margin_set = (X, y_clean)`` is given, the clean margin
    statistic are recorded. Training stops early once the risk reaches
    ``cfg.stop_risk`` (or the 0-1 error reaches ``cfg.stop_train_error``) at a
    trace point.

    Returns ``(W, trace)``; ``W0`` is left untouched.
    """
    n = len(data)
    if trace_every is None:
        trace_every = n
    if trace_every < 1:
        raise InvalidArgumentError("trace_every must be >= 1")
    if data.X.shape[1] != W0.config.d:
        raise InvalidArgumentError("data dimension does not match the network")
    W = W0.copy()
    # Fortran views let BLAS apply rank-one updates in place.
    layers_T = [w.T for w in W.layers]
    steps = _layer_steps(cfg, W)
    gen = cfg.rng.generator()
    trace = TrainTrace(W.config.L)
    X, y = data.X, data.y.astype(float)

    def record(t, point_loss):
        f = predict(W, X)
        if not np.all(np.isfinite(f)) or np.max(np.abs(f)) > _DIVERGENCE_LIMIT:
            raise DivergenceError(t, "network output exploded")
        risk = float(np.mean(logistic_loss(y * f)))
        err = float(np.mean(_sign(f) != data.y))
        margin = margin_statistic(W, *margin_set) if margin_set is not None else float("nan")
        trace.append(t, risk, point_loss, margin, err, weight_distance(W, W0))
        if callback is not None:
            callback(t, W, trace)
        done = risk <= cfg.stop_risk
        if cfg.stop_train_error is not None:
            done = done or err <= cfg.stop_train_error
        return done

    if record(0, float("nan")):
        return W, trace

    t = 0
    last_loss = float("nan")
    stopped = False
    for epoch in range(cfg.epochs):
        order = np.arange(n) if epoch == 0 or not cfg.shuffle else gen.permutation(n)
        for i in order:
            t += 1
            rec = forward(W, X[i])
            z = y[i] * rec.output
            last_loss = logistic_loss(z)
            if not np.isfinite(last_loss) or abs(rec.output) > _DIVERGENCE_LIMIT:
                raise DivergenceError(t)
            coef = loss_derivative_g(z) * y[i]
            if coef != 0.0 and cfg.alpha != 0.0:
                # backward vector of the output layer, then hidden layers top-down
                b = W.layers[-1][0] * (rec.preacts[-1] >= 0)
                out_step = steps[-1] * coef
                for l in range(W.config.L - 2, -1, -1):
                    h_prev = rec.inputs if l == 0 else rec.acts[l - 1]
                    b_next = (b @ W.layers[l]) * (rec.preacts[l - 1] >= 0) if l > 0 else None
                    dger(steps[l] * coef, h_prev, b, a=layers_T[l], overwrite_a=True)
                    b = b_next
                W.layers[-1][0] += out_step * rec.acts[-1]
            if t % trace_every == 0:
                if record(t, last_loss):
                    stopped = True
                    break
        if stopped:
            break
    if not trace.rows or trace.rows[-1][0] != t:
        record(t, last_loss)
    return W, trace


def gd_squared_loss(W0, X, y, lr, steps, parametrization="ntk", tol=0.0, output_scale=1.0):
    """Full-batch gradient descent on ``0.5 * sum_i (s f(x_i) - y_i)^2``.

    ``s`` is ``output_scale``. Stops early when the largest absolute residual
    drops below ``tol``. Returns ``(W, residual_history)``.
    """
    W = W0.copy()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    scales = W.config.ntk_scales() if parametrization == "ntk" else np.ones(W.config.L)
    history = []
    for t in range(int(steps)):
        f, ins, bs = batch_backward(W, X)
        r = output_scale * f - y
        history.append(float(np.max(np.abs(r))))
        if not np.isfinite(history[-1]):
            raise DivergenceError(t, "residual became non-finite")
        if history[-1] <= tol:
            break
        r = output_scale * r
        W.layers[-1][0] -= lr * scales[-1] * (r @ ins[-1])
        for l, b in enumerate(bs):
            W.layers[l] -= lr * scales[l] * ((b * r[:, None]).T @ ins[l])
    return W, np.array(history)

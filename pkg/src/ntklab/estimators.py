"""scikit-learn estimators wrapping the network and kernel machinery."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import unique_labels
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .datagen import MixtureDataset
from .exceptions import InvalidArgumentError
from .kernelreg import KernelRegressor
from .network import NetConfig, init_weights, predict
from .numerics import RngStream
from .training import TrainConfig, sgd_run

__all__ = ["DeepReLUClassifier", "KernelRegressor"]


class DeepReLUClassifier(ClassifierMixin, BaseEstimator):
    """Binary classifier trained by one-sample logistic SGD.

    Parameters
    ----------
    depth, width : int
        Number of weight matrices ``L`` and hidden width ``m``.
    alpha : float
        SGD step size.
    epochs : int
        Maximum passes over the data.
    parametrization : {"ntk", "standard"}
        See :class:`ntklab.training.TrainConfig`.
    stop_train_error : float or None
        Stop once the training 0-1 error is at or below this value.
    random_state : int
        Root seed; initialisation and sample order use separate sub-streams.
    """

    def __init__(self, depth=3, width=1024, alpha=0.5, epochs=200, parametrization="ntk",
                 stop_train_error=0.01, trace_every=64, random_state=0):
        self.depth = depth
        self.width = width
        self.alpha = alpha
        self.epochs = epochs
        self.parametrization = parametrization
        self.stop_train_error = stop_train_error
        self.trace_every = trace_every
        self.random_state = random_state

    def fit(self, X, y, margin_set=None):
        X, y = check_X_y(X, y)
        self.classes_ = unique_labels(y)
        if len(self.classes_) != 2:
            raise InvalidArgumentError("DeepReLUClassifier handles exactly two classes")
        signs = np.where(y == self.classes_[1], 1, -1)
        root = RngStream(int(self.random_state))
        cfg = NetConfig(int(self.depth), int(self.width), X.shape[1])
        self.initial_weights_ = init_weights(cfg, root.child("init"))
        data = MixtureDataset(X, signs, signs, np.zeros(len(y), dtype=bool))
        tcfg = TrainConfig(alpha=self.alpha, epochs=self.epochs, rng=root.child("sgd"),
                           parametrization=self.parametrization,
                           stop_train_error=self.stop_train_error)
        self.weights_, self.trace_ = sgd_run(self.initial_weights_, data, tcfg,
                                             trace_every=self.trace_every, margin_set=margin_set)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "weights_")
        X = check_array(X)
        return predict(self.weights_, X)

    def predict(self, X):
        f = self.decision_function(X)
        return np.where(f >= 0, self.classes_[1], self.classes_[0])

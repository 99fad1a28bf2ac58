"""Neural tangent kernels of deep ReLU networks: exact kernels, finite-width
networks, SGD training and the spectral and regression tools around them."""
from .estimators import DeepReLUClassifier
from .kernelreg import KernelRegressor
from .network import NetConfig, WeightSet, forward, gradient, init_weights, predict
from .ntk import empirical_ntk, kappa, kappa0, kappa1, limiting_ntk
from .numerics import RngStream

__version__ = "0.1.0"

__all__ = [
    "DeepReLUClassifier",
    "KernelRegressor",
    "NetConfig",
    "RngStream",
    "WeightSet",
    "empirical_ntk",
    "forward",
    "gradient",
    "init_weights",
    "kappa",
    "kappa0",
    "kappa1",
    "limiting_ntk",
    "predict",
]

"""Bias-free deep ReLU network with NTK initialisation.

The network is ``h_0 = x``, ``h_l = relu(W_l h_{l-1})`` for ``l < L`` and
``f(x) = W_L h_{L-1}``. Hidden layers are initialised with variance ``2/m``
and the output row with variance 1.

Two gradient conventions appear in this package. :func:`gradient` returns the
plain derivative with respect to the stored weights. The *NTK
parametrisation* writes every hidden weight as ``sqrt(2/m) * V`` with standard
normal ``V``; derivatives with respect to ``V`` are the plain ones scaled by
``sqrt(2/m)``. Inner products of those rescaled gradients converge to the
limiting kernel as ``m`` grows, while the plain ones grow linearly in ``m``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InvalidArgumentError
from .numerics import RngStream, sample_gaussian

__all__ = [
    "NetConfig",
    "WeightSet",
    "ForwardRecord",
    "SignPattern",
    "init_weights",
    "forward",
    "forward_batch",
    "predict",
    "gradient",
    "batch_backward",
    "input_gradient",
    "sign_pattern",
    "weight_distance",
    "in_neighborhood",
    "spectral_norm",
    "lipschitz_estimates",
    "linearization_residual",
    "save_weights",
    "load_weights",
]


@dataclass(frozen=True)
class NetConfig:
    """Depth ``L`` (number of weight matrices), hidden width ``m``, input dim ``d``."""

    L: int
    m: int
    d: int

    def __post_init__(self):
        if self.L < 2:
            raise InvalidArgumentError("depth L must be >= 2")
        if self.m < 1 or self.d < 1:
            raise InvalidArgumentError("width m and input dimension d must be >= 1")

    @property
    def shapes(self):
        return [(self.m, self.d)] + [(self.m, self.m)] * (self.L - 2) + [(1, self.m)]

    def ntk_scales(self):
        """Per-layer factor turning plain gradient inner products into NTK-parametrised ones."""
        return np.array([2.0 / self.m] * (self.L - 1) + [1.0])


class WeightSet:
    """The tuple of weight matrices ``(W_1, ..., W_L)``."""

    def __init__(self, layers, config=None):
        layers = [np.array(w, dtype=float) for w in layers]
        if config is None:
            if len(layers) < 2:
                raise InvalidArgumentError("a network needs at least two layers")
            config = NetConfig(len(layers), layers[0].shape[0], layers[0].shape[1])
        if len(layers) != config.L:
            raise InvalidArgumentError(f"expected {config.L} layers, got {len(layers)}")
        for l, (w, shape) in enumerate(zip(layers, config.shapes), start=1):
            if w.shape != shape:
                raise InvalidArgumentError(f"layer {l} has shape {w.shape}, expected {shape}")
            if not np.all(np.isfinite(w)):
                raise InvalidArgumentError(f"layer {l} has non-finite entries")
        self.layers = layers
        self.config = config

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, idx):
        return self.layers[idx]

    def __iter__(self):
        return iter(self.layers)

    def copy(self):
        return WeightSet([w.copy() for w in self.layers], self.config)

    def scaled_output(self, factor):
        """Copy with the output row multiplied by ``factor``."""
        new = self.copy()
        new.layers[-1] *= factor
        return new

    def flat(self):
        return np.concatenate([w.ravel() for w in self.layers])

    def __repr__(self):
        c = self.config
        return f"WeightSet(L={c.L}, m={c.m}, d={c.d})"


@dataclass
class ForwardRecord:
    """Activations of one forward pass.

    ``preacts[k]`` and ``acts[k]`` belong to hidden layer ``k + 1``; ``inputs``
    is ``h_0``.
    """

    inputs: np.ndarray
    preacts: list
    acts: list
    output: float


@dataclass
class SignPattern:
    """Boolean diagonals of the ReLU sign matrices, one per hidden layer."""

    masks: list

    def apply(self, preacts):
        return [np.where(mk, z, 0.0) for mk, z in zip(self.masks, preacts)]


def init_weights(cfg, rng, symmetric=False):
    """Draw NTK-initialised weights.

    With ``symmetric=True`` the hidden units come in two identical halves whose
    output weights have opposite signs, so ``f(x; W0) == 0`` for every ``x``.
    For ``L = 2`` each entry keeps exactly the standard marginal law; deeper
    symmetric nets use block-diagonal hidden layers.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    if not symmetric:
        layers = [sample_gaussian(gen, *shape, 2.0 / cfg.m) for shape in cfg.shapes[:-1]]
        layers.append(sample_gaussian(gen, 1, cfg.m, 1.0))
        return WeightSet(layers, cfg)

    if cfg.m % 2:
        raise InvalidArgumentError("symmetric initialisation needs an even width")
    h = cfg.m // 2
    first = sample_gaussian(gen, h, cfg.d, 4.0 / cfg.m)
    # duplicated rows: scale by 1/sqrt(2) so entries are N(0, 2/m) and ||h_1|| ~ ||x||
    layers = [np.vstack([first, first]) / np.sqrt(2.0)]
    for _ in range(cfg.L - 2):
        block = sample_gaussian(gen, h, h, 4.0 / cfg.m)
        w = np.zeros((cfg.m, cfg.m))
        w[:h, :h] = block
        w[h:, h:] = block
        layers.append(w)
    last = sample_gaussian(gen, 1, h, 1.0)
    layers.append(np.hstack([last, -last]))
    return WeightSet(layers, cfg)


def _check_input(W, x):
    x = np.asarray(x, dtype=float)
    d = W.config.d
    if x.ndim != 1 or x.shape[0] != d:
        raise InvalidArgumentError(f"input must be a vector of length {d}, got shape {x.shape}")
    return x


def _check_batch(W, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != W.config.d:
        raise InvalidArgumentError(f"inputs must have {W.config.d} columns, got shape {X.shape}")
    return X


def forward(W, x):
    """Forward pass for a single input, keeping every activation."""
    x = _check_input(W, x)
    preacts, acts = [], []
    h = x
    for w in W.layers[:-1]:
        z = w @ h
        h = np.maximum(z, 0.0)
        preacts.append(z)
        acts.append(h)
    out = float(W.layers[-1][0] @ h)
    return ForwardRecord(x, preacts, acts, out)


def forward_batch(W, X):
    """Batched forward pass; returns ``(outputs, preacts, acts)`` with row-wise samples."""
    X = _check_batch(W, X)
    preacts, acts = [], []
    H = X
    for w in W.layers[:-1]:
        Z = H @ w.T
        H = np.maximum(Z, 0.0)
        preacts.append(Z)
        acts.append(H)
    out = H @ W.layers[-1][0]
    return out, preacts, acts


def predict(W, X):
    """Network outputs for each row of ``X``."""
    return forward_batch(W, X)[0]


def sign_pattern(W, x):
    """Activation masks ``1{W_l h_{l-1} >= 0}`` for every hidden layer."""
    rec = forward(W, x)
    return SignPattern([z >= 0 for z in rec.preacts])


def _backward_vectors(W, preacts):
    # b_{L-1} = D_{L-1} W_L^T, b_l = D_l W_{l+1}^T b_{l+1}; rows index samples.
    n = preacts[0].shape[0]
    b = np.broadcast_to(W.layers[-1][0], (n, W.config.m)) * (preacts[-1] >= 0)
    bs = [b]
    for l in range(W.config.L - 2, 0, -1):
        b = (b @ W.layers[l]) * (preacts[l - 1] >= 0)
        bs.append(b)
    return bs[::-1]


def gradient(W, x):
    """Per-layer derivative of the scalar output with respect to each ``W_l``.

    Layer ``l < L`` gets the outer product ``b_l h_{l-1}^T``; the output layer
    gets ``h_{L-1}^T``. Masks use the ``>= 0`` convention, so a pre-activation
    sitting exactly on the kink counts as active.
    """
    rec = forward(W, x)
    bs = _backward_vectors(W, [z[None, :] for z in rec.preacts])
    ins = [rec.inputs] + rec.acts[:-1]
    grads = [np.outer(b[0], h) for b, h in zip(bs, ins)]
    grads.append(rec.acts[-1][None, :].copy())
    return grads


def batch_backward(W, X):
    """Forward and backward factors for a batch.

    Returns ``(outputs, ins, bs)`` where the gradient of sample ``i`` with
    respect to layer ``l`` (0-based, hidden) is ``outer(bs[l][i], ins[l][i])``
    and with respect to the output layer is ``ins[-1][i]``. ``ins`` has ``L``
    entries (``ins[0] = X``) and ``bs`` has ``L - 1``.
    """
    out, preacts, acts = forward_batch(W, X)
    bs = _backward_vectors(W, preacts)
    ins = [_check_batch(W, X)] + acts
    return out, ins, bs


def input_gradient(W, X):
    """Rows of ``df/dx`` for each input row."""
    _, ins, bs = batch_backward(W, X)
    return bs[0] @ W.layers[0]


def weight_distance(W, W0):
    """Frobenius distance between corresponding layers."""
    if len(W) != len(W0):
        raise InvalidArgumentError("weight sets have different depths")
    out = []
    for a, b in zip(W, W0):
        if a.shape != b.shape:
            raise InvalidArgumentError(f"layer shapes differ: {a.shape} vs {b.shape}")
        out.append(float(np.linalg.norm(a - b)))
    return np.array(out)


def in_neighborhood(W, W0, omega):
    """``(inside, max_distance)`` for the per-layer Frobenius ball of radius ``omega``."""
    dmax = float(weight_distance(W, W0).max())
    return dmax <= omega, dmax


def spectral_norm(A, max_iter=1000, rtol=1e-10):
    """Largest singular value by power iteration on ``A^T A``.

    Starts from the normalised all-ones vector. Falls back to a random start
    if that vector happens to lie in the null space.
    """
    A = np.asarray(A, dtype=float)
    v = np.ones(A.shape[1]) / np.sqrt(A.shape[1])
    if np.linalg.norm(A @ v) == 0.0:
        v = np.random.default_rng(0).standard_normal(A.shape[1])
        v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(max_iter):
        u = A @ v
        nu = np.linalg.norm(u)
        if nu == 0.0:
            return 0.0
        w = A.T @ (u / nu)
        nw = np.linalg.norm(w)
        v = w / nw
        if abs(nw - sigma) <= rtol * nw:
            return float(nw)
        sigma = nw
    return float(sigma)


def lipschitz_estimates(W, probe_inputs):
    """Upper and lower estimates of the input-Lipschitz constant of ``f``.

    The upper estimate is the product of layer spectral norms (ReLU is
    1-Lipschitz). The lower estimate is the largest input-gradient norm over
    the probe rows, which can never exceed the upper one.
    """
    P = _check_batch(W, probe_inputs)
    if P.shape[0] == 0:
        raise InvalidArgumentError("probe set is empty")
    upper = float(np.prod([spectral_norm(w) for w in W.layers]))
    lower = float(np.max(np.linalg.norm(input_gradient(W, P), axis=1)))
    # lower <= upper holds exactly; clip rounding-level excess
    return upper, min(lower, upper)


def linearization_residual(W0, W, X):
    """``|f(x;W) - f(x;W0) - <grad f(x;W0), W - W0>|`` for each row of ``X``."""
    f0, ins, bs = batch_backward(W0, X)
    f1 = predict(W, X)
    deltas = [a - b for a, b in zip(W.layers, W0.layers)]
    lin = np.zeros(len(f0))
    for l, dw in enumerate(deltas[:-1]):
        lin += np.einsum("ij,jk,ik->i", bs[l], dw, ins[l])
    lin += ins[-1] @ deltas[-1][0]
    return np.abs(f1 - f0 - lin)


_MAGIC = b"NTKW"


def save_weights(W, path):
    """Write ``path`` (little-endian float64 payload) and ``path.json`` (shapes)."""
    path = Path(path)
    c = W.config
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQQ", c.L, c.m, c.d))
        for w in W.layers:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
    sidecar = {"L": c.L, "m": c.m, "d": c.d, "shapes": [list(s) for s in c.shapes], "dtype": "<f8"}
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))
    return path


def load_weights(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != _MAGIC:
        raise InvalidArgumentError(f"{path} is not a weight file")
    L, m, d = struct.unpack("<QQQ", raw[4:28])
    cfg = NetConfig(int(L), int(m), int(d))
    payload = np.frombuffer(raw[28:], dtype="<f8")
    expected = sum(r * c for r, c in cfg.shapes)
    if payload.size != expected:
        raise InvalidArgumentError(f"{path} holds {payload.size} values, expected {expected}")
    layers, pos = [], 0
    for r, c in cfg.shapes:
        layers.append(payload[pos:pos + r * c].reshape(r, c).copy())
        pos += r * c
    return WeightSet(layers, cfg)

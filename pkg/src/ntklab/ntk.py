"""Kernel builders: arc-cosine functions, limiting and empirical NTK, Laplace.

A *kernel function* throughout the package is any callable
``kernel(A, B) -> (len(A), len(B))`` Gram block over the rows of two input
matrices. :func:`ntk_kernel`, :func:`laplace` and :func:`dot_product` build
such callables.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InsufficientDataError, InvalidArgumentError
from .network import batch_backward
from .numerics import as_symmetric, sym_eigvals

__all__ = [
    "KernelMatrix",
    "kappa0",
    "kappa1",
    "kappa",
    "ntk_2layer_closed",
    "ntk_cross",
    "limiting_ntk",
    "empirical_ntk",
    "laplace_kernel",
    "ntk_kernel",
    "laplace",
    "dot_product",
    "linear",
    "assumption_gap",
    "confusion_matrix",
    "diagonal_dominance",
]

_CLIP = 1e-12


def _clip_cos(u):
    u = np.asarray(u, dtype=float)
    if np.any(np.abs(u) > 1.0 + _CLIP) or not np.all(np.isfinite(u)):
        raise InvalidArgumentError("cosine argument outside [-1, 1]")
    return np.clip(u, -1.0, 1.0)


def kappa0(u):
    """Arc-cosine function of order 0: ``(pi - arccos u) / pi``."""
    u = _clip_cos(u)
    out = (np.pi - np.arccos(u)) / np.pi
    return float(out) if out.ndim == 0 else out


def kappa1(u):
    """Arc-cosine function of order 1: ``(u (pi - arccos u) + sqrt(1 - u^2)) / pi``."""
    u = _clip_cos(u)
    out = (u * (np.pi - np.arccos(u)) + np.sqrt(1.0 - u * u)) / np.pi
    return float(out) if out.ndim == 0 else out


def kappa(u):
    """Two-layer NTK profile ``u * kappa0(u) + kappa1(u)`` on unit-norm inputs."""
    u = _clip_cos(u)
    out = u * kappa0(u) + kappa1(u)
    return float(out) if np.ndim(out) == 0 else out


def _nonzero_norm(x):
    nx = float(np.linalg.norm(x))
    if nx == 0.0:
        raise InvalidArgumentError("zero vector has no direction")
    return nx


def ntk_2layer_closed(x1, x2):
    """Two-layer limiting NTK ``|x1| |x2| kappa(cos)`` for a single pair."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    n1, n2 = _nonzero_norm(x1), _nonzero_norm(x2)
    u = np.clip(float(x1 @ x2) / (n1 * n2), -1.0, 1.0)
    return n1 * n2 * kappa(u)


@dataclass
class KernelMatrix:
    """Symmetric Gram matrix tagged with how it was built."""

    gram: np.ndarray
    provenance: str
    meta: dict = field(default_factory=dict)

    PROVENANCES = ("empirical", "limiting", "laplace", "dot_product", "linear")

    def __post_init__(self):
        if self.provenance not in self.PROVENANCES:
            raise InvalidArgumentError(f"unknown provenance {self.provenance!r}")
        self.gram = as_symmetric(self.gram, tol=1e-9)
        self.gram.setflags(write=False)

    @property
    def n(self):
        return self.gram.shape[0]

    def eigvals(self):
        return sym_eigvals(self.gram)

    def min_eig(self):
        return float(self.eigvals()[0])

    def summary(self):
        w = self.eigvals()
        return {
            "provenance": self.provenance,
            "n": int(self.n),
            "trace": float(np.trace(self.gram)),
            "min_eigenvalue": float(w[0]),
            "max_eigenvalue": float(w[-1]),
            "meta": self.meta,
        }

    def to_csv(self, path):
        np.savetxt(path, self.gram, delimiter=",", fmt="%.17g")
        return path

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
        return path


def _row_norms(X, what="X"):
    nrm = np.linalg.norm(X, axis=1)
    if np.any(nrm == 0.0):
        raise InvalidArgumentError(f"{what} has a zero-norm row")
    return nrm


def ntk_cross(A, B, L):
    """Limiting NTK block ``K(A_i, B_j)`` of a depth-``L`` ReLU network.

    Runs the layer recursion on the joint covariance of each pair. Because the
    ReLU kernels are positively homogeneous, the diagonal entries stay equal to
    the squared input norms at every layer, so each pair only tracks its
    correlation ``rho``:

    ``G_l = |a||b| kappa1(rho_{l-1})``, ``Gdot_l = kappa0(rho_{l-1})`` and
    ``K_l = G_l + K_{l-1} * Gdot_l`` with ``K_1 = <a, b>``.
    """
    if L < 2:
        raise InvalidArgumentError("depth L must be >= 2")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    na, nb = _row_norms(A, "A"), _row_norms(B, "B")
    scale = np.outer(na, nb)
    G = A @ B.T
    K = G.copy()
    # arccos is ill-conditioned at 1: pin self-pairs so the diagonal is exact
    same = A.shape == B.shape and np.array_equal(A, B)
    for _ in range(2, L + 1):
        rho = np.clip(G / scale, -1.0, 1.0)
        if same:
            np.fill_diagonal(rho, 1.0)
        G = scale * kappa1(rho)
        K = G + K * kappa0(rho)
    return K


def limiting_ntk(X, L):
    """Limiting NTK Gram matrix on the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("X has non-finite entries")
    K = ntk_cross(X, X, L)
    return KernelMatrix(0.5 * (K + K.T), "limiting", {"L": int(L)})


def empirical_ntk(W, X, parametrization="ntk"):
    """Finite-width NTK ``<grad f(x_i), grad f(x_j)>`` at the weights ``W``.

    ``parametrization="ntk"`` differentiates with respect to the standard
    normal variables behind each hidden layer (this is the version that
    converges to :func:`limiting_ntk`); ``"standard"`` uses the raw weights.
    """
    if parametrization not in ("ntk", "standard"):
        raise InvalidArgumentError(f"unknown parametrization {parametrization!r}")
    _, ins, bs = batch_backward(W, X)
    scales = W.config.ntk_scales() if parametrization == "ntk" else np.ones(W.config.L)
    K = scales[-1] * (ins[-1] @ ins[-1].T)
    for l, b in enumerate(bs):
        K += scales[l] * (b @ b.T) * (ins[l] @ ins[l].T)
    return KernelMatrix(0.5 * (K + K.T), "empirical", {"L": W.config.L, "m": W.config.m,
                                                      "parametrization": parametrization})


def laplace_kernel(x1, x2, c):
    """``exp(-c |x1 - x2|)``."""
    if not c > 0:
        raise InvalidArgumentError("Laplace bandwidth c must be positive")
    diff = np.asarray(x1, dtype=float) - np.asarray(x2, dtype=float)
    return float(np.exp(-c * np.linalg.norm(diff)))


class _Kernel:
    """Callable kernel with a readable repr and a provenance tag."""

    def __init__(self, fn, provenance, **params):
        self._fn = fn
        self.provenance = provenance
        self.params = params

    def __call__(self, A, B=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = A if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        return self._fn(A, B)

    def gram(self, X):
        K = self(X)
        return KernelMatrix(0.5 * (K + K.T), self.provenance, dict(self.params))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{self.provenance}_kernel({args})"


def ntk_kernel(L=2):
    """Limiting NTK as a kernel function."""
    return _Kernel(lambda A, B: ntk_cross(A, B, L), "limiting", L=int(L))


def laplace(c=1.0):
    """Laplace kernel ``exp(-c |a - b|)`` as a kernel function."""
    if not c > 0:
        raise InvalidArgumentError("Laplace bandwidth c must be positive")

    def fn(A, B):
        sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
        return np.exp(-c * np.sqrt(np.maximum(sq, 0.0)))

    return _Kernel(fn, "laplace", c=float(c))


def dot_product(k, name="dot_product"):
    """Kernel ``k(<a, b>)`` for inputs on the unit sphere.

    On the sphere the Laplace kernel is the instance
    ``k(u) = exp(-c sqrt(2 (1 - u)))``.
    """
    def fn(A, B):
        return k(np.clip(A @ B.T, -1.0, 1.0))

    return _Kernel(fn, "dot_product", k=name)


def linear():
    """Plain inner-product kernel."""
    return _Kernel(lambda A, B: A @ B.T, "linear")


def confusion_matrix(X, labels, kernel):
    """Mean kernel value between every pair of classes, excluding self-pairs.

    Returns ``(classes, table)`` with ``table[a, b]`` the average of
    ``kernel(x_i, x_j)`` over ``i != j`` with labels ``classes[a]`` and
    ``classes[b]``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    if labels.shape[0] != X.shape[0]:
        raise InvalidArgumentError("labels and inputs differ in length")
    classes, counts = np.unique(labels, return_counts=True)
    for c, k in zip(classes, counts):
        if k < 2:
            raise InsufficientDataError(c.item() if hasattr(c, "item") else c, int(k))
    K = np.asarray(kernel(X, X), dtype=float)
    onehot = (labels[:, None] == classes[None, :]).astype(float)
    sums = onehot.T @ K @ onehot
    pair_counts = np.outer(counts, counts).astype(float)
    # drop the diagonal i == j from same-class blocks
    diag_sums = onehot.T @ np.diag(K)
    sums[np.diag_indices_from(sums)] -= diag_sums
    pair_counts[np.diag_indices_from(pair_counts)] -= counts
    return classes, sums / pair_counts


def assumption_gap(X, labels, kernel):
    """Same-class minus different-class mean kernel value.

    Returns ``(gap, confusion)``; for more than two classes the gap compares
    the pooled same-class pairs to the pooled cross-class pairs.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    labels = np.asarray(labels)
    classes, table = confusion_matrix(X, labels, kernel)
    counts = np.array([(labels == c).sum() for c in classes], dtype=float)
    pairs = np.outer(counts, counts)
    np.fill_diagonal(pairs, counts * (counts - 1))
    same = np.trace(table * pairs) / np.trace(pairs)
    off = ~np.eye(len(classes), dtype=bool)
    diff = (table * pairs)[off].sum() / pairs[off].sum()
    return float(same - diff), table


def diagonal_dominance(table):
    """Number of rows whose diagonal entry exceeds every other entry in the row."""
    table = np.asarray(table, dtype=float)
    count = 0
    for i in range(table.shape[0]):
        others = np.delete(table[i], i)
        if others.size == 0 or table[i, i] > others.max():
            count += 1
    return count

"""Synthetic data: noisy Gaussian mixtures, sphere samples, RKHS targets, IDX files."""
from __future__ import annotations

import csv
import gzip
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import FormatError, InvalidArgumentError, ZeroImageError
from .numerics import RngStream

__all__ = [
    "MixtureSpec",
    "MixtureDataset",
    "RkhsTarget",
    "sample_mixture",
    "sample_sphere",
    "make_rkhs_target",
    "eval_rkhs_target",
    "sample_regression",
    "load_idx",
    "write_idx",
    "save_mixture_csv",
]


def _gen(rng):
    return rng.generator() if isinstance(rng, RngStream) else rng


@dataclass(frozen=True)
class MixtureSpec:
    """Parameters of the two-cluster mixture with label flips.

    ``mu`` defaults to ``3 e_1``. Cluster noise is standard Gaussian, which is
    1-strongly log-concave with ``E|z|^2 = d``, hence ``lambda_lc = 1`` and
    ``kappa_data`` just below 1 by default.
    """

    d: int = 64
    mu: tuple | None = None
    eta: float = 0.1
    lambda_lc: float = 1.0
    kappa_data: float = 0.9
    c_norm: float = 1.0

    def __post_init__(self):
        if self.d < 1:
            raise InvalidArgumentError("d must be >= 1")
        if not 0.0 <= self.eta < 0.5:
            raise InvalidArgumentError("noise rate eta must lie in [0, 0.5)")
        if not (self.lambda_lc > 0 and self.kappa_data > 0 and self.c_norm > 0):
            raise InvalidArgumentError("lambda_lc, kappa_data and c_norm must be positive")
        if self.mu is not None and len(self.mu) != self.d:
            raise InvalidArgumentError(f"mu has length {len(self.mu)}, expected {self.d}")

    @property
    def mean(self):
        if self.mu is None:
            m = np.zeros(self.d)
            m[0] = 3.0
            return m
        return np.asarray(self.mu, dtype=float)


@dataclass
class MixtureDataset:
    X: np.ndarray
    y: np.ndarray
    y_clean: np.ndarray
    noise_mask: np.ndarray
    scale: float = 1.0

    def __len__(self):
        return self.X.shape[0]

    @property
    def clean_indices(self):
        return np.flatnonzero(~self.noise_mask)

    @property
    def noisy_indices(self):
        return np.flatnonzero(self.noise_mask)


def sample_mixture(spec, n, rng, scale=None):
    """Draw ``n`` labelled points from the noisy mixture.

    Each point takes a uniform clean label ``s``, features ``z + s * mu`` with
    ``z ~ N(0, I)``, and an observed label flipped with probability ``eta``.
    The whole sample is then multiplied by ``c_norm / max_i |x_i|`` so the
    largest row norm equals ``c_norm``. Pass ``scale`` to reuse the training
    sample's factor for a test split drawn from the same law.
    """
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    gen = _gen(rng)
    y_clean = gen.choice(np.array([-1, 1]), size=n)
    z = gen.standard_normal((n, spec.d))
    X = z + y_clean[:, None] * spec.mean[None, :]
    flip = gen.random(n) < spec.eta
    y = np.where(flip, -y_clean, y_clean)
    if scale is None:
        scale = spec.c_norm / np.linalg.norm(X, axis=1).max()
    return MixtureDataset(X * scale, y, y_clean, flip, float(scale))


def sample_sphere(n, d, rng):
    """``n`` i.i.d. points uniform on the unit sphere in ``R^d``."""
    if n < 1 or d < 1:
        raise InvalidArgumentError("n and d must be >= 1")
    gen = _gen(rng)
    G = gen.standard_normal((n, d))
    nrm = np.linalg.norm(G, axis=1)
    while np.any(nrm == 0.0):
        bad = nrm == 0.0
        G[bad] = gen.standard_normal((int(bad.sum()), d))
        nrm = np.linalg.norm(G, axis=1)
    return G / nrm[:, None]


@dataclass
class RkhsTarget:
    """Finite kernel expansion ``f(x) = sum_j coeffs_j k(x, centers_j)``."""

    centers: np.ndarray
    coeffs: np.ndarray
    sigma_eps: float = 0.0
    kernel: object = None
    rkhs_norm: float = field(default=float("nan"))

    def __post_init__(self):
        self.centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        self.coeffs = np.asarray(self.coeffs, dtype=float).ravel()
        if self.centers.shape[0] != self.coeffs.shape[0]:
            raise InvalidArgumentError("one coefficient per center is required")
        if not np.allclose(np.linalg.norm(self.centers, axis=1), 1.0, atol=1e-12, rtol=0):
            raise InvalidArgumentError("centers must have unit norm")
        if self.sigma_eps < 0:
            raise InvalidArgumentError("sigma_eps must be non-negative")
        if self.kernel is not None and np.isnan(self.rkhs_norm):
            Kzz = self.kernel(self.centers, self.centers)
            self.rkhs_norm = float(np.sqrt(max(self.coeffs @ Kzz @ self.coeffs, 0.0)))

    def __call__(self, X, kernel=None):
        kernel = kernel or self.kernel
        if kernel is None:
            raise InvalidArgumentError("no kernel attached to the target")
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return kernel(X, self.centers) @ self.coeffs


def make_rkhs_target(d, kernel, rng, k=16, sigma_eps=0.0):
    """Random target with ``k`` sphere centers and ``N(0, 1/k)`` coefficients."""
    gen = _gen(rng)
    centers = sample_sphere(k, d, gen)
    coeffs = gen.normal(0.0, np.sqrt(1.0 / k), size=k)
    return RkhsTarget(centers, coeffs, sigma_eps, kernel)


def eval_rkhs_target(target, x, kernel=None):
    """Evaluate the target at a single unit-norm point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgumentError("expected a single input vector")
    if abs(np.linalg.norm(x) - 1.0) > 1e-9:
        raise InvalidArgumentError("input must lie on the unit sphere")
    return float(target(x[None, :], kernel)[0])


def sample_regression(target, n, rng):
    """Sphere inputs with targets ``f(x) + N(0, sigma_eps^2)`` noise."""
    gen = _gen(rng)
    X = sample_sphere(n, target.centers.shape[1], gen)
    f = target(X)
    y = f + target.sigma_eps * gen.standard_normal(n) if target.sigma_eps > 0 else f.copy()
    return X, y, f


_IMAGE_MAGIC = 2051
_LABEL_MAGIC = 2049


def _read_bytes(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _header(raw, magic, ndims, path):
    need = 4 + 4 * ndims
    if len(raw) < need:
        raise FormatError(f"{path}: truncated header", len(raw))
    found = struct.unpack(">I", raw[:4])[0]
    if found != magic:
        raise FormatError(f"{path}: bad magic number {found}, expected {magic}", 0)
    return struct.unpack(">" + "I" * ndims, raw[4:need]), need


def load_idx(path_images, path_labels):
    """Read an IDX image/label pair (optionally gzip-compressed).

    Pixels are scaled to ``[0, 1]`` and each image row is then normalised to
    unit Euclidean norm.
    """
    img = _read_bytes(path_images)
    lab = _read_bytes(path_labels)
    (n_img, rows, cols), off_i = _header(img, _IMAGE_MAGIC, 3, path_images)
    (n_lab,), off_l = _header(lab, _LABEL_MAGIC, 1, path_labels)
    size = rows * cols
    if len(img) < off_i + n_img * size:
        raise FormatError(f"{path_images}: truncated pixel payload", len(img))
    if len(lab) < off_l + n_lab:
        raise FormatError(f"{path_labels}: truncated label payload", len(lab))
    if n_img != n_lab:
        raise FormatError(f"image count {n_img} does not match label count {n_lab}", 4)
    pixels = np.frombuffer(img, dtype=np.uint8, count=n_img * size, offset=off_i)
    X = pixels.reshape(n_img, size).astype(float) / 255.0
    labels = np.frombuffer(lab, dtype=np.uint8, count=n_lab, offset=off_l).astype(int)
    nrm = np.linalg.norm(X, axis=1)
    zero = np.flatnonzero(nrm == 0.0)
    if zero.size:
        i = int(zero[0])
        raise ZeroImageError(f"{path_images}: image {i} is all zeros and cannot be normalised",
                             off_i + i * size)
    return X / nrm[:, None], labels


def write_idx(path_images, path_labels, images, labels, rows=28, cols=28, compress=False):
    """Write uint8 images (``n x rows*cols``) and labels as an IDX pair."""
    images = np.asarray(images)
    labels = np.asarray(labels)
    if images.shape[0] != labels.shape[0]:
        raise InvalidArgumentError("images and labels differ in length")
    if images.shape[1] != rows * cols:
        raise InvalidArgumentError(f"images must have {rows * cols} pixels per row")
    n = images.shape[0]
    img = struct.pack(">IIII", _IMAGE_MAGIC, n, rows, cols) + images.astype(np.uint8).tobytes()
    lab = struct.pack(">II", _LABEL_MAGIC, n) + labels.astype(np.uint8).tobytes()
    opener = gzip.compress if compress else (lambda b: b)
    Path(path_images).write_bytes(opener(img))
    Path(path_labels).write_bytes(opener(lab))


def save_mixture_csv(data, path):
    """Write ``x0..x{d-1},y,y_clean,is_noisy`` rows."""
    d = data.X.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{j}" for j in range(d)] + ["y", "y_clean", "is_noisy"])
        for x, y, yc, nz in zip(data.X, data.y, data.y_clean, data.noise_mask):
            w.writerow([repr(float(v)) for v in x] + [int(y), int(yc), int(nz)])
    return path

"""Seeded sampling and dense symmetric linear algebra.

Everything else in the package draws randomness through :class:`RngStream`
and solves kernel systems through :func:`psd_solve`, so reproducibility and
numerical tolerances are decided here once.
"""
from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import InvalidArgumentError, SingularMatrixError

__all__ = [
    "RngStream",
    "as_symmetric",
    "sample_gaussian",
    "sym_eig_min",
    "sym_eigvals",
    "psd_solve",
    "default_jitter",
]

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by ``(seed, stream_id)``.

    Streams are built on :class:`numpy.random.SeedSequence` with the stream id
    as spawn key, so distinct ids give independent PCG64 states and the same
    pair always replays the same sequence.
    """

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise InvalidArgumentError("seed and stream_id must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        """Return a fresh generator positioned at the start of this stream."""
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, name: str | int) -> "RngStream":
        """Derive a named sub-stream (``"data"``, ``"init"``, ``"sgd"``, ...)."""
        if isinstance(name, str):
            tag = zlib.crc32(name.encode("utf-8"))
        else:
            tag = int(name)
        sid = (self.stream_id * 0x9E3779B97F4A7C15 + tag + 1) & _MASK64
        return RngStream(self.seed, sid)


def _check_finite(A, what="matrix"):
    if not np.all(np.isfinite(A)):
        raise InvalidArgumentError(f"{what} has non-finite entries")


def as_symmetric(A, tol=1e-10):
    """Validate a square matrix and return an exactly symmetric float copy.

    Entries may disagree with their transpose by at most ``tol`` times the
    largest magnitude; the result is the symmetric part.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise InvalidArgumentError(f"expected a non-empty square matrix, got shape {A.shape}")
    _check_finite(A)
    scale = max(float(np.max(np.abs(A))), 1.0)
    if np.max(np.abs(A - A.T)) > tol * scale:
        raise InvalidArgumentError("matrix is not symmetric")
    return 0.5 * (A + A.T)


def sample_gaussian(rng, rows, cols, variance):
    """Draw a ``rows x cols`` matrix of i.i.d. ``N(0, variance)`` entries."""
    if int(rows) < 1 or int(cols) < 1:
        raise InvalidArgumentError("rows and cols must be >= 1")
    if not variance > 0 or not np.isfinite(variance):
        raise InvalidArgumentError("variance must be positive and finite")
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return gen.normal(0.0, np.sqrt(variance), size=(int(rows), int(cols)))


def sym_eigvals(A):
    """All eigenvalues of a symmetric matrix in ascending order."""
    A = as_symmetric(A)
    # LAPACK syevd: Householder tridiagonalisation followed by divide and conquer.
    return scipy.linalg.eigh(A, eigvals_only=True, check_finite=False)


def sym_eig_min(A):
    """Smallest eigenvalue of a symmetric matrix."""
    return float(sym_eigvals(A)[0])


def default_jitter(A):
    """Diagonal guard ``1e-10 * trace(A) / n`` used for kernel solves."""
    A = np.asarray(A, dtype=float)
    return 1e-10 * abs(float(np.trace(A))) / A.shape[0]


def _residual_ok(A, x, b, rtol=1e-8):
    r = np.linalg.norm(A @ x - b)
    scale = np.linalg.norm(A, 2) * np.linalg.norm(x) + np.linalg.norm(b)
    return r <= rtol * max(scale, np.finfo(float).tiny)


def psd_solve(A, b, jitter=0.0):
    """Solve ``(A + jitter * I) x = b`` for symmetric positive semi-definite ``A``.

    A Cholesky factorisation is tried first. If it fails, or its residual is
    outside ``1e-8 * (|A| |x| + |b|)``, the solve falls back to an
    eigendecomposition pseudo-inverse that drops eigenvalues below
    ``n * eps * |A|``. If that still misses the residual bound a
    :class:`SingularMatrixError` is raised.

    ``b`` may be a vector or an ``n x k`` matrix of right-hand sides.
    """
    if jitter < 0 or not np.isfinite(jitter):
        raise InvalidArgumentError("jitter must be a finite non-negative number")
    A = as_symmetric(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if b.shape[0] != n:
        raise InvalidArgumentError(f"right-hand side has {b.shape[0]} rows, matrix has {n}")
    _check_finite(b, "right-hand side")
    M = A + jitter * np.eye(n) if jitter else A

    try:
        c, low = scipy.linalg.cho_factor(M, lower=True, check_finite=False)
        x = scipy.linalg.cho_solve((c, low), b, check_finite=False)
        if np.all(np.isfinite(x)) and _residual_ok(M, x, b):
            return x
    except np.linalg.LinAlgError:
        pass

    w, V = scipy.linalg.eigh(M, check_finite=False)
    cutoff = n * np.finfo(float).eps * max(abs(w[0]), abs(w[-1]))
    keep = w > cutoff
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    coef = V.T @ b
    x = V @ (inv[:, None] * coef if coef.ndim == 2 else inv * coef)
    if not _residual_ok(M, x, b):
        raise SingularMatrixError("system is numerically singular", float(w[0]))
    return x

"""Minimum-eigenvalue bounds for the limiting NTK and related spectral tools."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate

from .datagen import sample_sphere
from .exceptions import InvalidArgumentError
from .ntk import limiting_ntk
from .numerics import RngStream, sym_eig_min, sym_eigvals

__all__ = [
    "C_ABS",
    "BoundInputs",
    "SpectrumReport",
    "hermite_coefficient",
    "hermite_mu1",
    "ntk_lower_bound",
    "cov_min_eig_bound",
    "verify_ntk_bound",
    "effective_dimension",
    "linearized_gram",
    "decay_spectrum",
    "table1_breakpoints",
    "trend_table",
    "save_reports_csv",
]

C_ABS = 2.0 ** 3.5 * math.sqrt(math.log(9.0))


def hermite_coefficient(k, fn=None):
    """``E[fn(g) He_k(g)] / sqrt(k!)`` for ``g ~ N(0, 1)``, by adaptive quadrature.

    ``fn`` defaults to ReLU. Uses the probabilists' Hermite polynomials.
    """
    fn = fn or (lambda t: max(t, 0.0))
    he = np.polynomial.hermite_e.HermiteE.basis(k)
    norm = math.sqrt(math.factorial(k)) * math.sqrt(2.0 * math.pi)

    def integrand(t):
        return fn(t) * he(t) * math.exp(-0.5 * t * t)

    # ReLU vanishes on the negative half-line; integrate both halves for a general fn
    lo, _ = integrate.quad(integrand, -np.inf, 0.0, epsabs=1e-13, epsrel=1e-12)
    hi, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12)
    return (lo + hi) / norm


def hermite_mu1():
    """First Hermite coefficient of ReLU, ``E[relu(g) g] = 1/2``."""
    return hermite_coefficient(1)


@dataclass(frozen=True)
class BoundInputs:
    n: int
    d: int
    mu1: float = 0.5
    c_abs: float = C_ABS

    def __post_init__(self):
        if self.n < 1 or self.d < 1:
            raise InvalidArgumentError("n and d must be >= 1")
        if not self.mu1 > 0:
            raise InvalidArgumentError("mu1 must be positive")


def _covariance_factor(n, d, c):
    if n >= d:
        return (0.75 - 0.25 * c * math.sqrt(d / n)) ** 2
    return (math.sqrt(d / n) - (c + 6.0) / 4.0) ** 2


def ntk_lower_bound(b):
    """Lower bound on the smallest limiting-NTK eigenvalue.

    ``2 mu1^2 (n/d) (3/4 - (c/4) sqrt(d/n))^2`` when ``n >= d`` and
    ``2 mu1^2 (n/d) (sqrt(d/n) - (c+6)/4)^2`` otherwise.
    """
    return 2.0 * b.mu1 ** 2 * (b.n / b.d) * _covariance_factor(b.n, b.d, b.c_abs)


def cov_min_eig_bound(n, d, lambda_min_sigma, c_abs=C_ABS):
    """Lower bound on ``lambda_min(X^T X / n)`` given ``lambda_min`` of the population covariance."""
    if lambda_min_sigma < 0:
        raise InvalidArgumentError("population eigenvalue must be non-negative")
    return lambda_min_sigma * _covariance_factor(n, d, c_abs)


@dataclass
class SpectrumReport:
    seed: int
    n: int
    d: int
    L: int
    lambda_min_observed: float
    lower_bound: float
    regime: str
    holds: bool
    gram_min_eig: float
    intermediate_bound: float
    intermediate_holds: bool
    effective_dimension: float = float("nan")
    decay: dict | None = None

    def as_row(self):
        return [self.seed, self.n, self.d, self.L, repr(self.lambda_min_observed),
                repr(self.lower_bound), int(self.holds), int(self.intermediate_holds)]


def verify_ntk_bound(n, d, L, seeds, root_seed=0, mu1=None, tol=1e-10):
    """Compare the smallest limiting-NTK eigenvalue with its lower bounds.

    For each seed, ``n`` sphere points in ``R^d`` are drawn; the report records
    the observed ``lambda_min(K)``, the closed-form bound and the intermediate
    inequality ``lambda_min(K) >= 2 mu1^2 lambda_min(X X^T)``. Comparisons allow
    an absolute slack of ``tol`` times the trace per row for rounding.
    """
    if min(n, d, L, seeds) < 1:
        raise InvalidArgumentError("n, d, L and seeds must be >= 1")
    mu1 = hermite_mu1() if mu1 is None else mu1
    bound = ntk_lower_bound(BoundInputs(n, d, mu1))
    reports = []
    for s in range(seeds):
        X = sample_sphere(n, d, RngStream(root_seed, s).child("sphere"))
        K = limiting_ntk(X, L).gram if L >= 2 else X @ X.T
        lam = sym_eig_min(K)
        gram_min = max(sym_eig_min(X @ X.T), 0.0) if n <= d else 0.0
        inter = 2.0 * mu1 ** 2 * gram_min
        slack = tol * np.trace(K) / n
        reports.append(SpectrumReport(
            seed=s, n=n, d=d, L=L,
            lambda_min_observed=lam,
            lower_bound=bound,
            regime="n_ge_d" if n >= d else "n_lt_d",
            holds=bool(lam >= bound - slack),
            gram_min_eig=gram_min,
            intermediate_bound=inter,
            intermediate_holds=bool(lam >= inter - slack),
        ))
    return reports


def save_reports_csv(reports, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "n", "d", "L", "lambda_min", "bound", "holds", "intermediate_holds"])
        for r in reports:
            w.writerow(r.as_row())
    return path


def effective_dimension(eigs, gamma):
    """``sum_i lambda_i / (lambda_i + gamma)^2``."""
    if not gamma > 0:
        raise InvalidArgumentError("gamma must be positive")
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs < 0):
        raise InvalidArgumentError("eigenvalues must be non-negative")
    return float(np.sum(eigs / (eigs + gamma) ** 2))


def linearized_gram(X, alpha=0.0, beta=1.0):
    """``beta X X^T / d + alpha 1 1^T`` for user-supplied linearisation constants."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    return beta * (X @ X.T) / d + alpha * np.ones((n, n))


def decay_spectrum(kind, n, r_star, a=1.0):
    """Model spectra ``n/i``, ``n i^{-2a}`` or ``n e^{-a i}`` truncated after ``r_star``."""
    if not 1 <= r_star <= n:
        raise InvalidArgumentError("need 1 <= r_star <= n")
    i = np.arange(1, n + 1, dtype=float)
    if kind == "harmonic":
        lam = n / i
    elif kind == "polynomial":
        if not a > 0.5:
            raise InvalidArgumentError("polynomial decay needs a > 1/2")
        lam = n * i ** (-2.0 * a)
    elif kind == "exponential":
        if not a > 0:
            raise InvalidArgumentError("exponential decay needs a > 0")
        lam = n * np.exp(-a * i)
    else:
        raise InvalidArgumentError(f"unknown decay kind {kind!r}")
    lam[r_star:] = 0.0
    return lam


def table1_breakpoints(d, c_abs=C_ABS):
    """Sample sizes where the bound changes monotonicity: ``(4/(c+6))^2 d``, ``d``, ``(c^2/9) d``."""
    return (4.0 / (c_abs + 6.0)) ** 2 * d, float(d), c_abs ** 2 / 9.0 * d


_SEGMENTS = (
    ("small", "down"),
    ("below_d", "up"),
    ("above_d", "down"),
    ("large", "up"),
)


def _segment(n, d, c_abs):
    b1, b2, b3 = table1_breakpoints(d, c_abs)
    if n <= b1:
        return 0
    if n < b2:
        return 1
    if n <= b3:
        return 2
    return 3


def trend_table(d, n_grid, mu1=0.5, c_abs=C_ABS):
    """Evaluate the bound on a grid of (possibly fractional) sample sizes.

    Returns a list of dicts with ``n``, ``bound``, ``segment``, the expected
    trend arrow of the segment and the observed direction to the next grid
    point (``"up"``, ``"down"`` or ``None`` at the end or across a segment
    boundary). A ``"branch_jump"`` entry records the discontinuity at ``n = d``.
    """
    n_grid = np.asarray(n_grid, dtype=float)
    if np.any(np.diff(n_grid) <= 0):
        raise InvalidArgumentError("n_grid must be strictly increasing")

    def bound(n):
        return 2.0 * mu1 ** 2 * (n / d) * _covariance_factor(n, d, c_abs)

    rows = []
    for k, n in enumerate(n_grid):
        seg = _segment(n, d, c_abs)
        row = {"n": float(n), "bound": bound(n), "segment": _SEGMENTS[seg][0],
               "expected": _SEGMENTS[seg][1], "observed": None}
        if k + 1 < len(n_grid) and _segment(n_grid[k + 1], d, c_abs) == seg:
            row["observed"] = "up" if bound(n_grid[k + 1]) > row["bound"] else "down"
        rows.append(row)
    left = 2.0 * mu1 ** 2 * (math.sqrt(1.0) - (c_abs + 6.0) / 4.0) ** 2
    right = 2.0 * mu1 ** 2 * (0.75 - 0.25 * c_abs) ** 2
    return {"rows": rows, "branch_jump": {"n": float(d), "left_limit": left, "right_value": right,
                                          "jump": right - left}}


def segment_trends_match(table):
    """True when every observed within-segment direction equals its expected arrow."""
    obs = [(r["observed"], r["expected"]) for r in table["rows"] if r["observed"] is not None]
    return bool(obs) and all(o == e for o, e in obs)


__all__.append("segment_trends_match")

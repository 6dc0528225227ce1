"""Independent brute-force and spectral oracles.

These verify the exactly checkable pieces of the theory from first
principles: moments of without-replacement prefix averages by exhaustive
enumeration, operator constants by dense spectral decompositions, and the
one-epoch contraction factor of full-batch descent-ascent on the 2-D
bilinear instance.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import InputError, NumericalError

ENUMERATION_LIMIT = 8  # 8! = 40320 permutations keeps exact enumeration fast


@dataclass(frozen=True)
class MomentReport:
    """Moments of the prefix average over the first i entries of a permutation.

    For vectors v_1..v_n with mean m and scatter s2 = (1/n) sum ||v_j - m||^2,
    the prefix average over a uniform permutation has mean m and expected
    squared deviation ((n - i) / (n - 1)) * s2 / i. ``enumerated_*`` fields
    hold the empirical values; ``formula_variance`` the closed form.
    """

    prefix_length: int
    enumerated_mean: np.ndarray
    enumerated_variance: float
    formula_variance: float
    method: str = "exact"
    std_error: float = 0.0


def _as_vector_stack(vectors) -> np.ndarray:
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise InputError("vectors must form an (n,) or (n, d) array")
    return arr


def prefix_variance_formula(n: int, i: int, sigma_sq: float) -> float:
    """Closed-form expected squared deviation of the length-i prefix average."""
    if not 1 <= i <= n:
        raise InputError("need 1 <= i <= n")
    if i == n or n == 1:
        return 0.0
    return (n - i) / (n - 1) * sigma_sq / i


def wor_moments_enumerate(vectors, i: int) -> MomentReport:
    """Exact prefix-average moments by enumerating every permutation.

    Refuses n > 8; use wor_moments_montecarlo (or the wor_moments
    dispatcher) for larger n.
    """
    arr = _as_vector_stack(vectors)
    n = arr.shape[0]
    if n > ENUMERATION_LIMIT:
        raise InputError(
            f"exact enumeration is limited to n <= {ENUMERATION_LIMIT}, got {n}"
        )
    if not 1 <= i <= n:
        raise InputError("need 1 <= i <= n")
    mean = arr.mean(axis=0)
    sigma_sq = float(np.mean(np.sum((arr - mean) ** 2, axis=1)))
    total_mean = np.zeros(arr.shape[1])
    total_var = 0.0
    count = 0
    for perm in itertools.permutations(range(n)):
        prefix = arr[list(perm[:i])].mean(axis=0)
        total_mean += prefix
        total_var += float(np.sum((prefix - mean) ** 2))
        count += 1
    return MomentReport(
        prefix_length=i,
        enumerated_mean=total_mean / count,
        enumerated_variance=total_var / count,
        formula_variance=prefix_variance_formula(n, i, sigma_sq),
        method="exact",
    )


def wor_moments_montecarlo(
    vectors, i: int, samples: int = 100_000, rng=None
) -> MomentReport:
    """Monte Carlo estimate of the prefix-average moments.

    ``std_error`` reports the standard error of the estimated variance so
    callers can check agreement within a few standard errors.
    """
    arr = _as_vector_stack(vectors)
    n = arr.shape[0]
    if not 1 <= i <= n:
        raise InputError("need 1 <= i <= n")
    if samples < 2:
        raise InputError("need at least 2 samples")
    rng = np.random.default_rng(rng)
    mean = arr.mean(axis=0)
    sigma_sq = float(np.mean(np.sum((arr - mean) ** 2, axis=1)))
    devs = np.empty(samples)
    total_mean = np.zeros(arr.shape[1])
    for s in range(samples):
        idx = rng.permutation(n)[:i]
        prefix = arr[idx].mean(axis=0)
        total_mean += prefix
        devs[s] = float(np.sum((prefix - mean) ** 2))
    return MomentReport(
        prefix_length=i,
        enumerated_mean=total_mean / samples,
        enumerated_variance=float(devs.mean()),
        formula_variance=prefix_variance_formula(n, i, sigma_sq),
        method="montecarlo",
        std_error=float(devs.std(ddof=1) / math.sqrt(samples)),
    )


def wor_moments(vectors, i: int, samples: int = 100_000, rng=None) -> MomentReport:
    """Exact enumeration when n <= 8, Monte Carlo fallback (with a warning)
    for larger n."""
    arr = _as_vector_stack(vectors)
    if arr.shape[0] <= ENUMERATION_LIMIT:
        return wor_moments_enumerate(arr, i)
    warnings.warn(
        f"n = {arr.shape[0]} > {ENUMERATION_LIMIT}: falling back to Monte Carlo "
        "moment estimation",
        stacklevel=2,
    )
    return wor_moments_montecarlo(arr, i, samples=samples, rng=rng)


def affine_operator_constants(a_mat) -> tuple[float, float]:
    """Tight constants (l, mu) of the affine field z -> A z + b.

    l is the largest singular value of A and mu the smallest eigenvalue of
    its symmetric part; mu <= l always.
    """
    a = np.asarray(a_mat, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InputError("matrix must be square")
    try:
        ell = float(np.linalg.svd(a, compute_uv=False).max())
        mu = float(np.linalg.eigvalsh(0.5 * (a + a.T)).min())
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"spectral factorization failed: {exc}") from exc
    return ell, mu


def full_batch_gda_factor(mu: float, ell: float, alpha: float) -> float:
    """One-step squared-norm contraction factor of simultaneous descent-ascent
    on the 2-D bilinear instance: 1 - 2 a mu + a^2 (mu^2 + (l - mu)^2)."""
    if not (ell > mu > 0):
        raise InputError("require ell > mu > 0")
    if alpha < 0:
        raise InputError("alpha must be >= 0")
    return 1.0 - 2.0 * alpha * mu + alpha**2 * (mu**2 + (ell - mu) ** 2)


def optimal_full_batch_alpha(mu: float, ell: float) -> float:
    """Step size minimizing the bilinear contraction factor: mu/(mu^2+(l-mu)^2)."""
    if not (ell > mu > 0):
        raise InputError("require ell > mu > 0")
    return mu / (mu**2 + (ell - mu) ** 2)

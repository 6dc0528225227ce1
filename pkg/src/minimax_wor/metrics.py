"""Convergence measurements and theoretical rate-bound evaluators."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import InputError, as_point, split_xy
from .problems import (
    QuadraticGame,
    quadratic_best_response,
    two_pl_best_response_value,
    two_pl_objective,
)


@dataclass(frozen=True)
class BoundParams:
    """Problem constants consumed by the rate-bound evaluators.

    For the strongly monotone bounds supply mu, the monotone-case condition
    number is l/mu; for the gradient-dominated bounds supply mu1, mu2 and the
    condition number becomes max(l/mu1, l/mu2). kappa >= 1 always.
    """

    ell: float
    n: int
    mu: float | None = None
    mu1: float | None = None
    mu2: float | None = None
    sigma_sq: float = 0.0
    dist0_sq: float | None = None
    grad_norm0: float | None = None
    v0: float | None = None

    @property
    def kappa(self) -> float:
        if self.mu is not None:
            k = self.ell / self.mu
        elif self.mu1 is not None and self.mu2 is not None:
            k = max(self.ell / self.mu1, self.ell / self.mu2)
        else:
            raise InputError("need mu or (mu1, mu2) to form a condition number")
        if k < 1.0 - 1e-12:
            raise InputError(f"condition number {k:.3g} < 1 is inconsistent")
        return max(k, 1.0)

    def require(self, name: str):
        value = getattr(self, name)
        if value is None:
            raise InputError(f"bound parameter '{name}' is required")
        return value


def relative_sq_distance(z, z0, z_star) -> float:
    """||z - z*||^2 / ||z0 - z*||^2, the normalized squared error of an iterate."""
    z = as_point(z)
    z0 = as_point(z0, z.shape[0])
    z_star = as_point(z_star, z.shape[0])
    denom = float(np.sum((z0 - z_star) ** 2))
    if denom == 0.0:
        raise InputError("z0 must differ from z*")
    return float(np.sum((z - z_star) ** 2)) / denom


def lyapunov_v(game: QuadraticGame, z, lam: float) -> float:
    """Merit value [Phi(x) - Phi*] + lam * [Phi(x) - F(x, y)] for a game.

    Phi is the best-response value; for games with vanishing aggregate linear
    terms the minimax value Phi* is 0 at x = 0. Non-negative for lam > 0 and
    zero exactly at the minimax point.
    """
    if lam <= 0:
        raise InputError("lam must be positive")
    z = as_point(z, game.dim)
    x, y = split_xy(z, game.dx)
    _, phi = quadratic_best_response(game, x)
    f_val = game.objective(x, y)
    return phi + lam * (phi - f_val)


def lyapunov_v_2pl(z, lam: float) -> float:
    """Closed-form merit value for the unbounded 4-D instance."""
    if lam <= 0:
        raise InputError("lam must be positive")
    z = as_point(z, 4)
    phi = two_pl_best_response_value(z[:2])
    return phi + lam * (phi - two_pl_objective(z))


def dist_sq_to_saddle_set_2pl(z) -> float:
    """Squared distance to {x1 + x2 = 0, y1 + y2 = 0} for the 4-D instance.

    The projection onto each hyperplane is analytic, giving
    (x1 + x2)^2 / 2 + (y1 + y2)^2 / 2.
    """
    z = as_point(z, 4)
    return 0.5 * (z[0] + z[1]) ** 2 + 0.5 * (z[2] + z[3]) ** 2


def dist_bound_factor_2pl(mu1: float, mu2: float, ell: float, lam: float) -> float:
    """Factor c such that dist(z, solution set)^2 <= c * V_lam(z)."""
    if min(mu1, mu2, ell, lam) <= 0:
        raise InputError("constants must be positive")
    return max(2.0 / mu1 * (ell**2 / (2.0 * mu2**2) + 1.0), 4.0 / (lam * mu2))


def _log_ge1(arg: float) -> float:
    # every log inside a bound is clamped so bounds stay finite and positive
    return math.log(max(math.e, arg))


def bound_gda_wor(epochs: float, p: BoundParams) -> float:
    """Rate bound for the reshuffled/fixed-permutation simultaneous methods:

    2 exp(-K / 5 kappa^2) ||z0 - z*||^2
      + (2 mu^2 + 8 kappa^2 s* log^3(G sqrt(n) K / mu)) / (mu^2 n K^2),

    with s* the gradient variance at the solution and G = ||nu(z0)||.
    """
    if epochs < 1:
        raise InputError("epochs must be >= 1")
    mu = p.require("mu")
    d0 = p.require("dist0_sq")
    g0 = p.require("grad_norm0")
    kap = p.kappa
    log_term = _log_ge1(g0 * math.sqrt(p.n) * epochs / mu)
    head = 2.0 * math.exp(-epochs / (5.0 * kap**2)) * d0
    tail = (2.0 * mu**2 + 8.0 * kap**2 * p.sigma_sq * log_term**3) / (
        mu**2 * p.n * epochs**2
    )
    return head + tail


def bound_gda_as(epochs: float, p: BoundParams) -> float:
    """Adversarial-ordering rate bound: as bound_gda_wor but without the 1/n
    gain, constant 24, and log argument G K / mu."""
    if epochs < 1:
        raise InputError("epochs must be >= 1")
    mu = p.require("mu")
    d0 = p.require("dist0_sq")
    g0 = p.require("grad_norm0")
    kap = p.kappa
    log_term = _log_ge1(g0 * epochs / mu)
    head = 2.0 * math.exp(-epochs / (5.0 * kap**2)) * d0
    tail = (2.0 * mu**2 + 24.0 * kap**2 * p.sigma_sq * log_term**3) / (
        mu**2 * epochs**2
    )
    return head + tail


def bound_agda_rr(epochs: float, p: BoundParams, c: float = 1.0) -> float:
    """Rate bound for the reshuffled alternating method:

    exp(-K / 365 kappa^3) V0 + (mu1 + c kappa^8 s log^2(V0 sqrt(n) K)) / (mu1 n K^2).

    The constant c is not pinned by the theory; it defaults to 1.0 for
    plotting purposes only, so this bound supports shape comparisons but not
    hard inequality checks.
    """
    if epochs < 1:
        raise InputError("epochs must be >= 1")
    if c <= 0:
        raise InputError("c must be positive")
    mu1 = p.require("mu1")
    v0 = p.require("v0")
    kap = p.kappa
    log_term = _log_ge1(v0 * math.sqrt(p.n) * epochs)
    head = math.exp(-epochs / (365.0 * kap**3)) * v0
    tail = (mu1 + c * kap**8 * p.sigma_sq * log_term**2) / (mu1 * p.n * epochs**2)
    return head + tail


def bound_agda_as(epochs: float, p: BoundParams, c_hat: float = 1.0) -> float:
    """Adversarial-ordering variant of bound_agda_rr: no 1/n gain and log
    argument V0 K."""
    if epochs < 1:
        raise InputError("epochs must be >= 1")
    if c_hat <= 0:
        raise InputError("c_hat must be positive")
    mu1 = p.require("mu1")
    v0 = p.require("v0")
    kap = p.kappa
    log_term = _log_ge1(v0 * epochs)
    head = math.exp(-epochs / (365.0 * kap**3)) * v0
    tail = (mu1 + c_hat * kap**8 * p.sigma_sq * log_term**2) / (mu1 * epochs**2)
    return head + tail


def fit_rate_slope(errors) -> float:
    """Least-squares slope of log(error) against log(K).

    ``errors`` is a sequence of (K, mean_error) pairs with positive errors;
    a slope near -2 indicates a 1/K^2 decay, near -1 a 1/K decay.
    """
    pts = list(errors)
    if len(pts) < 3:
        raise InputError("need at least 3 (K, error) points")
    ks = np.array([float(k) for k, _ in pts])
    es = np.array([float(e) for _, e in pts])
    if np.any(ks <= 0):
        raise InputError("epoch counts must be positive")
    if np.any(es <= 0):
        raise InputError("errors must be positive to fit a log-log slope")
    slope, _ = np.polyfit(np.log(ks), np.log(es), 1)
    return float(slope)

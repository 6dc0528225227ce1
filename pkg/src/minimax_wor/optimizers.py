"""Epoch-structured stochastic algorithms for finite-sum root finding.

Three methods are implemented, all consuming exactly one pass over the
components per epoch (two for the alternating method):

* ``run_gda``  simultaneous descent-ascent: z <- z - a * omega_i(z),
* ``run_ppm``  proximal point: solve z = z_prev - a * omega_i(z) per step,
* ``run_agda`` alternating two-timescale descent-ascent: a full x-pass with y
  frozen at the epoch start, then a full y-pass with x frozen at its new
  value, with second step size b = eta * a.

``theoretical_step_size_gda`` / ``theoretical_step_size_agda`` evaluate the
constant step-size prescriptions under which the epoch iterates provably
converge; the experiment harness sweeps raw step sizes a = gamma / n instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    ConfigurationError,
    DivergenceError,
    FiniteSumOperator,
    InputError,
    NumericalError,
    as_point,
)
from .shuffling import (
    AdversaryContext,
    IndexSchedule,
    ScheduleKind,
    ScheduleSpec,
)


@dataclass(frozen=True)
class RunConfig:
    """Settings for one optimization run.

    epochs             number of full passes K
    step_size          constant step size a (a = 0 is allowed and is a no-op)
    z0                 initial point
    schedule           per-epoch ordering source spec
    second_step_factor eta, so the alternating method uses b = eta * a
    record_every       epoch stride for trajectory records; the final epoch
                       is always recorded
    """

    epochs: int
    step_size: float
    z0: np.ndarray
    schedule: ScheduleSpec
    second_step_factor: float = 1.0
    record_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise InputError("epochs must be >= 1")
        if self.step_size < 0:
            raise InputError("step_size must be >= 0")
        if self.second_step_factor <= 0:
            raise InputError("second_step_factor must be > 0")
        if self.record_every < 1:
            raise InputError("record_every must be >= 1")


@dataclass
class Trajectory:
    """Recorded epoch iterates of one run.

    ``epochs`` holds (k, z) pairs where z is the iterate after epoch k, for
    k at the configured record stride plus the final epoch. ``grad_evals``
    counts component evaluations: n*K for the simultaneous methods, 2*n*K
    for the alternating one.
    """

    epochs: list = field(default_factory=list)
    final: np.ndarray | None = None
    grad_evals: int = 0

    def record(self, k: int, z: np.ndarray):
        self.epochs.append((k, z.copy()))

    def recorded_ks(self) -> list:
        return [k for k, _ in self.epochs]


def _should_record(k: int, cfg: RunConfig) -> bool:
    return k == cfg.epochs or k % cfg.record_every == 0


def _check_finite(z: np.ndarray, epoch: int):
    if not np.all(np.isfinite(z)):
        raise DivergenceError(epoch)


def _adversary_ctx(op, cfg, epoch, z):
    return AdversaryContext(
        epoch=epoch,
        epoch_start=z.copy(),
        op=op,
        alpha=cfg.step_size,
        z_star=op.constants.known_root,
    )


def run_gda(op: FiniteSumOperator, cfg: RunConfig) -> Trajectory:
    """Simultaneous descent-ascent for K epochs under the configured schedule.

    Within epoch k the schedule supplies the ordering tau_k and the update
    z <- z - a * omega_{tau_k(i)}(z) is applied for i = 1..n. Raises
    DivergenceError (carrying the epoch) if an iterate becomes non-finite.
    """
    z = as_point(cfg.z0, op.dim).copy()
    schedule = IndexSchedule(cfg.schedule, op.n)
    alpha = cfg.step_size
    adversarial = cfg.schedule.kind is ScheduleKind.ADVERSARIAL
    traj = Trajectory(grad_evals=op.n * cfg.epochs)
    for k in range(1, cfg.epochs + 1):
        ctx = _adversary_ctx(op, cfg, k, z) if adversarial else None
        order = schedule.epoch_order(k, ctx)
        for i in order:
            z = z - alpha * op.component_grad(int(i), z)
        _check_finite(z, k)
        if _should_record(k, cfg):
            traj.record(k, z)
    traj.final = z.copy()
    return traj


def ppm_implicit_step(
    component,
    z_prev: np.ndarray,
    alpha: float,
    mode: str = "auto",
    affine: tuple | None = None,
    tol: float | None = None,
    max_iter: int = 200,
) -> np.ndarray:
    """Solve the implicit update z = z_prev - alpha * omega(z) for one component.

    Parameters
    ----------
    component : callable z -> omega(z)
        The component field. Ignored by the closed-form mode.
    mode : {"auto", "closed_form_affine", "fixed_point"}
        ``closed_form_affine`` requires ``affine = (A, b)`` with
        omega(z) = A z + b and solves (I + alpha A) z = z_prev - alpha b
        directly. ``fixed_point`` iterates z <- z_prev - alpha*omega(z),
        valid when alpha * lipschitz(omega) < 1. ``auto`` picks the closed
        form when affine data is given.
    tol : float, optional
        Fixed-point stopping tolerance on ||z - zeta(z)||; defaults to
        1e-12 * max(1, ||z_prev||).
    """
    z_prev = np.asarray(z_prev, dtype=np.float64)
    if mode == "auto":
        mode = "closed_form_affine" if affine is not None else "fixed_point"
    if mode == "closed_form_affine":
        if affine is None:
            raise ConfigurationError("closed-form mode needs affine data (A, b)")
        a_mat, b_vec = affine
        try:
            return np.linalg.solve(
                np.eye(z_prev.shape[0]) + alpha * a_mat, z_prev - alpha * b_vec
            )
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"implicit update matrix is singular: {exc}") from exc
    if mode != "fixed_point":
        raise InputError(f"unknown implicit-step mode '{mode}'")
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.linalg.norm(z_prev)))
    z = z_prev
    for _ in range(max_iter):
        z_next = z_prev - alpha * component(z)
        if np.linalg.norm(z_next - z) <= tol:
            return z_next
        z = z_next
    resid = float(np.linalg.norm(z - (z_prev - alpha * component(z))))
    if resid > tol:
        raise NumericalError(
            f"implicit update did not converge in {max_iter} iterations "
            f"(residual {resid:.3e} > tol {tol:.3e})"
        )
    return z


def run_ppm(
    op: FiniteSumOperator,
    cfg: RunConfig,
    mode: str = "auto",
    tol: float | None = None,
    max_iter: int = 200,
) -> Trajectory:
    """Proximal point method for K epochs under the configured schedule.

    Each inner step solves the implicit equation z = z_prev - a*omega_i(z).
    When the operator registers affine components and mode is "auto" or
    "closed_form_affine", the per-component resolvents (I + a A_i)^-1 are
    prefactored once and each step is a single matrix-vector product;
    otherwise every step runs the fixed-point solver. Requires a*l < 1
    whenever the Lipschitz constant l is known.
    """
    z = as_point(cfg.z0, op.dim).copy()
    alpha = cfg.step_size
    ell = op.constants.lipschitz
    if ell is not None and alpha * ell >= 1.0 and alpha > 0:
        raise ConfigurationError(
            f"implicit updates need alpha * l < 1, got {alpha * ell:.3g}"
        )
    use_closed = op.affine is not None and mode in ("auto", "closed_form_affine")
    if mode == "closed_form_affine" and op.affine is None:
        raise ConfigurationError("closed-form mode needs affine components")
    if use_closed:
        eye = np.eye(op.dim)
        try:
            resolvents = np.linalg.inv(eye[None, :, :] + alpha * op.affine.mats)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular implicit update matrix: {exc}") from exc
        offsets = op.affine.offsets
    schedule = IndexSchedule(cfg.schedule, op.n)
    adversarial = cfg.schedule.kind is ScheduleKind.ADVERSARIAL
    traj = Trajectory(grad_evals=op.n * cfg.epochs)
    for k in range(1, cfg.epochs + 1):
        ctx = _adversary_ctx(op, cfg, k, z) if adversarial else None
        order = schedule.epoch_order(k, ctx)
        for i in order:
            i = int(i)
            if use_closed:
                z = resolvents[i] @ (z - alpha * offsets[i])
            else:
                z = ppm_implicit_step(
                    lambda w, i=i: op.component_grad(i, w),
                    z,
                    alpha,
                    mode="fixed_point",
                    tol=tol,
                    max_iter=max_iter,
                )
        _check_finite(z, k)
        if _should_record(k, cfg):
            traj.record(k, z)
    traj.final = z.copy()
    return traj


def run_agda(
    op: FiniteSumOperator,
    cfg: RunConfig,
    schedule_x: ScheduleSpec | None = None,
    schedule_y: ScheduleSpec | None = None,
) -> Trajectory:
    """Alternating two-timescale descent-ascent for K epochs.

    Epoch k first sweeps the x block, x <- x - a * grad_x f_i(x, y_k0), with
    y frozen at the epoch start, ordered by the x schedule; it then sweeps
    the y block, y <- y + b * grad_y f_i(x_kn, y), with x frozen at its new
    value, ordered by the independent y schedule. The second step size is
    b = eta * a with eta = cfg.second_step_factor. Gradients come from the
    stacked field: grad_x f_i = omega_i[:dx], grad_y f_i = -omega_i[dx:].
    """
    if op.dx < 1 or op.dy < 1:
        raise ConfigurationError("alternating method needs both x and y blocks")
    spec_x = schedule_x or cfg.schedule
    spec_y = schedule_y or cfg.schedule
    z = as_point(cfg.z0, op.dim).copy()
    dx = op.dx
    alpha = cfg.step_size
    beta = cfg.second_step_factor * alpha
    sched_x = IndexSchedule(spec_x, op.n)
    sched_y = IndexSchedule(spec_y, op.n)
    traj = Trajectory(grad_evals=2 * op.n * cfg.epochs)
    for k in range(1, cfg.epochs + 1):
        ctx_x = (
            _adversary_ctx(op, cfg, k, z)
            if spec_x.kind is ScheduleKind.ADVERSARIAL
            else None
        )
        order_x = sched_x.epoch_order(k, ctx_x)
        x = z[:dx].copy()
        y0 = z[dx:]
        for i in order_x:
            g = op.component_grad(int(i), np.concatenate([x, y0]))
            x = x - alpha * g[:dx]
        z_mid = np.concatenate([x, y0])
        ctx_y = (
            _adversary_ctx(op, cfg, k, z_mid)
            if spec_y.kind is ScheduleKind.ADVERSARIAL
            else None
        )
        order_y = sched_y.epoch_order(k, ctx_y)
        y = y0.copy()
        for i in order_y:
            g = op.component_grad(int(i), np.concatenate([x, y]))
            y = y - beta * g[dx:]  # stacked field carries -grad_y, so this ascends
        z = np.concatenate([x, y])
        _check_finite(z, k)
        if _should_record(k, cfg):
            traj.record(k, z)
    traj.final = z.copy()
    return traj


def _clamped_log(arg: float) -> float:
    """log of the argument clamped below at e, so the result is >= 1."""
    return math.log(max(math.e, arg))


def theoretical_step_size_gda(
    mu: float,
    ell: float,
    n: int,
    epochs: int,
    grad_norm_at_z0: float,
    adversarial: bool = False,
) -> float:
    """Constant step size prescribed for the simultaneous methods.

    Returns min(mu / (5 n l^2), 2 log(G sqrt(n) K / mu) / (mu n K)) where G
    is the aggregate gradient norm at the start; the adversarial variant
    drops the sqrt(n) factor from the log argument. The log argument is
    clamped below at e so the result stays positive for tiny G.
    """
    if min(mu, ell, n, epochs) <= 0 or grad_norm_at_z0 < 0:
        raise InputError("step-size rule needs positive inputs")
    scale = 1.0 if adversarial else math.sqrt(n)
    log_term = _clamped_log(grad_norm_at_z0 * scale * epochs / mu)
    return min(mu / (5.0 * n * ell**2), 2.0 * log_term / (mu * n * epochs))


def theoretical_step_size_agda(
    mu1: float,
    mu2: float,
    ell: float,
    n: int,
    epochs: int,
    v0: float,
    adversarial: bool = False,
) -> tuple[float, float]:
    """Constant step sizes (a, b) prescribed for the alternating method.

    Uses the timescale ratio eta = 73 l^2 / (2 mu2^2) and
    a = min(1 / (5 eta n l), 4 log(V0 sqrt(n) K) / (mu1 n K)), b = eta * a;
    the adversarial variant drops the sqrt(n) factor. V0 is the initial
    Lyapunov value and must be positive.
    """
    if min(mu1, mu2, ell, n, epochs) <= 0:
        raise InputError("step-size rule needs positive inputs")
    if v0 <= 0:
        raise InputError("initial Lyapunov value must be positive")
    eta = 73.0 * ell**2 / (2.0 * mu2**2)
    scale = 1.0 if adversarial else math.sqrt(n)
    log_term = _clamped_log(v0 * scale * epochs)
    alpha = min(1.0 / (5.0 * eta * n * ell), 4.0 * log_term / (mu1 * n * epochs))
    return alpha, eta * alpha


def timescale_ratio(mu2: float, ell: float) -> float:
    """The prescribed second-to-first step-size ratio eta = 73 l^2 / (2 mu2^2)."""
    if mu2 <= 0 or ell <= 0:
        raise InputError("constants must be positive")
    return 73.0 * ell**2 / (2.0 * mu2**2)


def full_batch_gda(op: FiniteSumOperator, z0, alpha: float, epochs: int) -> np.ndarray:
    """Deterministic reference iteration z <- z - alpha * nu(z)."""
    from .core import aggregate

    z = as_point(z0, op.dim).copy()
    for k in range(1, epochs + 1):
        z = z - alpha * aggregate(op, z)
        _check_finite(z, k)
    return z

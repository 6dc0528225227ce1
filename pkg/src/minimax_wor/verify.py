"""Built-in oracle suite behind the ``verify`` CLI subcommand.

Each check re-derives an exactly checkable fact from first principles
(enumeration, spectral decompositions, closed-form identities) and compares
it against the library implementation. ``run_all`` prints one PASS/FAIL line
per check and returns the number of failures.
"""

from __future__ import annotations

import math

import numpy as np

from . import metrics, oracles
from .core import (
    FiniteSumOperator,
    aggregate,
    as_permutation,
    gradient_variance,
    invert_permutation,
)
from .optimizers import (
    RunConfig,
    full_batch_gda,
    ppm_implicit_step,
    run_gda,
    run_ppm,
    theoretical_step_size_agda,
    theoretical_step_size_gda,
)
from .problems import (
    GameGenConfig,
    bilinear_lower_bound_instance,
    generate_quadratic_game,
    quadratic_best_response,
    unbounded_2pl_instance,
)
from .shuffling import ScheduleKind, ScheduleSpec, AdversaryKind


def _random_affine(rng, n, d):
    mats = rng.standard_normal((n, d, d))
    offs = rng.standard_normal((n, d))
    return FiniteSumOperator.from_affine(mats, offs, dx=d, dy=0)


def check_permutation_inverse():
    rng = np.random.default_rng(7)
    for n in (1, 2, 5, 17, 64):
        p = as_permutation(rng.permutation(n))
        q = invert_permutation(p)
        if not np.array_equal(q[p], np.arange(n)):
            return False, f"inverse failed for n={n}"
    return True, "inverse(p)[p] is the identity for n up to 64"


def check_aggregate_linearity():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 9))
        d = int(rng.integers(1, 7))
        op = _random_affine(rng, n, d)
        z = rng.standard_normal(d)
        direct = op.affine.mean_mat() @ z + op.affine.mean_offset()
        worst = max(worst, float(np.abs(aggregate(op, z) - direct).max()))
    return worst <= 1e-12, f"max deviation from assembled mean operator {worst:.2e}"


def check_gradient_variance():
    rng = np.random.default_rng(13)
    for _ in range(10):
        n, d = int(rng.integers(2, 7)), int(rng.integers(1, 6))
        op = _random_affine(rng, n, d)
        z = rng.standard_normal(d)
        if gradient_variance(op, z) < 0:
            return False, "negative variance"
    mats = np.repeat(rng.standard_normal((1, 3, 3)), 4, axis=0)
    offs = np.repeat(rng.standard_normal((1, 3)), 4, axis=0)
    op_same = FiniteSumOperator.from_affine(mats, offs, dx=3, dy=0)
    v = gradient_variance(op_same, rng.standard_normal(3))
    return v <= 1e-12, f"identical components give variance {v:.2e}"


def check_moments_exact():
    rng = np.random.default_rng(17)
    worst_var, worst_mean = 0.0, 0.0
    for vectors in (rng.standard_normal(5), rng.standard_normal((5, 3))):
        arr = np.atleast_2d(vectors.T).T if vectors.ndim == 1 else vectors
        mean = arr.reshape(5, -1).mean(axis=0)
        for i in range(1, 6):
            rep = oracles.wor_moments_enumerate(vectors, i)
            worst_var = max(worst_var, abs(rep.enumerated_variance - rep.formula_variance))
            worst_mean = max(worst_mean, float(np.abs(rep.enumerated_mean - mean).max()))
    ok = worst_var <= 1e-10 and worst_mean <= 1e-12
    return ok, f"variance gap {worst_var:.2e}, mean gap {worst_mean:.2e}"


def check_moments_montecarlo():
    rng = np.random.default_rng(19)
    vectors = rng.standard_normal((20, 4))
    rep = oracles.wor_moments_montecarlo(vectors, 7, samples=100_000, rng=23)
    gap = abs(rep.enumerated_variance - rep.formula_variance)
    ok = gap <= 3.0 * rep.std_error
    return ok, f"gap {gap:.2e} vs 3 SE {3 * rep.std_error:.2e}"


def check_generator_algebra():
    cfg = GameGenConfig(n=100, dx=25, dy=25, mu_a=0.5, mu_b=5.0, mu_c=0.5,
                        mu_delta=50.0, nonconvex_count=20, seed=0)
    game = generate_quadratic_game(cfg)
    eig_gap = float(np.abs(np.sort(np.linalg.eigvalsh(game.a_bar))
                           - np.sort(game.spectrum_a)).max())
    lin = max(float(np.linalg.norm(game.u_bar)), float(np.linalg.norm(game.v_bar)))
    mats, _ = game.stacked_field_mats()
    _, mu = oracles.affine_operator_constants(mats.mean(axis=0))
    ok = eig_gap <= 1e-8 and lin <= 1e-10 and mu >= 0.5 - 1e-8
    return ok, f"eig gap {eig_gap:.2e}, linear terms {lin:.2e}, mu {mu:.6f}"


def check_bilinear_contraction():
    rng = np.random.default_rng(29)
    worst = 0.0
    for _ in range(10):
        mu = float(rng.uniform(0.2, 2.0))
        ell = mu + float(rng.uniform(0.1, 3.0))
        alpha = float(rng.uniform(0.0, 1.0 / ell))
        op = bilinear_lower_bound_instance(mu, ell)
        z0 = rng.standard_normal(2)
        cfg = RunConfig(epochs=1, step_size=alpha, z0=z0,
                        schedule=ScheduleSpec(ScheduleKind.IG))
        traj = run_gda(op, cfg)
        ratio = float(np.sum(traj.final**2) / np.sum(z0**2))
        worst = max(worst, abs(ratio - oracles.full_batch_gda_factor(mu, ell, alpha)))
    return worst <= 1e-12, f"max |ratio - factor| {worst:.2e}"


def check_ppm_contraction():
    op = bilinear_lower_bound_instance(1.0, 2.0)
    alpha = 0.25
    z = np.array([1.0, 0.0])
    bound = 1.0 / (1.0 + alpha * 1.0)
    for _ in range(50):
        z_next = ppm_implicit_step(lambda w: op.component_grad(0, w), z, alpha,
                                   affine=(op.affine.mats[0], op.affine.offsets[0]))
        if np.linalg.norm(z_next) > bound * np.linalg.norm(z) + 1e-12:
            return False, "per-step contraction bound violated"
        z = z_next
    return True, "50 implicit steps within the (1 + a*mu)^-1 envelope"


def check_implicit_residual():
    rng = np.random.default_rng(31)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        a = rng.standard_normal((d, d))
        norm_a = np.linalg.norm(a, 2)
        alpha = float(rng.uniform(0.0, 0.8)) / max(norm_a, 1e-12)
        b = rng.standard_normal(d)
        z_prev = rng.standard_normal(d) * float(rng.uniform(0.1, 10.0))
        comp = lambda w, a=a, b=b: a @ w + b
        for mode, aff in (("closed_form_affine", (a, b)), ("fixed_point", None)):
            z = ppm_implicit_step(comp, z_prev, alpha, mode=mode, affine=aff)
            resid = float(np.linalg.norm(z - z_prev + alpha * comp(z)))
            worst = max(worst, resid / max(1.0, float(np.linalg.norm(z_prev))))
    return worst <= 1e-10, f"worst scaled residual {worst:.2e}"


def check_reduction_identities():
    rng = np.random.default_rng(37)
    a = rng.standard_normal((1, 3, 3))
    b = rng.standard_normal((1, 3))
    op = FiniteSumOperator.from_affine(a, b, dx=3, dy=0)
    z0 = rng.standard_normal(3)
    cfg = RunConfig(epochs=12, step_size=0.05, z0=z0,
                    schedule=ScheduleSpec(ScheduleKind.RR, seed=5))
    if not np.array_equal(run_gda(op, cfg).final, full_batch_gda(op, z0, 0.05, 12)):
        return False, "n=1 run is not bitwise full batch"

    game = generate_quadratic_game(GameGenConfig(
        n=6, dx=3, dy=3, mu_a=1.0, mu_b=1.0, mu_c=1.0, mu_delta=1.0,
        nonconvex_count=1, seed=3))
    gop = game.to_operator()
    z0 = rng.standard_normal(gop.dim)
    as_id = RunConfig(epochs=8, step_size=0.01, z0=z0,
                      schedule=ScheduleSpec(ScheduleKind.ADVERSARIAL, seed=1,
                                            adversary=AdversaryKind.IDENTITY))
    ig = RunConfig(epochs=8, step_size=0.01, z0=z0,
                   schedule=ScheduleSpec(ScheduleKind.IG, seed=99))
    if not np.array_equal(run_gda(gop, as_id).final, run_gda(gop, ig).final):
        return False, "identity adversary is not bitwise incremental order"

    from .shuffling import IndexSchedule
    sched = IndexSchedule(ScheduleSpec(ScheduleKind.SO, seed=11), 7)
    orders = [sched.epoch_order(k) for k in range(1, 9)]
    if not all(np.array_equal(orders[0], o) for o in orders):
        return False, "fixed-permutation schedule drifted between epochs"
    return True, "single-component, identity-adversary and fixed-permutation identities hold"


def check_step_size_rules():
    a = theoretical_step_size_gda(1.0, 2.0, 10, 10**9, 1.0)
    if abs(a - min(1.0 / 200.0, 2.0 * math.log(max(math.e, math.sqrt(10) * 1e9)) / (1.0 * 10 * 1e9))) > 1e-15:
        return False, "simultaneous rule mismatch"
    if abs(a - 2.0 * math.log(math.sqrt(10) * 1e9) / 1e10) > 1e-18:
        return False, "large-K branch mismatch"
    alpha, beta = theoretical_step_size_agda(1.0, 1.0, 1.0, 10, 100, 1.0)
    if abs(beta / alpha - 36.5) > 1e-12:
        return False, f"timescale ratio {beta / alpha} != 36.5"
    cap = 1.0 / (5.0 * 36.5 * 10 * 1.0)
    if alpha > cap + 1e-18:
        return False, "alternating cap exceeded"
    return True, "caps, log branches and the 36.5 timescale ratio agree"


def check_bound_values():
    p = metrics.BoundParams(ell=1.0, mu=1.0, n=4, sigma_sq=0.0, dist0_sq=1.0,
                            grad_norm0=1.0)
    val = metrics.bound_gda_wor(5.0 * math.log(2.0), p)
    head = 2.0 * math.exp(-math.log(2.0))
    if abs(val - head - 2.0 / (4 * (5 * math.log(2.0)) ** 2)) > 1e-12:
        return False, "monotone bound value mismatch"
    p2 = metrics.BoundParams(ell=1.0, mu1=1.0, mu2=1.0, n=4, sigma_sq=0.0, v0=2.0)
    val2 = metrics.bound_agda_rr(365.0 * math.log(2.0), p2)
    if abs(val2 - (1.0 + 1.0 / (4 * (365 * math.log(2.0)) ** 2))) > 1e-12:
        return False, "alternating bound value mismatch"
    return True, "half-life arithmetic of both bound families checks out"


def check_best_response():
    rng = np.random.default_rng(41)
    game = generate_quadratic_game(GameGenConfig(
        n=10, dx=4, dy=4, mu_a=1.0, mu_b=1.0, mu_c=1.0, mu_delta=1.0,
        nonconvex_count=2, seed=8))
    for _ in range(20):
        x = rng.standard_normal(4)
        y_star, phi = quadratic_best_response(game, x)
        for _ in range(100):
            y = y_star + rng.standard_normal(4)
            if phi < game.objective(x, y) - 1e-9:
                return False, "best response is not the maximizer"
    return True, "phi(x) dominates sampled objective values"


def check_lyapunov_and_distance():
    rng = np.random.default_rng(43)
    op = unbounded_2pl_instance()
    factor = metrics.dist_bound_factor_2pl(2.0, 2.0, op.constants.lipschitz, 0.1)
    for _ in range(1000):
        z = rng.standard_normal(4) * float(rng.uniform(0.1, 10.0))
        v = metrics.lyapunov_v_2pl(z, 0.1)
        if v < -1e-12:
            return False, "negative merit value"
        if metrics.dist_sq_to_saddle_set_2pl(z) > factor * v + 1e-9:
            return False, "distance bound violated"
    return True, "distance-to-solution-set bounded by the merit function"


def check_slope_fit():
    ks = [50, 100, 200, 400]
    for target in (-2.0, -1.0, 0.0):
        pts = [(k, 3.0 * k**target) for k in ks]
        if abs(metrics.fit_rate_slope(pts) - target) > 1e-9:
            return False, f"slope fit missed {target}"
    return True, "recovers -2, -1, 0 on synthetic power laws"


ALL_CHECKS = [
    ("permutation-inverse", check_permutation_inverse),
    ("aggregate-linearity", check_aggregate_linearity),
    ("gradient-variance", check_gradient_variance),
    ("prefix-moments-exact", check_moments_exact),
    ("prefix-moments-montecarlo", check_moments_montecarlo),
    ("generator-algebra", check_generator_algebra),
    ("bilinear-contraction", check_bilinear_contraction),
    ("implicit-step-contraction", check_ppm_contraction),
    ("implicit-step-residual", check_implicit_residual),
    ("reduction-identities", check_reduction_identities),
    ("step-size-rules", check_step_size_rules),
    ("bound-values", check_bound_values),
    ("best-response", check_best_response),
    ("lyapunov-distance", check_lyapunov_and_distance),
    ("rate-slope-fit", check_slope_fit),
]


def run_all(out=print) -> int:
    """Run every check; print one line each; return the failure count."""
    failures = 0
    width = max(len(name) for name, _ in ALL_CHECKS)
    for name, fn in ALL_CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        status = "PASS" if ok else "FAIL"
        if not ok:
            failures += 1
        out(f"[{status}] {name:<{width}}  {detail}")
    out(f"{len(ALL_CHECKS) - failures}/{len(ALL_CHECKS)} checks passed")
    return failures

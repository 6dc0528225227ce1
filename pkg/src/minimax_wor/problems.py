"""Benchmark problem constructors.

Three instance families are provided:

* randomly generated finite-sum quadratic minimax games with strongly
  convex-strongly concave aggregates and optional nonconvex-nonconcave
  components (``generate_quadratic_game``),
* a 2-D bilinear saddle instance with known tight contraction behavior
  (``bilinear_lower_bound_instance``),
* a 4-D gradient-dominated objective whose solution set is an unbounded
  affine subspace (``unbounded_2pl_instance``).

All three families have affine component gradients, so they register stacked
affine data usable by closed-form implicit updates.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    AffineComponents,
    FiniteSumOperator,
    GenerationError,
    InputError,
    NumericalError,
    OperatorConstants,
    as_point,
    join_xy,
    split_xy,
)


@dataclass(frozen=True)
class GameGenConfig:
    """Recipe for a random quadratic minimax game.

    Eigenvalue floors mu_a/mu_b/mu_c and mu_delta set the sampling ranges;
    caps are fixed at twice the floor. ``nonconvex_count`` components receive
    negative curvature blocks of magnitude ~mu_delta; the remaining weights
    are chosen so the aggregate curvature telescopes exactly to the sampled
    spectrum, which keeps the aggregate strictly positive definite.
    """

    n: int
    dx: int
    dy: int
    mu_a: float = 0.5
    mu_b: float = 5.0
    mu_c: float = 0.5
    mu_delta: float = 50.0
    nonconvex_count: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.dx < 1 or self.dy < 1:
            raise InputError("n, dx, dy must be positive")
        if min(self.mu_a, self.mu_b, self.mu_c, self.mu_delta) <= 0:
            raise InputError("eigenvalue floors must be positive")
        if not 0 <= self.nonconvex_count < self.n:
            raise InputError("nonconvex_count must lie in [0, n)")


@dataclass
class QuadraticGame:
    """A finite-sum quadratic minimax game.

    Component i contributes
        f_i(x, y) = x'A_i x / 2 + x'B_i y - y'C_i y / 2 - u_i'x - v_i'y
    and the aggregate linear terms vanish, so the minimax point is z* = 0.
    Componentwise curvature may be indefinite; only the aggregates A and C
    are required to be positive definite.
    """

    a_mats: np.ndarray  # (n, dx, dx), symmetric
    b_mats: np.ndarray  # (n, dx, dy)
    c_mats: np.ndarray  # (n, dy, dy), symmetric
    u_vecs: np.ndarray  # (n, dx)
    v_vecs: np.ndarray  # (n, dy)
    seed: int | None = None
    # generation metadata: sampled spectra and the shared special index set
    spectrum_a: np.ndarray | None = None
    spectrum_b: np.ndarray | None = None
    spectrum_c: np.ndarray | None = None
    nonconvex_indices: np.ndarray | None = None
    # cached aggregates, filled in __post_init__
    a_bar: np.ndarray = field(init=False)
    b_bar: np.ndarray = field(init=False)
    c_bar: np.ndarray = field(init=False)
    u_bar: np.ndarray = field(init=False)
    v_bar: np.ndarray = field(init=False)

    def __post_init__(self):
        self.a_bar = self.a_mats.mean(axis=0)
        self.b_bar = self.b_mats.mean(axis=0)
        self.c_bar = self.c_mats.mean(axis=0)
        self.u_bar = self.u_vecs.mean(axis=0)
        self.v_bar = self.v_vecs.mean(axis=0)
        if np.linalg.norm(self.u_bar) > 1e-10 or np.linalg.norm(self.v_bar) > 1e-10:
            raise InputError("aggregate linear terms must vanish")
        for name, block in (("A", self.a_mats), ("C", self.c_mats)):
            skew = np.abs(block - block.transpose(0, 2, 1)).max()
            if skew > 1e-12:
                raise InputError(f"component {name} blocks must be symmetric")
        for name, agg in (("A", self.a_bar), ("C", self.c_bar)):
            if np.linalg.eigvalsh(agg).min() <= 0:
                raise GenerationError(f"aggregate {name} is not positive definite")

    @property
    def n(self) -> int:
        return self.a_mats.shape[0]

    @property
    def dx(self) -> int:
        return self.a_mats.shape[1]

    @property
    def dy(self) -> int:
        return self.c_mats.shape[1]

    @property
    def dim(self) -> int:
        return self.dx + self.dy

    def component_value(self, i: int, x, y) -> float:
        """Objective value f_i(x, y) of one component."""
        x = as_point(x, self.dx)
        y = as_point(y, self.dy)
        return float(
            0.5 * x @ self.a_mats[i] @ x
            + x @ self.b_mats[i] @ y
            - 0.5 * y @ self.c_mats[i] @ y
            - self.u_vecs[i] @ x
            - self.v_vecs[i] @ y
        )

    def objective(self, x, y) -> float:
        """Aggregate objective F(x, y)."""
        x = as_point(x, self.dx)
        y = as_point(y, self.dy)
        return float(
            0.5 * x @ self.a_bar @ x
            + x @ self.b_bar @ y
            - 0.5 * y @ self.c_bar @ y
            - self.u_bar @ x
            - self.v_bar @ y
        )

    def component_grad(self, i: int, z: np.ndarray) -> np.ndarray:
        """Stacked descent-ascent field of component i at z."""
        x, y = split_xy(z, self.dx)
        gx = self.a_mats[i] @ x + self.b_mats[i] @ y - self.u_vecs[i]
        gy = self.c_mats[i] @ y - self.b_mats[i].T @ x + self.v_vecs[i]
        return np.concatenate([gx, gy])

    def stacked_field_mats(self) -> tuple[np.ndarray, np.ndarray]:
        """Stacked affine data (M_i, b_i) with omega_i(z) = M_i z + b_i."""
        n, dx, dy = self.n, self.dx, self.dy
        mats = np.zeros((n, dx + dy, dx + dy))
        mats[:, :dx, :dx] = self.a_mats
        mats[:, :dx, dx:] = self.b_mats
        mats[:, dx:, :dx] = -self.b_mats.transpose(0, 2, 1)
        mats[:, dx:, dx:] = self.c_mats
        offsets = np.concatenate([-self.u_vecs, self.v_vecs], axis=1)
        return mats, offsets

    def to_operator(self) -> FiniteSumOperator:
        """Finite-sum operator view with exact constants attached."""
        mats, offsets = self.stacked_field_mats()
        lipschitz = max(
            float(np.linalg.norm(mats[i], ord=2)) for i in range(self.n)
        )
        mu = float(
            min(
                np.linalg.eigvalsh(self.a_bar).min(),
                np.linalg.eigvalsh(self.c_bar).min(),
            )
        )
        sigma_star_sq = float(
            np.mean(np.sum(self.u_vecs**2, axis=1) + np.sum(self.v_vecs**2, axis=1))
        )
        constants = OperatorConstants(
            lipschitz=lipschitz,
            strong_monotonicity=mu,
            pl1=float(np.linalg.eigvalsh(self.a_bar).min()),
            pl2=float(np.linalg.eigvalsh(self.c_bar).min()),
            known_root=np.zeros(self.dim),
            grad_var_at_root=sigma_star_sq,
        )
        return FiniteSumOperator.from_affine(
            mats, offsets, self.dx, self.dy, constants=constants,
            metadata={"family": "quadratic_game", "seed": self.seed},
        )


def _haar_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    # QR of a Gaussian matrix with the sign of R's diagonal folded into Q
    # gives a Haar-distributed orthogonal factor.
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return q * signs


def generate_quadratic_game(cfg: GameGenConfig) -> QuadraticGame:
    """Sample a random quadratic game. Deterministic given cfg (incl. seed).

    Curvature blocks share one orthogonal basis per block family; the
    coupling blocks use two independent orthogonal factors on the left and
    right of the sampled singular values. With c = nonconvex_count, the
    chosen components receive diag(-delta) spectra and the remaining ones
    diag((n*m + c*delta)/(n - c)), so the aggregate spectrum is exactly the
    sampled vector m.
    """
    rng = np.random.default_rng(cfg.seed)
    n, dx, dy, c = cfg.n, cfg.dx, cfg.dy, cfg.nonconvex_count
    special = np.sort(rng.choice(n, size=c, replace=False)) if c else np.array([], dtype=np.intp)
    flags = np.zeros(n, dtype=bool)
    flags[special] = True

    def spectra(rng, dim, floor):
        m = rng.uniform(floor, 2.0 * floor, size=dim)
        delta = rng.uniform(cfg.mu_delta, 2.0 * cfg.mu_delta, size=dim)
        pos = (n * m + c * delta) / (n - c)
        return m, delta, pos

    def sym_blocks(basis, delta, pos):
        lams = np.where(flags[:, None], -delta[None, :], pos[None, :])
        return np.einsum("ij,nj,kj->nik", basis, lams, basis)

    o_a = _haar_orthogonal(rng, dx)
    m_a, delta_a, pos_a = spectra(rng, dx, cfg.mu_a)
    a_mats = sym_blocks(o_a, delta_a, pos_a)

    r = min(dx, dy)
    o_b_left = _haar_orthogonal(rng, dx)
    o_b_right = _haar_orthogonal(rng, dy)
    m_b, delta_b, pos_b = spectra(rng, r, cfg.mu_b)
    svals = np.where(flags[:, None], -delta_b[None, :], pos_b[None, :])
    b_mats = np.einsum("ij,nj,kj->nik", o_b_left[:, :r], svals, o_b_right[:, :r])

    o_c = _haar_orthogonal(rng, dy)
    m_c, delta_c, pos_c = spectra(rng, dy, cfg.mu_c)
    c_mats = sym_blocks(o_c, delta_c, pos_c)

    delta_u = rng.uniform(cfg.mu_delta, 2.0 * cfg.mu_delta, size=dx)
    delta_v = rng.uniform(cfg.mu_delta, 2.0 * cfg.mu_delta, size=dy)
    scale = c / (n - c)
    u_vecs = np.where(flags[:, None], -delta_u[None, :], scale * delta_u[None, :])
    v_vecs = np.where(flags[:, None], -delta_v[None, :], scale * delta_v[None, :])

    # enforce exact symmetry against einsum rounding
    a_mats = 0.5 * (a_mats + a_mats.transpose(0, 2, 1))
    c_mats = 0.5 * (c_mats + c_mats.transpose(0, 2, 1))

    game = QuadraticGame(
        a_mats=a_mats,
        b_mats=b_mats,
        c_mats=c_mats,
        u_vecs=u_vecs,
        v_vecs=v_vecs,
        seed=cfg.seed,
        spectrum_a=m_a,
        spectrum_b=m_b,
        spectrum_c=m_c,
        nonconvex_indices=special,
    )
    for name, agg, floor in (("A", game.a_bar, cfg.mu_a), ("C", game.c_bar, cfg.mu_c)):
        lo = np.linalg.eigvalsh(agg).min()
        if lo <= 0:
            raise GenerationError(
                f"aggregate {name} lost positive definiteness "
                f"(min eigenvalue {lo:.3e}, floor {floor})"
            )
    return game


def bilinear_lower_bound_instance(mu: float, ell: float) -> FiniteSumOperator:
    """2-D single-component instance with field M z, M = [[mu, l-mu], [mu-l, mu]].

    Arises from the saddle objective mu*(x^2 - y^2)/2 + (l - mu)*x*y; its
    unique root is the origin and simultaneous descent-ascent contracts per
    step by exactly 1 - 2*a*mu + a^2*(mu^2 + (l-mu)^2) in squared norm.
    """
    if not (ell > mu > 0):
        raise InputError("require ell > mu > 0")
    m = np.array([[mu, ell - mu], [mu - ell, mu]])
    constants = OperatorConstants(
        lipschitz=ell,
        strong_monotonicity=mu,
        known_root=np.zeros(2),
        grad_var_at_root=0.0,
    )
    return FiniteSumOperator.from_affine(
        m[None, :, :], np.zeros((1, 2)), dx=1, dy=1, constants=constants,
        metadata={"family": "bilinear", "mu": mu, "ell": ell},
    )


def unbounded_2pl_instance() -> FiniteSumOperator:
    """4-D gradient-dominated instance whose solution set is a 2-D subspace.

    The objective (x1+x2)^2/2 - (y1+y2)^2/2 satisfies two-sided gradient
    dominance with constants mu1 = mu2 = 2, and its saddle set
    {x1+x2 = 0, y1+y2 = 0} is unbounded, so convergence is measured by
    distance to the set rather than to a single root.
    """
    block = np.array([[1.0, 1.0], [1.0, 1.0]])
    mat = np.zeros((4, 4))
    mat[:2, :2] = block
    mat[2:, 2:] = block
    constants = OperatorConstants(lipschitz=2.0, pl1=2.0, pl2=2.0)
    return FiniteSumOperator.from_affine(
        mat[None, :, :], np.zeros((1, 4)), dx=2, dy=2, constants=constants,
        metadata={
            "family": "unbounded_2pl",
            "saddle_set": "x1 + x2 = 0 and y1 + y2 = 0",
        },
    )


def two_pl_objective(z) -> float:
    """Objective value of the unbounded 4-D instance at z."""
    z = as_point(z, 4)
    return 0.5 * (z[0] + z[1]) ** 2 - 0.5 * (z[2] + z[3]) ** 2


def two_pl_best_response_value(x) -> float:
    """max_y of the unbounded 4-D objective, attained on y1 + y2 = 0."""
    x = as_point(x, 2)
    return 0.5 * (x[0] + x[1]) ** 2


def quadratic_best_response(game: QuadraticGame, x) -> tuple[np.ndarray, float]:
    """Maximizer over y and the resulting value of the aggregate objective.

    Returns (y_star, phi) with y_star = C^-1 B' x and
    phi = x'(A + B C^-1 B')x / 2, computed with one dense solve.
    """
    x = as_point(x, game.dx)
    if np.linalg.norm(game.u_bar) > 1e-10 or np.linalg.norm(game.v_bar) > 1e-10:
        raise InputError("best response requires vanishing aggregate linear terms")
    try:
        y_star = np.linalg.solve(game.c_bar, game.b_bar.T @ x)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"aggregate C block is singular: {exc}") from exc
    phi = 0.5 * float(x @ game.a_bar @ x) + 0.5 * float(x @ game.b_bar @ y_star)
    return y_star, phi


# JSON round-trip encodes float64 buffers as base64 of little-endian bytes so
# load(dump(game)) is bit-exact.

def _encode_array(a: np.ndarray) -> dict:
    buf = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(buf.tobytes()).decode()}


def _decode_array(obj: dict) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8")
    return raw.reshape(obj["shape"]).astype(np.float64)


def game_to_json(game: QuadraticGame) -> str:
    doc = {
        "n": game.n,
        "dx": game.dx,
        "dy": game.dy,
        "seed": game.seed,
        "a_mats": _encode_array(game.a_mats),
        "b_mats": _encode_array(game.b_mats),
        "c_mats": _encode_array(game.c_mats),
        "u_vecs": _encode_array(game.u_vecs),
        "v_vecs": _encode_array(game.v_vecs),
    }
    if game.nonconvex_indices is not None:
        doc["nonconvex_indices"] = [int(i) for i in game.nonconvex_indices]
    for key in ("spectrum_a", "spectrum_b", "spectrum_c"):
        arr = getattr(game, key)
        if arr is not None:
            doc[key] = _encode_array(arr)
    return json.dumps(doc)


def game_from_json(text: str) -> QuadraticGame:
    doc = json.loads(text)
    kwargs = {}
    if "nonconvex_indices" in doc:
        kwargs["nonconvex_indices"] = np.asarray(doc["nonconvex_indices"], dtype=np.intp)
    for key in ("spectrum_a", "spectrum_b", "spectrum_c"):
        if key in doc:
            kwargs[key] = _decode_array(doc[key])
    return QuadraticGame(
        a_mats=_decode_array(doc["a_mats"]),
        b_mats=_decode_array(doc["b_mats"]),
        c_mats=_decode_array(doc["c_mats"]),
        u_vecs=_decode_array(doc["u_vecs"]),
        v_vecs=_decode_array(doc["v_vecs"]),
        seed=doc.get("seed"),
        **kwargs,
    )

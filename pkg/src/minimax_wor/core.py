"""Shared domain types: points, permutations, and finite-sum gradient operators.

Conventions used throughout the package:

* A *point* z in R^d is a 1-D float64 numpy array. When the problem has a
  minimization block x and a maximization block y, z stacks them as
  z = (x, y) with dims (dx, dy), so ``norm(z)**2 == norm(x)**2 + norm(y)**2``.
* A *permutation* of [0, n) is a 1-D integer array containing each index
  exactly once.
* A finite-sum operator owns n component maps omega_i : R^d -> R^d whose
  average nu(z) = (1/n) sum_i omega_i(z) is the field whose root is sought.
  For a minimax objective F = (1/n) sum_i f_i, the stacked convention is
  omega_i(z) = [grad_x f_i(z), -grad_y f_i(z)].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class InputError(ValueError):
    """Fatal input error: bad dimensions, non-finite data, invalid arguments."""


class ConfigurationError(InputError):
    """A required constant or configuration entry is missing or inconsistent."""


class NumericalError(RuntimeError):
    """A numerical procedure failed (singular solve, non-converged iteration)."""


class DivergenceError(NumericalError):
    """An iterate became non-finite; carries the epoch where it happened."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite iterate at epoch {epoch}")


class GenerationError(RuntimeError):
    """Random problem generation produced an invalid instance."""


def as_point(x, dim: int | None = None) -> np.ndarray:
    """Validate and return ``x`` as a finite 1-D float64 vector.

    Raises InputError if ``x`` is not 1-D, contains NaN/Inf, or does not
    have the expected dimension.
    """
    z = np.asarray(x, dtype=np.float64)
    if z.ndim != 1:
        raise InputError(f"point must be 1-D, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InputError("point has non-finite coordinates")
    if dim is not None and z.shape[0] != dim:
        raise InputError(f"point has dim {z.shape[0]}, expected {dim}")
    return z


def split_xy(z: np.ndarray, dx: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a stacked point z = (x, y) into its two blocks."""
    if z.shape[0] < dx:
        raise InputError(f"cannot split dim-{z.shape[0]} point at dx={dx}")
    return z[:dx], z[dx:]


def join_xy(x, y) -> np.ndarray:
    """Concatenate the blocks (x, y) into a single stacked point."""
    return np.concatenate([as_point(x), as_point(y)])


def as_permutation(mapping, n: int | None = None) -> np.ndarray:
    """Validate that ``mapping`` is a bijection on {0, .., n-1} and return it."""
    p = np.asarray(mapping, dtype=np.intp)
    if p.ndim != 1:
        raise InputError("permutation must be 1-D")
    m = p.shape[0]
    if n is not None and m != n:
        raise InputError(f"permutation has length {m}, expected {n}")
    if m == 0:
        raise InputError("permutation must be non-empty")
    counts = np.bincount(p, minlength=m) if p.min() >= 0 and p.max() < m else None
    if counts is None or not np.all(counts == 1):
        raise InputError("mapping is not a permutation of [0, n)")
    return p


def invert_permutation(p: np.ndarray) -> np.ndarray:
    """Return the inverse permutation q with q[p[j]] = j."""
    p = as_permutation(p)
    q = np.empty_like(p)
    q[p] = np.arange(p.shape[0], dtype=p.dtype)
    return q


@dataclass(frozen=True)
class OperatorConstants:
    """Analytically known constants of a finite-sum operator.

    Every entry is optional; operations that need a missing constant raise
    ConfigurationError instead of estimating it silently.

    lipschitz            uniform Lipschitz constant l of the components
    strong_monotonicity  strong monotonicity modulus mu of the average field
    pl1, pl2             two-sided gradient-dominance constants mu_1, mu_2
    known_root           a root z* of the average field, when known in closed form
    grad_var_at_root     (1/n) sum_i ||omega_i(z*)||^2
    """

    lipschitz: float | None = None
    strong_monotonicity: float | None = None
    pl1: float | None = None
    pl2: float | None = None
    known_root: np.ndarray | None = None
    grad_var_at_root: float | None = None

    def require(self, name: str) -> float | np.ndarray:
        value = getattr(self, name)
        if value is None:
            raise ConfigurationError(f"operator constant '{name}' is not available")
        return value


@dataclass(frozen=True)
class AffineComponents:
    """Stacked affine components omega_i(z) = mats[i] @ z + offsets[i]."""

    mats: np.ndarray     # (n, d, d)
    offsets: np.ndarray  # (n, d)

    def __post_init__(self):
        if self.mats.ndim != 3 or self.mats.shape[1] != self.mats.shape[2]:
            raise InputError(f"affine mats must be (n, d, d), got {self.mats.shape}")
        if self.offsets.shape != self.mats.shape[:2]:
            raise InputError("affine offsets shape does not match mats")

    @property
    def n(self) -> int:
        return self.mats.shape[0]

    @property
    def dim(self) -> int:
        return self.mats.shape[1]

    def component(self, i: int, z: np.ndarray) -> np.ndarray:
        return self.mats[i] @ z + self.offsets[i]

    def mean_mat(self) -> np.ndarray:
        return self.mats.mean(axis=0)

    def mean_offset(self) -> np.ndarray:
        return self.offsets.mean(axis=0)


@dataclass
class FiniteSumOperator:
    """n component gradient operators plus their average field.

    Parameters
    ----------
    n : int
        Number of components.
    dx, dy : int
        Block dimensions of z = (x, y); d = dx + dy. Pure root-finding
        problems may use dy = 0.
    component_grad : callable (i, z) -> z'
        Evaluates omega_i at z. Must return a dim-d vector. Evaluation is
        read-only and safe to call concurrently.
    constants : OperatorConstants
        Optional known constants; see OperatorConstants.
    affine : AffineComponents, optional
        When the components are affine, their stacked matrices/offsets.
        Enables closed-form implicit updates and vectorized adversaries.
    metadata : dict
        Free-form instance annotations (e.g. an analytic saddle-set
        description).
    """

    n: int
    dx: int
    dy: int
    component_grad: Callable[[int, np.ndarray], np.ndarray]
    constants: OperatorConstants = field(default_factory=OperatorConstants)
    affine: AffineComponents | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 1:
            raise InputError("operator needs at least one component")
        if self.dx < 0 or self.dy < 0 or self.dim < 1:
            raise InputError("operator dimensions must be non-negative with d >= 1")
        root = self.constants.known_root
        if root is not None:
            root = as_point(root, self.dim)
            resid = np.linalg.norm(aggregate(self, root))
            if resid > 1e-9 * max(1.0, float(np.linalg.norm(root))):
                raise InputError(
                    f"known_root is not a root: ||nu(z*)|| = {resid:.3e}"
                )

    @property
    def dim(self) -> int:
        return self.dx + self.dy

    @classmethod
    def from_affine(
        cls,
        mats: np.ndarray,
        offsets: np.ndarray,
        dx: int,
        dy: int,
        constants: OperatorConstants | None = None,
        metadata: dict | None = None,
    ) -> "FiniteSumOperator":
        """Build an operator from stacked affine components."""
        aff = AffineComponents(
            np.ascontiguousarray(mats, dtype=np.float64),
            np.ascontiguousarray(offsets, dtype=np.float64),
        )
        return cls(
            n=aff.n,
            dx=dx,
            dy=dy,
            component_grad=aff.component,
            constants=constants or OperatorConstants(),
            affine=aff,
            metadata=metadata or {},
        )


def aggregate(op: FiniteSumOperator, z) -> np.ndarray:
    """Average field nu(z) = (1/n) sum_i omega_i(z).

    The sum runs in fixed ascending index order with plain accumulation so
    results are bit-reproducible regardless of the sampling schedule used
    elsewhere.
    """
    z = as_point(z, op.dim)
    acc = np.zeros(op.dim)
    for i in range(op.n):
        g = op.component_grad(i, z)
        if g.shape != (op.dim,):
            raise InputError(
                f"component {i} returned shape {g.shape}, expected ({op.dim},)"
            )
        acc += g
    return acc / op.n


def gradient_variance(op: FiniteSumOperator, z) -> float:
    """Component scatter (1/n) sum_i ||omega_i(z) - nu(z)||^2 at z.

    At a root of the average field this equals the variance of the component
    gradients at the solution, the quantity driving the noise floor of
    with-replacement sampling.
    """
    z = as_point(z, op.dim)
    nu = aggregate(op, z)
    acc = 0.0
    for i in range(op.n):
        acc += float(np.sum((op.component_grad(i, z) - nu) ** 2))
    return acc / op.n


# splitmix64 constants; used for portable derivation of per-role RNG seeds.
_MASK64 = (1 << 64) - 1
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MUL1 = 0xBF58476D1CE4E5B9
_SM_MUL2 = 0x94D049BB133111EB


def splitmix64(state: int) -> int:
    """One output of the splitmix64 generator for the given state."""
    z = (state + _SM_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * _SM_MUL1) & _MASK64
    z = ((z ^ (z >> 27)) * _SM_MUL2) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(base: int, *parts: int) -> int:
    """Derive a child seed from a base seed and integer role/index parts.

    Deterministic and documented so experiment streams can be reproduced
    outside this package: starting from ``base`` (mod 2^64), each part is
    xor-folded into the state which is then passed through splitmix64.
    """
    state = base & _MASK64
    for p in parts:
        state = splitmix64(state ^ (p & _MASK64))
    return state

"""Per-epoch index orderings: reshuffled, fixed, incremental, i.i.d., adversarial.

Five schedule kinds are supported:

* RR        fresh uniform permutation every epoch,
* SO        one uniform permutation drawn at the first epoch and reused,
* IG        fixed identity order (0, 1, ..., n-1),
* UNIFORM   n i.i.d. uniform draws per epoch (the with-replacement baseline;
            repeats allowed, but the epoch length stays n so gradient budgets
            match across schedules),
* ADVERSARIAL  a pluggable strategy picks the permutation each epoch, given
            full knowledge of the components, the solution, and the iterate.

Random draws come from a PCG64 stream owned by the schedule instance, so the
entire stream is reproducible from the spec's seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    ConfigurationError,
    FiniteSumOperator,
    as_permutation,
)


class ScheduleKind(str, Enum):
    RR = "rr"
    SO = "so"
    IG = "ig"
    UNIFORM = "uniform"
    ADVERSARIAL = "adversarial"


class AdversaryKind(str, Enum):
    IDENTITY = "identity"
    REVERSE = "reverse"
    NORM_DESC = "norm_desc"
    GREEDY_MAX_DIST = "greedy_max_dist"


@dataclass(frozen=True)
class ScheduleSpec:
    """Schedule kind plus its stream seed (and adversary, when adversarial)."""

    kind: ScheduleKind
    seed: int = 0
    adversary: AdversaryKind | None = None

    def __post_init__(self):
        if self.kind is ScheduleKind.ADVERSARIAL and self.adversary is None:
            raise ConfigurationError("adversarial schedule needs an adversary")
        if self.kind is not ScheduleKind.ADVERSARIAL and self.adversary is not None:
            raise ConfigurationError("adversary given for a non-adversarial schedule")

    @property
    def label(self) -> str:
        if self.kind is ScheduleKind.ADVERSARIAL:
            return f"as_{self.adversary.value}"
        return self.kind.value


def parse_schedule(text: str, seed: int = 0) -> ScheduleSpec:
    """Parse labels like 'rr', 'uniform', 'as:greedy_max_dist'."""
    text = text.strip().lower()
    if text.startswith("as:") or text.startswith("adversarial:"):
        name = text.split(":", 1)[1]
        return ScheduleSpec(ScheduleKind.ADVERSARIAL, seed, AdversaryKind(name))
    return ScheduleSpec(ScheduleKind(text), seed)


@dataclass(frozen=True)
class AdversaryContext:
    """Read-only snapshot handed to an adversary at the start of an epoch."""

    epoch: int
    epoch_start: np.ndarray
    op: FiniteSumOperator
    alpha: float
    z_star: np.ndarray | None = None


class IndexSchedule:
    """Stateful per-epoch ordering source for a fixed component count n.

    Epochs must be requested sequentially starting from 1; each request
    advances the owned RNG stream exactly as far as the schedule kind needs,
    which makes whole-run streams reproducible bitwise from the seed.
    """

    def __init__(self, spec: ScheduleSpec, n: int):
        if n < 1:
            raise ConfigurationError("schedule needs n >= 1")
        self.spec = spec
        self.n = n
        self._rng = np.random.Generator(np.random.PCG64(spec.seed))
        self._so_perm: np.ndarray | None = None
        self._next_epoch = 1

    def epoch_order(self, epoch: int, ctx: AdversaryContext | None = None) -> np.ndarray:
        """Index order for the given epoch (1-based).

        The result has length n for every kind. All kinds except UNIFORM
        return a validated permutation.
        """
        if epoch != self._next_epoch:
            raise ConfigurationError(
                f"epochs must be requested sequentially: got {epoch}, "
                f"expected {self._next_epoch}"
            )
        self._next_epoch += 1
        kind = self.spec.kind
        if kind is ScheduleKind.RR:
            return as_permutation(self._rng.permutation(self.n), self.n)
        if kind is ScheduleKind.SO:
            if self._so_perm is None:
                self._so_perm = as_permutation(self._rng.permutation(self.n), self.n)
            return self._so_perm
        if kind is ScheduleKind.IG:
            return np.arange(self.n, dtype=np.intp)
        if kind is ScheduleKind.UNIFORM:
            return self._rng.integers(0, self.n, size=self.n).astype(np.intp)
        if ctx is None:
            raise ConfigurationError("adversarial schedule requires a context")
        order = _ADVERSARIES[self.spec.adversary](ctx)
        return as_permutation(order, self.n)


def epoch_order(
    kind: ScheduleKind,
    epoch: int,
    n: int,
    rng: np.random.Generator,
    ctx: AdversaryContext | None = None,
    adversary: AdversaryKind | None = None,
    so_cache: dict | None = None,
) -> np.ndarray:
    """Stateless variant of IndexSchedule.epoch_order for one-off use.

    SO callers must pass a dict as ``so_cache`` so the first-epoch draw can
    be reused on later calls.
    """
    if kind is ScheduleKind.RR:
        return as_permutation(rng.permutation(n), n)
    if kind is ScheduleKind.SO:
        if so_cache is None:
            raise ConfigurationError("SO needs an so_cache dict to keep its draw")
        if "perm" not in so_cache:
            so_cache["perm"] = as_permutation(rng.permutation(n), n)
        return so_cache["perm"]
    if kind is ScheduleKind.IG:
        return np.arange(n, dtype=np.intp)
    if kind is ScheduleKind.UNIFORM:
        return rng.integers(0, n, size=n).astype(np.intp)
    if ctx is None:
        raise ConfigurationError("adversarial schedule requires a context")
    if adversary is None:
        raise ConfigurationError("adversarial schedule requires an adversary kind")
    return as_permutation(_ADVERSARIES[adversary](ctx), n)


def identity_order(ctx: AdversaryContext) -> np.ndarray:
    return np.arange(ctx.op.n, dtype=np.intp)


def reverse_order(ctx: AdversaryContext) -> np.ndarray:
    return np.arange(ctx.op.n - 1, -1, -1, dtype=np.intp)


def norm_desc_order(ctx: AdversaryContext) -> np.ndarray:
    """Components sorted by gradient norm at the epoch start, largest first.

    Ties break toward the lower index (stable sort on descending norms).
    """
    op = ctx.op
    z = ctx.epoch_start
    if op.affine is not None:
        grads = op.affine.mats @ z + op.affine.offsets
        norms = np.linalg.norm(grads, axis=1)
    else:
        norms = np.array([np.linalg.norm(op.component_grad(i, z)) for i in range(op.n)])
    return np.argsort(-norms, kind="stable").astype(np.intp)


def greedy_max_dist_order(ctx: AdversaryContext) -> np.ndarray:
    """Greedy ordering that pushes the simulated iterate away from the solution.

    Starting a simulated iterate at the epoch-start point, each slot picks the
    unused component whose descent step lands farthest from z*, then advances
    the simulation by that step. Costs O(n^2) component evaluations (one
    vectorized pass per slot when stacked affine data is available). Ties
    break toward the lower index.
    """
    op = ctx.op
    if ctx.z_star is None:
        raise ConfigurationError("greedy adversary needs the known root z*")
    z_star = ctx.z_star
    alpha = ctx.alpha
    z = ctx.epoch_start.copy()
    remaining = list(range(op.n))
    order = np.empty(op.n, dtype=np.intp)
    for slot in range(op.n):
        if op.affine is not None:
            idx = np.asarray(remaining, dtype=np.intp)
            steps = z[None, :] - alpha * (op.affine.mats[idx] @ z + op.affine.offsets[idx])
            dists = np.linalg.norm(steps - z_star[None, :], axis=1)
            best = int(np.argmax(dists))  # argmax returns the first max: low index wins
            pick = remaining[best]
            z = steps[best]
        else:
            best_dist, pick, best_step = -np.inf, remaining[0], None
            for i in remaining:
                step = z - alpha * op.component_grad(i, z)
                dist = float(np.linalg.norm(step - z_star))
                if dist > best_dist:
                    best_dist, pick, best_step = dist, i, step
            z = best_step
        order[slot] = pick
        remaining.remove(pick)
    return order


_ADVERSARIES = {
    AdversaryKind.IDENTITY: identity_order,
    AdversaryKind.REVERSE: reverse_order,
    AdversaryKind.NORM_DESC: norm_desc_order,
    AdversaryKind.GREEDY_MAX_DIST: greedy_max_dist_order,
}

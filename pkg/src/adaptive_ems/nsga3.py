"""NSGA-III for box-constrained many-objective minimization.

The engine works on plain numpy arrays internally (decisions ``X`` of shape
``(N, n)`` and objectives ``F`` of shape ``(N, m)``). The small dataclasses
below (:class:`DecisionVector`, :class:`Individual`) are the object-level
surface used by callers that want to work one solution at a time.

All objectives are minimized. Randomness flows through a single
``numpy.random.Generator`` seeded from :class:`OptimizerConfig`, so a run is
reproducible bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MAX_CONSECUTIVE_INVALID = 1000


class OptimizerAbort(RuntimeError):
    """Raised when the objective callback keeps returning non-finite values."""


@dataclass(eq=False)
class DecisionVector:
    values: np.ndarray
    bounds: np.ndarray  # shape (n, 2): lower, upper

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).copy()
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if self.values.shape != (self.bounds.shape[0],):
            raise ValueError(
                f"{self.values.size} values but {self.bounds.shape[0]} bounds"
            )

    @property
    def lower(self) -> np.ndarray:
        return self.bounds[:, 0]

    @property
    def upper(self) -> np.ndarray:
        return self.bounds[:, 1]

    def within_bounds(self) -> bool:
        return bool(np.all(self.values >= self.lower) and np.all(self.values <= self.upper))


@dataclass(eq=False)
class Individual:
    decision: DecisionVector
    objectives: np.ndarray
    rank: int = 0
    niche: int | None = None
    perpendicular_distance: float = 0.0

    def __post_init__(self):
        self.objectives = np.asarray(self.objectives, dtype=float)


@dataclass(frozen=True)
class ReferenceDirectionSet:
    directions: np.ndarray
    layering: tuple[tuple[int, float], ...]

    def __len__(self) -> int:
        return len(self.directions)

    @property
    def n_obj(self) -> int:
        return self.directions.shape[1]


@dataclass
class OptimizerConfig:
    population_size: int = 210
    generations: int = 200
    crossover_probability: float = 0.9
    crossover_distribution_index: float = 30.0
    # None means 1/n_var, resolved when the problem is known
    mutation_probability: float | None = None
    mutation_distribution_index: float = 20.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be at least 2")
        if self.generations < 1:
            raise ValueError("generations must be positive")
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ValueError("crossover_probability must lie in [0, 1]")
        if self.mutation_probability is not None and not 0.0 <= self.mutation_probability <= 1.0:
            raise ValueError("mutation_probability must lie in [0, 1]")
        if self.crossover_distribution_index <= 0 or self.mutation_distribution_index <= 0:
            raise ValueError("distribution indices must be positive")


@dataclass
class Problem:
    """Box-bounded problem with a batch objective callback.

    ``evaluate`` receives an ``(N, n_var)`` array and must return an
    ``(N, n_obj)`` array. Rows may be evaluated concurrently by the callback
    itself; the optimizer only ever calls it from one thread.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    n_obj: int

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("lower and upper bounds differ in shape")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def n_var(self) -> int:
        return self.lower.size


@dataclass(eq=False)
class ParetoFront:
    """Rank-0 members of a final population with per-objective min/max."""

    X: np.ndarray
    F: np.ndarray
    lower: np.ndarray = field(init=False)
    upper: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.F):
            self.lower = self.F.min(axis=0)
            self.upper = self.F.max(axis=0)
        else:
            self.lower = self.upper = np.empty(self.F.shape[1] if self.F.ndim == 2 else 0)

    def __len__(self) -> int:
        return len(self.F)


# --------------------------------------------------------------------------
# dominance and sorting


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a`` Pareto-dominates ``b`` under minimization."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"objective vectors differ in length: {a.size} vs {b.size}")
    return bool(np.all(a <= b) and np.any(a < b))


def domination_matrix(F: np.ndarray) -> np.ndarray:
    """``D[i, j]`` is True when row ``i`` dominates row ``j``."""
    n, m = F.shape
    le = np.ones((n, n), dtype=bool)
    lt = np.zeros((n, n), dtype=bool)
    # column loop keeps temporaries 2-D, much faster than one (n, n, m) reduction
    for k in range(m):
        col = F[:, k]
        le &= col[:, None] <= col[None, :]
        lt |= col[:, None] < col[None, :]
    return le & lt


def fast_nondominated_sort(F: np.ndarray) -> list[np.ndarray]:
    """Partition the rows of ``F`` into successive non-dominated fronts."""
    F = np.asarray(F, dtype=float)
    n = len(F)
    if n == 0:
        return []
    D = domination_matrix(F)
    dominated_by = D.sum(axis=0)
    remaining = np.ones(n, dtype=bool)
    fronts = []
    while remaining.any():
        front = np.flatnonzero(remaining & (dominated_by == 0))
        fronts.append(front)
        remaining[front] = False
        dominated_by = dominated_by - D[front].sum(axis=0)
    return fronts


def nondominated_sort(population: Sequence[Individual]) -> list[list[int]]:
    """Sort individuals into fronts and write each front index into ``rank``."""
    if len(population) == 0:
        return []
    F = np.vstack([ind.objectives for ind in population])
    if not np.all(np.isfinite(F)):
        raise ValueError("population contains non-finite objectives")
    fronts = fast_nondominated_sort(F)
    for rank, front in enumerate(fronts):
        for i in front:
            population[i].rank = rank
    return [front.tolist() for front in fronts]


# --------------------------------------------------------------------------
# reference directions


def _simplex_lattice(n_obj: int, partitions: int) -> np.ndarray:
    """All points with coordinates k/H summing to one (recursive enumeration)."""
    out: list[list[int]] = []

    def fill(prefix: list[int], left: int, depth: int):
        if depth == n_obj - 1:
            out.append(prefix + [left])
            return
        for k in range(left, -1, -1):
            fill(prefix + [k], left - k, depth + 1)

    fill([], partitions, 0)
    return np.asarray(out, dtype=float) / partitions


def das_dennis(n_obj: int, partitions: int | Sequence[tuple[int, float]]) -> ReferenceDirectionSet:
    """Das-Dennis reference directions, optionally in several shrunken layers.

    ``partitions`` is either a single partition count ``H`` or a list of
    ``(H, scale)`` pairs. A layer with ``scale < 1`` is contracted toward the
    simplex centroid, which is how the two-layer designs for many objectives
    are built.

    >>> len(das_dennis(6, [(3, 1.0), (2, 0.5)]))
    77
    """
    if n_obj < 2:
        raise ValueError("reference directions need at least two objectives")
    if isinstance(partitions, (int, np.integer)):
        layers = [(int(partitions), 1.0)]
    else:
        layers = [(int(h), float(s)) for h, s in partitions]
    if not layers:
        raise ValueError("at least one layer is required")

    blocks = []
    for h, scale in layers:
        if h < 1:
            raise ValueError(f"partition count must be >= 1, got {h}")
        if not 0.0 < scale <= 1.0:
            raise ValueError(f"layer scale must lie in (0, 1], got {scale}")
        lattice = _simplex_lattice(n_obj, h)
        blocks.append(scale * lattice + (1.0 - scale) / n_obj)
    dirs = np.vstack(blocks)
    # dedupe on rounded coordinates, keep first occurrence order
    _, keep = np.unique(np.round(dirs, 12), axis=0, return_index=True)
    dirs = dirs[np.sort(keep)]
    return ReferenceDirectionSet(dirs, tuple(layers))


# --------------------------------------------------------------------------
# survival


def _normalize(F: np.ndarray, first_front: np.ndarray) -> np.ndarray:
    """Translate by the ideal point and scale by hyperplane intercepts."""
    m = F.shape[1]
    ideal = F.min(axis=0)
    Ft = F - ideal

    weights = np.full((m, m), 1e-6)
    np.fill_diagonal(weights, 1.0)
    asf = (Ft[None, :, :] / weights[:, None, :]).max(axis=2)
    extremes = Ft[asf.argmin(axis=1)]

    intercepts = None
    try:
        b = np.linalg.solve(extremes, np.ones(m))
        with np.errstate(divide="ignore"):
            cand = 1.0 / b
        if np.all(np.isfinite(cand)) and np.all(cand > 1e-6):
            intercepts = cand
    except np.linalg.LinAlgError:
        pass
    if intercepts is None:
        intercepts = F[first_front].max(axis=0) - ideal
    intercepts = np.where(intercepts < 1e-12, 1.0, intercepts)
    return Ft / intercepts


def associate(N: np.ndarray, directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest reference line for each normalized point and its distance."""
    unit = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    proj = N @ unit.T
    sq = np.einsum("ij,ij->i", N, N)[:, None] - proj**2
    dist = np.sqrt(np.maximum(sq, 0.0))
    niche = dist.argmin(axis=1)
    return niche, dist[np.arange(len(N)), niche]


def _niching(
    n_pick: int,
    counts: np.ndarray,
    cand_niche: np.ndarray,
    cand_dist: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Pick ``n_pick`` candidates, always from a least-crowded niche.

    Inside a niche the candidate with the smaller perpendicular distance goes
    first; equal distances and equally crowded niches are ordered by ``rng``.
    """
    counts = counts.copy()
    order = np.lexsort((rng.random(len(cand_dist)), cand_dist))
    queues: dict[int, list[int]] = {}
    for i in order:
        queues.setdefault(int(cand_niche[i]), []).append(int(i))
    for q in queues.values():
        q.reverse()  # pop() takes from the end

    chosen: list[int] = []
    while len(chosen) < n_pick:
        open_niches = np.fromiter(queues.keys(), dtype=int)
        level = counts[open_niches].min()
        tied = open_niches[counts[open_niches] == level]
        for j in tied[rng.permutation(len(tied))]:
            chosen.append(queues[j].pop())
            counts[j] += 1
            if not queues[j]:
                del queues[j]
            if len(chosen) == n_pick:
                break
    return np.asarray(chosen, dtype=int)


@dataclass
class SurvivalResult:
    selected: np.ndarray  # indices into the input
    ranks: np.ndarray  # rank of every input row
    niche: np.ndarray  # niche of every input row (-1 if not computed)
    distance: np.ndarray


def survive_indices(
    F: np.ndarray, refs: ReferenceDirectionSet, target: int, rng: np.random.Generator
) -> SurvivalResult:
    n = len(F)
    if target > n:
        raise ValueError(f"cannot keep {target} of {n} individuals")
    fronts = fast_nondominated_sort(F)
    ranks = np.empty(n, dtype=int)
    for r, fr in enumerate(fronts):
        ranks[fr] = r

    taken: list[np.ndarray] = []
    size = 0
    last = None
    for fr in fronts:
        if size + len(fr) <= target:
            taken.append(fr)
            size += len(fr)
            if size == target:
                break
        else:
            last = fr
            break

    pool = np.concatenate(taken + ([last] if last is not None else []))
    niche = np.full(n, -1)
    distance = np.zeros(n)
    N = _normalize(F[pool], np.arange(len(fronts[0])))
    pn, pd = associate(N, refs.directions)
    niche[pool] = pn
    distance[pool] = pd

    selected = np.concatenate(taken) if taken else np.empty(0, dtype=int)
    if last is not None:
        counts = np.bincount(niche[selected], minlength=len(refs)) if len(selected) else np.zeros(len(refs), dtype=int)
        picks = _niching(target - len(selected), counts, niche[last], distance[last], rng)
        selected = np.concatenate([selected, last[picks]])
    return SurvivalResult(selected.astype(int), ranks, niche, distance)


def survive(
    population: Sequence[Individual],
    refs: ReferenceDirectionSet,
    target: int,
    rng: np.random.Generator | None = None,
) -> list[Individual]:
    """Environmental selection of NSGA-III on a list of individuals."""
    if target > len(population):
        raise ValueError(f"cannot keep {target} of {len(population)} individuals")
    rng = rng if rng is not None else np.random.default_rng(0)
    F = np.vstack([ind.objectives for ind in population])
    res = survive_indices(F, refs, target, rng)
    for i, ind in enumerate(population):
        ind.rank = int(res.ranks[i])
        ind.niche = None if res.niche[i] < 0 else int(res.niche[i])
        ind.perpendicular_distance = float(res.distance[i])
    return [population[i] for i in res.selected]


# --------------------------------------------------------------------------
# variation


def _sbx(X1, X2, lower, upper, prob, eta, rng):
    """Bounded simulated binary crossover on matched parent rows."""
    C1, C2 = X1.copy(), X2.copy()
    n_pairs, n_var = X1.shape
    if n_pairs == 0:
        return C1, C2
    do_pair = rng.random(n_pairs) < prob
    do_var = rng.random((n_pairs, n_var)) < 0.5
    u = rng.random((n_pairs, n_var))
    swap = rng.random((n_pairs, n_var)) < 0.5

    mask = do_pair[:, None] & do_var & (np.abs(X1 - X2) > 1e-14)
    if not mask.any():
        return C1, C2
    lb = np.broadcast_to(lower, X1.shape)[mask]
    ub = np.broadcast_to(upper, X1.shape)[mask]
    y1 = np.minimum(X1, X2)[mask]
    y2 = np.maximum(X1, X2)[mask]
    uu = u[mask]
    span = y2 - y1
    expo = 1.0 / (eta + 1.0)

    def betaq(beta):
        alpha = 2.0 - beta ** -(eta + 1.0)
        return np.where(
            uu <= 1.0 / alpha,
            (uu * alpha) ** expo,
            (1.0 / (2.0 - uu * alpha)) ** expo,
        )

    c1 = 0.5 * ((y1 + y2) - betaq(1.0 + 2.0 * (y1 - lb) / span) * span)
    c2 = 0.5 * ((y1 + y2) + betaq(1.0 + 2.0 * (ub - y2) / span) * span)
    c1 = np.clip(c1, lb, ub)
    c2 = np.clip(c2, lb, ub)
    s = swap[mask]
    C1[mask] = np.where(s, c2, c1)
    C2[mask] = np.where(s, c1, c2)
    return C1, C2


def _polynomial_mutation(X, lower, upper, prob, eta, rng):
    Y = X.copy()
    mask = rng.random(X.shape) < prob
    u = rng.random(X.shape)
    span = np.broadcast_to(upper - lower, X.shape)
    mask &= span > 0
    if not mask.any():
        return Y
    x = X[mask]
    lb = np.broadcast_to(lower, X.shape)[mask]
    ub = np.broadcast_to(upper, X.shape)[mask]
    sp = span[mask]
    uu = u[mask]
    d1 = (x - lb) / sp
    d2 = (ub - x) / sp
    power = 1.0 / (eta + 1.0)
    low = uu < 0.5
    val_lo = 2.0 * uu + (1.0 - 2.0 * uu) * (1.0 - d1) ** (eta + 1.0)
    val_hi = 2.0 * (1.0 - uu) + 2.0 * (uu - 0.5) * (1.0 - d2) ** (eta + 1.0)
    with np.errstate(invalid="ignore"):
        deltaq = np.where(low, val_lo**power - 1.0, 1.0 - val_hi**power)
    Y[mask] = np.clip(x + deltaq * sp, lb, ub)
    return Y


def sbx_crossover(
    p1: DecisionVector, p2: DecisionVector, cfg: OptimizerConfig, rng: np.random.Generator
) -> tuple[DecisionVector, DecisionVector]:
    if not np.array_equal(p1.bounds, p2.bounds):
        raise ValueError("parents must share bounds")
    c1, c2 = _sbx(
        p1.values[None, :], p2.values[None, :], p1.lower, p1.upper,
        cfg.crossover_probability, cfg.crossover_distribution_index, rng,
    )
    return DecisionVector(c1[0], p1.bounds), DecisionVector(c2[0], p1.bounds)


def polynomial_mutation(
    p: DecisionVector, cfg: OptimizerConfig, rng: np.random.Generator
) -> DecisionVector:
    prob = cfg.mutation_probability
    if prob is None:
        prob = 1.0 / len(p.values)
    y = _polynomial_mutation(
        p.values[None, :], p.lower, p.upper, prob, cfg.mutation_distribution_index, rng
    )
    return DecisionVector(y[0], p.bounds)


# --------------------------------------------------------------------------
# main loop


class _Evaluator:
    """Evaluates batches, resampling rows whose objectives are not finite."""

    def __init__(self, problem: Problem, rng: np.random.Generator):
        self.problem = problem
        self.rng = rng
        self.streak = 0

    def _sample(self, k: int) -> np.ndarray:
        p = self.problem
        return p.lower + self.rng.random((k, p.n_var)) * (p.upper - p.lower)

    def __call__(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        X = X.copy()
        F = np.empty((len(X), self.problem.n_obj))
        todo = np.arange(len(X))
        while len(todo):
            out = np.asarray(self.problem.evaluate(X[todo]), dtype=float)
            if out.shape != (len(todo), self.problem.n_obj):
                raise ValueError(
                    f"objective callback returned shape {out.shape}, "
                    f"expected {(len(todo), self.problem.n_obj)}"
                )
            ok = np.all(np.isfinite(out), axis=1)
            good = np.flatnonzero(ok)
            if len(good):
                self.streak = len(todo) - 1 - good[-1]
            else:
                self.streak += len(todo)
            if self.streak > MAX_CONSECUTIVE_INVALID:
                raise OptimizerAbort(
                    f"{self.streak} consecutive non-finite objective evaluations; "
                    f"last bad decision: {X[todo[~ok][-1]].tolist()}"
                )
            F[todo[ok]] = out[ok]
            todo = todo[~ok]
            if len(todo):
                X[todo] = self._sample(len(todo))
        return X, F


def optimize(
    problem: Problem, cfg: OptimizerConfig, refs: ReferenceDirectionSet
) -> ParetoFront:
    """Run NSGA-III and return the rank-0 members of the final population.

    Generation one is the random initial population; every further generation
    creates ``population_size`` offspring by SBX and polynomial mutation and
    keeps the best ``population_size`` of parents plus offspring.
    """
    if refs.n_obj != problem.n_obj:
        raise ValueError(
            f"reference directions have {refs.n_obj} objectives, problem has {problem.n_obj}"
        )
    if cfg.population_size < len(refs):
        raise ValueError(
            f"population_size {cfg.population_size} is smaller than the "
            f"{len(refs)} reference directions"
        )
    rng = np.random.default_rng(cfg.rng_seed)
    evaluate = _Evaluator(problem, rng)
    pm = cfg.mutation_probability if cfg.mutation_probability is not None else 1.0 / problem.n_var
    pop = cfg.population_size

    X, F = evaluate(evaluate._sample(pop))
    for _ in range(cfg.generations - 1):
        n_pairs = (pop + 1) // 2
        mates = rng.integers(0, pop, size=(n_pairs, 2))
        C1, C2 = _sbx(
            X[mates[:, 0]], X[mates[:, 1]], problem.lower, problem.upper,
            cfg.crossover_probability, cfg.crossover_distribution_index, rng,
        )
        children = np.vstack([C1, C2])[:pop]
        children = _polynomial_mutation(
            children, problem.lower, problem.upper, pm, cfg.mutation_distribution_index, rng
        )
        children, Fc = evaluate(children)
        X_all = np.vstack([X, children])
        F_all = np.vstack([F, Fc])
        keep = survive_indices(F_all, refs, pop, rng).selected
        X, F = X_all[keep], F_all[keep]

    first = fast_nondominated_sort(F)[0]
    Xf, Ff = X[first], F[first]
    _, uniq = np.unique(Xf, axis=0, return_index=True)
    uniq = np.sort(uniq)
    logger.debug("optimize: %d rank-0 members (%d unique)", len(first), len(uniq))
    return ParetoFront(Xf[uniq], Ff[uniq])


__all__ = [
    "DecisionVector",
    "Individual",
    "OptimizerAbort",
    "OptimizerConfig",
    "ParetoFront",
    "Problem",
    "ReferenceDirectionSet",
    "associate",
    "das_dennis",
    "dominates",
    "fast_nondominated_sort",
    "nondominated_sort",
    "optimize",
    "polynomial_mutation",
    "sbx_crossover",
    "survive",
    "survive_indices",
]

"""Front quality indicators and decision analytics.

Everything here is a pure function of its inputs. Objective sets are given
as array-likes of shape ``(N, m)``; all objectives are minimized.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .nsga3 import fast_nondominated_sort

logger = logging.getLogger(__name__)

EXACT_HV_MAX_OBJECTIVES = 4
DEFAULT_HV_SAMPLES = 100_000


class UndefinedMetricError(ValueError):
    """A ratio metric was requested with a zero denominator."""


class DegenerateFrontError(ValueError):
    pass


@dataclass
class IndicatorReport:
    hypervolume: float
    gd_ideal: float
    igd: float
    knee_index: int | None
    diversity: np.ndarray = field(default_factory=lambda: np.empty(0))
    hypervolume_stderr: float = 0.0


def _as_matrix(points) -> np.ndarray:
    F = np.asarray(points, dtype=float)
    if F.ndim == 1:
        F = F[None, :]
    return F


def reference_point(front, margin: float = 0.1, floor: float = 1e-6) -> np.ndarray:
    """Per-objective max plus ``margin`` of the span (at least ``floor``)."""
    F = _as_matrix(front)
    hi = F.max(axis=0)
    span = hi - F.min(axis=0)
    return hi + np.maximum(margin * span, floor)


# --------------------------------------------------------------------------
# hypervolume


def _nondominated(F: np.ndarray) -> np.ndarray:
    F = np.unique(F, axis=0)
    if len(F) <= 1:
        return F
    return F[fast_nondominated_sort(F)[0]]


def _hv_2d(F: np.ndarray, ref: np.ndarray) -> float:
    F = F[np.argsort(F[:, 0], kind="stable")]
    vol = 0.0
    best_y = ref[1]
    for x, y in F:
        if y < best_y:
            vol += (ref[0] - x) * (best_y - y)
            best_y = y
    return vol


def _wfg(F: np.ndarray, ref: np.ndarray) -> float:
    """Exclusive-contribution recursion: sum of each point's slice beyond the rest."""
    if len(F) == 0:
        return 0.0
    if F.shape[1] == 2:
        return _hv_2d(F, ref)
    # sorting by the last objective keeps the limit sets small
    F = F[np.argsort(-F[:, -1], kind="stable")]
    total = 0.0
    for i in range(len(F)):
        box = float(np.prod(ref - F[i]))
        rest = F[i + 1:]
        if len(rest):
            limited = _nondominated(np.maximum(rest, F[i]))
            box -= _wfg(limited, ref)
        total += box
    return total


def hypervolume_estimate(
    front, ref, samples: int = DEFAULT_HV_SAMPLES, seed: int = 0, chunk: int = 20_000
) -> tuple[float, float]:
    """Monte-Carlo hypervolume and its standard error."""
    F = _nondominated(_check_ref(front, ref))
    ref = np.asarray(ref, dtype=float)
    lo = F.min(axis=0)
    box = float(np.prod(ref - lo))
    if box == 0.0:
        return 0.0, 0.0
    rng = np.random.default_rng(seed)
    hits = 0
    drawn = 0
    while drawn < samples:
        k = min(chunk, samples - drawn)
        pts = lo + rng.random((k, F.shape[1])) * (ref - lo)
        covered = np.zeros(k, dtype=bool)
        for p in F:
            covered |= np.all(pts >= p, axis=1)
        hits += int(covered.sum())
        drawn += k
    p = hits / samples
    return box * p, box * math.sqrt(p * (1.0 - p) / samples)


def _check_ref(front, ref) -> np.ndarray:
    F = _as_matrix(front)
    ref = np.asarray(ref, dtype=float)
    if ref.shape != (F.shape[1],):
        raise ValueError("reference point dimension does not match the front")
    if np.any(F > ref):
        raise ValueError("a front point exceeds the reference point")
    return F


def hypervolume(front, ref, samples: int = DEFAULT_HV_SAMPLES, seed: int = 0) -> float:
    """Volume dominated by ``front`` and bounded by ``ref``.

    Exact (WFG recursion) up to four objectives, Monte-Carlo beyond that; use
    :func:`hypervolume_estimate` directly when the standard error matters.
    """
    F = _check_ref(front, ref)
    if len(F) == 0:
        return 0.0
    if F.shape[1] > EXACT_HV_MAX_OBJECTIVES:
        return hypervolume_estimate(F, ref, samples=samples, seed=seed)[0]
    ref = np.asarray(ref, dtype=float)
    if F.shape[1] == 1:
        return float(ref[0] - F[:, 0].min())
    return _wfg(_nondominated(F), ref)


# --------------------------------------------------------------------------
# distances


def gd_ideal(front, ideal) -> float:
    """Mean Euclidean distance from the front members to the ideal point."""
    F = _as_matrix(front)
    if len(F) == 0:
        raise ValueError("front is empty")
    return float(np.linalg.norm(F - np.asarray(ideal, dtype=float), axis=1).mean())


def igd(approx, reference_set) -> float:
    A = _as_matrix(approx)
    P = _as_matrix(reference_set)
    if len(A) == 0 or len(P) == 0:
        raise ValueError("both sets must be nonempty")
    d = np.linalg.norm(P[:, None, :] - A[None, :, :], axis=2)
    return float(d.min(axis=1).mean())


# --------------------------------------------------------------------------
# decision analytics


def _minmax(F: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalize columns to [0, 1]; returns the matrix and the non-constant mask."""
    lo = F.min(axis=0)
    span = F.max(axis=0) - lo
    live = span > 1e-12
    N = np.zeros_like(F)
    N[:, live] = (F[:, live] - lo[live]) / span[live]
    return N, live


class Knee(NamedTuple):
    index: int
    distance: float
    degenerate: bool


def knee_distances(front) -> np.ndarray:
    """Signed distance of each member below the extreme-point hyperplane.

    Distances are measured in min-max normalized objective space over the
    non-constant objectives; positive values lie on the ideal side.
    """
    N, live = _minmax(_as_matrix(front))
    N = N[:, live]
    k = N.shape[1]
    if k == 0:
        return np.zeros(len(N))
    if k == 1:
        return 1.0 - N[:, 0]
    extremes = N[N.argmin(axis=0)]
    normal = None
    try:
        w = np.linalg.solve(extremes, np.ones(k))
        if np.all(np.isfinite(w)) and np.all(w > 0):
            normal = w
    except np.linalg.LinAlgError:
        pass
    if normal is None:
        normal = np.ones(k)
    return (1.0 - N @ normal) / np.linalg.norm(normal)


def knee_point(front, tol: float = 1e-12) -> Knee:
    """Member farthest from the hyperplane through the per-objective extremes.

    Ties go to the member with the lower first objective. A two-member front
    has no interior; the lower-first-objective member is returned and flagged.
    """
    F = _as_matrix(front)
    if len(F) < 2:
        raise DegenerateFrontError("knee detection needs at least two members")
    if len(F) == 2:
        i = int(np.argmin(F[:, 0]))
        return Knee(i, 0.0, True)
    d = knee_distances(F)
    best = np.flatnonzero(d >= d.max() - tol)
    i = int(best[np.argmin(F[best, 0])])
    return Knee(i, float(d[i]), False)


def diversity_index(front, k: int = 5) -> np.ndarray:
    """Mean normalized distance of each member to its ``k`` nearest neighbours.

    Larger values mark members in sparser parts of the front. Objectives are
    min-max normalized over the front first, so the index is scale free.
    """
    F = _as_matrix(front)
    if len(F) < 2:
        logger.debug("diversity index of a singleton front is zero")
        return np.zeros(len(F))
    N, _ = _minmax(F)
    kk = min(k, len(F) - 1)
    d = np.linalg.norm(N[:, None, :] - N[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    nearest = np.sort(d, axis=1)[:, :kk]
    return nearest.mean(axis=1)


def mismatch_pct(load_kw: float, supply_kw: float) -> float:
    """Relative load/supply deviation in percent of the load."""
    if load_kw == 0:
        raise UndefinedMetricError("mismatch undefined for zero load")
    return abs((load_kw - supply_kw) / load_kw) * 100.0


def mismatch_improvement(m_baseline: float, m_moo: float) -> float:
    """Relative mismatch reduction in percent; negative when the MOO arm is worse."""
    if m_baseline == 0:
        raise UndefinedMetricError("improvement undefined for a zero baseline mismatch")
    return (m_baseline - m_moo) / m_baseline * 100.0

"""Real-time adaptive energy management loop.

Each tick optimizes the four set-points against the six plant objectives,
scores the resulting front with SOC-dependent weights, filters and orders the
candidates, applies the winner and carries the battery state forward.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import indicators as ind
from .baseline import BaselineTick
from .grid_model import (
    BatteryState,
    ControlDecision,
    TelemetrySample,
    decision_bounds,
    evaluate_batch,
    pv_power,
    soc_step,
)
from .nsga3 import (
    OptimizerAbort,
    OptimizerConfig,
    ParetoFront,
    Problem,
    ReferenceDirectionSet,
    das_dennis,
    optimize,
)

logger = logging.getLogger(__name__)

WEIGHTS_LOW_SOC = (0.3, 0.2, 0.1, 0.1, 0.2, 0.1)
WEIGHTS_HIGH_SOC = (0.4, 0.2, 0.1, 0.1, 0.1, 0.1)
DEFAULT_REFERENCE_LAYERS = ((3, 1.0), (2, 0.5))

N_OBJ = 6
PV_COL, DIESEL_COL, BATTERY_COL, LOAD_COL = 3, 0, 1, 2
DEGRADATION_OBJ = 4
# set-points below this are numerically zero diesel
DIESEL_TOLERANCE_KW = 1e-6


class TickError(RuntimeError):
    def __init__(self, tick_index: int, cause: Exception):
        super().__init__(f"tick {tick_index}: {cause}")
        self.tick_index = tick_index


@dataclass
class EmsConfig:
    tick_seconds: float = 5.0
    initial_soc: float = 80.0
    soc_weight_threshold: float = 50.0
    pv_usage_floor_fraction: float = 0.9
    degradation_ceiling: float = 0.05
    battery_capacity_kwh: float = 40.0
    soc_floor: float = 40.0
    reference_layers: tuple[tuple[int, float], ...] = DEFAULT_REFERENCE_LAYERS
    hv_samples: int = 20_000
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if self.tick_seconds <= 0:
            raise ValueError("tick_seconds must be positive")
        if not 0.0 <= self.initial_soc <= 100.0:
            raise ValueError("initial_soc must lie in [0, 100]")
        if not 0.0 <= self.soc_weight_threshold <= 100.0:
            raise ValueError("soc_weight_threshold must lie in [0, 100]")
        if not 0.0 <= self.pv_usage_floor_fraction <= 1.0:
            raise ValueError("pv_usage_floor_fraction must lie in [0, 1]")
        if self.degradation_ceiling < 0:
            raise ValueError("degradation_ceiling must be non-negative")
        if self.battery_capacity_kwh <= 0:
            raise ValueError("battery_capacity_kwh must be positive")
        if not 0.0 <= self.soc_floor <= 100.0:
            raise ValueError("soc_floor must lie in [0, 100]")
        self.reference_layers = tuple((int(h), float(s)) for h, s in self.reference_layers)

    def initial_battery(self) -> BatteryState:
        return BatteryState(self.initial_soc, self.battery_capacity_kwh, self.soc_floor)

    def reference_directions(self) -> ReferenceDirectionSet:
        return das_dennis(N_OBJ, self.reference_layers)


@dataclass(frozen=True)
class EmsTickReport:
    soc: float
    mismatch_improvement_pct: float  # nan when the baseline mismatch is zero
    freq_penalty: float
    battery_ratio: float
    load_ratio: float
    pv_usage_kw: float
    moo_score: float
    diesel_kw: float


class Selection(NamedTuple):
    index: int
    decision: ControlDecision
    fallback: bool


@dataclass
class TickOutcome:
    decision: ControlDecision
    battery: BatteryState
    report: EmsTickReport
    front: ParetoFront
    selected: int
    knee: int
    scores: np.ndarray  # weighted score of every front member, front order
    mismatch_pct: float
    timestamp: float
    load_kw: float
    pv_available_kw: float
    fallback: bool
    indicators: ind.IndicatorReport | None = None

    @property
    def knee_diesel_kw(self) -> float:
        return float(self.front.X[self.knee, DIESEL_COL])


def adaptive_weights(soc: float, cfg: EmsConfig | None = None) -> tuple[float, ...]:
    threshold = cfg.soc_weight_threshold if cfg is not None else 50.0
    return WEIGHTS_LOW_SOC if soc < threshold else WEIGHTS_HIGH_SOC


def _objectives(front) -> np.ndarray:
    return front.F if isinstance(front, ParetoFront) else np.atleast_2d(np.asarray(front, dtype=float))


def weighted_scores(front, weights: Sequence[float]) -> np.ndarray:
    """Weighted sum of min-max normalized objectives, in front order."""
    F = _objectives(front)
    if len(F) == 0:
        raise ValueError("empty front: the optimizer produced no candidates")
    N, _ = ind._minmax(F)
    return N @ np.asarray(weights, dtype=float)


def score_front(front, weights: Sequence[float]) -> list[tuple[int, float]]:
    """Front members ordered by ascending weighted score.

    Ties go to the member using more PV (the more negative sixth objective).
    """
    F = _objectives(front)
    s = weighted_scores(F, weights)
    order = np.lexsort((F[:, 5], s))
    return [(int(i), float(s[i])) for i in order]


def _supply(X: np.ndarray) -> np.ndarray:
    return X[:, PV_COL] + X[:, DIESEL_COL] - X[:, BATTERY_COL]


def post_select(
    scored: Sequence[tuple[int, float]],
    front: ParetoFront,
    baseline: BaselineTick,
    pv_available: float,
    cfg: EmsConfig,
) -> Selection:
    """Filter the scored front and return the preferred member.

    A candidate survives if it burns no more diesel than the baseline, beats
    the baseline mismatch, uses at least the configured share of available PV
    and stays under the degradation ceiling. Survivors are ordered by PV use
    and then by diesel saved. An empty filter falls back to the best score.
    """
    if len(scored) == 0:
        raise ValueError("nothing to select from")
    X, F = front.X, front.F
    idx = np.array([i for i, _ in scored])
    diesel = X[idx, DIESEL_COL]
    pv = X[idx, PV_COL]
    keep = diesel <= baseline.diesel_kw + DIESEL_TOLERANCE_KW
    keep &= pv >= cfg.pv_usage_floor_fraction * pv_available
    keep &= F[idx, DEGRADATION_OBJ] <= cfg.degradation_ceiling
    if baseline.mismatch_pct > 0 and baseline.load_kw > 0:
        m = np.abs(baseline.load_kw - _supply(X[idx])) / baseline.load_kw * 100.0
        keep &= m < baseline.mismatch_pct
    else:
        # no baseline mismatch to improve on
        keep[:] = False

    if keep.any():
        cand = np.flatnonzero(keep)
        saved = baseline.diesel_kw - diesel[cand]
        best = cand[np.lexsort((-saved, -pv[cand]))[0]]
        i, fallback = int(idx[best]), False
    else:
        i, fallback = int(idx[0]), True
    return Selection(i, ControlDecision.from_array(X[i]), fallback)


def build_problem(sample: TelemetrySample, battery: BatteryState, dt: float) -> Problem:
    box = decision_bounds(pv_power(sample), battery)
    return Problem(
        evaluate=lambda X: evaluate_batch(X, sample, battery, dt),
        lower=box[:, 0],
        upper=box[:, 1],
        n_obj=N_OBJ,
    )


def tick(
    state: BatteryState,
    sample: TelemetrySample,
    baseline: BaselineTick,
    cfg: EmsConfig,
    tick_index: int = 0,
    refs: ReferenceDirectionSet | None = None,
) -> TickOutcome:
    """One control interval: optimize, score, select, apply, update SOC."""
    refs = refs if refs is not None else cfg.reference_directions()
    pv_avail = pv_power(sample)
    opt_cfg = OptimizerConfig(**{**vars(cfg.optimizer), "rng_seed": cfg.optimizer.rng_seed + tick_index})
    try:
        front = optimize(build_problem(sample, state, cfg.tick_seconds), opt_cfg, refs)
    except OptimizerAbort as exc:
        raise TickError(tick_index, exc) from exc

    weights = adaptive_weights(state.soc, cfg)
    scored = score_front(front, weights)
    sel = post_select(scored, front, baseline, pv_avail, cfg)
    scores = weighted_scores(front, weights)
    decision = sel.decision
    new_state = soc_step(state, decision.p_battery, cfg.tick_seconds / 3600.0)

    load = sample.load_kw
    m_moo = ind.mismatch_pct(load, decision.supply_kw) if load > 0 else 0.0
    try:
        improvement = ind.mismatch_improvement(baseline.mismatch_pct, m_moo)
    except ind.UndefinedMetricError:
        improvement = float("nan")
    report = EmsTickReport(
        soc=new_state.soc,
        mismatch_improvement_pct=improvement,
        freq_penalty=float(front.F[sel.index, 2]),
        battery_ratio=decision.p_battery / load if load > 0 else 0.0,
        load_ratio=decision.p_load / load if load > 0 else 0.0,
        pv_usage_kw=decision.p_pv_used,
        moo_score=float(scores[sel.index]),
        diesel_kw=decision.p_diesel,
    )
    knee = ind.knee_point(front.F).index if len(front) >= 2 else 0
    return TickOutcome(
        decision=decision,
        battery=new_state,
        report=report,
        front=front,
        selected=sel.index,
        knee=knee,
        scores=scores,
        mismatch_pct=m_moo,
        timestamp=sample.timestamp,
        load_kw=load,
        pv_available_kw=pv_avail,
        fallback=sel.fallback,
    )


def nondominated_union(fronts: Sequence[np.ndarray], chunk: int = 512) -> np.ndarray:
    """Non-dominated rows of the stacked fronts (duplicates collapsed)."""
    if not fronts:
        return np.empty((0, N_OBJ))
    P = np.unique(np.vstack(fronts), axis=0)
    keep = np.ones(len(P), dtype=bool)
    for start in range(0, len(P), chunk):
        C = P[start:start + chunk]
        le = (P[None, :, :] <= C[:, None, :]).all(axis=2)
        lt = (P[None, :, :] < C[:, None, :]).any(axis=2)
        keep[start:start + chunk] = ~(le & lt).any(axis=1)
    return P[keep]


def attach_indicators(outcomes: Sequence[TickOutcome], hv_samples: int = 20_000) -> None:
    """Fill in per-tick indicators once the whole run is known.

    The ideal point and the IGD reference set are run-level quantities, so
    this runs after the last tick.
    """
    if not outcomes:
        return
    fronts = [o.front.F for o in outcomes]
    ideal = np.vstack(fronts).min(axis=0)
    reference_set = nondominated_union(fronts)
    for t, o in enumerate(outcomes):
        F = o.front.F
        # constant objectives only scale the volume by the reference floor
        live = np.ptp(F, axis=0) > 1e-12
        G = F[:, live] if live.any() else F[:, :1]
        ref = ind.reference_point(G)
        if G.shape[1] > ind.EXACT_HV_MAX_OBJECTIVES:
            hv, se = ind.hypervolume_estimate(G, ref, samples=hv_samples, seed=t)
        else:
            hv, se = ind.hypervolume(G, ref), 0.0
        o.indicators = ind.IndicatorReport(
            hypervolume=hv,
            hypervolume_stderr=se,
            gd_ideal=ind.gd_ideal(F, ideal),
            igd=ind.igd(F, reference_set),
            knee_index=o.knee,
            diversity=ind.diversity_index(F),
        )


def check_alignment(profile: Sequence[TelemetrySample], baseline: Sequence[BaselineTick]) -> None:
    if len(profile) != len(baseline):
        raise ValueError(f"profile has {len(profile)} rows but baseline has {len(baseline)}")
    for i, (s, b) in enumerate(zip(profile, baseline)):
        if s.timestamp != b.timestamp:
            raise ValueError(
                f"row {i}: profile timestamp {s.timestamp} != baseline timestamp {b.timestamp}"
            )


def run(
    profile: Sequence[TelemetrySample],
    baseline: Sequence[BaselineTick],
    cfg: EmsConfig,
    paced: bool = False,
    with_indicators: bool = True,
) -> list[TickOutcome]:
    """Run the loop over a replayed profile, carrying SOC between ticks.

    In paced mode each tick is held to ``cfg.tick_seconds`` of wall-clock
    time; replay mode runs ticks back to back.
    """
    check_alignment(profile, baseline)
    refs = cfg.reference_directions()
    state = cfg.initial_battery()
    outcomes: list[TickOutcome] = []
    for t, (sample, base) in enumerate(zip(profile, baseline)):
        started = time.monotonic()
        out = tick(state, sample, base, cfg, tick_index=t, refs=refs)
        outcomes.append(out)
        state = out.battery
        logger.info(
            "tick %d: soc=%.4f pv=%.4f diesel=%.4f mismatch=%.3f%%",
            t, state.soc, out.decision.p_pv_used, out.decision.p_diesel, out.mismatch_pct,
        )
        if paced:
            time.sleep(max(0.0, cfg.tick_seconds - (time.monotonic() - started)))
    if with_indicators:
        attach_indicators(outcomes, cfg.hv_samples)
    return outcomes

"""Report files and the baseline-versus-optimized comparison pipeline."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import ems
from .baseline import BaselineTick, generate_baseline
from .config import RunConfig
from .grid_model import TelemetrySample, fuel_liters

REPORT_COLUMNS = (
    "soc_pct",
    "mismatch_improvement_pct",
    "freq_penalty",
    "battery_ratio",
    "load_ratio",
    "pv_usage_kw",
    "moo_score",
    "diesel_kw",
)
FRONT_COLUMNS = (
    "tick",
    "o1_fuel_l",
    "o2_mismatch_kw",
    "o3_freq_hz",
    "o4_pf_penalty",
    "o5_degradation_pct",
    "o6_pv_neg_kw",
    "pv_usage_kw",
    "diversity",
    "is_selected",
    "is_knee",
)
BASELINE_COLUMNS = (
    "timestamp_s",
    "load_kw",
    "pv_available_kw",
    "diesel_kw",
    "battery_kw",
    "pv_used_kw",
    "mismatch_pct",
    "soc_pct",
)


def _fmt4(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.4f}"


def _g(x: float, digits: int = 6) -> str:
    return f"{x:.{digits}g}"


# --------------------------------------------------------------------------
# per-tick report


def write_report(outcomes: Sequence[ems.TickOutcome], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for o in outcomes:
            r = o.report
            w.writerow(
                [
                    _fmt4(r.soc),
                    _fmt4(r.mismatch_improvement_pct),
                    _fmt4(r.freq_penalty),
                    _fmt4(r.battery_ratio),
                    _fmt4(r.load_ratio),
                    _fmt4(r.pv_usage_kw),
                    _fmt4(r.moo_score),
                    _fmt4(r.diesel_kw),
                ]
            )


def read_report(path: str | Path) -> list[ems.EmsTickReport]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ValueError(f"{path}: unexpected report header {reader.fieldnames}")
        return [
            ems.EmsTickReport(
                soc=float(row["soc_pct"]),
                mismatch_improvement_pct=float(row["mismatch_improvement_pct"]),
                freq_penalty=float(row["freq_penalty"]),
                battery_ratio=float(row["battery_ratio"]),
                load_ratio=float(row["load_ratio"]),
                pv_usage_kw=float(row["pv_usage_kw"]),
                moo_score=float(row["moo_score"]),
                diesel_kw=float(row["diesel_kw"]),
            )
            for row in reader
        ]


# --------------------------------------------------------------------------
# baseline record


def write_baseline(records: Sequence[BaselineTick], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(BASELINE_COLUMNS)
        for b in records:
            w.writerow(
                [_g(v, 12) for v in (
                    b.timestamp, b.load_kw, b.pv_available_kw, b.diesel_kw,
                    b.battery_kw, b.pv_used_kw, b.mismatch_pct, b.soc,
                )]
            )


def read_baseline(path: str | Path) -> list[BaselineTick]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in BASELINE_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: baseline file lacks column(s) {', '.join(missing)}")
        out = []
        for row in reader:
            try:
                out.append(
                    BaselineTick(
                        timestamp=float(row["timestamp_s"]),
                        load_kw=float(row["load_kw"]),
                        pv_available_kw=float(row["pv_available_kw"]),
                        diesel_kw=float(row["diesel_kw"]),
                        battery_kw=float(row["battery_kw"]),
                        pv_used_kw=float(row["pv_used_kw"]),
                        mismatch_pct=float(row["mismatch_pct"]),
                        soc=float(row["soc_pct"]),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}: line {reader.line_num}: {exc}") from exc
        return out


# --------------------------------------------------------------------------
# front dumps


def front_rows(tick_index: int, outcome: ems.TickOutcome) -> list[list[str]]:
    F, X = outcome.front.F, outcome.front.X
    diversity = (
        outcome.indicators.diversity
        if outcome.indicators is not None and len(outcome.indicators.diversity) == len(F)
        else np.zeros(len(F))
    )
    rows = []
    for i in range(len(F)):
        rows.append(
            [str(tick_index)]
            + [_g(v) for v in F[i]]
            + [
                _g(X[i, ems.PV_COL]),
                _g(diversity[i]),
                "1" if i == outcome.selected else "0",
                "1" if i == outcome.knee else "0",
            ]
        )
    return rows


def write_front_dumps(outcomes: Sequence[ems.TickOutcome], directory: str | Path) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for t, o in enumerate(outcomes):
        p = directory / f"tick_{t:05d}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(FRONT_COLUMNS)
            w.writerows(front_rows(t, o))
        paths.append(p)
    return paths


def read_front_dump(path: str | Path) -> dict[int, np.ndarray]:
    """Objective matrices keyed by tick from one dump file or a directory of them."""
    path = Path(path)
    files = sorted(path.glob("*.csv")) if path.is_dir() else [path]
    fronts: dict[int, list[list[float]]] = {}
    for f in files:
        with f.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != FRONT_COLUMNS:
                raise ValueError(f"{f}: unexpected front dump header")
            for row in reader:
                fronts.setdefault(int(row["tick"]), []).append(
                    [float(row[c]) for c in FRONT_COLUMNS[1:7]]
                )
    return {t: np.asarray(v) for t, v in sorted(fronts.items())}


# --------------------------------------------------------------------------
# summary and pipeline


def _r(x: float) -> float | None:
    if x is None or not math.isfinite(x):
        return None
    return float(f"{x:.6g}")


def summarize(
    outcomes: Sequence[ems.TickOutcome], baseline: Sequence[BaselineTick], tick_seconds: float
) -> dict[str, Any]:
    n = len(outcomes)
    moo_kwh = sum(o.decision.p_diesel for o in outcomes) * tick_seconds / 3600.0
    base_kwh = sum(b.diesel_kw for b in baseline) * tick_seconds / 3600.0
    improvements = [o.report.mismatch_improvement_pct for o in outcomes]
    defined = [x for x in improvements if math.isfinite(x)]
    knee_ok = sum(
        round(o.knee_diesel_kw, 4) >= round(o.decision.p_diesel, 4) for o in outcomes
    )
    doc: dict[str, Any] = {
        "ticks": n,
        "tick_seconds": tick_seconds,
        "moo_mean_mismatch_pct": _r(float(np.mean([o.mismatch_pct for o in outcomes]))) if n else None,
        "baseline_mean_mismatch_pct": _r(float(np.mean([b.mismatch_pct for b in baseline]))) if n else None,
        "mean_mismatch_improvement_pct": _r(float(np.mean(defined))) if defined else None,
        "improvement_not_applicable_ticks": n - len(defined),
        "moo_diesel_kwh": _r(moo_kwh),
        "baseline_diesel_kwh": _r(base_kwh),
        "moo_fuel_l": _r(sum(fuel_liters(o.decision.p_diesel, tick_seconds) for o in outcomes)),
        "baseline_fuel_l": _r(sum(fuel_liters(b.diesel_kw, tick_seconds) for b in baseline)),
        "diesel_kwh_saved_total": _r(base_kwh - moo_kwh),
        "diesel_kwh_saved_per_cycle": _r((base_kwh - moo_kwh) / n) if n else None,
        "moo_final_soc_pct": _r(outcomes[-1].battery.soc) if n else None,
        "baseline_final_soc_pct": _r(baseline[-1].soc) if n else None,
        "moo_mean_pv_usage_kw": _r(float(np.mean([o.decision.p_pv_used for o in outcomes]))) if n else None,
        "fallback_ticks": sum(o.fallback for o in outcomes),
        "knee_diesel_ge_selected_ticks": knee_ok,
    }
    with_ind = [o.indicators for o in outcomes if o.indicators is not None]
    if with_ind:
        doc["mean_hypervolume"] = _r(float(np.mean([i.hypervolume for i in with_ind])))
        doc["mean_gd_ideal"] = _r(float(np.mean([i.gd_ideal for i in with_ind])))
        doc["mean_igd"] = _r(float(np.mean([i.igd for i in with_ind])))
    return doc


def write_summary(summary: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def write_outputs(
    outcomes: Sequence[ems.TickOutcome],
    baseline: Sequence[BaselineTick],
    cfg: RunConfig,
    out_dir: str | Path,
) -> dict[str, Any]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_report(outcomes, out_dir / "report.csv")
    write_front_dumps(outcomes, out_dir / "fronts")
    summary = summarize(outcomes, baseline, cfg.ems.tick_seconds)
    write_summary(summary, out_dir / "summary.json")
    return summary


@dataclass
class Comparison:
    baseline: list[BaselineTick]
    outcomes: list[ems.TickOutcome]
    summary: dict[str, Any]


class PhaseError(RuntimeError):
    def __init__(self, phase: str, cause: Exception):
        super().__init__(f"{phase}: {cause}")
        self.phase = phase


def run_compare(
    profile: Sequence[TelemetrySample], cfg: RunConfig, out_dir: str | Path | None = None
) -> Comparison:
    """Baseline arm, optimized arm on the same rows, then reports."""
    try:
        base = generate_baseline(
            profile, cfg.ems.initial_battery(), cfg.ems.tick_seconds, cfg.baseline_hold_ticks
        )
    except Exception as exc:
        raise PhaseError("baseline", exc) from exc
    try:
        outcomes = ems.run(profile, base, cfg.ems, paced=cfg.mode == "paced")
    except Exception as exc:
        raise PhaseError("optimize", exc) from exc
    if out_dir is not None:
        summary = write_outputs(outcomes, base, cfg, out_dir)
    else:
        summary = summarize(outcomes, base, cfg.ems.tick_seconds)
    return Comparison(base, outcomes, summary)

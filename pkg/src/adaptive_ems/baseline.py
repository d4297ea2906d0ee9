"""Rule-based dispatch without optimization (the comparison arm).

The controller is greedy: PV serves the load first, a deficit is covered by
battery discharge (5 kW cap, closed at the SOC floor) and then by diesel,
and a PV surplus charges the battery. Like any non-optimizing loop running
on a measurement feed, its set-points are computed from the last completed
measurement and held for the next interval (``hold_ticks=1``); with
``hold_ticks=0`` it dispatches on the current sample and is exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .grid_model import (
    BATTERY_BOUNDS,
    DIESEL_BOUNDS,
    BatteryState,
    TelemetrySample,
    pv_power,
    soc_step,
)
from .indicators import mismatch_pct


@dataclass(frozen=True)
class BaselineTick:
    timestamp: float
    load_kw: float
    pv_available_kw: float
    diesel_kw: float
    battery_kw: float
    pv_used_kw: float
    mismatch_pct: float
    soc: float

    @property
    def supply_kw(self) -> float:
        return self.pv_used_kw + max(self.battery_kw, 0.0) + self.diesel_kw - self.battery_kw


@dataclass(frozen=True)
class SetPoints:
    pv_kw: float  # total PV drawn, load share plus charging share
    battery_kw: float
    diesel_kw: float


def greedy_setpoints(pv_kw: float, load_kw: float, battery: BatteryState) -> SetPoints:
    pv_to_load = min(pv_kw, load_kw)
    surplus = pv_kw - pv_to_load
    deficit = load_kw - pv_to_load
    charge = 0.0
    if surplus > 0 and battery.soc < 100.0:
        charge = min(surplus, BATTERY_BOUNDS[1])
    discharge = 0.0
    if deficit > 0 and battery.discharge_allowed:
        discharge = min(deficit, -BATTERY_BOUNDS[0])
    diesel = min(deficit - discharge, DIESEL_BOUNDS[1])
    return SetPoints(pv_to_load + charge, charge - discharge, diesel)


def generate_baseline(
    profile: Sequence[TelemetrySample],
    battery: BatteryState,
    dt_seconds: float = 5.0,
    hold_ticks: int = 1,
) -> list[BaselineTick]:
    """Replay ``profile`` through the greedy controller."""
    if hold_ticks < 0:
        raise ValueError("hold_ticks must be non-negative")
    records: list[BaselineTick] = []
    state = battery
    for t, sample in enumerate(profile):
        measured = profile[max(0, t - hold_ticks)]
        sp = greedy_setpoints(pv_power(measured), measured.load_kw, state)
        pv_avail = pv_power(sample)
        pv_drawn = min(sp.pv_kw, pv_avail)
        bat = sp.battery_kw
        if bat > 0:
            # charging only ever takes what PV actually delivers beyond the load share
            bat = min(bat, pv_drawn)
        supply = pv_drawn + sp.diesel_kw - bat
        mm = mismatch_pct(sample.load_kw, supply) if sample.load_kw > 0 else 0.0
        state = soc_step(state, bat, dt_seconds / 3600.0)
        records.append(
            BaselineTick(
                timestamp=sample.timestamp,
                load_kw=sample.load_kw,
                pv_available_kw=pv_avail,
                diesel_kw=sp.diesel_kw,
                battery_kw=bat,
                pv_used_kw=pv_drawn - max(bat, 0.0),
                mismatch_pct=mm,
                soc=state.soc,
            )
        )
    return records

"""Microgrid plant: telemetry-derived quantities, objectives and SOC dynamics.

Sign conventions
----------------
``p_battery`` is positive while charging and negative while discharging.
On the supply side of the power balance a charging battery therefore counts
as extra demand: ``supply = pv_used + diesel - p_battery``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DIESEL_BOUNDS = (0.0, 10.0)
BATTERY_BOUNDS = (-5.0, 5.0)
LOAD_BOUNDS = (0.5, 5.0)
SOC_OPERATING_BOUNDS = (40.0, 100.0)

FUEL_RATE_L_PER_KWH = 0.4
NOMINAL_FREQUENCY_HZ = 50.0
FREQUENCY_SANITY_BAND = (45.0, 55.0)
PHIL_PV_LIMIT_KW = 5.0

OBJECTIVE_NAMES = (
    "fuel_l",
    "mismatch_kw",
    "freq_penalty_hz",
    "pf_penalty",
    "degradation_pct",
    "pv_neg_kw",
)
DECISION_NAMES = ("p_diesel", "p_battery", "p_load", "p_pv_used")


@dataclass(frozen=True)
class TelemetrySample:
    """One replayed measurement record.

    Missing RMS channels are represented by zeros, which makes the apparent
    power zero and the power factor default to 1.
    """

    timestamp: float
    v_dc: float
    i_dc: float
    v_rms: float = 0.0
    i_rms: float = 0.0
    p_active: float = 0.0
    frequency: float = NOMINAL_FREQUENCY_HZ
    load_kw: float = 0.0

    def __post_init__(self):
        if self.v_rms < 0 or self.i_rms < 0:
            raise ValueError("RMS voltage and current must be non-negative")
        for name in ("timestamp", "v_dc", "i_dc", "v_rms", "i_rms", "p_active", "frequency", "load_kw"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")

    @property
    def frequency_out_of_band(self) -> bool:
        lo, hi = FREQUENCY_SANITY_BAND
        return not lo <= self.frequency <= hi


@dataclass(frozen=True)
class ControlDecision:
    p_diesel: float
    p_battery: float
    p_load: float
    p_pv_used: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_diesel, self.p_battery, self.p_load, self.p_pv_used])

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "ControlDecision":
        return cls(*(float(v) for v in x))

    @property
    def supply_kw(self) -> float:
        return self.p_pv_used + self.p_diesel - self.p_battery


@dataclass(frozen=True)
class BatteryState:
    soc: float
    capacity_kwh: float = 40.0
    operating_floor: float = SOC_OPERATING_BOUNDS[0]

    def __post_init__(self):
        if not 0.0 <= self.soc <= 100.0:
            raise ValueError(f"soc {self.soc} outside [0, 100]")
        if self.capacity_kwh <= 0:
            raise ValueError("battery capacity must be positive")

    @property
    def discharge_allowed(self) -> bool:
        return self.soc > self.operating_floor


class ObjectiveVectorEms(NamedTuple):
    fuel: float
    mismatch_kw: float
    freq_penalty: float
    pf_penalty: float
    degradation: float
    pv_neg: float


def pv_power(sample: TelemetrySample) -> float:
    """PV output in kW from the DC-side voltage and current."""
    return abs(sample.v_dc) * abs(sample.i_dc) / 1000.0


def power_factor(sample: TelemetrySample) -> float:
    """Three-phase power factor ``|P| / (3 V I)``, clipped to [0, 1].

    With zero apparent power there is no load to penalize; the function
    returns 1.0 and logs the condition.
    """
    apparent = sample.v_rms * sample.i_rms * 3.0
    if apparent <= 0.0:
        logger.debug("zero apparent power at t=%s, power factor set to 1", sample.timestamp)
        return 1.0
    return min(1.0, max(0.0, abs(sample.p_active) / apparent))


def zero_apparent_power(sample: TelemetrySample) -> bool:
    return sample.v_rms * sample.i_rms <= 0.0


def decision_bounds(pv_available: float, battery: BatteryState) -> np.ndarray:
    """Box for (diesel, battery, load, pv_used); discharge is closed at the floor."""
    bat_lo = BATTERY_BOUNDS[0] if battery.discharge_allowed else 0.0
    return np.array(
        [
            DIESEL_BOUNDS,
            (bat_lo, BATTERY_BOUNDS[1]),
            LOAD_BOUNDS,
            (0.0, max(0.0, pv_available)),
        ]
    )


def repair(decision: ControlDecision, pv_available: float) -> ControlDecision:
    return ControlDecision(
        p_diesel=min(max(decision.p_diesel, DIESEL_BOUNDS[0]), DIESEL_BOUNDS[1]),
        p_battery=min(max(decision.p_battery, BATTERY_BOUNDS[0]), BATTERY_BOUNDS[1]),
        p_load=min(max(decision.p_load, LOAD_BOUNDS[0]), LOAD_BOUNDS[1]),
        p_pv_used=min(max(decision.p_pv_used, 0.0), max(0.0, pv_available)),
    )


def delta_soc(p_battery, dt_hours: float, capacity_kwh: float):
    """SOC change in percent for a battery power held over ``dt_hours``."""
    return p_battery * dt_hours / capacity_kwh * 100.0


def soc_step(battery: BatteryState, p_battery: float, dt_hours: float) -> BatteryState:
    if dt_hours <= 0:
        raise ValueError("dt_hours must be positive")
    new = battery.soc + delta_soc(p_battery, dt_hours, battery.capacity_kwh)
    return replace(battery, soc=min(100.0, max(0.0, new)))


def evaluate_batch(
    X: np.ndarray, sample: TelemetrySample, battery: BatteryState, dt: float
) -> np.ndarray:
    """Objective matrix for decision rows ``(diesel, battery, load, pv_used)``.

    ``dt`` is the control interval in seconds.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    diesel, bat, _load, pv = X.T
    out = np.empty((len(X), 6))
    out[:, 0] = diesel * (dt / 3600.0) * FUEL_RATE_L_PER_KWH
    out[:, 1] = np.abs(sample.load_kw - (pv + diesel - bat))
    out[:, 2] = abs(sample.frequency - NOMINAL_FREQUENCY_HZ)
    out[:, 3] = 1.0 - power_factor(sample)
    out[:, 4] = np.abs(delta_soc(bat, dt / 3600.0, battery.capacity_kwh))
    out[:, 5] = -pv
    return out


def evaluate(
    decision: ControlDecision, sample: TelemetrySample, battery: BatteryState, dt: float
) -> ObjectiveVectorEms:
    if dt <= 0:
        raise ValueError("dt must be positive")
    box = decision_bounds(pv_power(sample), battery)
    # the battery may sit at a discharge bound the current state no longer allows;
    # the physical box is what the contract checks
    box[1] = BATTERY_BOUNDS
    x = decision.as_array()
    if np.any(x < box[:, 0]) or np.any(x > box[:, 1]):
        raise ValueError(f"decision {decision} violates its bounds {box.tolist()}")
    return ObjectiveVectorEms(*evaluate_batch(x, sample, battery, dt)[0].tolist())


@dataclass(frozen=True)
class PvEfficiency:
    conversion: float
    mpp: float
    total: float


def pv_efficiency(
    p_dc: float,
    p_ac: float,
    mpp_trace: Sequence[tuple[float, float, float]],
    p_mpp_rated: float,
) -> PvEfficiency:
    """Conversion, MPP-tracking and total efficiency of the PV stage.

    ``mpp_trace`` holds ``(u_dc, i_dc, dt)`` samples; the tracking efficiency
    is the trace energy divided by the energy at rated MPP power over the
    same duration.
    """
    if p_dc == 0:
        raise ZeroDivisionError("conversion efficiency undefined for zero DC power")
    if p_mpp_rated <= 0:
        raise ValueError("rated MPP power must be positive")
    if len(mpp_trace) == 0:
        raise ValueError("MPP trace is empty")
    trace = np.asarray(mpp_trace, dtype=float)
    duration = trace[:, 2].sum()
    if duration <= 0:
        raise ValueError("MPP trace has zero duration")
    energy = float(np.sum(trace[:, 0] * trace[:, 1] * trace[:, 2]))
    eta_p = p_ac / p_dc
    eta_mpp = energy / (duration * p_mpp_rated)
    return PvEfficiency(eta_p, eta_mpp, eta_p * eta_mpp)


def fuel_liters(diesel_kw: float, dt_seconds: float) -> float:
    return diesel_kw * dt_seconds / 3600.0 * FUEL_RATE_L_PER_KWH

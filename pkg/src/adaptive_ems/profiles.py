"""Telemetry profile files and synthetic profile generation."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .grid_model import NOMINAL_FREQUENCY_HZ, PHIL_PV_LIMIT_KW, TelemetrySample, pv_power

logger = logging.getLogger(__name__)

PROFILE_COLUMNS = (
    "timestamp_s",
    "v_dc",
    "i_dc",
    "v_rms",
    "i_rms",
    "p_active_w",
    "frequency_hz",
    "load_kw",
)
REQUIRED_COLUMNS = ("timestamp_s", "v_dc", "i_dc", "load_kw")
_FIELD = {
    "timestamp_s": "timestamp",
    "v_dc": "v_dc",
    "i_dc": "i_dc",
    "v_rms": "v_rms",
    "i_rms": "i_rms",
    "p_active_w": "p_active",
    "frequency_hz": "frequency",
    "load_kw": "load_kw",
}
SYNTH_KINDS = ("day", "cloudy", "night", "diurnal")


class ProfileError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def load_profile(path: str | Path) -> list[TelemetrySample]:
    """Parse and validate a profile CSV.

    Optional channels (RMS quantities, active power, frequency) may be
    missing; frequency then defaults to nominal and the power factor to 1.
    PV above the 5 kW test-bench limit is logged, not rejected.
    """
    path = Path(path)
    samples: list[TelemetrySample] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        unknown = [c for c in header if c not in PROFILE_COLUMNS]
        if unknown:
            raise ProfileError(f"unknown column(s): {', '.join(unknown)}", 1)
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise ProfileError(f"missing required column(s): {', '.join(missing)}", 1)
        for row in reader:
            line = reader.line_num
            kwargs = {}
            try:
                for col in header:
                    text = row[col]
                    if text is None or text.strip() == "":
                        if col in REQUIRED_COLUMNS:
                            raise ProfileError(f"empty value in column {col}", line)
                        continue
                    kwargs[_FIELD[col]] = float(text)
                sample = TelemetrySample(**kwargs)
            except ProfileError:
                raise
            except (TypeError, ValueError) as exc:
                raise ProfileError(f"malformed row: {exc}", line) from exc
            if samples and sample.timestamp <= samples[-1].timestamp:
                raise ProfileError(
                    f"timestamp {sample.timestamp} does not increase "
                    f"(previous {samples[-1].timestamp})",
                    line,
                )
            if pv_power(sample) > PHIL_PV_LIMIT_KW:
                logger.warning("line %d: PV %.3f kW above the %.0f kW bench limit",
                               line, pv_power(sample), PHIL_PV_LIMIT_KW)
            if sample.frequency_out_of_band:
                logger.warning("line %d: frequency %.3f Hz outside sanity band", line, sample.frequency)
            samples.append(sample)
    return samples


def write_profile(samples: Iterable[TelemetrySample], path: str | Path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PROFILE_COLUMNS)
        for s in samples:
            w.writerow(
                [
                    f"{s.timestamp:g}",
                    f"{s.v_dc:.6g}",
                    f"{s.i_dc:.6g}",
                    f"{s.v_rms:.6g}",
                    f"{s.i_rms:.6g}",
                    f"{s.p_active:.6g}",
                    f"{s.frequency:.6g}",
                    f"{s.load_kw:.6g}",
                ]
            )


def _samples(ts, pv_kw, load_kw, rng, pf: float = 0.98, v_dc: float = 500.0, v_rms: float = 230.0):
    out = []
    for t, pv, load in zip(ts, pv_kw, load_kw):
        vdc = v_dc * (1.0 + 0.01 * rng.standard_normal()) if pv > 0 else v_dc
        p_w = load * 1000.0
        i_rms = p_w / pf / (3.0 * v_rms)
        out.append(
            TelemetrySample(
                timestamp=float(t),
                v_dc=vdc,
                i_dc=pv * 1000.0 / vdc,
                v_rms=v_rms,
                i_rms=i_rms,
                p_active=p_w,
                frequency=NOMINAL_FREQUENCY_HZ,
                load_kw=float(load),
            )
        )
    return out


def synth_profile(
    kind: str = "day", n_ticks: int = 60, tick_seconds: float = 5.0, seed: int = 0
) -> list[TelemetrySample]:
    """Synthetic telemetry shaped like the test bench's operating envelope.

    ``day`` is the high-irradiance midday stretch of a clear-sky PV bell
    (about 4.45 to 5 kW) against a 4.8-5.0 kW load; ``diurnal`` is the whole
    bell from zero to 5 kW and back. ``cloudy`` has fast irradiance dips and
    ``night`` no PV at all. Frequency is held at 50 Hz and PF near 0.98.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {SYNTH_KINDS}")
    rng = np.random.default_rng(seed)
    ts = np.arange(n_ticks) * tick_seconds
    phase = np.linspace(0.0, 1.0, n_ticks)
    if kind == "day":
        bell = np.sin(math.pi * (0.35 + 0.3 * phase))
        pv = PHIL_PV_LIMIT_KW * bell * (1.0 - 0.01 * np.abs(rng.standard_normal(n_ticks)))
        load = np.clip(4.9 + 0.04 * rng.standard_normal(n_ticks), 4.8, 5.0)
    elif kind == "diurnal":
        pv = PHIL_PV_LIMIT_KW * np.sin(math.pi * phase)
        load = np.clip(3.5 + 1.0 * np.sin(math.pi * phase) + 0.1 * rng.standard_normal(n_ticks), 0.5, 5.0)
    elif kind == "cloudy":
        clouds = np.clip(0.6 + 0.25 * np.cumsum(rng.standard_normal(n_ticks)) / np.sqrt(n_ticks), 0.2, 0.9)
        pv = PHIL_PV_LIMIT_KW * clouds
        load = np.clip(3.0 + 0.3 * rng.standard_normal(n_ticks), 0.5, 5.0)
    else:
        pv = np.zeros(n_ticks)
        load = np.clip(2.0 + 0.3 * rng.standard_normal(n_ticks), 0.5, 5.0)
    pv = np.clip(pv, 0.0, PHIL_PV_LIMIT_KW)
    return _samples(ts, pv, load, rng)


def profile_from_arrays(
    timestamps: Sequence[float], pv_kw: Sequence[float], load_kw: Sequence[float], seed: int = 0
) -> list[TelemetrySample]:
    return _samples(timestamps, pv_kw, load_kw, np.random.default_rng(seed))

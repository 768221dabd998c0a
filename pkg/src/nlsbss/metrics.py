"""ERLE, true ERLE and power-ratio measurements over sliding windows."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["MetricSeries", "erle", "terle", "measure_esr", "power_ratio_db", "DB_CAP"]

DB_CAP = 200.0
DENOM_EPS = 1e-20


@dataclass(frozen=True)
class MetricSeries:
    """dB values at successive window positions; ``times`` are window end times in seconds."""

    values: np.ndarray
    times: np.ndarray
    hop: int
    window: int

    @property
    def steady_state(self) -> float:
        """Mean over the final 20% of the series (at least one value)."""
        n = self.values.shape[0]
        if n == 0:
            return math.nan
        tail = max(1, math.ceil(0.2 * n))
        return float(np.mean(self.values[-tail:]))

    def to_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["time_s", "value_db"])
            for t, v in zip(self.times, self.values):
                writer.writerow([f"{t:.6f}", f"{v:.6f}"])

    @classmethod
    def from_csv(cls, path, hop: int, window: int) -> "MetricSeries":
        data = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 1], data[:, 0], hop, window)


def _window_sums(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    # leading partial windows are dropped
    csum = np.concatenate([[0.0], np.cumsum(x * x)])
    ends = np.arange(window, x.shape[0] + 1, hop)
    return csum[ends] - csum[ends - window], ends


def _ratio_series(num: np.ndarray, den: np.ndarray, window: int, hop: int, fs: int) -> MetricSeries:
    if window < hop or hop <= 0:
        raise ValueError(f"need window >= hop > 0, got window={window}, hop={hop}")
    if num.shape != den.shape:
        raise ValueError(f"length mismatch: {num.shape[0]} vs {den.shape[0]}")
    sn, ends = _window_sums(num, window, hop)
    sd, _ = _window_sums(den, window, hop)
    # cumulative sums can leave tiny negative residues
    sn = np.maximum(sn, 0.0)
    sd = np.maximum(sd, 0.0)
    with np.errstate(divide="ignore"):
        vals = 10.0 * np.log10(sn + DENOM_EPS) - 10.0 * np.log10(sd + DENOM_EPS)
    vals = np.clip(vals, -DB_CAP, DB_CAP)
    return MetricSeries(vals, ends / fs, hop, window)


def _rate(sample_rate, *signals) -> int:
    if sample_rate is not None:
        return int(sample_rate)
    for sig in signals:
        fs = getattr(sig, "sample_rate", None)
        if fs is not None:
            return int(fs)
    return 16000


def erle(microphone, estimate, window: int = 16000, hop: int = 4000, sample_rate: int | None = None) -> MetricSeries:
    """10 log10(sum y^2 / sum e^2) per window.

    ``sample_rate`` only sets the time axis; it defaults to the signals' rate
    (16 kHz for bare arrays).
    """
    y = np.asarray(getattr(microphone, "samples", microphone), dtype=np.float64)
    e = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    return _ratio_series(y, e, window, hop, _rate(sample_rate, microphone, estimate))


def terle(
    echo, estimate, near_end, window: int = 16000, hop: int = 4000, sample_rate: int | None = None
) -> MetricSeries:
    """10 log10(sum d^2 / sum (e - s)^2) per window; ``near_end`` is the signal actually mixed."""
    d = np.asarray(getattr(echo, "samples", echo), dtype=np.float64)
    e = np.asarray(getattr(estimate, "samples", estimate), dtype=np.float64)
    s = np.asarray(getattr(near_end, "samples", near_end), dtype=np.float64)
    if e.shape != s.shape:
        raise ValueError(f"length mismatch: estimate {e.shape[0]} vs near end {s.shape[0]}")
    return _ratio_series(d, e - s, window, hop, _rate(sample_rate, echo, estimate, near_end))


def power_ratio_db(a, b) -> float:
    a = np.asarray(getattr(a, "samples", a), dtype=np.float64)
    b = np.asarray(getattr(b, "samples", b), dtype=np.float64)
    pa, pb = np.mean(a * a), np.mean(b * b)
    if pa == 0.0 or pb == 0.0:
        raise ValueError("power ratio of a silent signal is undefined")
    return 10.0 * math.log10(pa / pb)


def measure_esr(echo, near_end) -> float:
    """Echo-to-near-end power ratio in dB over the full signals."""
    return power_ratio_db(echo, near_end)

"""Memoryless loudspeaker nonlinearities, odd-power basis expansion, SDR calibration."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .signal import TimeSignal

__all__ = [
    "NonlinearModel",
    "BasisStack",
    "CalibrationError",
    "UNDISTORTED",
    "apply_nonlinearity",
    "expand_basis",
    "measure_sdr",
    "calibrate_sdr",
]

KINDS = ("hard_clip", "soft_saturation", "identity")

# SDR of a model that leaves the signal untouched
UNDISTORTED = math.inf


class CalibrationError(ValueError):
    """A requested SDR/ESR target cannot be reached."""

    def __init__(self, message: str, achievable: tuple[float, float] | None = None):
        super().__init__(message)
        self.achievable = achievable


@dataclass(frozen=True)
class NonlinearModel:
    kind: str = "identity"
    x_max: float = 1.0
    rho: float = 2.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        if not (self.x_max > 0 and math.isfinite(self.x_max)):
            raise ValueError(f"x_max must be positive and finite, got {self.x_max}")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise ValueError(f"rho must be positive and finite, got {self.rho}")

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "identity":
            return x.copy()
        if self.kind == "hard_clip":
            return np.clip(x, -self.x_max, self.x_max)
        # soft saturation, written in a form that cannot overflow for large |x|/x_max
        r = np.abs(x) / self.x_max
        return x / (1.0 + r**self.rho) ** (1.0 / self.rho)


@dataclass(frozen=True)
class BasisStack:
    """Odd powers x, x^3, ..., x^(2p-1) of one signal, shape (p, n_samples)."""

    signals: np.ndarray
    sample_rate: int

    @property
    def order(self) -> int:
        return self.signals.shape[0]

    def __getitem__(self, i: int) -> TimeSignal:
        return TimeSignal(self.signals[i], self.sample_rate)


def apply_nonlinearity(model: NonlinearModel, x: TimeSignal) -> TimeSignal:
    return x.with_samples(model(x.samples))


def expand_basis(x: TimeSignal, p: int) -> BasisStack:
    if int(p) != p or p < 1:
        raise ValueError(f"expansion order must be a positive integer, got {p}")
    s = x.samples
    out = np.empty((p, s.shape[0]))
    out[0] = s
    sq = s * s
    for i in range(1, p):
        out[i] = out[i - 1] * sq
    return BasisStack(out, x.sample_rate)


def _sdr(x: np.ndarray, fx: np.ndarray) -> float:
    dist = np.mean((fx - x) ** 2)
    if dist == 0.0:
        return UNDISTORTED
    return 10.0 * math.log10(np.mean(x * x) / dist)


def measure_sdr(x: TimeSignal, model: NonlinearModel) -> float:
    """SDR in dB, full-signal sample means; :data:`UNDISTORTED` if f(x) == x."""
    return _sdr(x.samples, model(x.samples))


def calibrate_sdr(
    x: TimeSignal,
    kind: str,
    target_sdr: float,
    rho: float = 2.0,
    tol: float = 0.01,
    max_iter: int = 200,
) -> NonlinearModel:
    """Find ``x_max`` so that the model's SDR on ``x`` is within ``tol`` dB of the target.

    SDR increases monotonically with ``x_max`` for both saturating kinds, so a
    plain bisection on ``x_max`` suffices.
    """
    if kind not in ("hard_clip", "soft_saturation"):
        raise ValueError(f"can only calibrate hard_clip or soft_saturation, got {kind!r}")
    s = x.samples
    peak = float(np.max(np.abs(s)))
    if peak == 0.0:
        raise CalibrationError("cannot calibrate SDR on a silent signal")

    def sdr_at(xm: float) -> float:
        return _sdr(s, NonlinearModel(kind, xm, rho)(s))

    lo = peak * 1e-9
    if kind == "hard_clip":
        hi = peak
    else:
        hi = peak
        while sdr_at(hi) < target_sdr and hi < peak * 1e12:
            hi *= 10.0
    achievable = (sdr_at(lo), sdr_at(hi))
    if not (achievable[0] < target_sdr < achievable[1]) or not math.isfinite(target_sdr):
        raise CalibrationError(
            f"SDR target {target_sdr} dB outside achievable interval "
            f"({achievable[0]:.4f}, {achievable[1]}) dB for {kind}",
            achievable,
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = sdr_at(mid)
        if abs(val - target_sdr) <= tol:
            return NonlinearModel(kind, mid, rho)
        if val < target_sdr:
            lo = mid
        else:
            hi = mid
    raise CalibrationError(
        f"bisection did not reach {target_sdr} dB within {tol} dB after {max_iter} steps", achievable
    )

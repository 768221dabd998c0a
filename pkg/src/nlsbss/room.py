"""Image-method room impulse responses, convolution and echo/near-end mixtures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .nonlinear import NonlinearModel, apply_nonlinearity
from .signal import TimeSignal

__all__ = [
    "RoomSpec",
    "MixtureScenario",
    "sabine_reflection",
    "generate_rir",
    "convolve",
    "synthesize_mixture",
    "schroeder_t60",
]


@dataclass(frozen=True)
class RoomSpec:
    """Shoebox room with one omnidirectional source and microphone.

    ``reflection`` overrides the Sabine-derived wall reflection coefficient
    (0 gives the anechoic case).
    """

    dimensions: tuple[float, float, float] = (5.0, 4.0, 3.0)
    source_pos: tuple[float, float, float] = (2.0, 3.0, 1.5)
    mic_pos: tuple[float, float, float] = (2.5, 1.0, 1.2)
    t60: float = 0.2
    rir_length: int = 3200
    sample_rate: int = 16000
    sound_speed: float = 343.0
    reflection: float | None = None

    def __post_init__(self):
        for name in ("dimensions", "source_pos", "mic_pos"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 3:
                raise ValueError(f"{name} must have 3 coordinates, got {v}")
            object.__setattr__(self, name, v)
        if min(self.dimensions) <= 0:
            raise ValueError(f"room dimensions must be positive, got {self.dimensions}")
        for name in ("source_pos", "mic_pos"):
            p = getattr(self, name)
            if not all(0 < c < L for c, L in zip(p, self.dimensions)):
                raise ValueError(f"{name} {p} is not strictly inside room {self.dimensions}")
        if not self.t60 > 0:
            raise ValueError(f"t60 must be positive, got {self.t60}")
        if self.sample_rate <= 0 or self.sound_speed <= 0:
            raise ValueError("sample_rate and sound_speed must be positive")
        if self.reflection is not None and not 0 <= self.reflection < 1:
            raise ValueError(f"reflection must lie in [0, 1), got {self.reflection}")
        if self.rir_length <= self.direct_delay:
            raise ValueError(
                f"rir_length {self.rir_length} does not exceed the direct-path delay "
                f"of {self.direct_delay} samples"
            )

    @property
    def distance(self) -> float:
        return math.dist(self.source_pos, self.mic_pos)

    @property
    def direct_delay(self) -> int:
        return round(self.sample_rate * self.distance / self.sound_speed)

    @property
    def beta(self) -> float:
        if self.reflection is not None:
            return self.reflection
        return sabine_reflection(self.dimensions, self.t60, self.sound_speed)


def sabine_reflection(dimensions, t60: float, c: float = 343.0) -> float:
    """Uniform wall reflection coefficient from Sabine's formula, clamped to [0, 1)."""
    lx, ly, lz = dimensions
    volume = lx * ly * lz
    area = 2.0 * (lx * ly + lx * lz + ly * lz)
    alpha = 24.0 * volume * math.log(10.0) / (c * area * t60)
    return math.sqrt(min(max(1.0 - alpha, 0.0), np.nextafter(1.0, 0.0)))


def generate_rir(spec: RoomSpec) -> TimeSignal:
    """Allen-Berkley image method with nearest-sample delays."""
    fs, c = spec.sample_rate, spec.sound_speed
    L = np.asarray(spec.dimensions)
    src = np.asarray(spec.source_pos)
    mic = np.asarray(spec.mic_pos)
    beta = spec.beta
    max_dist = spec.rir_length * c / fs
    h = np.zeros(spec.rir_length)

    # per axis: image coordinate offsets and reflection counts for lattice index n, parity q
    axes = []
    for a in range(3):
        n_max = int(math.ceil(max_dist / (2.0 * L[a]))) + 1
        n = np.arange(-n_max, n_max + 1)
        pos = []
        refl = []
        for q in (0, 1):
            # image at (1 - 2q) * src + 2 n L, reflections |n - q| + |n|
            pos.append((1 - 2 * q) * src[a] + 2.0 * n * L[a] - mic[a])
            refl.append(np.abs(n - q) + np.abs(n))
        axes.append((np.concatenate(pos), np.concatenate(refl)))

    (dx, rx), (dy, ry), (dz, rz) = axes
    for i in range(dx.shape[0]):
        d2 = dx[i] ** 2 + dy[:, None] ** 2 + dz[None, :] ** 2
        dist = np.sqrt(d2)
        delay = np.rint(fs * dist / c).astype(np.int64)
        keep = delay < spec.rir_length
        if not keep.any():
            continue
        order = rx[i] + ry[:, None] + rz[None, :]
        if beta == 0.0:
            gain = (order == 0).astype(np.float64)
        else:
            gain = beta ** order.astype(np.float64)
        amp = gain / (4.0 * np.pi * dist)
        np.add.at(h, delay[keep], amp[keep])
    return TimeSignal(h, fs)


def schroeder_t60(rir: np.ndarray, sample_rate: int, lo_db: float = -5.0, hi_db: float = -25.0) -> float:
    """T60 from a line fit to the Schroeder decay curve between ``lo_db`` and ``hi_db``."""
    e = np.asarray(rir, dtype=np.float64) ** 2
    edc = np.cumsum(e[::-1])[::-1]
    edc_db = 10.0 * np.log10(edc / edc[0] + 1e-300)
    sel = np.nonzero((edc_db <= lo_db) & (edc_db >= hi_db))[0]
    if sel.size < 2:
        raise ValueError("decay curve does not span the fitting range")
    t = sel / sample_rate
    slope, _ = np.polyfit(t, edc_db[sel], 1)
    return -60.0 / slope


def convolve(signal: TimeSignal, rir: TimeSignal) -> TimeSignal:
    """Causal linear convolution truncated to the input length."""
    if signal.sample_rate != rir.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: signal {signal.sample_rate} Hz, rir {rir.sample_rate} Hz"
        )
    n = len(signal)
    if n == 0 or len(rir) == 0:
        return signal.with_samples(np.zeros(n))
    y = fftconvolve(signal.samples, rir.samples)[:n]
    return signal.with_samples(y)


@dataclass(frozen=True)
class MixtureScenario:
    far_end: TimeSignal
    near_end: TimeSignal
    model: NonlinearModel
    rir: TimeSignal
    esr_target: float | None
    echo: TimeSignal
    microphone: TimeSignal
    near_scale: float
    scaled_near_end: TimeSignal = field(repr=False)


def _pad_to(x: np.ndarray, n: int) -> np.ndarray:
    if x.shape[0] >= n:
        return x
    return np.concatenate([x, np.zeros(n - x.shape[0])])


def synthesize_mixture(
    far_end: TimeSignal,
    near_end: TimeSignal,
    model: NonlinearModel,
    rir: TimeSignal,
    esr_target: float | None,
) -> MixtureScenario:
    """y = h * f(x) + g s, with g chosen so that the echo-to-near-end ratio hits ``esr_target``.

    ``esr_target=None`` adds the near-end signal unscaled (g = 1).
    """
    fs = far_end.sample_rate
    if near_end.sample_rate != fs or rir.sample_rate != fs:
        raise ValueError("far_end, near_end and rir must share one sample rate")
    n = max(len(far_end), len(near_end))
    x = far_end.with_samples(_pad_to(far_end.samples, n))
    s = _pad_to(near_end.samples, n)
    d = convolve(apply_nonlinearity(model, x), rir).samples
    if esr_target is None:
        g = 1.0
    else:
        p_s = np.mean(s * s)
        if p_s == 0.0:
            raise ValueError("near-end signal is silent; an ESR target cannot be met")
        p_d = np.mean(d * d)
        if p_d == 0.0:
            raise ValueError("echo is silent; an ESR target cannot be met")
        g = math.sqrt(p_d / (p_s * 10.0 ** (esr_target / 10.0)))
    gs = g * s
    y = d + gs
    return MixtureScenario(
        far_end=x,
        near_end=TimeSignal(s, fs),
        model=model,
        rir=rir,
        esr_target=esr_target,
        echo=TimeSignal(d, fs),
        microphone=TimeSignal(y, fs),
        near_scale=g,
        scaled_near_end=TimeSignal(gs, fs),
    )

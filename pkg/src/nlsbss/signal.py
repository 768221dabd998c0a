"""Time signals, STFT/ISTFT with weighted overlap-add, and WAV I/O."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.io import wavfile

__all__ = [
    "TimeSignal",
    "StftConfig",
    "Spectrogram",
    "ConfigurationError",
    "ShapeError",
    "WavFormatError",
    "stft",
    "istft",
    "read_wav",
    "write_wav",
]

WINDOWS = ("sqrt_hann", "hann", "rect")


class ConfigurationError(ValueError):
    """Invalid STFT (or other processing) configuration."""


class ShapeError(ValueError):
    """Array dimensions do not match what the operation expects."""


class WavFormatError(OSError):
    """WAV file uses a sample format we do not read or write."""


@dataclass(frozen=True)
class TimeSignal:
    """Real-valued sampled waveform."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1:
            raise ShapeError(f"samples must be 1-D, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if int(self.sample_rate) != self.sample_rate or self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate}")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    def with_samples(self, samples: np.ndarray) -> "TimeSignal":
        return TimeSignal(samples, self.sample_rate)


def _window(name: str, n: int) -> np.ndarray:
    # periodic windows: these are the ones that overlap-add to a constant
    if name == "rect":
        return np.ones(n)
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)
    if name == "hann":
        return hann
    if name == "sqrt_hann":
        return np.sqrt(hann)
    raise ConfigurationError(f"unknown window {name!r}; expected one of {WINDOWS}")


@dataclass(frozen=True)
class StftConfig:
    """Frame size, hop and window (same window used for analysis and synthesis).

    The squared window must overlap-add to a constant at the given hop,
    otherwise construction raises :class:`ConfigurationError`.
    """

    fft_size: int = 4096
    hop: int = 1024
    window: str = "sqrt_hann"
    _win: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.fft_size <= 0 or self.fft_size % 2:
            raise ConfigurationError(f"fft_size must be a positive even integer, got {self.fft_size}")
        if not 0 < self.hop <= self.fft_size:
            raise ConfigurationError(f"hop must satisfy 0 < hop <= fft_size, got {self.hop}")
        win = _window(self.window, self.fft_size)
        # steady-state overlap-add of analysis*synthesis windows
        env = np.zeros(self.fft_size)
        w2 = win * win
        for start in range(0, self.fft_size, self.hop):
            env[: self.fft_size - start] += w2[start:]
            if start:
                env[self.fft_size - start :] += w2[:start]
        if self.fft_size % self.hop or np.ptp(env) > 1e-10 * np.max(env):
            raise ConfigurationError(
                f"window {self.window!r} with fft_size={self.fft_size}, hop={self.hop} "
                "does not satisfy the constant overlap-add condition"
            )
        object.__setattr__(self, "_win", win)

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1

    @property
    def pad(self) -> int:
        return self.fft_size - self.hop

    @property
    def win(self) -> np.ndarray:
        return self._win

    def n_frames(self, length: int) -> int:
        padded = length + 2 * self.pad
        return max(1, -(-(padded - self.fft_size) // self.hop) + 1)


@dataclass(frozen=True)
class Spectrogram:
    """One-sided STFT; ``frames`` has shape (n_frames, fft_size // 2 + 1)."""

    frames: np.ndarray
    fft_size: int
    hop: int

    def __post_init__(self):
        f = np.asarray(self.frames, dtype=np.complex128)
        if f.ndim != 2 or f.shape[1] != self.fft_size // 2 + 1:
            raise ShapeError(
                f"frames must have shape (n_frames, {self.fft_size // 2 + 1}), got {f.shape}"
            )
        if not 0 < self.hop <= self.fft_size:
            raise ShapeError(f"invalid hop {self.hop} for fft_size {self.fft_size}")
        object.__setattr__(self, "frames", f)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_bins(self) -> int:
        return self.frames.shape[1]


def _frame_matrix(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    n_frames = cfg.n_frames(x.shape[-1])
    total = (n_frames - 1) * cfg.hop + cfg.fft_size
    padded = np.zeros(x.shape[:-1] + (total,))
    padded[..., cfg.pad : cfg.pad + x.shape[-1]] = x
    idx = np.arange(n_frames)[:, None] * cfg.hop + np.arange(cfg.fft_size)[None, :]
    return padded[..., idx]


def stft_array(x: np.ndarray, cfg: StftConfig) -> np.ndarray:
    """STFT of the last axis of ``x``; returns (..., n_frames, n_bins)."""
    x = np.asarray(x, dtype=np.float64)
    return np.fft.rfft(_frame_matrix(x, cfg) * cfg.win, axis=-1)


def istft_array(frames: np.ndarray, cfg: StftConfig, length: int) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.shape[-1] != cfg.n_bins:
        raise ShapeError(f"expected {cfg.n_bins} bins per frame, got {frames.shape[-1]}")
    n_frames = frames.shape[-2]
    seg = np.fft.irfft(frames, n=cfg.fft_size, axis=-1) * cfg.win
    total = (n_frames - 1) * cfg.hop + cfg.fft_size
    out = np.zeros(frames.shape[:-2] + (total,))
    env = np.zeros(total)
    w2 = cfg.win * cfg.win
    for n in range(n_frames):
        sl = slice(n * cfg.hop, n * cfg.hop + cfg.fft_size)
        out[..., sl] += seg[..., n, :]
        env[sl] += w2
    body = slice(cfg.pad, cfg.pad + length)
    res = out[..., body]
    e = env[body]
    if res.shape[-1] < length:
        raise ShapeError(f"spectrogram with {n_frames} frames cannot cover {length} samples")
    # every kept sample lies under a full set of overlapping frames
    return res / e


def stft(signal: TimeSignal, cfg: StftConfig) -> Spectrogram:
    if len(signal) == 0:
        raise ValueError("cannot transform an empty signal")
    return Spectrogram(stft_array(signal.samples, cfg), cfg.fft_size, cfg.hop)


def istft(spec: Spectrogram, cfg: StftConfig, length: int, sample_rate: int = 16000) -> TimeSignal:
    if spec.fft_size != cfg.fft_size or spec.hop != cfg.hop:
        raise ShapeError(
            f"spectrogram (fft_size={spec.fft_size}, hop={spec.hop}) does not match "
            f"config (fft_size={cfg.fft_size}, hop={cfg.hop})"
        )
    return TimeSignal(istft_array(spec.frames, cfg, length), sample_rate)


def read_wav(path, channel: int = 0) -> TimeSignal:
    """Read a PCM16 or float32 WAV file. Integer data are scaled by 1/32768."""
    path = Path(path)
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported sample format {data.dtype} (need PCM 16-bit or IEEE float)"
        )
    if x.ndim == 2:
        if not 0 <= channel < x.shape[1]:
            raise WavFormatError(f"{path}: channel {channel} out of range for {x.shape[1]} channels")
        x = x[:, channel]
    return TimeSignal(x, rate)


def write_wav(path, signal: TimeSignal, fmt: str = "float32") -> None:
    """Write mono WAV as ``float32`` (default) or ``pcm16``."""
    x = signal.samples
    if fmt == "float32":
        data = x.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(x * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise WavFormatError(f"unsupported output format {fmt!r}")
    wavfile.write(Path(path), signal.sample_rate, data)

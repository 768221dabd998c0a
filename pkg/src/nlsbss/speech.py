"""Deterministic speech-like test signals (no dataset dependency)."""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .signal import TimeSignal

# rough vowel formant centres (Hz) cycled per syllable
_FORMANTS = [(730, 1090), (270, 2290), (530, 1840), (570, 840), (300, 870), (660, 1720)]


def _lowpass2(freq: float, fs: int):
    r = np.exp(-2.0 * np.pi * freq / fs)
    return [(1.0 - r) ** 2], [1.0, -2.0 * r, r * r]


_GLOTTAL = _lowpass2(600.0, 16000)


def _resonator(freq: float, bw: float, fs: int):
    r = np.exp(-np.pi * bw / fs)
    theta = 2.0 * np.pi * freq / fs
    return [1.0 - r], [1.0, -2.0 * r * np.cos(theta), r * r]


def speech_like(
    duration: float = 10.0,
    sample_rate: int = 16000,
    seed: int = 0,
    f0: float = 200.0,
    syllable_rate: float = 4.0,
    peak: float = 0.9,
) -> TimeSignal:
    """Syllable-modulated voiced/unvoiced excitation through two formant resonators.

    Each syllable gets its own formant pair, pitch drift and loudness; roughly
    one syllable in six is a pause, so the output has speech-like gaps.
    """
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    out = np.zeros(n)
    syl_len = int(sample_rate / syllable_rate)
    pos = 0
    k = 0
    phase = 0.0
    while pos < n:
        length = min(int(syl_len * rng.uniform(0.6, 1.4)), n - pos)
        k += 1
        if rng.random() < 1.0 / 6.0:
            pos += length
            continue
        t = np.arange(length)
        pitch = f0 * rng.uniform(0.85, 1.15) * (1.0 + 0.1 * np.sin(2 * np.pi * t / length))
        inst_phase = phase + np.cumsum(pitch / sample_rate)
        phase = inst_phase[-1] % 1.0
        pulses = np.diff(np.floor(inst_phase), prepend=np.floor(inst_phase[0]))
        # smoothed pulses stand in for the glottal flow derivative
        glottal = lfilter(*_GLOTTAL, pulses) * np.sqrt(f0 / 100.0)
        voiced = rng.random() < 0.8
        noise = rng.standard_normal(length)
        exc = glottal + 0.3 * noise if voiced else noise
        f1, f2 = _FORMANTS[rng.integers(len(_FORMANTS))]
        seg = exc
        for f, bw in ((f1 * rng.uniform(0.9, 1.1), 90.0), (f2 * rng.uniform(0.9, 1.1), 120.0)):
            b, a = _resonator(f, bw, sample_rate)
            seg = lfilter(b, a, seg)
        env = np.sin(np.pi * (t + 0.5) / length) ** 1.5 * rng.uniform(0.4, 1.0)
        out[pos : pos + length] = seg * env
        pos += length
    # mild pre-emphasis-like tilt removal keeps low bins from dominating
    out = lfilter([1.0, -0.5], [1.0], out)
    out *= peak / np.max(np.abs(out))
    return TimeSignal(out, sample_rate)


def white_noise(duration: float = 10.0, sample_rate: int = 16000, seed: int = 0, rms: float = 0.1) -> TimeSignal:
    rng = np.random.default_rng(seed)
    n = int(round(duration * sample_rate))
    return TimeSignal(rms * rng.standard_normal(n), sample_rate)

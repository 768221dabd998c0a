"""Mixtures built directly in the STFT domain, Y = sum_i H_i X_i + S, for oracle tests."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nonlinear import expand_basis
from .sbss import SbssCanceller
from .signal import StftConfig, TimeSignal, stft_array
from .speech import speech_like, white_noise


@dataclass
class FrameMixture:
    """Arrays are (frames, bins) except ``X`` (p, frames, bins) and ``h`` (bins, p)."""

    X: np.ndarray
    S: np.ndarray
    D: np.ndarray
    Y: np.ndarray
    h: np.ndarray

    @property
    def n_frames(self) -> int:
        return self.Y.shape[0]

    def observation(self, t: int) -> np.ndarray:
        return np.concatenate([self.Y[t][:, None], self.X[:, t, :].T], axis=1)


def mix_frames(X: np.ndarray, S: np.ndarray, h: np.ndarray, esr_db: float | None = 0.0) -> FrameMixture:
    """Apply the block mixing model per bin; scale S to the requested echo-to-near-end ratio."""
    D = np.einsum("ki,itk->tk", h, X)
    if esr_db is not None:
        ps = np.sum(np.abs(S) ** 2)
        if ps > 0:
            S = S * np.sqrt(np.sum(np.abs(D) ** 2) / (ps * 10.0 ** (esr_db / 10.0)))
    return FrameMixture(X, S, D, D + S, h)


def speech_frame_mixture(
    n_frames: int = 300,
    order: int = 3,
    cfg: StftConfig | None = None,
    esr_db: float | None = 0.0,
    seed: int = 0,
    near_end: str = "speech",
    sample_rate: int = 16000,
) -> FrameMixture:
    """Speech-like far end, chosen near end, complex Gaussian h ~ CN(0, 1) per bin and basis."""
    cfg = cfg or StftConfig()
    n = (n_frames - 1) * cfg.hop + cfg.fft_size - 2 * cfg.pad
    dur = n / sample_rate + 1.0
    x = speech_like(dur, sample_rate, seed=seed, f0=210.0).samples[:n]
    X = stft_array(expand_basis(TimeSignal(x, sample_rate), order).signals, cfg)[:, :n_frames]
    if near_end == "speech":
        s = speech_like(dur, sample_rate, seed=seed + 1, f0=120.0).samples[:n]
    elif near_end == "white_noise":
        s = white_noise(dur, sample_rate, seed=seed + 1).samples[:n]
    elif near_end == "none":
        s = np.zeros(n)
    else:
        raise ValueError(f"unknown near_end {near_end!r}")
    S = stft_array(s, cfg)[:n_frames]
    rng = np.random.default_rng(seed)
    K = S.shape[1]
    h = (rng.standard_normal((K, order)) + 1j * rng.standard_normal((K, order))) / np.sqrt(2.0)
    return mix_frames(X, S, h, None if near_end == "none" else esr_db)


def run_frames(mix: FrameMixture, learning_rate: float = 0.1, **kwargs) -> tuple[np.ndarray, SbssCanceller]:
    """Run the streaming canceller over a frame mixture; returns E (frames, bins)."""
    K = mix.Y.shape[1]
    canceller = SbssCanceller(K, mix.X.shape[0], learning_rate, **kwargs)
    E = np.empty_like(mix.Y)
    for t in range(mix.n_frames):
        E[t] = canceller.process_frame(mix.Y[t], mix.X[:, t, :]).E
    return E, canceller


def frame_terle(mix: FrameMixture, E: np.ndarray, tail: float = 0.2) -> float:
    """True ERLE over the final ``tail`` fraction of frames, in dB."""
    start = mix.n_frames - max(1, int(np.ceil(tail * mix.n_frames)))
    d = np.sum(np.abs(mix.D[start:]) ** 2)
    r = np.sum(np.abs(E[start:] - mix.S[start:]) ** 2)
    return float(10.0 * np.log10(d / r))

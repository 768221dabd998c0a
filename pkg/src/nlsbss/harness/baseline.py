"""Per-bin multichannel NLMS comparator on the same odd-power references."""

from __future__ import annotations

import numpy as np

from ..nonlinear import expand_basis
from ..signal import StftConfig, TimeSignal, istft_array, stft_array


def baseline_fdaf(
    far_end: TimeSignal,
    microphone: TimeSignal,
    order: int = 3,
    stft_cfg: StftConfig | None = None,
    step: float = 0.5,
    regularization: float = 0.01,
) -> TimeSignal:
    """Single-tap-per-bin NLMS on the odd-power references.

    E = Y - sum_i H_i X_i, then H_i += step E conj(X_i) / (sum_i |X_i|^2 + eps)
    with eps = regularization * fft_size, i.e. ``regularization`` is a
    per-sample power floor. Without it the filter runs away whenever the far
    end pauses while the near end talks.
    """
    cfg = stft_cfg or StftConfig()
    if far_end.sample_rate != microphone.sample_rate:
        raise ValueError(
            f"sample-rate mismatch: far end {far_end.sample_rate} Hz, "
            f"microphone {microphone.sample_rate} Hz"
        )
    n = len(microphone)
    if abs(len(far_end) - n) > cfg.fft_size:
        raise ValueError(
            f"far end ({len(far_end)} samples) and microphone ({n} samples) differ by "
            f"more than one frame ({cfg.fft_size} samples)"
        )
    x = np.zeros(n)
    m = min(n, len(far_end))
    x[:m] = far_end.samples[:m]
    basis = expand_basis(TimeSignal(x, far_end.sample_rate), order).signals
    Y = stft_array(microphone.samples, cfg)
    X = stft_array(basis, cfg)
    E = nlms_frames(Y, X, step, regularization * cfg.fft_size)
    return TimeSignal(istft_array(E, cfg, n), microphone.sample_rate)


def nlms_frames(Y: np.ndarray, X: np.ndarray, step: float, eps: float) -> np.ndarray:
    """Frame loop of the comparator. ``Y`` is (frames, K), ``X`` is (p, frames, K); returns E like ``Y``."""
    H = np.zeros((X.shape[0], Y.shape[1]), dtype=np.complex128)
    E = np.empty_like(Y, dtype=np.complex128)
    for t in range(Y.shape[0]):
        Xt = X[:, t, :]
        Et = Y[t] - np.sum(H * Xt, axis=0)
        E[t] = Et
        power = np.sum(np.abs(Xt) ** 2, axis=0) + eps
        H += step * Et[None, :] * np.conj(Xt) / power[None, :]
    return E

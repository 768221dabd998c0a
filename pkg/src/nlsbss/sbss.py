"""Semi-blind source separation for nonlinear echo cancellation.

Each STFT bin carries an observation vector ``[Y, X_1, ..., X_p]`` made of the
microphone spectrum and the spectra of the odd-power basis signals of the far
end. A constrained demixing matrix

    W = [[1, w^T],
         [0, I_p ]]

maps it to ``[E, X_1, ..., X_p]`` where ``E`` is the near-end estimate. ``W``
is adapted once per frame with a constrained, scaled natural gradient whose
score function couples all bins of a source (spherical super-Gaussian prior).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .nonlinear import expand_basis
from .signal import ShapeError, StftConfig, TimeSignal, istft_array, stft_array

__all__ = [
    "DemixState",
    "EstimateFrame",
    "StreamResult",
    "assemble_observation",
    "demix",
    "score",
    "scaling_d",
    "scaling_c",
    "update",
    "reduced_update",
    "SbssCanceller",
    "process_stream",
]

logger = logging.getLogger(__name__)

SCORE_EPS = 1e-12
SCALE_FLOOR = 1e-12
SINGULAR_TOL = 1e-12


@dataclass
class DemixState:
    """Per-bin demixing matrices, shape (n_bins, p + 1, p + 1)."""

    W: np.ndarray
    learning_rate: float = 0.1
    eps: float = SCORE_EPS
    frame: int = 0
    skipped: int = 0

    @classmethod
    def initial(cls, n_bins: int, order: int, learning_rate: float = 0.1, eps: float = SCORE_EPS):
        if order < 1:
            raise ValueError(f"order must be >= 1, got {order}")
        W = np.tile(np.eye(order + 1, dtype=np.complex128), (n_bins, 1, 1))
        return cls(W, learning_rate, eps)

    @classmethod
    def from_w(cls, w: np.ndarray, learning_rate: float = 0.1, eps: float = SCORE_EPS):
        w = np.asarray(w, dtype=np.complex128)
        state = cls.initial(w.shape[0], w.shape[1], learning_rate, eps)
        state.W[:, 0, 1:] = w
        return state

    @property
    def order(self) -> int:
        return self.W.shape[-1] - 1

    @property
    def n_bins(self) -> int:
        return self.W.shape[0]

    @property
    def w(self) -> np.ndarray:
        """Free demixing vector per bin, shape (n_bins, p)."""
        return self.W[:, 0, 1:]

    def copy(self) -> "DemixState":
        return DemixState(self.W.copy(), self.learning_rate, self.eps, self.frame, self.skipped)


@dataclass
class EstimateFrame:
    """Near-end estimate ``E`` (K,) of one frame plus the quantities used to update."""

    E: np.ndarray
    d: Optional[np.ndarray] = None
    c: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    psi: Optional[np.ndarray] = None


def assemble_observation(Y: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Stack microphone bins ``Y`` (K,) and reference bins ``X`` (p, K) into (K, p + 1)."""
    Y = np.asarray(Y)
    X = np.atleast_2d(np.asarray(X))
    if X.shape[1] != Y.shape[0]:
        raise ShapeError(f"reference bins {X.shape[1]} != microphone bins {Y.shape[0]}")
    return np.concatenate([Y[:, None], X.T], axis=1).astype(np.complex128)


def _check(state: DemixState, obs: np.ndarray) -> None:
    if obs.ndim != 2 or obs.shape != (state.n_bins, state.order + 1):
        raise ShapeError(
            f"observation shape {obs.shape} does not match state "
            f"({state.n_bins} bins, order {state.order})"
        )


def demix(state: DemixState, obs: np.ndarray) -> np.ndarray:
    """e = W y per bin. Reference components pass through untouched."""
    obs = np.asarray(obs)
    _check(state, obs)
    e = obs.astype(np.complex128, copy=True)
    e[:, 0] = np.einsum("km,km->k", state.W[:, 0, :], obs)
    return e


def score(e: np.ndarray, eps: float = SCORE_EPS) -> np.ndarray:
    """Multivariate score: each source divided by its norm over all bins of the frame."""
    e = np.asarray(e)
    norm = np.sqrt(np.sum(np.abs(e) ** 2, axis=0) + eps)
    return e / norm[None, :]


def scaling_d(corr: np.ndarray) -> np.ndarray:
    """Infinity norm (max absolute row sum) of each bin's correlation matrix."""
    return np.maximum(np.abs(corr).sum(axis=-1).max(axis=-1), SCALE_FLOOR)


def scaling_c(W_step: np.ndarray) -> np.ndarray:
    """Overflow guard: reciprocal of the largest entry magnitude."""
    return 1.0 / np.maximum(np.abs(W_step).max(axis=(-2, -1)), SCALE_FLOOR)


def update(
    state: DemixState,
    e: np.ndarray,
    psi: Optional[np.ndarray] = None,
    c_override: Optional[float] = None,
) -> tuple[DemixState, np.ndarray, np.ndarray]:
    """One constrained scaled natural-gradient step on every bin.

    Returns the new state together with the ``d`` and ``c`` scaling factors
    used for each bin. Bins whose normalising entry vanishes keep their old
    matrix.
    """
    if psi is None:
        psi = score(e, state.eps)
    W = state.W
    q = W.shape[-1]
    corr = psi[:, :, None] * np.conj(e)[:, None, :]
    d = scaling_d(corr)
    eye = np.eye(q)
    dW = (eye[None] - corr / d[:, None, None]) @ W
    dW[:, 1:, :] = 0.0
    W_step = W + state.learning_rate * dW
    c = scaling_c(W_step) if c_override is None else np.full(W.shape[0], float(c_override))
    W_new = c[:, None, None] * W_step

    lead = W_new[:, 0, 0]
    ok = np.abs(lead) >= SINGULAR_TOL
    W_new[ok, 0, :] /= lead[ok, None]
    # the division leaves exactly one on the diagonal; pin it against rounding
    W_new[ok, 0, 0] = 1.0
    W_new[:, 1:, 1:] = eye[1:, 1:]
    n_bad = int(np.count_nonzero(~ok))
    if n_bad:
        W_new[~ok] = W[~ok]
        logger.debug("frame %d: skipped %d singular bins", state.frame, n_bad)
    new = DemixState(W_new, state.learning_rate, state.eps, state.frame + 1, state.skipped + n_bad)
    return new, d, c


def reduced_update(w: np.ndarray, e: np.ndarray, psi: np.ndarray, learning_rate: float) -> np.ndarray:
    """Closed form of :func:`update` acting on the free vector ``w`` only.

    Expanding the first row of the constrained step and renormalising gives

        w' = w - (eta / d) * psi_E * conj(X) / (1 + eta - eta * psi_E * conj(E) / d)
    """
    corr_row = psi[:, :1] * np.conj(e)
    # d needs every row of the correlation matrix, not just the first
    abs_e = np.abs(e).sum(axis=1)
    d = np.maximum(np.abs(psi).max(axis=1) * abs_e, SCALE_FLOOR)
    denom = 1.0 + learning_rate - learning_rate * corr_row[:, 0] / d
    return w - (learning_rate / d)[:, None] * corr_row[:, 1:] / denom[:, None]


@dataclass
class StreamResult:
    estimate: TimeSignal
    E: np.ndarray
    state: DemixState
    d: np.ndarray
    c: np.ndarray
    score_energy: np.ndarray
    source_energy: np.ndarray
    skipped: int = 0
    extra: dict = field(default_factory=dict)


class SbssCanceller:
    """Frame-streaming SBSS echo canceller.

    Args:
        n_bins: number of one-sided frequency bins per frame.
        order: number of odd-power basis references.
        learning_rate: step size of the natural-gradient update.
        c_override: force a constant ``c`` instead of the overflow guard
            (the final constrained state does not depend on it).
    """

    def __init__(
        self,
        n_bins: int,
        order: int = 3,
        learning_rate: float = 0.1,
        eps: float = SCORE_EPS,
        c_override: Optional[float] = None,
    ):
        self.state = DemixState.initial(n_bins, order, learning_rate, eps)
        self.c_override = c_override

    def process_frame(self, Y: np.ndarray, X: np.ndarray) -> EstimateFrame:
        obs = assemble_observation(Y, X)
        e = demix(self.state, obs)
        psi = score(e, self.state.eps)
        self.state, d, c = update(self.state, e, psi, self.c_override)
        return EstimateFrame(e[:, 0].copy(), d, c, e, psi)


def process_stream(
    far_end: TimeSignal,
    microphone: TimeSignal,
    order: int = 3,
    learning_rate: float = 0.1,
    stft_cfg: Optional[StftConfig] = None,
    c_override: Optional[float] = None,
    callback: Optional[Callable[[int, DemixState, EstimateFrame], None]] = None,
) -> StreamResult:
    """Run the canceller over a whole recording.

    The basis expansion happens on time samples, before the STFT. The output
    has the microphone's length.
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

    Ys = stft_array(microphone.samples, cfg)
    Xs = stft_array(basis, cfg)
    n_frames, K = Ys.shape

    canceller = SbssCanceller(K, order, learning_rate, c_override=c_override)
    E = np.empty_like(Ys)
    ds = np.empty((n_frames, K))
    cs = np.empty((n_frames, K))
    score_energy = np.empty((n_frames, order + 1))
    source_energy = np.empty((n_frames, order + 1))
    for t in range(n_frames):
        frame = canceller.process_frame(Ys[t], Xs[:, t, :])
        E[t] = frame.E
        ds[t] = frame.d
        cs[t] = frame.c
        score_energy[t] = np.sum(np.abs(frame.psi) ** 2, axis=0)
        source_energy[t] = np.sum(np.abs(frame.e) ** 2, axis=0)
        if callback is not None:
            callback(t, canceller.state, frame)

    est = TimeSignal(istft_array(E, cfg, n), microphone.sample_rate)
    return StreamResult(
        estimate=est,
        E=E,
        state=canceller.state,
        d=ds,
        c=cs,
        score_energy=score_energy,
        source_energy=source_energy,
        skipped=canceller.state.skipped,
    )

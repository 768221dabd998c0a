"""Semi-blind source separation for nonlinear acoustic echo cancellation."""

from .metrics import MetricSeries, erle, measure_esr, terle
from .nonlinear import (
    BasisStack,
    CalibrationError,
    NonlinearModel,
    apply_nonlinearity,
    calibrate_sdr,
    expand_basis,
    measure_sdr,
)
from .room import RoomSpec, convolve, generate_rir, synthesize_mixture
from .sbss import DemixState, SbssCanceller, process_stream
from .signal import Spectrogram, StftConfig, TimeSignal, istft, read_wav, stft, write_wav

__version__ = "0.1.0"

"""Build a scenario from a config, run the canceller and the baseline, write artifacts."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..metrics import erle, measure_esr, terle
from ..nonlinear import NonlinearModel, calibrate_sdr, measure_sdr
from ..room import generate_rir, synthesize_mixture
from ..sbss import process_stream
from ..signal import TimeSignal, read_wav, write_wav
from ..speech import speech_like, white_noise
from .baseline import baseline_fdaf
from .config import ConfigError, ScenarioConfig, SourceSpec, dump_config

logger = logging.getLogger(__name__)

DEFAULT_F0 = {"far_end": 210.0, "near_end": 120.0}


@dataclass
class RunReport:
    mode: str
    achieved: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "achieved": self.achieved,
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "config": self.config,
            "wall_clock_s": self.wall_clock_s,
        }


def _f32(x: np.ndarray) -> np.ndarray:
    # everything reported is computed on exactly what lands in the float32 WAVs
    return np.asarray(x, dtype=np.float32).astype(np.float64)


def load_source(spec: SourceSpec, role: str, sample_rate: int, seed: int, base_dir: Path) -> TimeSignal:
    if spec.file is not None:
        path = Path(spec.file)
        if not path.is_absolute():
            path = base_dir / path
        sig = read_wav(path, spec.channel)
        if sig.sample_rate != sample_rate:
            raise ConfigError(f"{path}: sample rate {sig.sample_rate} Hz, config expects {sample_rate} Hz")
        return sig
    if spec.generator == "speech":
        return speech_like(spec.duration, sample_rate, seed=seed, f0=spec.f0 or DEFAULT_F0[role])
    if spec.generator == "white_noise":
        return white_noise(spec.duration, sample_rate, seed=seed)
    return TimeSignal(np.zeros(int(round(spec.duration * sample_rate))), sample_rate)


def build_rir(config: ScenarioConfig, base_dir: Path) -> TimeSignal:
    if config.rir_file is not None:
        path = Path(config.rir_file)
        if not path.is_absolute():
            path = base_dir / path
        rir = read_wav(path)
        if rir.sample_rate != config.sample_rate:
            raise ConfigError(f"{path}: sample rate {rir.sample_rate} Hz, config expects {config.sample_rate} Hz")
        return rir
    if config.room.sample_rate != config.sample_rate:
        raise ConfigError(
            f"room.sample_rate {config.room.sample_rate} differs from sample_rate {config.sample_rate}"
        )
    return generate_rir(config.room)


def build_model(config: ScenarioConfig, far_end: TimeSignal) -> NonlinearModel:
    nl = config.nonlinearity
    if nl.kind == "identity":
        return NonlinearModel("identity")
    if nl.x_max is not None:
        return NonlinearModel(nl.kind, nl.x_max, nl.rho)
    return calibrate_sdr(far_end, nl.kind, nl.sdr_target, rho=nl.rho)


def _write(out: Path, name: str, x: np.ndarray, fs: int, artifacts: dict) -> None:
    write_wav(out / name, TimeSignal(x, fs))
    artifacts[name.rsplit(".", 1)[0]] = name


def run_scenario(config: ScenarioConfig, out_dir, base_dir=".") -> RunReport:
    """Run one experiment end to end and write WAV/CSV/YAML artifacts into ``out_dir``."""
    t0 = time.perf_counter()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    base = Path(base_dir)
    fs = config.sample_rate
    report = RunReport(mode=config.mode, config=config.to_dict())
    arts = report.artifacts

    far = load_source(config.far_end, "far_end", fs, config.seed, base)

    if config.mode == "real_capture":
        mic = load_source(config.microphone, "microphone", fs, config.seed, base)
        x, y = _f32(far.samples), _f32(mic.samples)
        res = process_stream(TimeSignal(x, fs), TimeSignal(y, fs), config.order, config.learning_rate, config.stft)
        _write(out, "estimate.wav", res.estimate.samples, fs, arts)
        if config.baseline.enabled:
            b = _baseline(config, TimeSignal(x, fs), TimeSignal(y, fs))
            _write(out, "baseline_estimate.wav", b, fs, arts)
        report.achieved = {"skipped_bins": int(res.skipped)}
        return _finish(report, config, out, t0)

    model = build_model(config, far)
    rir = build_rir(config, base)
    if config.near_end is None:
        near = TimeSignal(np.zeros(len(far)), fs)
    else:
        near = load_source(config.near_end, "near_end", fs, config.seed + 1, base)
    mix = synthesize_mixture(far, near, model, rir, config.esr_target)

    x = _f32(mix.far_end.samples)
    d = _f32(mix.echo.samples)
    s = _f32(mix.scaled_near_end.samples)
    y = _f32(mix.microphone.samples)
    res = process_stream(TimeSignal(x, fs), TimeSignal(y, fs), config.order, config.learning_rate, config.stft)
    e = _f32(res.estimate.samples)

    for name, sig in (("far_end.wav", x), ("echo.wav", d), ("near_end.wav", s), ("microphone.wav", y), ("estimate.wav", e)):
        _write(out, name, sig, fs, arts)

    sdr = measure_sdr(TimeSignal(x, fs), model)
    report.achieved = {
        "nonlinearity": {"kind": model.kind, "x_max": float(model.x_max), "rho": float(model.rho)},
        "sdr_db": None if not np.isfinite(sdr) else float(sdr),
        "esr_db": float(measure_esr(d, s)) if np.any(s) else None,
        "near_scale": float(mix.near_scale),
        "skipped_bins": int(res.skipped),
    }

    mw, mh = config.metrics.window, config.metrics.hop
    series = {}
    if config.mode == "single_talk":
        series["erle"] = erle(y, e, mw, mh, fs)
    else:
        series["terle"] = terle(d, e, s, mw, mh, fs)
    if config.baseline.enabled:
        b = _f32(_baseline(config, TimeSignal(x, fs), TimeSignal(y, fs)))
        _write(out, "baseline_estimate.wav", b, fs, arts)
        if config.mode == "single_talk":
            series["baseline_erle"] = erle(y, b, mw, mh, fs)
        else:
            series["baseline_terle"] = terle(d, b, s, mw, mh, fs)
    for name, ser in series.items():
        ser.to_csv(out / f"{name}.csv")
        arts[name] = f"{name}.csv"
        report.metrics[name] = {"steady_state_db": ser.steady_state, "final_db": float(ser.values[-1])}
    return _finish(report, config, out, t0)


def _baseline(config: ScenarioConfig, x: TimeSignal, y: TimeSignal) -> np.ndarray:
    bc = config.baseline
    return baseline_fdaf(x, y, config.order, config.stft, bc.step, bc.regularization).samples


def _finish(report: RunReport, config: ScenarioConfig, out: Path, t0: float) -> RunReport:
    dump_config(config, out / "config.yaml")
    report.artifacts["config"] = "config.yaml"
    report.artifacts["report"] = "report.yaml"
    report.wall_clock_s = time.perf_counter() - t0
    with open(out / "report.yaml", "w") as fh:
        yaml.safe_dump(report.to_dict(), fh, sort_keys=False)
    logger.info("scenario %s finished in %.2f s", config.mode, report.wall_clock_s)
    return report

"""Command line entry point: ``nlsbss <subcommand> ...``.

Exit codes: 0 success, 1 configuration/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import yaml

from ..metrics import erle, terle
from ..nonlinear import CalibrationError, calibrate_sdr, measure_sdr
from ..room import generate_rir
from ..sbss import process_stream
from ..signal import ConfigurationError, StftConfig, read_wav, write_wav
from .config import ConfigError, ScenarioConfig, load_config, resolve_config_path, room_from_dict
from .scenario import run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _cmd_simulate(args) -> int:
    path = resolve_config_path(args.config)
    config = load_config(path)
    if args.seed is not None:
        config.seed = args.seed
    report = run_scenario(config, args.out, base_dir=path.parent)
    for name, vals in report.metrics.items():
        print(f"{name}: steady state {vals['steady_state_db']:.2f} dB")
    print(f"artifacts written to {args.out}")
    return EXIT_OK


def _cmd_cancel(args) -> int:
    far = read_wav(args.farend)
    mic = read_wav(args.mic)
    cfg = StftConfig(args.fft, args.hop, args.window)
    res = process_stream(far, mic, args.p, args.eta, cfg)
    write_wav(args.out, res.estimate)
    return EXIT_OK


def _cmd_metrics(args) -> int:
    sigs = [read_wav(p) for p in args.wavs]
    need = 2 if args.mode == "erle" else 3
    if len(sigs) != need:
        raise ConfigError(
            f"--mode {args.mode} takes {need} WAV files "
            + ("(microphone, estimate)" if need == 2 else "(echo, estimate, near_end)")
        )
    fs = sigs[0].sample_rate
    if any(s.sample_rate != fs for s in sigs) or any(len(s) != len(sigs[0]) for s in sigs):
        raise ConfigError("all WAV inputs must share sample rate and length")
    if args.mode == "erle":
        series = erle(sigs[0], sigs[1], args.window, args.hop, fs)
    else:
        series = terle(sigs[0], sigs[1], sigs[2], args.window, args.hop, fs)
    series.to_csv(args.csv)
    print(f"steady state {series.steady_state:.2f} dB")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    x = read_wav(args.input)
    kind = {"hard": "hard_clip", "soft": "soft_saturation"}[args.kind]
    model = calibrate_sdr(x, kind, args.target, rho=args.rho)
    print(yaml.safe_dump({"kind": model.kind, "x_max": float(model.x_max), "rho": float(model.rho),
                          "sdr_db": float(measure_sdr(x, model))}, sort_keys=False), end="")
    return EXIT_OK


def _cmd_rir(args) -> int:
    with open(args.config) as fh:
        data = yaml.safe_load(fh) or {}
    if isinstance(data, dict) and ("room" in data or "mode" in data):
        room = ScenarioConfig.from_dict(data).room
        if room is None:
            raise ConfigError(f"{args.config}: scenario has no room section")
    else:
        room = room_from_dict(data)
    write_wav(args.out, generate_rir(room))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nlsbss", description="Semi-blind source separation echo canceller")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="run a full scenario from a config file or preset name")
    s.add_argument("config")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=_cmd_simulate)

    c = sub.add_parser("cancel", help="cancel echo in a recorded microphone signal")
    c.add_argument("--farend", required=True)
    c.add_argument("--mic", required=True)
    c.add_argument("--p", type=int, default=3)
    c.add_argument("--eta", type=float, default=0.1)
    c.add_argument("--fft", type=int, default=4096)
    c.add_argument("--hop", type=int, default=1024)
    c.add_argument("--window", default="sqrt_hann")
    c.add_argument("--out", required=True)
    c.set_defaults(func=_cmd_cancel)

    m = sub.add_parser("metrics", help="ERLE (mic, estimate) or tERLE (echo, estimate, near_end) curves")
    m.add_argument("--mode", choices=("erle", "terle"), required=True)
    m.add_argument("wavs", nargs="+")
    m.add_argument("--csv", required=True)
    m.add_argument("--window", type=int, default=16000)
    m.add_argument("--hop", type=int, default=4000)
    m.set_defaults(func=_cmd_metrics)

    k = sub.add_parser("calibrate-sdr", help="find the threshold giving a target SDR")
    k.add_argument("--in", dest="input", required=True)
    k.add_argument("--kind", choices=("hard", "soft"), required=True)
    k.add_argument("--target", type=float, required=True)
    k.add_argument("--rho", type=float, default=2.0)
    k.set_defaults(func=_cmd_calibrate)

    r = sub.add_parser("rir", help="generate an image-method RIR from a room config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_rir)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, CalibrationError, ValueError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

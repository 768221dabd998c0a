"""Double-talk sweep over loudspeaker SDR {3, 5, 10} dB for both nonlinearities.

Each run gets its own output directory, so runs are independent and can be
spread over processes with --jobs.
"""

import argparse
import tempfile
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from nlsbss.harness.config import load_config, resolve_config_path
from nlsbss.harness.scenario import run_scenario

SDRS = (3.0, 5.0, 10.0)
PRESETS = {"hard_clip": "double_talk_hard", "soft_saturation": "double_talk_soft"}


def one(kind, sdr, seed, out):
    cfg = load_config(resolve_config_path(PRESETS[kind]))
    cfg.seed = seed
    cfg.nonlinearity.sdr_target = sdr
    rep = run_scenario(cfg, out)
    m = rep.metrics
    return kind, sdr, rep.achieved["sdr_db"], m["terle"]["steady_state_db"], m["baseline_terle"]["steady_state_db"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    root = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="sdr_sweep_"))
    jobs = [(k, s, args.seed, root / f"{k}_{s:g}dB") for k in PRESETS for s in SDRS]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        rows = list(pool.map(one, *zip(*jobs)))
    print("kind             target  sdr_db  terle_db  baseline_db")
    for kind, target, sdr, t, b in rows:
        print(f"{kind:15s}  {target:6.1f}  {sdr:6.3f}  {t:8.2f}  {b:11.2f}")
    print(f"artifacts: {root}")


if __name__ == "__main__":
    main()

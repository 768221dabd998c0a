"""Single-talk rerun over several seeds: SBSS vs NLMS steady-state ERLE."""

import argparse
import tempfile
from pathlib import Path

from nlsbss.harness.config import load_config, resolve_config_path
from nlsbss.harness.scenario import run_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=4)
    ap.add_argument("--config", default="single_talk")
    ap.add_argument("--out", default=None, help="keep artifacts under this directory")
    args = ap.parse_args()

    root = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="single_talk_"))
    print("seed  sdr_db  erle_db  baseline_db")
    for seed in range(args.seeds):
        cfg = load_config(resolve_config_path(args.config))
        cfg.seed = seed
        rep = run_scenario(cfg, root / f"seed{seed}")
        m = rep.metrics
        print(
            f"{seed:4d}  {rep.achieved['sdr_db']:6.3f}  {m['erle']['steady_state_db']:7.2f}"
            f"  {m['baseline_erle']['steady_state_db']:11.2f}"
        )
    print(f"artifacts: {root}")


if __name__ == "__main__":
    main()

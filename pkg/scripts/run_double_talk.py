"""Double-talk rerun for both nonlinearities: SBSS vs NLMS steady-state tERLE."""

import argparse
import tempfile
from pathlib import Path

from nlsbss.harness.config import load_config, resolve_config_path
from nlsbss.harness.scenario import run_scenario

PRESETS = ("double_talk_hard", "double_talk_soft")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=4)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    root = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="double_talk_"))
    print("preset             seed  terle_db  baseline_db")
    for preset in PRESETS:
        for seed in range(args.seeds):
            cfg = load_config(resolve_config_path(preset))
            cfg.seed = seed
            rep = run_scenario(cfg, root / preset / f"seed{seed}")
            m = rep.metrics
            print(
                f"{preset:17s}  {seed:4d}  {m['terle']['steady_state_db']:8.2f}"
                f"  {m['baseline_terle']['steady_state_db']:11.2f}"
            )
    print(f"artifacts: {root}")


if __name__ == "__main__":
    main()

"""Print the heralded-link rate against fiber length per arm as CSV."""
import argparse
import sys

from qdrepeater.cli import run_rate_table
from qdrepeater.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.17, help="fiber loss in dB/km")
    ap.add_argument("--r0", type=float, default=1e6, help="attempt rate in Hz")
    ap.add_argument("--lengths", default="0,10,50,100,150,200,250,300", help="comma-separated km per arm")
    args = ap.parse_args()
    cfg = load_config(None, [
        f"rate_table.alpha_db_per_km={args.alpha}",
        f"rate_table.r0_hz={args.r0}",
        f"rate_table.lengths_per_arm_km={args.lengths}",
        "run.format=csv",
    ])
    text, _ = run_rate_table(cfg)
    sys.stdout.write(text)


if __name__ == "__main__":
    main()

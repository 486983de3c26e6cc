"""Simulated spin-photon tomography with a bootstrap fidelity histogram (CSV)."""
import argparse
import sys
import warnings

import numpy as np

from qdrepeater import tomography as tm
from qdrepeater.sources import ideal_spin_photon_pure


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--resamples", type=int, default=300)
    ap.add_argument("--bins", type=int, default=20)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--shots", type=int, default=None, help="override shots per setting")
    args = ap.parse_args()
    preset = tm.EXPERIMENT_LIKE_PRESET
    shots = args.shots or preset.shots_per_setting
    rng = np.random.default_rng(args.seed)
    counts = tm.simulate_counts(preset.source(), tm.FULL_SETTINGS, shots, preset.detector(), rng)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        bs = tm.bootstrap_statistics(counts, ideal_spin_photon_pure(), args.resamples, rng, args.workers, args.bins)
    for k, v in sorted(bs.summary().items()):
        sys.stdout.write(f"# {k}={v!r}\n")
    sys.stdout.write(bs.histogram_csv())


if __name__ == "__main__":
    main()

"""Heralded and unheralded chain delivery rates against the number of nodes."""
import argparse
import csv
import math
import sys

import numpy as np

from qdrepeater import network as nw
from qdrepeater.optics import FiberChannel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.1)
    ap.add_argument("--r0", type=float, default=1e6)
    ap.add_argument("--rounds", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--nodes", default="2,3,5,9,17")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    link = nw.LinkSpec(channel=FiberChannel(0.0), source_rate=args.r0, p_success=args.p)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["n_nodes", "heralded_rate_hz", "heralded_theory_hz", "log_law_hz", "unheralded_rate_hz", "unheralded_theory_hz"])
    for n in (int(x) for x in args.nodes.split(",")):
        her = nw.simulate_chain(nw.ChainConfig.uniform(n, link), rng, args.rounds, track_fidelity=False)
        unh = nw.simulate_chain(nw.ChainConfig.uniform(n, link, heralded=False), rng, args.rounds, track_fidelity=False)
        log_law = args.r0 * args.p / math.log(n) if n > 2 else args.r0 * args.p
        w.writerow([n, her.rate, args.r0 / nw.expected_max_geometric(args.p, n - 1), log_law,
                    unh.rate, args.r0 * args.p ** (n - 1)])


if __name__ == "__main__":
    main()

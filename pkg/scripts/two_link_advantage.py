"""Two-link delivery rate with and without memories, against per-link success probability."""
import argparse
import csv
import sys

import numpy as np

from qdrepeater import network as nw
from qdrepeater.optics import FiberChannel


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--r0", type=float, default=1e6)
    ap.add_argument("--rounds", type=float, default=1e7)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--p", default="0.005,0.01,0.02,0.05,0.1,0.2")
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    nodes = [nw.NodeSpec()] * 3
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["p_link", "rate_memory_hz", "rate_memoryless_hz", "theory_memory_hz", "theory_memoryless_hz", "advantage"])
    for p in (float(x) for x in args.p.split(",")):
        link = nw.LinkSpec(channel=FiberChannel(0.0), source_rate=args.r0, p_success=p)
        t = args.rounds / args.r0
        mem = nw.simulate_two_link_protocol([link, link], nodes, rng, t, track_fidelity=False)
        free = nw.simulate_two_link_protocol([link, link], nodes, rng, t, memoryless=True, track_fidelity=False)
        adv = mem.rate / free.rate if free.rate > 0 else float("inf")
        w.writerow([p, mem.rate, free.rate, args.r0 / nw.expected_max_geometric(p, 2), args.r0 * p * p, adv])


if __name__ == "__main__":
    main()

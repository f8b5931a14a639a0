"""Run random scenarios in all three modes and compare the published lists."""

import argparse
import time

from iotrace.core import ProtocolMode
from iotrace.scenarios import random_scenario
from iotrace.sim import run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenarios", type=int, default=20)
    args = ap.parse_args()
    t0 = time.perf_counter()
    mismatched, pubs = [], 0
    for seed in range(args.scenarios):
        lists = [[p.published.beacons for p in run(random_scenario(seed, m)).publications] for m in ProtocolMode]
        pubs += len(lists[0])
        if not lists[0] == lists[1] == lists[2]:
            mismatched.append(seed)
    print(f"{args.scenarios} scenarios, {pubs} publications, mismatches={mismatched}, "
          f"{time.perf_counter() - t0:.1f}s")


if __name__ == "__main__":
    main()

"""Pinpoint rate of the k-anonymity attack versus cluster size, with and without encryption."""

import argparse

from iotrace.core import ProtocolMode
from iotrace.scenarios import kanon_scenario
from iotrace.sim import device_id, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 3, 5, 10])
    args = ap.parse_args()
    print(f"{'k':>3} {'mode':>17} {'pinpoint':>9} {'1/k':>6}")
    for k in args.k:
        for mode in (ProtocolMode.CENTRALIZED, ProtocolMode.PRIVACY_ENHANCED):
            hits = 0
            for seed in range(args.runs):
                h = run(kanon_scenario(k, seed, mode)).attacks["health_status"][device_id(0)]
                hits += bool(h["pinpoint_correct"])
            print(f"{k:>3} {mode.value:>17} {hits / args.runs:>9.3f} {1 / k:>6.3f}")


if __name__ == "__main__":
    main()

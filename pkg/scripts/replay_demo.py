"""Replay attack at a distant totem, with the fraud filter off and on."""

import argparse

from iotrace.scenarios import replay_scenario
from iotrace.sim import run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--distance", type=float, default=30000.0)
    args = ap.parse_args()
    print(f"{'seed':>4} {'filter':>6} {'injected':>8} {'flagged':>7} {'false_notified':>14}")
    for seed in range(args.seeds):
        for guard in (False, True):
            out = run(replay_scenario(seed, fraud_detection=guard, distance=args.distance))
            injected = {i.payload for i in out.injections if i.payload is not None}
            false = out.notified - out.ground_truth.contacts
            print(f"{seed:>4} {'on' if guard else 'off':>6} {len(injected):>8} "
                  f"{len(injected & out.fraud_flags):>7} {len(false):>14}")


if __name__ == "__main__":
    main()

"""Per-device cost table for the broadcast-only device against scanning BLE protocols."""

import argparse

from iotrace.metrics import BASELINES, CostModelParams, baseline_report, cost_report


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--encounters", type=int, default=1000, help="contacts held by scanning protocols")
    args = ap.parse_args()
    p = CostModelParams()
    print(f"{'protocol':>13} {'mJ/min':>9} {'tx B/min':>9} {'storage B':>10} {'crypto ms/day':>13}")
    rows = [("iotrace", cost_report(p))]
    rows += [(name, baseline_report(name, p, args.encounters)) for name in BASELINES if name != "iotrace"]
    for name, r in rows:
        print(f"{name:>13} {r['rf_energy_mJ_per_min']:>9.2f} {r['tx_bytes_per_min']:>9g} "
              f"{r['contact_storage_B']:>10} {r['crypto_ms_per_day']:>13.2f}")


if __name__ == "__main__":
    main()

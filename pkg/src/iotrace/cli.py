"""Command-line entry points. Exit codes: 0 success, 1 internal error, 2 bad input."""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import adversary as adv
from . import formats
from .authority import (DEFAULT_EPSILON, DEFAULT_V_MAX, AuthorityStore, MissingTotemPosition, detect_fraud,
                        ingest_records, merge_published, publish, reconcile_centralized)
from .core import DEFAULT_SLOT_LEN, DeviceKey, ProtocolMode, beacon_hex
from .device import DEFAULT_LOOKBACK_DAYS, DEFAULT_RISK_THRESHOLD, DeviceState, match_published
from .formats import FormatError
from .sim import ConfigError, SimConfig, run, write_output

log = logging.getLogger("iotrace")

FORMATS_HELP = """file formats (one example line each):
  config.json      {"seed": 1, "duration": 7200, "totems": [{"id": "T-0001", "x": 0, "y": 0, "radio_range": 10}], "devices": {"count": 5}}
  records.jsonl    {"totem":"T-0001","slot":12345,"beacon":"00112233445566778899aabbccddeeff"}
  positives.json   [{"slot":12345,"beacon":"00112233445566778899aabbccddeeff"}]
  published.json   {"published_at": 3600.0, "beacons": ["00112233445566778899aabbccddeeff"]}
  totems.json      [{"id":"T-0001","x":0.0,"y":0.0,"radio_range":10.0}]
  report.json      {"exposure_seconds":1800.0,"matched_slots":[3,4,5],"notified":true}
  eavesdrop.jsonl  {"payload":"00112233445566778899aabbccddeeff","t":12.5,"x":3.0,"y":-1.2}
  targets.json     ["00112233445566778899aabbccddeeff"]
"""


class InputError(Exception):
    pass


def _emit(text: str, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _prepare_dir(path: Path, overwrite: bool):
    if path.exists() and any(path.iterdir()):
        if not overwrite:
            raise InputError(f"{path}: output directory is not empty (use --overwrite)")
        for p in path.iterdir():
            if p.is_file():
                p.unlink()
    path.mkdir(parents=True, exist_ok=True)


def _parse_sweep(spec: str) -> range:
    try:
        key, _, span = spec.partition("=")
        a, _, b = span.partition("..")
        if key != "seeds":
            raise ValueError
        lo, hi = int(a), int(b)
    except ValueError:
        raise InputError(f"--sweep: expected seeds=A..B, got {spec!r}") from None
    if lo > hi:
        raise InputError("--sweep: empty seed range")
    return range(lo, hi + 1)


def _configure(args) -> SimConfig:
    cfg = SimConfig.load(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.mode is not None:
        changes["mode"] = ProtocolMode(args.mode)
    if args.epsilon is not None:
        changes["epsilon"] = args.epsilon
    if args.v_max is not None:
        changes["v_max"] = args.v_max
    if args.threshold is not None:
        changes["risk_threshold"] = args.threshold
    return cfg.replace(**changes) if changes else cfg


def _simulate_one(cfg: SimConfig, out: str) -> str:
    write_output(run(cfg), out)
    return out


def cmd_simulate(args) -> int:
    cfg = _configure(args)
    out = Path(args.out)
    if args.sweep:
        seeds = _parse_sweep(args.sweep)
        _prepare_dir(out, args.overwrite)
        jobs = [(cfg.replace(seed=s), str(out / f"seed-{s}")) for s in seeds]
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for path in pool.map(_simulate_one, *zip(*jobs)):
                log.info("wrote %s", path)
        return 0
    _prepare_dir(out, args.overwrite)
    _simulate_one(cfg, str(out))
    return 0


def cmd_reconcile(args) -> int:
    records = formats.load_records(args.records)
    disclosure = formats.load_disclosure(args.positives)
    if len(disclosure) == 0:
        raise InputError(f"{args.positives}: empty positive disclosure")
    store = AuthorityStore()
    ingest_records(store, records)
    flagged = frozenset()
    if args.totems:
        positions = {k: (x, y) for k, (x, y, _) in formats.load_totems(args.totems).items()}
        flagged = frozenset(detect_fraud(store, args.v_max, positions, args.slot_len))
    pl = reconcile_centralized(store, disclosure, args.epsilon, exclude=flagged, published_at=args.published_at)
    _emit(publish(pl, args.seed), args.out)
    return 0


def cmd_detect_fraud(args) -> int:
    store = AuthorityStore()
    ingest_records(store, formats.load_records(args.records))
    positions = {k: (x, y) for k, (x, y, _) in formats.load_totems(args.totems).items()}
    flagged = detect_fraud(store, args.v_max, positions, args.slot_len)
    _emit(formats.dumps(sorted(beacon_hex(b) for b in flagged)), args.out)
    return 0


def cmd_match(args) -> int:
    try:
        key = DeviceKey(bytes.fromhex(args.key))
    except ValueError as exc:
        raise InputError(f"--key: {exc}") from None
    try:
        state = DeviceState(key, "cli", args.threshold, args.lookback_days, args.slot_len)
    except ValueError as exc:
        raise InputError(f"--threshold: {exc}") from None
    lists = [formats.load_published(p)[0] for p in args.published]
    report = match_published(state, merge_published(lists), args.now)
    _emit(formats.dumps(formats.report_to_json(report)), args.out)
    return 0


def cmd_attack(args) -> int:
    log_ = formats.load_eavesdrop(args.eavesdrop)
    loaded = [formats.load_published(p) for p in args.published]
    lists = [pl for pl, _ in loaded]
    order = [b for _, o in loaded for b in o]
    targets = formats.load_targets(args.targets)
    geometry = formats.load_totems(args.totems)
    missing = [k for k, (_, _, r) in geometry.items() if r is None]
    if missing:
        raise InputError(f"{args.totems}: radio_range missing for {missing[0]}")
    inference = adv.infer_health_status(log_, lists, targets, geometry, args.slot_len, args.epsilon)
    health = {}
    for target, inf in inference.items():
        entry = {"verdict": inf.verdict, "k": inf.k, "confidence": inf.confidence, "pinpoint": None}
        if inf.verdict:
            guess = adv.pinpoint_positive(log_, lists, target, geometry, args.slot_len, args.epsilon, order=order)
            entry["pinpoint"] = guess.hex()
        health[target.hex()] = entry
    published = merge_published(lists).beacons
    report = {
        "health_status": health,
        "trajectory": [list(p) for p in adv.recover_trajectory(log_, lists)],
        "wire_published_overlap": len(log_.payloads() & published),
    }
    _emit(formats.dumps(report), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iotrace", description="IoT-edge contact tracing toolkit",
                                epilog=FORMATS_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_, epilog=FORMATS_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        sp.set_defaults(func=func)
        return sp

    s = add("simulate", cmd_simulate, "run a scenario and write every artifact plus metrics.json")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--mode", choices=[m.value for m in ProtocolMode])
    s.add_argument("--epsilon", type=int)
    s.add_argument("--v-max", type=float)
    s.add_argument("--threshold", type=float, help="risk threshold in seconds")
    s.add_argument("--overwrite", action="store_true")
    s.add_argument("--sweep", help="seeds=A..B: run each seed into OUT/seed-N in parallel")
    s.add_argument("--jobs", type=int, default=None)

    r = add("reconcile", cmd_reconcile, "publish the window-filtered list for one positive disclosure")
    r.add_argument("--records", required=True)
    r.add_argument("--positives", required=True)
    r.add_argument("--epsilon", type=int, default=DEFAULT_EPSILON)
    r.add_argument("--seed", type=int, default=0, help="shuffle seed for the published order")
    r.add_argument("--published-at", type=float, default=0.0)
    r.add_argument("--totems", help="apply the replay filter using these positions")
    r.add_argument("--v-max", type=float, default=DEFAULT_V_MAX)
    r.add_argument("--slot-len", type=float, default=DEFAULT_SLOT_LEN)
    r.add_argument("--out")

    f = add("detect-fraud", cmd_detect_fraud, "flag beacons sighted at infeasibly distant totems")
    f.add_argument("--records", required=True)
    f.add_argument("--totems", required=True)
    f.add_argument("--v-max", type=float, default=DEFAULT_V_MAX)
    f.add_argument("--slot-len", type=float, default=DEFAULT_SLOT_LEN)
    f.add_argument("--out")

    m = add("match", cmd_match, "check a device key against published lists")
    m.add_argument("--key", required=True, help="128-bit device key as 32 hex chars")
    m.add_argument("--published", required=True, nargs="+")
    m.add_argument("--now", type=float, required=True)
    m.add_argument("--threshold", type=float, default=DEFAULT_RISK_THRESHOLD)
    m.add_argument("--slot-len", type=float, default=DEFAULT_SLOT_LEN)
    m.add_argument("--lookback-days", type=float, default=DEFAULT_LOOKBACK_DAYS)
    m.add_argument("--out")

    a = add("attack", cmd_attack, "run the eavesdropper's health-status and trajectory attacks")
    a.add_argument("--eavesdrop", required=True)
    a.add_argument("--published", required=True, nargs="+")
    a.add_argument("--targets", required=True)
    a.add_argument("--totems", required=True)
    a.add_argument("--slot-len", type=float, default=DEFAULT_SLOT_LEN)
    a.add_argument("--epsilon", type=int, default=DEFAULT_EPSILON)
    a.add_argument("--out")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (InputError, FormatError, ConfigError, MissingTotemPosition) as exc:
        print(f"iotrace {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"iotrace {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""JSON / JSON Lines encodings for every artifact that crosses a file boundary.

    records.jsonl     {"totem":"T-0001","slot":12345,"beacon":"<hex32>"}
    disclosure.json   [{"slot":12345,"beacon":"<hex32>"}, ...]
    published.json    {"published_at":3600.0,"beacons":["<hex32>", ...]}
    report.json       {"matched_slots":[...],"exposure_seconds":1800.0,"notified":true}
    eavesdrop.jsonl   {"payload":"<hex>","t":12.5,"x":3.0,"y":-1.2}
    totems.json       [{"id":"T-0001","x":0.0,"y":0.0,"radio_range":10.0}, ...]
"""

from __future__ import annotations

import json
from pathlib import Path

from .adversary import EavesdropLog
from .authority import PublishedList
from .core import beacon_from_hex, beacon_hex
from .device import ExposureReport, PositiveDisclosure
from .totem import BeaconRecord


class FormatError(ValueError):
    def __init__(self, source, message, line=None):
        where = f"{source}:{line}" if line is not None else str(source)
        super().__init__(f"{where}: {message}")
        self.source = source
        self.line = line


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise FormatError(path, f"invalid JSON: {exc.msg}", exc.lineno) from exc


def _field(obj, name, kind, source, line=None):
    if not isinstance(obj, dict):
        raise FormatError(source, "expected a JSON object", line)
    if name not in obj:
        raise FormatError(source, f"missing field {name!r}", line)
    value = obj[name]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise FormatError(source, f"field {name!r} has the wrong type", line)
    return value


def _beacon(text, source, line=None):
    try:
        return beacon_from_hex(text)
    except (ValueError, TypeError) as exc:
        raise FormatError(source, str(exc), line) from exc


# records

def record_to_json(rec: BeaconRecord) -> dict:
    return {"totem": rec.totem_id, "slot": rec.slot, "beacon": beacon_hex(rec.beacon)}


def dump_records(records) -> str:
    return "".join(dumps(record_to_json(r)) for r in sorted(records))


def parse_records(text: str, source="<records>") -> list[BeaconRecord]:
    out = []
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise FormatError(source, f"invalid JSON: {exc.msg}", n) from exc
        slot = _field(obj, "slot", int, source, n)
        if slot < 0:
            raise FormatError(source, "slot must be non-negative", n)
        out.append(BeaconRecord(_field(obj, "totem", str, source, n), slot,
                                _beacon(_field(obj, "beacon", str, source, n), source, n)))
    return out


def load_records(path) -> list[BeaconRecord]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc.strerror}") from exc
    return parse_records(text, path)


# disclosures

def dump_disclosure(d: PositiveDisclosure) -> str:
    return dumps([{"slot": s, "beacon": beacon_hex(b)} for s, b in d.entries])


def parse_disclosure(obj, source="<disclosure>") -> PositiveDisclosure:
    if not isinstance(obj, list):
        raise FormatError(source, "expected a JSON array of {slot, beacon}")
    return PositiveDisclosure(tuple(
        (_field(e, "slot", int, source, i), _beacon(_field(e, "beacon", str, source, i), source, i))
        for i, e in enumerate(obj)))


def load_disclosure(path) -> PositiveDisclosure:
    return parse_disclosure(_load_json(path), path)


# published lists

def parse_published(obj, source="<published>") -> tuple[PublishedList, list[bytes]]:
    """Returns the list and its serialized beacon order."""
    at = _field(obj, "published_at", float, source)
    items = _field(obj, "beacons", list, source)
    order = [_beacon(h, source) for h in items]
    return PublishedList(frozenset(order), at), order


def load_published(path) -> tuple[PublishedList, list[bytes]]:
    return parse_published(_load_json(path), path)


# exposure reports

def report_to_json(rep: ExposureReport) -> dict:
    return {"matched_slots": sorted(rep.matched_slots), "exposure_seconds": rep.exposure_seconds,
            "notified": rep.notified}


# eavesdrop logs

def dump_eavesdrop(log: EavesdropLog) -> str:
    return "".join(dumps({"payload": o.payload.hex(), "t": o.t, "x": o.x, "y": o.y}) for o in log)


def load_eavesdrop(path) -> EavesdropLog:
    log = EavesdropLog()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(path, f"cannot read: {exc.strerror}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            payload = bytes.fromhex(_field(obj, "payload", str, path, n))
        except json.JSONDecodeError as exc:
            raise FormatError(path, f"invalid JSON: {exc.msg}", n) from exc
        except ValueError as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(path, "payload is not hex", n) from exc
        log.append(payload, _field(obj, "t", float, path, n), _field(obj, "x", float, path, n),
                   _field(obj, "y", float, path, n))
    return log


# totems

def parse_totems(obj, source="<totems>") -> dict[str, tuple[float, float, float | None]]:
    """Map totem id to ``(x, y, radio_range)``; the range may be absent."""
    if not isinstance(obj, list):
        raise FormatError(source, "expected a JSON array of totems")
    out = {}
    for i, t in enumerate(obj):
        tid = _field(t, "id", str, source, i)
        rng = float(t["radio_range"]) if isinstance(t, dict) and "radio_range" in t else None
        out[tid] = (_field(t, "x", float, source, i), _field(t, "y", float, source, i), rng)
    return out


def load_totems(path):
    return parse_totems(_load_json(path), path)


def load_targets(path) -> list[bytes]:
    obj = _load_json(path)
    if not isinstance(obj, list) or not all(isinstance(h, str) for h in obj):
        raise FormatError(path, "expected a JSON array of hex payloads")
    try:
        return [bytes.fromhex(h) for h in obj]
    except ValueError as exc:
        raise FormatError(path, "target is not hex") from exc

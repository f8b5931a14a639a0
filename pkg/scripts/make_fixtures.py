"""Regenerate the simulator-derived fraud fixtures under tests/data."""

import json
from pathlib import Path

from iotrace import formats
from iotrace.scenarios import highway_scenario, replay_scenario
from iotrace.sim import run

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"


def totems_json(cfg):
    return json.dumps([{"id": t.id, "x": t.x, "y": t.y, "radio_range": t.radio_range} for t in cfg.totems],
                      indent=1) + "\n"


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    honest = highway_scenario(0, fraud_detection=False)
    out = run(honest)
    (DATA / "honest_records.jsonl").write_text(formats.dump_records(out.records))
    (DATA / "honest_totems.json").write_text(totems_json(honest))

    replay = replay_scenario(0, fraud_detection=False)
    out = run(replay)
    (DATA / "replay_records.jsonl").write_text(formats.dump_records(out.records))
    (DATA / "replay_totems.json").write_text(totems_json(replay))
    injected = sorted({i.payload.hex() for i in out.injections if i.payload is not None})
    (DATA / "replay_injected.json").write_text(json.dumps(injected, indent=1) + "\n")
    print(f"wrote fixtures to {DATA}")


if __name__ == "__main__":
    main()

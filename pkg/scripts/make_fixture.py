"""Generate the synthetic event-stream fixture and a matching run config.

Usage: python scripts/make_fixture.py --out fixtures/ [--seed 7] [--events 10000]
"""

import argparse
import json
from pathlib import Path

from polarnet.synthetic import make_event_stream

FIXTURE_TOPICS = [
    {"id": "russia_ukraine", "name": "Russia-Ukraine",
     "for_name": "supports_ukraine", "against_name": "supports_russia"},
    {"id": "trump_administration", "name": "Trump administration",
     "for_name": "supports_trump", "against_name": "opposes_trump"},
    {"id": "tiktok_ban", "name": "TikTok ban",
     "for_name": "supports_ban", "against_name": "opposes_ban"},
    {"id": "ai", "name": "AI",
     "for_name": "supports_ai", "against_name": "opposes_ai"},
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=7)
    parser.add_argument("--events", type=int, default=10_000)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines, truth = make_event_stream(seed=args.seed, n_events=args.events)
    events_path = out / "events.jsonl"
    events_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    config = {
        "inputs": [str(events_path)],
        "out_dir": str(out / "runs"),
        "seed": 42,
        "window": {"start": "2025-01-01", "end": "2025-04-01"},
        "provider": {"kind": "mock"},
        "topics": FIXTURE_TOPICS,
    }
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")

    truth_payload = {
        "participants": {t: sorted(u) for t, u in truth.participants.items()},
        "stances": {f"{t}:{u}": s for (t, u), s in sorted(truth.stances.items())},
        "n_events": truth.n_events,
    }
    (out / "truth.json").write_text(json.dumps(truth_payload, indent=2) + "\n",
                                    encoding="utf-8")
    print(f"wrote {truth.n_events} events, config.json, truth.json to {out}")
    print(f"next: polarnet run --config {out / 'config.json'}")


if __name__ == "__main__":
    main()

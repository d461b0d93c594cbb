"""Measure single-core event parsing throughput.

Usage: python scripts/bench_parse.py [--events 200000] [--input dump.jsonl]
"""

import argparse
import time
from pathlib import Path

from polarnet.ingest import parse_event
from polarnet.synthetic import make_event_stream


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--events", type=int, default=200_000)
    parser.add_argument("--input", help="measure a real dump instead of synthetic data")
    args = parser.parse_args()

    if args.input:
        lines = Path(args.input).read_text(encoding="utf-8").splitlines()
    else:
        lines, _ = make_event_stream(seed=3, n_events=args.events)

    start = time.perf_counter()
    for offset, line in enumerate(lines):
        parse_event(line, offset)
    elapsed = time.perf_counter() - start
    print(f"{len(lines):,} events in {elapsed:.2f}s "
          f"-> {len(lines) / elapsed:,.0f} events/second/core")


if __name__ == "__main__":
    main()

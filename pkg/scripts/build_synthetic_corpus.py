#!/usr/bin/env python3
"""Write a synthetic caption corpus with planted phrase frequencies.

Useful for exercising `vlpipe build-alignment` end to end:

    python scripts/build_synthetic_corpus.py --out corpus.jsonl
    vlpipe build-alignment --corpus corpus.jsonl --out alignment.jsonl
"""

import argparse
import json

PLANTS = {
    "red bicycle": 3,
    "old guitar": 5,
    "happy dog": 6,
    "small kitchen": 50,
    "young girl": 150,
}
VERBS = ["sits", "rests", "leans", "sleeps", "waits", "plays"]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="corpus.jsonl")
    parser.add_argument("--total", type=int, default=1000)
    args = parser.parse_args()

    rows = []
    idx = 0
    for phrase, count in PLANTS.items():
        for _ in range(count):
            rows.append((idx, f"{phrase} {VERBS[idx % len(VERBS)]} on zq{idx:05d}"))
            idx += 1
    while idx < args.total:
        rows.append((idx, f"xk{idx:05d} {VERBS[idx % len(VERBS)]} on zq{idx:05d}"))
        idx += 1

    with open(args.out, "w", encoding="utf-8") as fh:
        for i, caption in rows:
            fh.write(
                json.dumps(
                    {"id": f"c{i:05d}", "video": f"vid/{i:05d}.mp4", "caption": caption}
                )
                + "\n"
            )
    print(f"wrote {len(rows)} captions to {args.out} (planted: {PLANTS})")


if __name__ == "__main__":
    main()

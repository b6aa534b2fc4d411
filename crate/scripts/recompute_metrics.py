#!/usr/bin/env python3
"""Recompute metrics.csv from episodes.jsonl and compare with the written file.

usage: recompute_metrics.py OUT_DIR [OUT_DIR ...]

Each OUT_DIR holds the episodes.jsonl and metrics.csv written by one run.
Exits 1 if any recomputed row differs from the written one.
"""

import csv
import json
import sys
from pathlib import Path

HEADER = ["baseline", "success_rate_pct", "avg_steps_success", "pct_in_Su", "pct_in_Shat_u", "seed"]


def fmt(x):
    if x is None:
        return ""
    return repr(float(x))


def entered(ep, key):
    return ep[f"final_{key}"] or any(r[key] for r in ep["records"])


def recompute(episodes, seed):
    groups = {}
    for ep in episodes:
        if ep["phase"] == "eval":
            groups.setdefault(ep["baseline"], []).append(ep)
    rows = []
    for name, eps in groups.items():
        n = len(eps)
        steps = [e["steps_to_success"] for e in eps if e["steps_to_success"] is not None]
        pct = lambda c: 100 * c / n
        rows.append([
            name,
            fmt(pct(len(steps))),
            fmt(sum(steps) / len(steps) if steps else None),
            fmt(pct(sum(entered(e, "in_su") for e in eps))),
            fmt(pct(sum(entered(e, "in_shat") for e in eps))),
            str(seed),
        ])
    return rows


def check(out_dir):
    with open(out_dir / "metrics.csv", newline="") as f:
        written = list(csv.reader(f))
    if written[0] != HEADER:
        print(f"FAIL {out_dir}: header {written[0]}")
        return False
    seed = written[1][5] if len(written) > 1 else "0"
    with open(out_dir / "episodes.jsonl") as f:
        episodes = [json.loads(line) for line in f if line.strip()]
    expected = recompute(episodes, seed)
    ok = expected == written[1:]
    print(f"{'PASS' if ok else 'FAIL'} {out_dir}: {len(expected)} rows from {len(episodes)} episodes")
    if not ok:
        for a, b in zip(expected, written[1:]):
            if a != b:
                print(f"  recomputed {a}\n  written    {b}")
    return ok


def main():
    if len(sys.argv) < 2:
        print(__doc__.strip(), file=sys.stderr)
        return 2
    results = [check(Path(d)) for d in sys.argv[1:]]
    return 0 if all(results) else 1


if __name__ == "__main__":
    sys.exit(main())

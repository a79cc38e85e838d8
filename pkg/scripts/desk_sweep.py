#!/usr/bin/env python3
"""Run the desk-scale three-policy sweep (the Table-style experiment).

Writes per-run artifacts, finals.csv and summary.csv under the output
directory, prints the seed-mean summary table, and checks the expected
policy orderings. Snapshots are enabled so the report package can render
map figures afterwards:

    python scripts/desk_sweep.py -o out/desk_sweep --seeds 10 --jobs 2
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from igplan.runner import desk_scale_config, sweep


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-o", "--out", default="out/desk_sweep")
    ap.add_argument("--seeds", type=int, default=10, help="number of trial seeds (0..N-1)")
    ap.add_argument("--jobs", type=int, default=2)
    ap.add_argument("--snapshot-every", type=int, default=50)
    args = ap.parse_args()

    configs = [
        desk_scale_config(p, label=p, snapshot_every=args.snapshot_every)
        for p in ("lawnmower", "greedy", "rollout")
    ]
    t0 = time.time()
    result = sweep(configs, seeds=list(range(args.seeds)), out_dir=args.out, jobs=args.jobs)
    print(f"sweep finished in {time.time() - t0:.0f}s -> {args.out}")
    print(result.table_text())
    for label, seed, status in result.failures:
        print(f"FAILED {label} seed={seed}: {status}", file=sys.stderr)

    t = result.table
    checks = {
        "rollout best rho_class": t["rollout"]["rho_class"] > max(t["greedy"]["rho_class"], t["lawnmower"]["rho_class"]),
        "rollout best sjsd_class": t["rollout"]["sjsd_class"] < min(t["greedy"]["sjsd_class"], t["lawnmower"]["sjsd_class"]),
        "lawnmower highest coverage": t["lawnmower"]["pct_seen"] > max(t["greedy"]["pct_seen"], t["rollout"]["pct_seen"]),
        "rollout coverage >= greedy": t["rollout"]["pct_seen"] >= t["greedy"]["pct_seen"],
    }
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}: {name}")
    return 0 if all(checks.values()) and not result.failures else 1


if __name__ == "__main__":
    sys.exit(main())

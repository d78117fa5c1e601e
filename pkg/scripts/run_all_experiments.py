#!/usr/bin/env python3
"""Run the full experiment battery and drop reports under an output directory.

Calibrates the inequality constants first (if no store is given), then runs
every experiment in sequence and writes one CSV per experiment plus the
cumulative summary.

    python scripts/run_all_experiments.py --output-dir out/ [--calibration PATH]
"""

import argparse
import os
import sys
import time

from mhd2d.estimates import CalibrationStore
from mhd2d.ioutil import atomic_write_text
from mhd2d.verify import EXPERIMENTS, calibrate_constants

ORDER = [
    "identities",
    "mms",
    "picard",
    "tail",
    "basis-stability",
    "brezis-gallouet",
    "cd",
    "gronwall",
    "absorbing",
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--output-dir", default="out")
    ap.add_argument("--calibration", default=None, help="existing calibration store")
    ap.add_argument("--skip", default="", help="comma-separated experiment ids to skip")
    args = ap.parse_args()
    os.makedirs(args.output_dir, exist_ok=True)

    if args.calibration and os.path.exists(args.calibration):
        store = CalibrationStore.read(args.calibration)
        print(f"loaded calibration from {args.calibration}")
    else:
        t0 = time.time()
        store = calibrate_constants()
        path = os.path.join(args.output_dir, "calibration.txt")
        store.write(path)
        print(f"calibrated {len(store.values)} constants in {time.time() - t0:.0f}s -> {path}")

    skip = {s.strip() for s in args.skip.split(",") if s.strip()}
    summary = ["experiment,assertion,paper_ref,measured,tolerance,pass"]
    all_ok = True
    for name in ORDER:
        if name in skip:
            continue
        rep = EXPERIMENTS[name](store)
        rep.write(os.path.join(args.output_dir, f"report_{name}.csv"))
        summary.extend(rep.to_csv_text().splitlines()[1:])
        status = "pass" if rep.passed else "FAIL"
        print(f"{name:<18} {status}  ({rep.runtime_s:.1f}s)")
        for a in rep.assertions:
            print(f"    {a.assertion_id:<28} measured={a.measured:.5g} tol={a.tolerance:.5g}")
        all_ok &= rep.passed
    atomic_write_text(os.path.join(args.output_dir, "summary.csv"), "\n".join(summary) + "\n")
    return 0 if all_ok else 4


if __name__ == "__main__":
    sys.exit(main())

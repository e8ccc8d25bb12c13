#!/usr/bin/env python3
"""Generic preprocessing from a raw numeric CSV into the package's format.

Dataset-specific cleanup stays out of the library; this script covers the
recurring steps: drop columns, binarize the protected (and optional outcome)
column against a designated positive value, and deterministically subsample.
Categorical features are assumed to be numerically encoded already; any
remaining non-numeric feature cell is an error.

Example:
    python scripts/prepare_dataset.py --in raw.csv --out clean.csv \
        --protected sex --positive-value Male \
        --outcome income --outcome-positive ">50K" \
        --drop fnlwgt,race --subsample 0.05 --seed 0
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--in", dest="src", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--protected", required=True, help="protected attribute column")
    parser.add_argument("--positive-value", required=True,
                        help="protected value mapped to 1 (others map to 0)")
    parser.add_argument("--outcome", help="optional outcome column")
    parser.add_argument("--outcome-positive", help="outcome value mapped to 1")
    parser.add_argument("--drop", default="", help="comma-separated columns to drop")
    parser.add_argument("--subsample", type=float, default=1.0,
                        help="keep this fraction of rows (deterministic given --seed)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if not 0.0 < args.subsample <= 1.0:
        parser.error("--subsample must lie in (0, 1]")
    if args.outcome and args.outcome_positive is None:
        parser.error("--outcome-positive is required with --outcome")

    drop = {c.strip() for c in args.drop.split(",") if c.strip()}
    with open(args.src, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        records = [row for row in reader if row]

    for name in (args.protected, *((args.outcome,) if args.outcome else ())):
        if name not in header:
            print(f"error: column '{name}' not in {args.src}", file=sys.stderr)
            return 1

    if args.subsample < 1.0:
        rng = np.random.Generator(np.random.Philox(args.seed))
        keep = max(1, int(round(args.subsample * len(records))))
        chosen = np.sort(rng.permutation(len(records))[:keep])
        records = [records[i] for i in chosen]

    special = {args.protected} | ({args.outcome} if args.outcome else set())
    feature_idx = [
        j for j, name in enumerate(header) if name not in drop | special
    ]
    out_header = [header[j] for j in feature_idx] + [args.protected]
    if args.outcome:
        out_header.append(args.outcome)

    prot_j = header.index(args.protected)
    out_j = header.index(args.outcome) if args.outcome else None
    out_path = Path(args.out)
    with out_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(out_header)
        for i, row in enumerate(records, start=2):
            cells = []
            for j in feature_idx:
                try:
                    cells.append(repr(float(row[j])))
                except ValueError:
                    print(
                        f"error: row {i}, column '{header[j]}': non-numeric cell "
                        f"{row[j]!r} (encode categoricals first)",
                        file=sys.stderr,
                    )
                    return 1
            cells.append("1" if row[prot_j].strip() == args.positive_value else "0")
            if out_j is not None:
                cells.append("1" if row[out_j].strip() == args.outcome_positive else "0")
            writer.writerow(cells)

    print(f"wrote {len(records)} rows, {len(feature_idx)} features to {out_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

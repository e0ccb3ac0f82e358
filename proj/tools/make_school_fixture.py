#!/usr/bin/env python3
"""Synthetic cluster-randomized school dataset: 49 schools in two zones, 25
treated, 400 students. Each school is linked to two other schools so that its
exposure cell is fixed by construction; outcomes are placed to give cell means
of 0.14, 0.22, 0.23 and 0.53.

Usage: make_school_fixture.py OUTDIR
"""

import csv
import json
import sys
from pathlib import Path

# (w, x, school sizes, ones)
CELLS = [
    (1, 1, [10] * 10, 14),
    (1, 0, [10] * 10, 22),
    (0, 1, [7] * 10 + [6] * 5, 23),
    (0, 0, [7] * 12 + [8] * 2, 53),
]


def build():
    schools = []  # (w, x, size)
    for w, x, sizes, _ in CELLS:
        schools += [(w, x, s) for s in sizes]
    treated = [k for k, (_, x, _) in enumerate(schools) if x == 1]
    control = [k for k, (_, x, _) in enumerate(schools) if x == 0]

    members = []
    next_id = 0
    for _, _, size in schools:
        members.append([f"s{next_id + m:04d}" for m in range(size)])
        next_id += size

    units = []
    for (w, x, sizes, ones), start in zip(CELLS, (0, 10, 20, 35)):
        cell_students = [sid for k in range(start, start + len(sizes)) for sid in members[k]]
        for rank, sid in enumerate(cell_students):
            k = next(k for k in range(start, start + len(sizes)) if sid in members[k])
            units.append((sid, x, int(rank < ones), f"zone{k % 2 + 1}", f"school{k:02d}"))

    edges = []
    for k, (w, _, _) in enumerate(schools):
        pool = [j for j in (treated if w == 1 else control) if j != k]
        picks = [pool[(k + t) % len(pool)] for t in (0, 1)]
        for j in picks:
            for a in members[k]:
                for b in members[j]:
                    edges.append((a, b))
    return units, edges


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)
    units, edges = build()
    with open(out / "schools_units.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["id", "treatment", "outcome", "stratum", "cluster"])
        w.writerows(units)
    with open(out / "schools_edges.csv", "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["src", "dst"])
        w.writerows(edges)
    config = {
        "design": {"kind": "cluster"},
        "exposure": {"mode": "fraction", "threshold": 0.5},
        "positivity_floor": 0.0,
        "alphas": [0.05],
        "seed": 7,
    }
    with open(out / "schools_config.json", "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")


if __name__ == "__main__":
    main()

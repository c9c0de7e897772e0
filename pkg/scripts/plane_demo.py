"""Place algorithms on the perception-distortion plane.

Reads ``name,distortion,perception`` records (the four-point fixture by
default), prints the admissible set and writes an SVG scatter and a table.

    python3 scripts/plane_demo.py --records scripts/data/records.csv --out-dir out/plane
"""

import argparse
from pathlib import Path

from pdtradeoff.plane import (admissible_set, emit_scatter, emit_table, four_point_fixture,
                              pareto_front, read_records)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--records", help="CSV of scores (default: built-in fixture)")
    ap.add_argument("--out-dir", default="out/plane")
    ap.add_argument("--weak", action="store_true")
    args = ap.parse_args()
    recs = read_records(args.records) if args.records else four_point_fixture()
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    adm = admissible_set(recs, weak=args.weak)
    print("admissible:", ", ".join(r.name for r in adm))
    print("front:", " -> ".join(f"{r.name}({r.distortion:g}, {r.perception:g})"
                                for r in pareto_front(recs)))
    emit_scatter(recs, path=out / "plane.svg", title="perception-distortion plane")
    emit_table(recs, path=out / "plane.csv")
    print(f"wrote {out / 'plane.svg'} and {out / 'plane.csv'}")


if __name__ == "__main__":
    main()

"""Regenerate the regime tables and the D0 list into a directory (default: tests/golden)."""

import argparse
from pathlib import Path

from warpcurv import tables

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=ROOT / "tests" / "golden")
    ap.add_argument("--format", choices=("csv", "md"), default="csv")
    ap.add_argument("--check", action="store_true", help="compare with existing files instead of writing")
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    stale = []
    for which in tables.TABLE_IDS:
        text = tables.render(which, args.format)
        path = args.out / f"table{which}.{args.format}"
        if args.check:
            if not path.exists() or path.read_text() != text:
                stale.append(path.name)
            continue
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {path}")
    if args.check:
        print("stale: " + ", ".join(stale) if stale else "all tables match")
        raise SystemExit(1 if stale else 0)


if __name__ == "__main__":
    main()

"""Regenerate the bundled synthetic instance files."""

import argparse
from pathlib import Path

from odmts.synthetic import write_synthetic

DEFAULT = Path(__file__).resolve().parents[1] / "src" / "odmts" / "data" / "synthetic"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT)
    args = ap.parse_args()
    write_synthetic(args.out)
    print(f"wrote {args.out}")

"""Weak-annotation protocol: keep a random fraction of instances per image.

Writes one annotation JSON per keep fraction (defaults to 20/30/40/60/80/100%)
for every input file.

    python scripts/weak_protocol.py ann/*.json --out-dir weak/ --seed 0
"""

import argparse
from pathlib import Path

from frg.dataset import KEEP_FRACTIONS, WeakenConfig, weaken_annotations
from frg.formats import load_annotations, save_annotations


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("annotations", nargs="+")
    ap.add_argument("--out-dir", required=True)
    ap.add_argument("--seed", type=int, required=True)
    ap.add_argument("--keep", type=float, nargs="+", default=list(KEEP_FRACTIONS))
    args = ap.parse_args()

    for frac in args.keep:
        out_dir = Path(args.out_dir) / f"keep{round(frac * 100):03d}"
        out_dir.mkdir(parents=True, exist_ok=True)
        total = kept = 0
        for path in args.annotations:
            ann = load_annotations(path)
            if not len(ann):
                continue
            weak = weaken_annotations(ann, WeakenConfig(frac, args.seed))
            save_annotations(out_dir / Path(path).name, weak)
            total += len(ann)
            kept += len(weak)
        print(f"keep={frac:.2f}: {kept}/{total} instances -> {out_dir}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Write a small directory of synthetic low/normal PNG pairs.

Used by the frontend's end-to-end suite (and handy for demos):
    python3 scripts/make_fixture_pairs.py OUT_DIR [N_PAIRS] [SEED]
"""

import sys
from pathlib import Path

import numpy as np

from clfm.imgcore import write_png
from clfm.synthetic import make_pair


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__, file=sys.stderr)
        return 1
    out = Path(sys.argv[1])
    n_pairs = int(sys.argv[2]) if len(sys.argv) > 2 else 3
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 2024
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    for i in range(n_pairs):
        low, normal = make_pair(rng, size=64)
        write_png(low, out / f"pair{i}_low.png")
        write_png(normal, out / f"pair{i}_normal.png")
    print(f"wrote {n_pairs} pairs to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

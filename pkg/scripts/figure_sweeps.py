"""Critical-period sweeps over (a, b) at lambda = 2 and over lambda, as CSV and SVG.

    python3 scripts/figure_sweeps.py [--outdir results]
"""

import argparse
import sys
from pathlib import Path

from persistlab.cli import main as cli


def run(argv):
    code = cli(argv)
    if code:
        sys.exit(code)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--points", type=int, default=20)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    grid = out / "tc_grid.csv"
    run(["tc-grid", "--lambda", "2", "--a-min", "1e-6", "--a-max", "1e-3", "--b-min", "1e-6",
         "--b-max", "1e-3", "--points", str(args.points), "--out", str(grid)])
    run(["plot", str(grid)])
    lam = out / "tc_lambda.csv"
    run(["tc-lambda", "--a", "1e-6", "--b", "1e-3", "--lambda-min", "0.5", "--lambda-max", "10",
         "--points", "40", "--out", str(lam)])
    run(["plot", str(lam)])
    mp = out / "mprime.csv"
    run(["mprime", "--delta-min", "0.1", "--delta-max", "50", "--points", "60", "--out", str(mp)])
    run(["plot", str(mp)])
    print(next(ln for ln in grid.read_text().splitlines() if ln.startswith("# summary:")))
    print(f"wrote {grid}, {lam}, {mp} and their .svg renderings")


if __name__ == "__main__":
    main()

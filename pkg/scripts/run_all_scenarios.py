"""Run every bundled scenario and print one status line per file.

    python3 scripts/run_all_scenarios.py --out runs/
"""

import argparse
import time
from pathlib import Path

from phiblab.cli import run_scenario

ROOT = Path(__file__).resolve().parent.parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenarios", default=str(ROOT / "scenarios"))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    for f in sorted(Path(args.scenarios).glob("*.cfg")):
        t0 = time.perf_counter()
        code, rep = run_scenario(f, Path(args.out) / f.stem, args.threads)
        err = rep.get("error") or {}
        print(f"{f.name:28s} exit {code}  {rep.get('status')!s:10s} {err.get('code', ''):24s} "
              f"{time.perf_counter() - t0:6.1f} s", flush=True)


if __name__ == "__main__":
    main()

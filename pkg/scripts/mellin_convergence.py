"""Deviation of the Mellin identity under mesh doubling for catalog models.

    python3 scripts/mellin_convergence.py --Ms 128 256 512 1024 2048
"""

import argparse

from phiblab.catalog import make_model
from phiblab.checks import mellin_convergence

MODELS = [("scalar", {"a": 0.3}), ("D", {"a": 0.3}), ("laplace", {"c": 1.0}),
          ("sum", {"components": [{"name": "D", "a": 0.3}, {"name": "laplace", "c": 1.0}]})]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--Ms", nargs="+", type=int, default=[256, 512, 1024])
    ap.add_argument("--T", type=float, default=20.0)
    args = ap.parse_args()
    for name, kw in MODELS:
        res = mellin_convergence(make_model(name, **kw).operator(), tuple(args.Ms), args.T)
        print(name)
        for M, dev, order in zip(res["M"], res["deviation"], [None] + res["orders"]):
            print(f"  M {M:5d}  deviation {dev:.3e}" + ("" if order is None else f"  order {order:.2f}"))


if __name__ == "__main__":
    main()

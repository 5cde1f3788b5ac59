"""Singular data of the finite section under (T, M) doubling at, near and away from a root.

    python3 scripts/fredholm_signature.py laplace '{"c": 1.0}' --betas 0.5 1.0001 1.01 --doublings 2
"""

import argparse
import json

from phiblab.catalog import make_model
from phiblab.index_engine import Discretization, fredholm_signature


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("model")
    ap.add_argument("params", nargs="?", default="{}")
    ap.add_argument("--betas", nargs="+", type=float, required=True)
    ap.add_argument("--doublings", type=int, default=2)
    ap.add_argument("--T", type=float, default=400.0)
    ap.add_argument("--M", type=int, default=128)
    ap.add_argument("--N", type=int, default=6)
    args = ap.parse_args()
    P = make_model(args.model, **json.loads(args.params)).operator()
    d = Discretization(T=args.T, M=args.M, N=args.N)
    print(f"{'beta':>10s} {'T':>7s} {'M':>5s} {'sigma_min':>10s} {'sigma_gap':>10s} {'gap*T':>8s}"
          f" {'ratio':>7s} {'margin':>9s}")
    for beta in args.betas:
        prev = None
        for r in fredholm_signature(P, beta, d, args.doublings):
            ratio = "" if prev is None else f"{prev / r.sigma_gap:7.2f}"
            print(f"{beta:10.5f} {r.T:7.0f} {r.M:5d} {r.sigma_min:10.2e} {r.sigma_gap:10.3e}"
                  f" {r.sigma_gap * r.T:8.3f} {ratio:>7s} {min(r.margin, 1e300):9.2e}", flush=True)
            prev = r.sigma_gap


if __name__ == "__main__":
    main()

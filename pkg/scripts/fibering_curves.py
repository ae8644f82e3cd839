#!/usr/bin/env python3
"""Emit the ray-energy and auxiliary-map curves of a random state to CSV.

The output shows the characteristic two-stationary-point shape of phi and
the unimodal shape of Psi with its maximum at the closed-form t_max.
"""
import argparse

import numpy as np

import nehari_frac as nf
from nehari_frac.fibering import sample_curves


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="curves.csv")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--m", type=int, default=12)
    ap.add_argument("--lam", type=float, default=3.56)
    ap.add_argument("--samples", type=int, default=2000)
    args = ap.parse_args()

    params = nf.ModelParams(n=2, p=2.0, s=0.4, q=1.8, alpha=5 / 3, beta=5 / 3,
                            lam=args.lam, mu=args.lam)
    dom = nf.build_grid(2, args.m, 1.0, 1.0, params)
    rng = np.random.default_rng(args.seed)
    pair = nf.FieldPair(
        nf.Field(np.abs(rng.standard_normal(dom.n_interior)) + 1e-3),
        nf.Field(np.abs(rng.standard_normal(dom.n_interior)) + 1e-3),
    )
    rep = nf.project(params, dom, pair)
    print(f"outcome: {rep.outcome}  t1={rep.t1}  t_max={rep.t_max}  t2={rep.t2}")
    rows = sample_curves(rep.triple, params, rep.t1 / 10.0, 3.0 * rep.t2, args.samples)
    with open(args.out, "w") as f:
        f.write("t,phi,phi_prime,phi_second,psi\n")
        for row in rows:
            f.write(",".join(repr(x) for x in row) + "\n")
    print(f"wrote {args.out} ({args.samples} samples)")


if __name__ == "__main__":
    main()

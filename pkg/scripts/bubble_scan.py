#!/usr/bin/env python3
"""Asymptotic scans of the truncated bubble: norm trends and ray maxima.

Runs the resolved (quadrature) norm scan to fit the excess/deficit trend
exponents, then the lattice sup-energy scan with c_infty comparison.
"""
import argparse

import nehari_frac as nf


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--m", type=int, default=12)
    ap.add_argument("--lam", type=float, default=6.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    params = nf.ModelParams(n=2, p=2.0, s=0.4, q=1.8, alpha=5 / 3, beta=5 / 3)
    dom = nf.build_grid(2, args.m, 1.0, 1.0, params)
    s_d, _, s_ab, _ = nf.compute_S_coupled(dom, params, seed=args.seed)
    delta = dom.box_length / 4.0
    eps_list = [delta / 4, delta / 8, delta / 16, delta / 32]

    scan = nf.norm_estimate_scan(dom, params, delta, 2.0, eps_list, s_ref=s_d, method="quadrature")
    print("resolved norm scan (quadrature route):")
    print(f"  references: seminorm^p -> {scan.sem_reference:.6f}, L^p* -> {scan.lp_reference:.6f}")
    for row in scan.rows:
        print(f"  eps/delta=1/{delta / row.eps:4.0f}: excess={row.excess:.6f} deficit={row.deficit:.6f}")
    print(f"  fitted slopes: excess {scan.excess_slope:.3f} (predicted {scan.excess_slope_predicted}), "
          f"deficit {scan.deficit_slope:.3f} (predicted {scan.deficit_slope_predicted})")

    rows = nf.sup_energy_scan(dom, params, delta, 2.0, eps_list, args.lam, args.lam, s_d, s_ab)
    print(f"\nsup-energy scan at lam = mu = {args.lam} (lattice route):")
    for r in rows:
        print(f"  eps/delta=1/{delta / r.eps:4.0f}: t*={r.t_star:.4f} sup={r.sup_full:.4f} "
              f"c_infty={r.c_infty:.4f} below={r.below_c_infty} [{r.q_regime}]")


if __name__ == "__main__":
    main()

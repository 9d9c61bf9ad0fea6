"""Report how far the mean-field JC model drifts from exact Fock-space dynamics.

For each initial amplitude the script prints the largest |P_e| difference
over gt in [0, 10] and the Fock truncation used.
"""

import argparse

import numpy as np

from ionwave.experiments import JC_ONLY, run_single_ion
from ionwave.oracle import FockConfig, fock_single_ion


def gap(alpha: float, gt_max: float, samples: int) -> tuple[float, int]:
    semi = run_single_ion(JC_ONLY, alpha=alpha, gt_max=gt_max, samples=samples)
    cfg = FockConfig(alpha=alpha)
    exact = fock_single_ion(cfg, 1.0, 0.0, (0.0, gt_max), semi.series.times)
    return float(np.max(np.abs(exact["P_e"] - semi.series["P_e"]))), cfg.resolved_dim()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alphas", type=float, nargs="+", default=[0.5, 1.0, 2.0, 3.0, 5.0])
    ap.add_argument("--gt-max", type=float, default=10.0)
    ap.add_argument("--samples", type=int, default=1001)
    args = ap.parse_args()
    print("alpha,fock_dim,max_abs_gap")
    for a in args.alphas:
        g, dim = gap(a, args.gt_max, args.samples)
        print(f"{a:g},{dim},{g:.6f}")


if __name__ == "__main__":
    main()

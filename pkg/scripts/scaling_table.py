#!/usr/bin/env python3
"""Print kappa-scaling exponents of the squared Green diagonal and the
off-diagonal decay rates, for a quick look outside the test suite."""

import argparse

from gibbslab.counterterm import decay_rate, kernel_scaling_check


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--kappas", default="100,200,400,800,1600")
    args = ap.parse_args()
    kappas = [float(k) for k in args.kappas.split(",")]
    print("d  alpha  slope    expected  R2")
    for d in (1, 2, 3):
        for alpha in (0.0, 1.5):
            f = kernel_scaling_check(d, kappas, alpha=alpha)
            print(f"{d}  {alpha:4.1f}  {f.slope:7.4f}  {f.expected:6.2f}    {f.r2:.6f}")
    print("\nd  kappa   rate/sqrt(kappa)")
    for d in (1, 2):
        for kappa in (25.0, 100.0, 400.0):
            print(f"{d}  {kappa:6.0f}  {decay_rate(d, kappa).rate_over_sqrt_kappa:.3f}")


if __name__ == "__main__":
    main()

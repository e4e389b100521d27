"""Oscillator lifts x^n against the pure-area rough path: distances and solve gaps."""
import argparse

import numpy as np

from roughflow import path_lift as pl
from roughflow.rde import solver as S
from roughflow.rde.fields import VectorFieldSet


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--ns", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--per-winding", type=int, default=64, help="grid points per winding")
    args = ap.parse_args()

    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0, 0.0], [1.0, 0.0]])
    F = VectorFieldSet.linear([A, B])
    x0 = np.array([1.0, 0.5])
    out = np.linspace(0, 1, 17)
    print("n,distance,solve_gap")
    for n in args.ns:
        steps = args.per_winding * n * n
        Z = pl.pure_area(1.0, steps)
        X = pl.signature(pl.oscillator_path(n, steps), N=2, p=2.5)
        a = S.solve_path(F, X, x0, out).values
        b = S.solve_path(F, Z, x0, out).values
        print(f"{n},{pl.distance(X, Z):.6f},{np.max(np.abs(a - b)):.6e}")


if __name__ == "__main__":
    main()

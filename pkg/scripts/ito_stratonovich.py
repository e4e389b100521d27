"""dx = x dB with Ito and Stratonovich lifts against exp(B_T - T/2) x0 and exp(B_T) x0."""
import argparse
import math

from roughflow import brownian as bm
from roughflow.rde import solver as S
from roughflow.rde.fields import VectorFieldSet


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--depth", type=int, default=12)
    args = ap.parse_args()

    F = VectorFieldSet.from_text(1, [["x1"]])
    x0 = 1.0
    print("seed,B_T,ito_error,stratonovich_error")
    for seed in range(args.seeds):
        s = bm.sample(1, args.depth, 1.0, seed)
        strat = bm.stratonovich_lift(s)
        zi = S.solve_path(F, bm.ito_lift(strat), [x0]).values[-1, 0]
        zs = S.solve_path(F, strat, [x0]).values[-1, 0]
        b = s.values[-1, 0]
        print(f"{seed},{b:.6f},{abs(zi - math.exp(b - 0.5) * x0):.3e},{abs(zs - math.exp(b) * x0):.3e}")


if __name__ == "__main__":
    main()

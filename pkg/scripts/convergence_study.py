"""Error of the FD oracle against known curvature as h halves, at orders 2 and 4.

Two cases with exact answers: the unit sphere (S = 2) and the Schwarzschild
nested product (Ric = 0).  Prints error and the ratio to the previous h.
"""

import argparse

import numpy as np

from warpcurv import geometry as geo
from warpcurv.einstein import nested_bcwp_check
from warpcurv.geometry import ChartGrid, MetricField


def sphere_error(h, order):
    grid = ChartGrid.centered(["th", "ph"], [1.2, 0.0], h, 13)
    g = MetricField.diagonal(grid, [1.0, lambda th, ph: np.sin(th) ** 2])
    s = geo.scalar_curvature(g, order)
    mask = s.mask & grid.interior(2 * geo.stencil_radius(order))
    return float(np.max(np.abs(s.values - 2.0)[mask]))


def schwarzschild_error(h, order):
    return nested_bcwp_check(M=1.0, radii=(4.0,), h=h, count=13, order=order).max_ricci


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--h0", type=float, default=0.08)
    args = ap.parse_args()
    print("case,order,h,error,ratio")
    for name, fn in (("sphere", sphere_error), ("schwarzschild", schwarzschild_error)):
        for order in (2, 4):
            prev = None
            for i in range(args.levels):
                h = args.h0 / 2 ** i
                err = fn(h, order)
                ratio = "" if prev is None or err == 0 else f"{prev / err:.2f}"
                print(f"{name},{order},{h:g},{err:.3e},{ratio}")
                prev = err


if __name__ == "__main__":
    main()

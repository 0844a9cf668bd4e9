"""Time scan of the +K / -K annulus experiment at low and high temperature.

At short times the evolved measure is certified Gibbs.  At long times and low
temperature the origin still feels the annulus through the hidden spins, and
the gap does not shrink as the untouched core grows.
"""
import math

import numpy as np

from dwgibbs import ModelParams
from dwgibbs.badconfig import gibbs_scan
from dwgibbs.evolution import DynamicsParams


def show(name, params, grid):
    res = gibbs_scan(params, grid, K=10.0, V0_sides=(3, 5, 7), mc_budget=20_000)
    print(f"\n{name}: q = {params.q}, rho2 = {params.rho2}")
    for pt in res.points:
        gaps = "  ".join(f"V0={int(round(g.V0_size ** 0.5))}: {g.gap:.3f}+-{g.std_error:.3f}" for g in pt.gaps)
        print(f"  t = {pt.t:6.3f}  s = {pt.s:9.3f}  {pt.label:<16} {gaps}")
    print(f"  bracket: certified up to t0 = {res.t0}, gap persists from t1 = {res.t1}")


def main():
    grid = [DynamicsParams.ou(t) for t in np.geomspace(0.01, math.log(1001.0), 6)]
    show("high temperature", ModelParams(0.1, 0.5), grid)
    show("low temperature", ModelParams(1.0, 0.1), grid)


if __name__ == "__main__":
    main()

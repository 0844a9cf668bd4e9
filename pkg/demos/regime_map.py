"""Regime classification and Dobrushin constants over a (q, rho2) grid in d = 2."""
import numpy as np

from dwgibbs import ModelParams, classify_regime, natural_params
from dwgibbs.dobrushin import CertificateError, dobrushin_constant


def main():
    qs = np.array([0.05, 0.1, 0.2, 0.5, 1.0, 2.0])
    rho2s = np.array([0.05, 0.1, 0.25, 0.5, 1.0])
    print("rows: rho2, columns: q;  H = high-temp unique, L = low-temp ordered, ? = neither")
    print("       " + " ".join(f"{q:>6g}" for q in qs))
    for r2 in rho2s:
        cells = []
        for q in qs:
            rep = classify_regime(ModelParams(q, r2), 2)
            try:
                c = f"{dobrushin_constant(natural_params(ModelParams(q, r2), 2)):.2f}"
            except CertificateError:
                c = "--"
            cells.append(f"{rep.regime[0] if rep.regime != 'Indeterminate' else '?'}{c:>5}")
        print(f"{r2:>6g} " + " ".join(cells))
    print("\nthe number is the Dobrushin constant bound (-- when the Neumann series diverges)")


if __name__ == "__main__":
    main()

"""Halving ladder on (sigma_plus, epsilon) with lambda doubled per level.

Prints the table and the Richardson-extrapolated peak error.

    python3 scripts/convergence_sweep.py --levels 4 --grid-n 1024
"""

import argparse

from meanking import protocol as P


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phi", type=float, default=0.7)
    ap.add_argument("--levels", type=int, default=4)
    ap.add_argument("--grid-n", type=int, default=1024)
    ap.add_argument("--grid-l", type=float, default=40.0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    ladder = P.halving_ladder((0.4, 1.25, 0.8), args.levels)
    table = P.run_convergence_sweep(P.DEFAULT_SELECTION, args.phi, ladder, n=args.grid_n,
                                    l=args.grid_l, workers=args.workers)
    print(f"X_phi = {table.prediction:.9f} at phi = {table.phi}")
    print(f"{'sigma+':>8} {'lambda':>8} {'eps':>7} {'peak error':>12} {'width':>9}")
    for lv in table.levels:
        print(f"{lv.sigma_plus:8.4f} {lv.lam:8.3f} {lv.epsilon:7.4f} {lv.peak_error:12.3e} {lv.width:9.6f}")
    if table.notice:
        print(table.notice)
    print(f"Richardson order {table.richardson_order}: extrapolated peak error "
          f"{table.extrapolated_peak_error:.3e}; verdict {'PASS' if table.verdict.passed else 'FAIL'}")


if __name__ == "__main__":
    main()

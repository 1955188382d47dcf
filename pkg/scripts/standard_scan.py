"""Standard game over the angles k pi / count, one line per angle.

    python3 scripts/standard_scan.py --count 16
"""

import argparse
import time

import numpy as np

from meanking import protocol as P


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--count", type=int, default=16)
    ap.add_argument("--sigma", type=float, default=0.05)
    ap.add_argument("--lambda", dest="lam", type=float, default=10.0)
    ap.add_argument("--epsilon", type=float, default=0.1)
    args = ap.parse_args()
    numerics = P.Numerics(sigma_plus=args.sigma, lam=args.lam, epsilon=args.epsilon)
    start = time.perf_counter()
    records = P.standard_scan(P.DEFAULT_SELECTION, numerics, count=args.count)
    print(f"{'phi':>8} {'X_phi':>10} {'peak':>10} {'|error|':>10} {'width':>8}  verdict")
    for r in records:
        err = abs(r.peak[0] - r.prediction[0])
        print(f"{r.angles[0]:8.4f} {r.prediction[0]:10.6f} {r.peak[0]:10.6f} {err:10.2e} "
              f"{r.width[0]:8.5f}  {'PASS' if r.verdict.passed else 'FAIL'}")
    worst = max(abs(r.peak[0] - r.prediction[0]) for r in records)
    print(f"worst peak error {worst:.3e} (grid spacing {numerics.grid().dx}); "
          f"{time.perf_counter() - start:.1f}s; all pass: {all(r.verdict.passed for r in records)}")
    widths = np.array([r.width[0] for r in records])
    oracle = np.array([r.extras["oracle_width"] for r in records])
    print(f"grid width {widths.min():.6f} to {widths.max():.6f}; "
          f"closed-form width {oracle.min():.6f} to {oracle.max():.6f}")


if __name__ == "__main__":
    main()

"""Joint smallest covariance eigenvalue for particle 1 and ancilla quadratures.

For equal pointer widths w the eigenvalues are w^2 + q^2 / w^2 with
q = |sin(phi + phi')| / 4, so no joint measurement gets below 2 q.

    python3 scripts/contextuality_ladder.py --phi 0.785 --phi-prime 0.785
"""

import argparse
import math

from meanking import oracle as O
from meanking import protocol as P


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phi", type=float, default=math.pi / 4)
    ap.add_argument("--phi-prime", type=float, default=math.pi / 4)
    ap.add_argument("--width", type=float, default=0.1)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    rec = P.run_contextuality(P.DEFAULT_SELECTION, args.phi, args.phi_prime,
                              O.PointerConfig((args.width, args.width)), O.Regularization(1e-4, 1e4),
                              ladder_levels=args.levels)
    print(f"single-sided means {rec.peak[0]:.9f}, {rec.peak[1]:.9f}; predictions "
          f"{rec.prediction[0]:.9f}, {rec.prediction[1]:.9f}")
    for s, lam in zip(rec.extras["ladder_scales"], rec.extras["ladder_min_eigenvalues"]):
        print(f"width {args.width * s:8.4f}: smallest joint eigenvalue {lam:.6f}")
    bound = abs(math.sin(args.phi + args.phi_prime)) / 2
    print(f"floor {rec.extras['floor']:.6f}, analytic equal-width bound {bound:.6f}; "
          f"verdict {'PASS' if rec.verdict.passed else 'FAIL'}")


if __name__ == "__main__":
    main()

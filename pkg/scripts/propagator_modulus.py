"""Modulus of <xi'| R(dphi) |xi> between band-limited position states.

Mutually unbiased quadrature bases give a modulus independent of xi and
xi'; the script reports its spread over the central half of the default
grid and the exact value (2 pi |sin dphi|)^(-1/2).

    python3 scripts/propagator_modulus.py
"""

import math

from meanking import grid as G


def main() -> None:
    aux = G.make_grid(2048, 113.0)
    default = G.make_grid(512, 40.0)
    points = default.x_values[default.n // 4:3 * default.n // 4:4]
    for dphi in (math.pi / 6, math.pi / 4, math.pi / 3, math.pi / 2):
        mod = G.propagator_modulus(aux, dphi, points)
        exact = (2 * math.pi * abs(math.sin(dphi))) ** -0.5
        spread = (mod.max() - mod.min()) / mod.mean()
        print(f"dphi = {dphi:.4f}: mean modulus {mod.mean():.6f} (exact {exact:.6f}), "
              f"relative variation {spread:.2e}")


if __name__ == "__main__":
    main()

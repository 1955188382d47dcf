"""Selections, phase points, quadrature predictions and the commutator matrix.

Everything here is closed-form arithmetic on plain floats.  Units are
hbar = 1 with [x, p] = i, and a quadrature at angle ``phi`` is
``X_phi = x cos(phi) + p sin(phi)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


def _require_finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise ConfigurationError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class ProtocolSelection:
    """The four collective eigenvalues fixing one run of the game.

    Alice preselects the pair (x_plus, p_minus) and postselects the pair
    (x_minus, p_plus), where x_plus = (x + x')/2, p_minus = (p - p')/2,
    x_minus = x - x' and p_plus = p + p'.
    """

    x_plus: float
    p_minus: float
    x_minus: float
    p_plus: float

    def __post_init__(self) -> None:
        for name in ("x_plus", "p_minus", "x_minus", "p_plus"):
            object.__setattr__(self, name, float(getattr(self, name)))
        _require_finite(x_plus=self.x_plus, p_minus=self.p_minus,
                        x_minus=self.x_minus, p_plus=self.p_plus)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_plus, self.p_minus, self.x_minus, self.p_plus)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "p", float(self.p))
        _require_finite(x=self.x, p=self.p)


@dataclass(frozen=True)
class QuadraturePrediction:
    phi: float
    x_phi: float
    y_phi: float


@dataclass(frozen=True)
class CommutatorMatrix:
    angles: tuple[float, ...]
    c: np.ndarray


def derive_phase_points(sel: ProtocolSelection) -> tuple[PhasePoint, PhasePoint]:
    """Phase-space points of particle 1 and of the ancilla implied by ``sel``."""
    first = PhasePoint(sel.x_plus + sel.x_minus / 2, sel.p_minus + sel.p_plus / 2)
    second = PhasePoint(sel.x_plus - sel.x_minus / 2, sel.p_plus / 2 - sel.p_minus)
    return first, second


def predict_quadratures(pt: PhasePoint, phi: float) -> QuadraturePrediction:
    """Rotate ``pt`` into the frame of the quadrature pair (X_phi, Y_phi)."""
    c, s = math.cos(phi), math.sin(phi)
    return QuadraturePrediction(float(phi), pt.x * c + pt.p * s, pt.p * c - pt.x * s)


def gamma_phase(sel: ProtocolSelection) -> float:
    """The phase x_plus p_plus - x_minus p_minus reduced into (-pi, pi]."""
    g = sel.x_plus * sel.p_plus - sel.x_minus * sel.p_minus
    r = math.remainder(g, 2 * math.pi)
    return math.pi if r == -math.pi else r


def commutator_matrix(angles) -> CommutatorMatrix:
    """Matrix C_ij = i[X_i, X_j] = sin(phi_i - phi_j) for the given angles."""
    ang = np.asarray(list(angles), dtype=float).reshape(-1)
    if ang.size == 0:
        raise ConfigurationError("a simultaneous measurement needs at least one angle")
    if not np.all(np.isfinite(ang)):
        raise ConfigurationError("angles must be finite")
    c = np.sin(ang[:, None] - ang[None, :])
    # sin is odd, so only rounding can break antisymmetry; enforce it exactly.
    c = 0.5 * (c - c.T)
    return CommutatorMatrix(tuple(float(a) for a in ang), c)

"""Experiments: the standard game, the conjunctive game, sweeps and contextuality.

Each run returns an immutable :class:`GameRecord` whose checks can be
recomputed from its stored distribution and prediction.  The only random
quantity is the king's angle.  It comes from numpy's PCG64 generator,
seeded by ``SeedSequence(seed, spawn_key=(stream,))``, which gives the same
bits on every platform.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import grid as G
from . import oracle as O
from .errors import ConfigurationError, DegeneratePostselectionError, DivergentIntegralError, DomainError
from .phase_space import ProtocolSelection, derive_phase_points, predict_quadratures

STANDARD_STREAM = 0

DEFAULT_SELECTION = ProtocolSelection(0.3, -0.2, 1.1, 0.5)

# Failures of the physics rather than of the configuration end up in a record.
_RECORDABLE = (DomainError, DegeneratePostselectionError, DivergentIntegralError)


@dataclass(frozen=True)
class Numerics:
    """Grid and regularization parameters of a grid-engine run."""

    n: int = 512
    l: float = 40.0
    sigma_plus: float = 0.05
    lam: float = 10.0
    epsilon: float = 0.1

    def regularization(self) -> O.Regularization:
        return O.Regularization(self.sigma_plus, self.lam)

    def grid(self) -> G.GridSpec:
        return G.make_grid(self.n, self.l)

    def validate(self) -> None:
        spec = self.grid()
        reg = self.regularization()
        G._check_regularization(spec, reg)
        if not (math.isfinite(self.epsilon) and self.epsilon >= spec.dx):
            raise ConfigurationError(f"epsilon={self.epsilon} below the grid resolution dx={spec.dx}")

    def as_dict(self) -> dict:
        return {"n": self.n, "l": self.l, "sigma_plus": self.sigma_plus, "lambda": self.lam,
                "epsilon": self.epsilon}


@dataclass(frozen=True)
class Check:
    """One verdict ingredient.

    With ``bound="max"`` the check passes when value <= tolerance; with
    ``bound="min"`` it passes when value strictly exceeds the tolerance.
    """

    name: str
    value: float
    tolerance: float
    bound: str = "max"

    @property
    def passed(self) -> bool:
        if self.bound == "min":
            return bool(self.value > self.tolerance)
        return bool(self.value <= self.tolerance)


@dataclass(frozen=True)
class Verdict:
    checks: tuple[Check, ...]
    reason: str = ""

    @property
    def passed(self) -> bool:
        return not self.reason and all(c.passed for c in self.checks)


@dataclass(frozen=True)
class GameRecord:
    kind: str
    selection: ProtocolSelection
    angles: tuple[float, ...]
    numerics: dict
    seed: int | None
    distribution: dict
    prediction: tuple[float, ...]
    peak: tuple[float, ...]
    width: tuple[float, ...]
    verdict: Verdict
    extras: dict = field(default_factory=dict)


def draw_angle(seed: int, stream: int = STANDARD_STREAM) -> float:
    """The king's angle, uniform on [0, pi), from a seeded PCG64 stream."""
    if not (0 <= int(seed) < 2 ** 64):
        raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(stream,))))
    return float(rng.uniform(0.0, math.pi))


# ---------------------------------------------------------------------------
# Distribution summaries


def interpolated_peak(xi: np.ndarray, probs: np.ndarray) -> float:
    """Vertex of the parabola through the log-probabilities around the argmax.

    Log-probabilities make the estimate exact for a sampled Gaussian.
    """
    k = int(np.argmax(probs))
    if k == 0 or k == len(probs) - 1:
        return float(xi[k])
    with np.errstate(divide="ignore"):
        lo, mid, hi = np.log(probs[k - 1:k + 2])
    denom = lo - 2 * mid + hi
    if not np.isfinite(denom) or denom >= 0:
        return float(xi[k])
    step = xi[k + 1] - xi[k]
    return float(xi[k] + 0.5 * step * (lo - hi) / denom)


def distribution_width(xi: np.ndarray, probs: np.ndarray) -> float:
    dx = xi[1] - xi[0]
    mean = np.sum(xi * probs) * dx
    return float(math.sqrt(np.sum((xi - mean) ** 2 * probs) * dx))


def tail_mass(xi: np.ndarray, probs: np.ndarray, center: float, radius: float) -> float:
    dx = xi[1] - xi[0]
    return float(np.sum(probs[np.abs(xi - center) > radius]) * dx)


# ---------------------------------------------------------------------------
# Standard game


def run_standard_game(sel: ProtocolSelection = DEFAULT_SELECTION, numerics: Numerics = Numerics(),
                      seed: int = 7, *, phi: float | None = None) -> GameRecord:
    """One round: the king measures X_phi on particle 1 and Alice names the outcome.

    ``phi`` overrides the seeded draw (used by angle scans).  The record's
    checks: interpolated peak within dx of Alice's value, tail mass beyond
    5 sqrt(eps^2 + sigma^2) below 1e-6, and grid moments against the oracle.
    """
    numerics.validate()
    angle = draw_angle(seed) if phi is None else float(phi)
    first, _ = derive_phase_points(sel)
    prediction = predict_quadratures(first, angle).x_phi
    spec = numerics.grid()
    reg = numerics.regularization()
    base = dict(kind="standard", selection=sel, angles=(angle,), numerics=numerics.as_dict(),
                seed=seed, prediction=(prediction,))
    try:
        pre = G.build_pre_state(spec, sel, reg)
        post = G.build_post_state(spec, sel, reg)
        xi, probs = G.conditional_distribution(pre, post, angle, numerics.epsilon)
        exact = O.conditional_distribution_oracle(sel, reg, angle, numerics.epsilon)
    except _RECORDABLE as exc:
        return GameRecord(distribution={"xi": [], "p": []}, peak=(), width=(),
                          verdict=Verdict((), reason=f"{type(exc).__name__}: {exc}"), **base)
    peak = interpolated_peak(xi, probs)
    width = distribution_width(xi, probs)
    mean = float(np.sum(xi * probs) * spec.dx)
    radius = 5 * math.sqrt(numerics.epsilon ** 2 + numerics.sigma_plus ** 2)
    checks = (
        Check("peak_error", abs(peak - prediction), spec.dx),
        Check("tail_mass", tail_mass(xi, probs, prediction, radius), 1e-6),
        Check("oracle_mean_difference", abs(mean - float(exact.mean[0])), 1e-6),
        Check("oracle_width_relative_difference",
              abs(width - math.sqrt(exact.covariance[0, 0])) / math.sqrt(exact.covariance[0, 0]), 1e-4),
    )
    return GameRecord(distribution={"xi": xi.tolist(), "p": probs.tolist()}, peak=(peak,),
                      width=(width,), verdict=Verdict(checks),
                      extras={"oracle_mean": float(exact.mean[0]),
                              "oracle_width": math.sqrt(exact.covariance[0, 0])}, **base)


# ---------------------------------------------------------------------------
# Conjunctive game


def run_conjunctive_game(sel: ProtocolSelection, angles: Sequence[float], pointers: O.PointerConfig,
                         reg: O.Regularization, *, mean_scale: float = 1e-3,
                         covariance_tolerance: float = 0.01) -> GameRecord:
    """Simultaneous measurement of several quadratures of particle 1.

    Passing requires every mean within ``mean_scale * min(widths)`` of its
    prediction and every covariance eigenvalue within
    ``covariance_tolerance`` relative of the matching width squared.
    """
    angles = tuple(float(a) for a in angles)
    if len(angles) < 2:
        raise ConfigurationError("the conjunctive game needs at least two angles; "
                                 "use the standard game for one")
    if len(angles) != pointers.n:
        raise ConfigurationError(f"{len(angles)} angles but {pointers.n} pointer widths")
    first, _ = derive_phase_points(sel)
    prediction = tuple(predict_quadratures(first, a).x_phi for a in angles)
    base = dict(kind="conjunctive", selection=sel, angles=angles,
                numerics={"sigma_plus": reg.sigma_plus, "lambda": reg.lam,
                          "widths": list(pointers.widths)},
                seed=None, prediction=prediction)
    try:
        dist = O.ssm_distribution(sel, reg, angles, pointers)
    except _RECORDABLE as exc:
        return GameRecord(distribution={}, peak=(), width=(),
                          verdict=Verdict((), reason=f"{type(exc).__name__}: {exc}"), **base)
    w2 = np.sort(np.asarray(pointers.widths) ** 2)
    eig = np.sort(dist.eigenvalues())
    checks = (
        Check("mean_error_inf", float(np.max(np.abs(dist.mean - prediction))),
              mean_scale * min(pointers.widths)),
        Check("covariance_eigenvalue_relative_error", float(np.max(np.abs(eig - w2) / w2)),
              covariance_tolerance),
    )
    return GameRecord(distribution={"mean": dist.mean.tolist(), "covariance": dist.covariance.tolist()},
                      peak=tuple(dist.mean.tolist()),
                      width=tuple(np.sqrt(np.diag(dist.covariance)).tolist()),
                      verdict=Verdict(checks), extras={"eigenvalues": eig.tolist()}, **base)


# ---------------------------------------------------------------------------
# Convergence sweep


@dataclass(frozen=True)
class SweepLevel:
    sigma_plus: float
    lam: float
    epsilon: float
    peak: float
    peak_error: float
    width: float


@dataclass(frozen=True)
class SweepTable:
    selection: ProtocolSelection
    phi: float
    prediction: float
    grid: tuple[int, float]
    levels: tuple[SweepLevel, ...]
    extrapolated_peak_error: float
    richardson_order: int
    verdict: Verdict
    notice: str = ""


def halving_ladder(start: tuple[float, float, float] = (0.4, 1.25, 0.8),
                   levels: int = 4) -> list[tuple[float, float, float]]:
    """(sigma_plus, lambda, epsilon) with sigma and epsilon halved and lambda doubled per level."""
    s, lam, eps = start
    return [(s / 2 ** k, lam * 2 ** k, eps / 2 ** k) for k in range(levels)]


def richardson(coarse: float, fine: float, ratio: float, order: int = 2) -> float:
    """Eliminate the leading h^order term of a quantity sampled at h and h / ratio."""
    rp = ratio ** order
    return (rp * fine - coarse) / (rp - 1)


def observed_order(e0: float, e1: float, e2: float, ratio: float) -> int:
    """Convergence order from three successive levels, rounded to an even integer >= 2.

    Every error in this protocol is an analytic function of h^2, so only
    even orders are meaningful.
    """
    d0, d1 = e0 - e1, e1 - e2
    if d0 == 0 or d1 == 0:
        return 2
    est = math.log(abs(d0 / d1)) / math.log(ratio)
    return max(2, 2 * int(round(est / 2)))


def run_convergence_sweep(sel: ProtocolSelection, phi: float,
                          ladder: Sequence[tuple[float, float, float]],
                          n: int = 512, l: float = 40.0, *, noise_floor: float = 1e-9,
                          extrapolation_tolerance: float = 1e-6, workers: int = 1) -> SweepTable:
    """Standard-game distributions along a ladder of (sigma_plus, lambda, epsilon).

    Checks: widths strictly decrease; |peak error| is non-increasing up to
    ``noise_floor``; the Richardson extrapolation of the signed peak error
    from the two finest levels is below ``extrapolation_tolerance``; the
    coarsest peak lies within five widths of the prediction.  The
    extrapolation variable is h proportional to sigma_plus and its order is
    read off the three finest levels (for the halving ladder it is 4: the
    offset has no h^2 term).  A level the grid cannot resolve truncates the
    table with a notice, and the verdict then fails with that notice as reason.  Levels may be evaluated on ``workers`` threads;
    results are merged in ladder order.
    """
    ladder = [tuple(float(v) for v in lvl) for lvl in ladder]
    if len(ladder) < 3:
        raise ConfigurationError("a convergence sweep needs at least three levels")
    for (s0, l0, e0), (s1, l1, e1) in zip(ladder, ladder[1:]):
        if not (s1 < s0 and e1 < e0 and l1 > l0):
            raise ConfigurationError("each ladder level must be finer than the previous one")
    spec = G.make_grid(n, l)
    first, _ = derive_phase_points(sel)
    prediction = predict_quadratures(first, phi).x_phi
    valid: list[tuple[float, float, float]] = []
    notice = ""
    for k, (s, lam, eps) in enumerate(ladder):
        try:
            Numerics(n, l, s, lam, eps).validate()
        except ConfigurationError as exc:
            notice = f"truncated at level {k}: {exc}"
            break
        valid.append((s, lam, eps))

    def evaluate(level):
        s, lam, eps = level
        reg = O.Regularization(s, lam)
        pre = G.build_pre_state(spec, sel, reg)
        post = G.build_post_state(spec, sel, reg)
        xi, probs = G.conditional_distribution(pre, post, phi, eps)
        peak = interpolated_peak(xi, probs)
        return SweepLevel(s, lam, eps, peak, peak - prediction, distribution_width(xi, probs))

    if workers > 1 and len(valid) > 1:
        spec.padded().rotation_cache  # build the shared eigenbasis once, before fanning out
        with ThreadPoolExecutor(max_workers=workers) as pool:
            levels = list(pool.map(evaluate, valid))
    else:
        levels = [evaluate(level) for level in valid]
    checks = []
    extrapolated = math.nan
    order = 2
    if len(levels) >= 2:
        widths = [lv.width for lv in levels]
        errors = [abs(lv.peak_error) for lv in levels]
        checks.append(Check("width_decrease_min",
                            min(w0 - w1 for w0, w1 in zip(widths, widths[1:])), 0.0, "min"))
        checks.append(Check("peak_error_increase_max",
                            max(e1 - e0 for e0, e1 in zip(errors, errors[1:])), noise_floor))
        ratio = levels[-2].sigma_plus / levels[-1].sigma_plus
        if len(levels) >= 3:
            order = observed_order(levels[-3].peak_error, levels[-2].peak_error,
                                   levels[-1].peak_error, ratio)
        extrapolated = richardson(levels[-2].peak_error, levels[-1].peak_error, ratio, order)
        checks.append(Check("richardson_peak_error", abs(extrapolated), extrapolation_tolerance))
        checks.append(Check("coarsest_peak_in_widths", abs(levels[0].peak_error) / levels[0].width, 5.0))
    # A partial table cannot certify the requested ladder, so truncation fails the verdict.
    reason = notice
    return SweepTable(sel, float(phi), prediction, (n, l), tuple(levels), extrapolated, order,
                      Verdict(tuple(checks), reason=reason), notice)


# ---------------------------------------------------------------------------
# Contextuality


def run_contextuality(sel: ProtocolSelection, phi: float, phi_prime: float,
                      pointers: O.PointerConfig, reg: O.Regularization, *,
                      ladder_levels: int = 4, mean_tolerance: float = 1e-6) -> GameRecord:
    """Quadratures of particle 1 and of the ancilla, measured alone and together.

    ``pointers`` holds the two finest widths; the joint measurement is also
    run at 2, 4, ... times those widths.  Single-sided means must sit at the
    predictions of the respective phase points; the joint covariance must
    keep its smallest eigenvalue above a positive floor across the ladder,
    and refining the finest level must not lower that floor.
    """
    if pointers.n != 2:
        raise ConfigurationError("contextuality needs exactly two pointer widths")
    if ladder_levels < 2:
        raise ConfigurationError("the width ladder needs at least two levels")
    first, second = derive_phase_points(sel)
    x1 = predict_quadratures(first, phi).x_phi
    x2 = predict_quadratures(second, phi_prime).x_phi
    w1, w2 = pointers.widths
    base = dict(kind="contextuality", selection=sel, angles=(float(phi), float(phi_prime)),
                numerics={"sigma_plus": reg.sigma_plus, "lambda": reg.lam, "widths": [w1, w2],
                          "ladder_levels": ladder_levels},
                seed=None, prediction=(x1, x2))
    try:
        only1 = O.contextuality_distribution(sel, reg, phi, phi_prime, O.PointerConfig((w1,)), "first")
        only2 = O.contextuality_distribution(sel, reg, phi, phi_prime, O.PointerConfig((w2,)), "second")
        scales = [2.0 ** k for k in reversed(range(ladder_levels))]
        joint = [O.contextuality_distribution(sel, reg, phi, phi_prime,
                                              O.PointerConfig((w1 * s, w2 * s)), "both")
                 for s in scales]
    except _RECORDABLE as exc:
        return GameRecord(distribution={}, peak=(), width=(),
                          verdict=Verdict((), reason=f"{type(exc).__name__}: {exc}"), **base)
    lam_min = [float(d.eigenvalues()[0]) for d in joint]
    floor = min(lam_min)
    finest = joint[-1]
    checks = (
        Check("first_only_mean_error", abs(float(only1.mean[0]) - x1), mean_tolerance),
        Check("second_only_mean_error", abs(float(only2.mean[0]) - x2), mean_tolerance),
        Check("joint_floor", floor, 0.0, "min"),
        # Stability: the finest level must not undercut the floor set by the coarser ones.
        Check("finest_over_coarse_floor", lam_min[-1] / min(lam_min[:-1]), 1.0, "min"),
    )
    distribution = {
        "first_only": {"mean": only1.mean.tolist(), "covariance": only1.covariance.tolist()},
        "second_only": {"mean": only2.mean.tolist(), "covariance": only2.covariance.tolist()},
        "joint": {"mean": finest.mean.tolist(), "covariance": finest.covariance.tolist()},
    }
    return GameRecord(distribution=distribution,
                      peak=(float(only1.mean[0]), float(only2.mean[0])),
                      width=(math.sqrt(only1.covariance[0, 0]), math.sqrt(only2.covariance[0, 0])),
                      verdict=Verdict(checks),
                      extras={"floor": floor, "ladder_scales": scales, "ladder_min_eigenvalues": lam_min},
                      **base)


def standard_scan(sel: ProtocolSelection = DEFAULT_SELECTION, numerics: Numerics = Numerics(),
                  count: int = 16) -> list[GameRecord]:
    """Standard game at each of the angles k pi / count."""
    return [run_standard_game(sel, numerics, seed=0, phi=k * math.pi / count) for k in range(count)]


__all__ = [
    "Numerics", "Check", "Verdict", "GameRecord", "SweepLevel", "SweepTable", "draw_angle",
    "interpolated_peak", "distribution_width", "tail_mass", "run_standard_game",
    "run_conjunctive_game", "halving_ladder", "richardson", "observed_order", "run_convergence_sweep",
    "run_contextuality", "standard_scan", "DEFAULT_SELECTION",
]

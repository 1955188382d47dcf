"""Closed-form Gaussian engine.

Every amplitude of the protocol is an integral of ``exp(-z^T a z / 2 + b^T z + c)``
over a handful of real variables: the collective coordinates of the two
particles and one auxiliary variable ``chi`` per measured quadrature, from
writing each Gaussian Kraus operator as a superposition of phase-space
displacements.  Outcomes ``xi`` are carried as extra variables and the rest
are integrated out by Schur complement, so the result is again a Gaussian
exponent, now in ``xi`` alone.

Numerical conditioning matters in the sharp limit (sigma ~ 1e-4 next to
Lambda ~ 1e4).  Exponents are therefore written in collective coordinates
with the displacement absorbed by a change of variables, so no ``1/sigma**2``
term ever couples to ``chi``, and all linear algebra runs on diagonally
equilibrated matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, DivergentIntegralError
from .phase_space import ProtocolSelection


# ---------------------------------------------------------------------------
# Value types


@dataclass(frozen=True)
class Regularization:
    """Widths that make the collective eigenkets normalizable.

    ``sigma_plus`` is the width of the sharp collective coordinate and
    ``lam`` the width of the envelope on its partner coordinate.
    """

    sigma_plus: float
    lam: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma_plus", float(self.sigma_plus))
        object.__setattr__(self, "lam", float(self.lam))
        for name in ("sigma_plus", "lam"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigurationError(f"{name} must be positive and finite, got {v!r}")


@dataclass(frozen=True)
class PointerConfig:
    """Standard deviations of the pointer readout distributions |f_i|^2."""

    widths: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(v) for v in np.atleast_1d(np.asarray(self.widths, dtype=float)))
        if not w:
            raise ConfigurationError("at least one pointer width is required")
        if not all(math.isfinite(v) and v > 0 for v in w):
            raise ConfigurationError(f"pointer widths must be positive and finite, got {w}")
        object.__setattr__(self, "widths", w)

    @property
    def n(self) -> int:
        return len(self.widths)

    @property
    def chi_variances(self) -> np.ndarray:
        """Conjugate-variable variances of minimum-uncertainty pointers."""
        return 1.0 / (4.0 * np.asarray(self.widths) ** 2)


@dataclass(frozen=True, eq=False)
class GaussianExponent:
    """The function ``exp(-z^T a z / 2 + b^T z + c)`` on R^m."""

    a: np.ndarray
    b: np.ndarray
    c: complex = 0j

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=complex, ndmin=2)
        b = np.array(self.b, dtype=complex).reshape(-1)
        if a.shape != (b.size, b.size):
            raise ConfigurationError(f"shape mismatch: a {a.shape}, b {b.shape}")
        object.__setattr__(self, "a", 0.5 * (a + a.T))
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", complex(self.c))

    @property
    def m(self) -> int:
        return self.b.size

    @classmethod
    def zero(cls, m: int) -> "GaussianExponent":
        return cls(np.zeros((m, m)), np.zeros(m), 0j)

    def log_value(self, z) -> complex:
        z = np.asarray(z, dtype=float).reshape(-1)
        return complex(-0.5 * z @ self.a @ z + self.b @ z + self.c)

    def __call__(self, z) -> complex:
        return complex(np.exp(self.log_value(z)))


@dataclass(frozen=True, eq=False)
class GaussianDistribution:
    """Normalized Gaussian over outcomes plus the log of the unnormalized mass."""

    mean: np.ndarray
    covariance: np.ndarray
    log_weight: float = field(default=0.0)

    @property
    def n(self) -> int:
        return self.mean.size

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.covariance)

    def pdf(self, xi) -> np.ndarray:
        xi = np.atleast_2d(np.asarray(xi, dtype=float))
        if self.n == 1 and xi.shape[0] != 1:
            xi = xi.reshape(1, -1)
        d = xi - self.mean[:, None]
        prec = np.linalg.inv(self.covariance)
        q = np.einsum("ik,ij,jk->k", d, prec, d)
        norm = math.sqrt(np.linalg.det(2 * np.pi * self.covariance))
        return np.exp(-0.5 * q) / norm


# ---------------------------------------------------------------------------
# The single integration primitive


def _equilibrate(a: np.ndarray) -> np.ndarray:
    """Diagonal scaling d with d a d having unit real diagonal."""
    diag = np.real(np.diag(a))
    if np.any(~np.isfinite(diag)) or np.any(diag <= 0):
        raise DivergentIntegralError("real part of the quadratic form is not positive definite")
    return 1.0 / np.sqrt(diag)


def _check_positive_real_part(a_scaled: np.ndarray) -> None:
    try:
        np.linalg.cholesky(0.5 * (a_scaled.real + a_scaled.real.T))
    except np.linalg.LinAlgError as exc:
        raise DivergentIntegralError(
            "real part of the quadratic form is not positive definite") from exc


def _log_det_branch(a_scaled: np.ndarray) -> complex:
    """log det of a matrix with positive-definite real part, on the continuous branch.

    Every eigenvalue of such a matrix has positive real part, so the
    principal logarithms summed over eigenvalues follow the straight
    homotopy from the real part without crossing a branch cut.
    """
    ev = np.linalg.eigvals(a_scaled)
    return complex(np.sum(np.log(ev)))


def log_gaussian_integral(g: GaussianExponent) -> complex:
    """log of the integral of ``g`` over R^m, with a continuous imaginary part."""
    if g.m == 0:
        return g.c
    d = _equilibrate(g.a)
    a_s = d[:, None] * g.a * d[None, :]
    _check_positive_real_part(a_s)
    b_s = d * g.b
    sol = np.linalg.solve(a_s, b_s)
    log_det = _log_det_branch(a_s) - 2.0 * np.sum(np.log(d))
    return complex(0.5 * g.m * math.log(2 * math.pi) - 0.5 * log_det + 0.5 * b_s @ sol + g.c)


def gaussian_integral(g: GaussianExponent) -> complex:
    """Integral of ``exp(-z^T a z / 2 + b^T z + c)`` over R^m.

    Uses (2 pi)^(m/2) det(a)^(-1/2) exp(b^T a^-1 b / 2 + c) with the branch of
    det^(-1/2) continuous from the real part of ``a``.

    >>> abs(gaussian_integral(GaussianExponent([[1.0]], [0.0])) - math.sqrt(2 * math.pi)) < 1e-14
    True
    """
    return complex(np.exp(log_gaussian_integral(g)))


def multiply(g1: GaussianExponent, g2: GaussianExponent) -> GaussianExponent:
    if g1.m != g2.m:
        raise ConfigurationError(f"dimension mismatch: {g1.m} vs {g2.m}")
    return GaussianExponent(g1.a + g2.a, g1.b + g2.b, g1.c + g2.c)


def integrate_out(g: GaussianExponent, keep: Sequence[int]) -> GaussianExponent:
    """Integrate ``g`` over every variable not listed in ``keep``.

    The returned exponent is over the kept variables, in the order given.
    """
    keep = list(keep)
    drop = [i for i in range(g.m) if i not in keep]
    if not drop:
        return GaussianExponent(g.a[np.ix_(keep, keep)], g.b[keep], g.c)
    a_dd = g.a[np.ix_(drop, drop)]
    a_dk = g.a[np.ix_(drop, keep)]
    d = _equilibrate(a_dd)
    a_s = d[:, None] * a_dd * d[None, :]
    _check_positive_real_part(a_s)
    rhs = d[:, None] * np.column_stack([g.b[drop], a_dk])
    sol = np.linalg.solve(a_s, rhs)
    sol_b, sol_k = sol[:, 0], sol[:, 1:]
    # Completing the square in the dropped block z_d given the kept block z_k:
    # the linear term is b_d - a_dk z_k.
    b_d_s = d * g.b[drop]
    a_k = g.a[np.ix_(keep, keep)] - (d[:, None] * a_dk).T @ sol_k
    b_k = g.b[keep] - (d[:, None] * a_dk).T @ sol_b
    log_det = _log_det_branch(a_s) - 2.0 * np.sum(np.log(d))
    c = g.c + 0.5 * len(drop) * math.log(2 * math.pi) - 0.5 * log_det + 0.5 * b_d_s @ sol_b
    return GaussianExponent(a_k, b_k, c)


def modulus_squared_distribution(log_amp: GaussianExponent) -> GaussianDistribution:
    """Normalized distribution proportional to |exp(log_amp)|^2 over its variables."""
    a_r = log_amp.a.real
    b_r = log_amp.b.real
    prec = 2.0 * a_r
    try:
        np.linalg.cholesky(prec)
    except np.linalg.LinAlgError as exc:
        raise DivergentIntegralError("outcome distribution is not normalizable") from exc
    mean = np.linalg.solve(a_r, b_r)
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    weight = GaussianExponent(prec, 2.0 * b_r, 2.0 * log_amp.c.real)
    return GaussianDistribution(mean, cov, float(log_gaussian_integral(weight).real))


def density_distribution(log_density: GaussianExponent) -> GaussianDistribution:
    """Normalized distribution proportional to a real Gaussian density exponent."""
    a = log_density.a.real
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise DivergentIntegralError("outcome density is not normalizable") from exc
    cov = np.linalg.inv(a)
    cov = 0.5 * (cov + cov.T)
    mean = cov @ log_density.b.real
    weight = GaussianExponent(a, log_density.b.real, log_density.c.real)
    return GaussianDistribution(mean, cov, float(log_gaussian_integral(weight).real))


# ---------------------------------------------------------------------------
# Building exponents from affine expressions


class _Affine:
    """A complex affine function ``vec . z + const`` of the integration variables."""

    __slots__ = ("vec", "const")

    def __init__(self, vec, const=0j):
        self.vec = np.asarray(vec, dtype=complex)
        self.const = complex(const)

    def __add__(self, other):
        if isinstance(other, _Affine):
            return _Affine(self.vec + other.vec, self.const + other.const)
        return _Affine(self.vec, self.const + other)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __mul__(self, k):
        return _Affine(self.vec * k, self.const * k)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0


class _ExponentBuilder:
    """Accumulates ``sum coef * f * g`` for affine f and g into an exponent."""

    def __init__(self, m: int):
        self.m = m
        self.a = np.zeros((m, m), dtype=complex)
        self.b = np.zeros(m, dtype=complex)
        self.c = 0j

    def var(self, i: int) -> _Affine:
        e = np.zeros(self.m, dtype=complex)
        e[i] = 1.0
        return _Affine(e)

    def const(self, value) -> _Affine:
        return _Affine(np.zeros(self.m, dtype=complex), value)

    def add(self, coef, f: _Affine, g: _Affine | None = None) -> None:
        if g is None:
            self.b += coef * f.vec
            self.c += coef * f.const
            return
        self.a -= coef * (np.outer(f.vec, g.vec) + np.outer(g.vec, f.vec))
        self.b += coef * (f.const * g.vec + g.const * f.vec)
        self.c += coef * f.const * g.const

    def build(self) -> GaussianExponent:
        return GaussianExponent(self.a, self.b, self.c)


def _pre_log(q, sel, reg, u, v, normalized):
    """Exponent of the regularized preselected state in collective coordinates."""
    s2, l2 = reg.sigma_plus ** 2, reg.lam ** 2
    q.add(-1.0 / (4 * s2), u - sel.x_plus, u - sel.x_plus)
    q.add(1j * sel.p_minus, v)
    q.add(-1.0 / (4 * l2), v, v)
    if normalized:
        q.c += -0.5 * math.log(2 * math.pi * reg.sigma_plus * reg.lam)


def _post_conj_log(q, sel, reg, u, v, normalized):
    """Exponent of the complex conjugate of the regularized postselected state."""
    s2, l2 = reg.sigma_plus ** 2, reg.lam ** 2
    q.add(-1.0 / (4 * s2), v - sel.x_minus, v - sel.x_minus)
    q.add(-1j * sel.p_plus, u)
    q.add(-1.0 / (4 * l2), u, u)
    if normalized:
        q.c += -0.5 * math.log(2 * math.pi * reg.sigma_plus * reg.lam)


def _pointer_prefactor(widths) -> float:
    """log of the constant in front of the chi integral of a Weyl-ordered pointer.

    A pointer wavefunction (2 pi w^2)^(-1/4) exp(-y^2 / (4 w^2)) gives the
    Kraus operator (2 pi)^-n int d chi F(chi) exp(-i chi.(xi - X)) with
    F(chi) = (2 pi w^2)^(-1/4) sqrt(4 pi) w exp(-w^2 chi^2).
    """
    w = np.asarray(widths, dtype=float)
    return float(np.sum(-0.25 * np.log(2 * np.pi * w ** 2) + 0.5 * np.log(4 * np.pi) + np.log(w)
                        - np.log(2 * np.pi)))


def _displaced_overlap(q, sel, reg, u, v, shifts, normalized):
    """Add the integrand of <post| D_u(alpha_u, beta_u) D_v(alpha_v, beta_v) |pre>.

    D_u(alpha, beta) = exp(i (alpha u + beta p_u)) acts as
    exp(i alpha beta / 2) exp(i alpha u) psi(u + beta), and likewise for v.
    The integration variable u has been shifted by -beta_u.
    """
    alpha_u, beta_u, alpha_v, beta_v = shifts
    _post_conj_log(q, sel, reg, u - beta_u, v, normalized)
    _pre_log(q, sel, reg, u, v + beta_v, normalized)
    q.add(-0.5j, alpha_u, beta_u)
    q.add(1j, alpha_u, u)
    q.add(0.5j, alpha_v, beta_v)
    q.add(1j, alpha_v, v)


def displacement_oracle(sel: ProtocolSelection, reg: Regularization, a: float, b: float, *,
                        normalized: bool = True) -> complex:
    """Exact <post| exp(i (a x + b p)) (x) 1 |pre> for the regularized states."""
    q = _ExponentBuilder(2)
    u, v = q.var(0), q.var(1)
    a, b = float(a), float(b)
    _displaced_overlap(q, sel, reg, u, v, (q.const(a), q.const(0.5 * b), q.const(0.5 * a),
                                           q.const(b)), normalized)
    return gaussian_integral(q.build())


def conditional_log_amplitude(sel: ProtocolSelection, reg: Regularization,
                              couplings: Sequence[tuple[int, float]],
                              widths: Sequence[float], *,
                              normalized: bool = True) -> GaussianExponent:
    """Exponent in the outcomes of ``<post| A(xi) |pre>`` for a simultaneous measurement.

    ``couplings`` lists (particle, angle) pairs, particle 1 being the system
    and 2 the ancilla.  Each pointer has Weyl-ordered Gaussian Kraus kernel
    of readout width ``widths[k]``.  The variables are ordered
    (u, v, chi_1..chi_n, xi_1..xi_n) with u = (x + x')/2 and v = x - x'; the
    displacement exp(i chi.X) splits into a u part and a v part, and the
    substitution u -> u - beta_u moves its shift off the sharp coordinate.
    """
    n = len(couplings)
    if len(widths) != n:
        raise ConfigurationError(f"{n} couplings but {len(widths)} pointer widths")
    q = _ExponentBuilder(2 + 2 * n)
    u, v = q.var(0), q.var(1)
    chi = [q.var(2 + k) for k in range(n)]
    xi = [q.var(2 + n + k) for k in range(n)]
    zero = q.const(0.0)
    alpha_u, beta_u, alpha_v, beta_v = zero, zero, zero, zero
    for (particle, phi), ch in zip(couplings, chi):
        a, b = math.cos(phi) * ch, math.sin(phi) * ch
        if particle == 1:
            alpha_u, beta_u = alpha_u + a, beta_u + 0.5 * b
            alpha_v, beta_v = alpha_v + 0.5 * a, beta_v + b
        elif particle == 2:
            alpha_u, beta_u = alpha_u + a, beta_u + 0.5 * b
            alpha_v, beta_v = alpha_v - 0.5 * a, beta_v - b
        else:
            raise ConfigurationError(f"particle must be 1 or 2, got {particle!r}")
    _displaced_overlap(q, sel, reg, u, v, (alpha_u, beta_u, alpha_v, beta_v), normalized)
    for w, ch, x in zip(widths, chi, xi):
        q.add(-(w ** 2), ch, ch)
        q.add(-1j, ch, x)
    q.c += _pointer_prefactor(widths)
    return integrate_out(q.build(), range(2 + n, 2 + 2 * n))


def _kraus_width(eps: float) -> float:
    """Readout width of the Kraus operator (pi eps^2)^(-1/4) exp(-(xi - X)^2 / (2 eps^2))."""
    if not (math.isfinite(eps) and eps > 0):
        raise ConfigurationError(f"eps must be positive and finite, got {eps!r}")
    return eps / math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Public oracle operations


def amplitude_oracle(sel: ProtocolSelection, reg: Regularization, phi: float, eps: float,
                     xi, *, normalized: bool = True):
    """Exact ``<post| A(xi|phi, eps) |pre>`` for the single Gaussian Kraus operator.

    ``A = (pi eps^2)^(-1/4) exp(-(xi - X_phi)^2 / (2 eps^2))`` acts on particle 1.
    With ``normalized`` the states carry unit norm, otherwise unit prefactor.
    ``xi`` may be a scalar or an array.
    """
    g = conditional_log_amplitude(sel, reg, [(1, phi)], [_kraus_width(eps)], normalized=normalized)
    xi_arr = np.asarray(xi, dtype=float)
    flat = xi_arr.reshape(-1)
    logs = -0.5 * g.a[0, 0] * flat ** 2 + g.b[0] * flat + g.c
    out = np.exp(logs).reshape(xi_arr.shape)
    return complex(out) if out.ndim == 0 else out


def conditional_distribution_oracle(sel: ProtocolSelection, reg: Regularization, phi: float,
                                    eps: float) -> GaussianDistribution:
    """Exact conditional outcome distribution of the single Kraus measurement."""
    g = conditional_log_amplitude(sel, reg, [(1, phi)], [_kraus_width(eps)])
    return modulus_squared_distribution(g)


def ssm_distribution(sel: ProtocolSelection, reg: Regularization, angles: Sequence[float],
                     pointers: PointerConfig) -> GaussianDistribution:
    """Joint conditional distribution of a simultaneous measurement on particle 1."""
    angles = [float(a) for a in angles]
    if not angles:
        raise ConfigurationError("at least one angle is required")
    if len(angles) != pointers.n:
        raise ConfigurationError(f"{len(angles)} angles but {pointers.n} pointer widths")
    g = conditional_log_amplitude(sel, reg, [(1, a) for a in angles], pointers.widths)
    return modulus_squared_distribution(g)


def contextuality_distribution(sel: ProtocolSelection, reg: Regularization, phi: float,
                               phi_prime: float, pointers: PointerConfig,
                               couple: str = "both") -> GaussianDistribution:
    """Conditional distribution for quadratures of particle 1 and of the ancilla.

    ``couple`` selects which instruments are attached: ``"both"`` measures
    X_phi on particle 1 and X'_phi' on particle 2 simultaneously and needs
    two widths; ``"first"`` and ``"second"`` attach a single pointer.
    """
    options = {"both": [(1, phi), (2, phi_prime)], "first": [(1, phi)],
               "second": [(2, phi_prime)]}
    if couple not in options:
        raise ConfigurationError(f"couple must be one of {sorted(options)}, got {couple!r}")
    couplings = options[couple]
    widths = pointers.widths
    if len(widths) != len(couplings):
        raise ConfigurationError(f"{couple!r} coupling needs {len(couplings)} widths, got {len(widths)}")
    g = conditional_log_amplitude(sel, reg, couplings, widths)
    return modulus_squared_distribution(g)


def backreaction_covariance(gamma_sys, pointers: PointerConfig, chi_vars,
                            angles: Sequence[float]) -> np.ndarray:
    """Covariance of the readings of a simultaneous measurement on a preselected state.

    Propagates xi = xi_in + X_in + C chi_in / 2 with independent pointers,
    no pointer cross-covariances and no system-pointer correlations.
    """
    from .phase_space import commutator_matrix

    gamma = np.asarray(gamma_sys, dtype=float)
    if gamma.shape != (2, 2):
        raise ConfigurationError(f"gamma_sys must be 2x2, got {gamma.shape}")
    ang = np.asarray(list(angles), dtype=float)
    chi_vars = np.asarray(chi_vars, dtype=float).reshape(-1)
    if not (ang.size == pointers.n == chi_vars.size):
        raise ConfigurationError("angles, pointer widths and chi_vars must have equal length")
    m = np.column_stack([np.cos(ang), np.sin(ang)])
    c = commutator_matrix(ang).c
    sigma = np.diag(np.asarray(pointers.widths) ** 2) + m @ gamma @ m.T + 0.25 * (c * chi_vars) @ c.T
    return 0.5 * (sigma + sigma.T)


def pre_state_exponent(sel: ProtocolSelection, reg: Regularization) -> GaussianExponent:
    """Exponent of the normalized preselected wavefunction in (x, x')."""
    q = _ExponentBuilder(2)
    x, xp = q.var(0), q.var(1)
    _pre_log(q, sel, reg, 0.5 * (x + xp), x - xp, True)
    return q.build()


def pure_state_covariance(g: GaussianExponent) -> tuple[np.ndarray, np.ndarray]:
    """Means and symmetrized covariance of (x_1..x_m, p_1..p_m) for a Gaussian wavefunction.

    For psi = exp(-z^T (A_R + i A_I) z / 2 + ...), the position covariance is
    A_R^-1 / 2, the mixed block -A_R^-1 A_I / 2 and the momentum block
    (A_R + A_I A_R^-1 A_I) / 2.
    """
    a_r, a_i = g.a.real, g.a.imag
    b_r, b_i = g.b.real, g.b.imag
    inv = np.linalg.inv(a_r)
    mean_x = inv @ b_r
    mean_p = b_i - a_i @ mean_x
    sxx = 0.5 * inv
    sxp = -0.5 * inv @ a_i
    spp = 0.5 * (a_r + a_i @ inv @ a_i)
    cov = np.block([[sxx, sxp], [sxp.T, spp]])
    return np.concatenate([mean_x, mean_p]), 0.5 * (cov + cov.T)


def preselected_reduced_covariance(sel: ProtocolSelection, reg: Regularization) -> np.ndarray:
    """Symmetrized (x, p) covariance of particle 1 in the regularized preselected state."""
    _, cov = pure_state_covariance(pre_state_exponent(sel, reg))
    idx = [0, 2]
    return cov[np.ix_(idx, idx)]


def preselected_distribution(sel: ProtocolSelection, reg: Regularization,
                             angles: Sequence[float], pointers: PointerConfig) -> GaussianDistribution:
    """Readout distribution ``||A(xi) pre||^2`` of a simultaneous measurement, no postselection.

    Computed directly from the Kraus operators as an integral over
    (x, x', chi, chi~, xi); it is independent of the Heisenberg-picture
    propagation in :func:`backreaction_covariance`.
    """
    angles = [float(a) for a in angles]
    n = len(angles)
    if n != pointers.n:
        raise ConfigurationError(f"{n} angles but {pointers.n} pointer widths")
    q = _ExponentBuilder(2 + 3 * n)
    x, xp = q.var(0), q.var(1)
    # Ket and bra copies of chi, written via their mean and difference: only the
    # difference couples to xi, which avoids cancelling large inverse entries.
    chi_s = [q.var(2 + k) for k in range(n)]
    chi_d = [q.var(2 + n + k) for k in range(n)]
    chi = [s + 0.5 * d for s, d in zip(chi_s, chi_d)]
    chit = [s - 0.5 * d for s, d in zip(chi_s, chi_d)]
    xi = [q.var(2 + 2 * n + k) for k in range(n)]

    def lin(weights, ch):
        return sum((w * c for w, c in zip(weights, ch)), q.const(0.0))

    cos_w, sin_w = [math.cos(p) for p in angles], [math.sin(p) for p in angles]
    # The particle-1 coordinate is recentred on the common shift b(chi_s), so
    # the sharp preselected envelope only ever sees the difference chi_d.
    b_s = lin(sin_w, chi_s)

    def displaced_pre(ch, sign):
        # [D(a, b) pre](y, x') = exp(i a b / 2) exp(i a y) pre(y + b, x') at y = x - b_s,
        # complex conjugated for the bra copy.
        sub = _ExponentBuilder(q.m)
        a, b = lin(cos_w, ch), lin(sin_w, ch)
        y = x - b_s
        sub.add(0.5j, a, b)
        sub.add(1j, a, y)
        _pre_log(sub, sel, reg, 0.5 * (y + b + xp), y + b - xp, True)
        for w, c, o in zip(pointers.widths, ch, xi):
            sub.add(-(w ** 2), c, c)
            sub.add(-1j, c, o)
        sub.c += _pointer_prefactor(pointers.widths)
        if sign < 0:
            sub.a, sub.b, sub.c = sub.a.conj(), sub.b.conj(), sub.c.conjugate()
        q.a += sub.a
        q.b += sub.b
        q.c += sub.c

    displaced_pre(chi, +1)
    displaced_pre(chit, -1)
    g = integrate_out(q.build(), range(2 + 2 * n, 2 + 3 * n))
    return density_distribution(g)

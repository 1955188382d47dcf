"""Wavefunctions on a uniform lattice.

The lattice has ``n`` points x_j = (j - n/2) dx with dx = l / n, and the
conjugate lattice p_k = (k - n/2) dp with dp = 2 pi / l.  The centered
unitary transform is an FFT sandwiched between alternating signs, which is
exact because n is a multiple of four.

The rotation R(phi) = exp(-i phi H), H = (x^2 + p^2) / 2, is built from one
dense eigendecomposition of the discretized H per grid.  That makes R
exactly unitary on the grid and gives the group law R(a) R(b) = R(a + b) up
to rounding.  In the Heisenberg picture R(phi)^dagger x R(phi) = X_phi, so
the eigenstate of X_phi with eigenvalue xi is R(-phi)|xi>_x.

The grid only represents phase-space content inside the disk of radius
min(l/2, pi/dx) faithfully under rotation.  The measurement and shift paths
therefore embed the particle-1 axis into a grid twice as long (same dx)
before rotating or translating.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np

from .errors import ConfigurationError, DegeneratePostselectionError, DomainError
from .oracle import Regularization
from .phase_space import ProtocolSelection, derive_phase_points

__all__ = [
    "GridSpec", "Wave1D", "Wave2D", "Regularization", "make_grid", "fourier",
    "fractional_fourier", "expectation_quadrature", "quadrature_eigenstate",
    "oscillator_eigenstate", "build_pre_state", "build_post_state", "apply_kraus",
    "conditional_amplitudes", "conditional_distribution", "delta_expectation", "wigner",
    "displacement_matrix_element", "propagator_modulus",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Uniform lattice with lazily cached spectral data of the oscillator generator.

    Build instances with :func:`make_grid`, which validates and shares them.
    """

    n: int
    l: float
    dx: float = field(init=False)
    dp: float = field(init=False)
    x_values: np.ndarray = field(init=False, repr=False)
    p_values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        dx = self.l / self.n
        dp = 2 * math.pi / self.l
        idx = np.arange(self.n) - self.n // 2
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dp", dp)
        object.__setattr__(self, "x_values", _readonly(idx * dx))
        object.__setattr__(self, "p_values", _readonly(idx * dp))

    @property
    def p_max(self) -> float:
        return math.pi / self.dx

    @cached_property
    def _signs(self) -> np.ndarray:
        return _readonly((-1.0) ** np.arange(self.n))

    @cached_property
    def rotation_cache(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and real orthogonal eigenvectors of the discretized H."""
        # P^2 = F^dagger diag(p^2) F is circulant on the centered lattice.
        m = np.arange(self.n)
        col = ((-1.0) ** m * np.fft.ifft(self.p_values ** 2)).real
        p2 = col[(m[:, None] - m[None, :]) % self.n]
        h = 0.5 * (np.diag(self.x_values ** 2) + p2)
        energies, vectors = np.linalg.eigh(h)
        return _readonly(energies), _readonly(vectors)

    def rotation_matrix(self, phi: float) -> np.ndarray:
        """Dense matrix of R(phi) = exp(-i phi H) on this grid."""
        e, v = self.rotation_cache
        return (v * np.exp(-1j * phi * e)) @ v.T

    def rotate(self, arr: np.ndarray, phi: float, axis: int = 0) -> np.ndarray:
        """Apply R(phi) along ``axis`` of ``arr`` (position representation)."""
        e, v = self.rotation_cache
        moved = np.moveaxis(np.asarray(arr, dtype=complex), axis, 0)
        shape = moved.shape
        flat = moved.reshape(self.n, -1)
        out = v @ (np.exp(-1j * phi * e)[:, None] * (v.T @ flat))
        return np.moveaxis(out.reshape(shape), 0, axis)

    def padded(self, factor: int = 2) -> "GridSpec":
        """A grid with the same spacing and ``factor`` times the extent."""
        return make_grid(self.n * factor, self.l * factor)

    def embed(self, arr: np.ndarray, big: "GridSpec", axis: int = 0) -> np.ndarray:
        """Zero-pad ``arr`` along ``axis`` onto the centred larger grid ``big``."""
        off = (big.n - self.n) // 2
        moved = np.moveaxis(np.asarray(arr, dtype=complex), axis, 0)
        out = np.zeros((big.n,) + moved.shape[1:], dtype=complex)
        out[off:off + self.n] = moved
        return np.moveaxis(out, 0, axis)

    def crop(self, arr: np.ndarray, big: "GridSpec", axis: int = 0) -> np.ndarray:
        off = (big.n - self.n) // 2
        moved = np.moveaxis(arr, axis, 0)[off:off + self.n]
        return np.moveaxis(moved, 0, axis)

    def nearest_index(self, x: float) -> int:
        return int(round(x / self.dx)) + self.n // 2


@lru_cache(maxsize=32)
def _cached_grid(n: int, l: float) -> GridSpec:
    return GridSpec(n, l)


def make_grid(n: int, l: float) -> GridSpec:
    """Validated, shared lattice of ``n`` points over extent ``l``.

    ``n`` must be a power of two no smaller than 4 and ``l`` positive.

    >>> make_grid(512, 40).dx
    0.078125
    """
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ConfigurationError(f"grid size must be an integer, got {n!r}")
    n = int(n)
    if n < 4 or n & (n - 1):
        raise ConfigurationError(f"grid size must be a power of two >= 4, got {n}")
    l = float(l)
    if not (math.isfinite(l) and l > 0):
        raise ConfigurationError(f"grid extent must be positive and finite, got {l!r}")
    return _cached_grid(n, l)


# ---------------------------------------------------------------------------
# Wavefunctions


@dataclass(frozen=True, eq=False)
class Wave1D:
    spec: GridSpec
    amplitudes: np.ndarray
    representation: str = "position"

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amp.size != self.spec.n:
            raise ConfigurationError(f"expected {self.spec.n} amplitudes, got {amp.size}")
        if self.representation not in ("position", "momentum"):
            raise ConfigurationError(f"unknown representation {self.representation!r}")
        object.__setattr__(self, "amplitudes", _readonly(amp))

    def norm2(self) -> float:
        step = self.spec.dx if self.representation == "position" else self.spec.dp
        return float(np.sum(np.abs(self.amplitudes) ** 2) * step)

    def normalized(self) -> "Wave1D":
        return Wave1D(self.spec, self.amplitudes / math.sqrt(self.norm2()), self.representation)


@dataclass(frozen=True, eq=False)
class Wave2D:
    spec: GridSpec
    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.spec.n, self.spec.n):
            raise ConfigurationError(f"expected shape {(self.spec.n,) * 2}, got {amp.shape}")
        object.__setattr__(self, "amplitudes", _readonly(amp))

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.spec.dx ** 2)

    def normalized(self) -> "Wave2D":
        return Wave2D(self.spec, self.amplitudes / math.sqrt(self.norm2()))

    def inner(self, other: "Wave2D") -> complex:
        """<self|other>."""
        return complex(np.vdot(self.amplitudes, other.amplitudes) * self.spec.dx ** 2)


# ---------------------------------------------------------------------------
# Transforms


def _fft_centered(arr: np.ndarray, spec: GridSpec, axis: int = 0) -> np.ndarray:
    s = spec._signs.reshape((-1,) + (1,) * (arr.ndim - 1))
    moved = np.moveaxis(arr, axis, 0)
    out = s * np.fft.fft(s * moved, axis=0, norm="ortho") * math.sqrt(spec.dx / spec.dp)
    return np.moveaxis(out, 0, axis)


def _ifft_centered(arr: np.ndarray, spec: GridSpec, axis: int = 0) -> np.ndarray:
    s = spec._signs.reshape((-1,) + (1,) * (arr.ndim - 1))
    moved = np.moveaxis(arr, axis, 0)
    out = s * np.fft.ifft(s * moved, axis=0, norm="ortho") * math.sqrt(spec.dp / spec.dx)
    return np.moveaxis(out, 0, axis)


def fourier(psi: Wave1D, direction: str = "forward") -> Wave1D:
    """Centered unitary transform psi~(p) = (2 pi)^(-1/2) int dx exp(-i p x) psi(x)."""
    if direction == "forward":
        if psi.representation != "position":
            raise ConfigurationError("forward transform expects a position-space wave")
        return Wave1D(psi.spec, _fft_centered(psi.amplitudes, psi.spec), "momentum")
    if direction == "inverse":
        if psi.representation != "momentum":
            raise ConfigurationError("inverse transform expects a momentum-space wave")
        return Wave1D(psi.spec, _ifft_centered(psi.amplitudes, psi.spec), "position")
    raise ConfigurationError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def fractional_fourier(psi: Wave1D, phi: float) -> Wave1D:
    """R(phi) psi with R(phi) = exp(-i phi (x^2 + p^2) / 2)."""
    if psi.representation != "position":
        raise ConfigurationError("fractional_fourier expects a position-space wave")
    return Wave1D(psi.spec, psi.spec.rotate(psi.amplitudes, phi), "position")


def expectation_quadrature(psi: Wave1D, phi: float) -> float:
    """<psi| X_phi |psi> / <psi|psi>, evaluated as <R psi| x |R psi>."""
    rotated = psi.spec.rotate(psi.amplitudes, phi)
    w = np.abs(rotated) ** 2
    return float(np.sum(w * psi.spec.x_values) / np.sum(w))


def _gaussian(x: np.ndarray, center: float, width: float) -> np.ndarray:
    """Normalized Gaussian wavefunction whose density has standard deviation ``width``."""
    return (2 * math.pi * width ** 2) ** -0.25 * np.exp(-((x - center) ** 2) / (4 * width ** 2))


def quadrature_eigenstate(spec: GridSpec, xi: float, phi: float, width: float) -> Wave1D:
    """Regularized eigenstate of X_phi with eigenvalue ``xi``.

    A normalized Gaussian of density width ``width`` centred at ``xi`` is
    rotated by R(-phi), so that <X_phi> = xi.
    """
    if abs(xi) > spec.l / 4:
        raise DomainError(f"xi={xi} lies outside the central half of the grid")
    if width < 2 * spec.dx:
        raise ConfigurationError(f"width {width} below resolution 2 dx = {2 * spec.dx}")
    base = _gaussian(spec.x_values, xi, width)
    return Wave1D(spec, spec.rotate(base, -phi), "position")


def oscillator_eigenstate(spec: GridSpec, k: int) -> Wave1D:
    """The k-th eigenvector of the discretized oscillator, normalized on the grid."""
    _, v = spec.rotation_cache
    vec = v[:, k] / math.sqrt(spec.dx)
    # Fix the sign so the first significant lobe from the left is positive.
    big = np.flatnonzero(np.abs(vec) > 1e-3 * np.abs(vec).max())[0]
    return Wave1D(spec, np.sign(vec[big]) * vec, "position")


# ---------------------------------------------------------------------------
# Entangled states


def _check_regularization(spec: GridSpec, reg: Regularization) -> None:
    if reg.sigma_plus < spec.dx / 2:
        raise ConfigurationError(
            f"sigma_plus={reg.sigma_plus} is not resolved by dx={spec.dx} (need >= dx/2)")
    if reg.lam > spec.l / 4:
        raise ConfigurationError(
            f"lambda={reg.lam} exceeds l/4={spec.l / 4}; the envelope would reach the boundary")


def _check_selection(spec: GridSpec, sel: ProtocolSelection) -> None:
    first, second = derive_phase_points(sel)
    for label, pt in (("particle 1", first), ("particle 2", second)):
        if abs(pt.x) > spec.l / 4 or abs(pt.p) > spec.p_max / 2:
            raise DomainError(f"{label} phase point ({pt.x}, {pt.p}) outside the central half")


def _collective(spec: GridSpec):
    x = spec.x_values
    return 0.5 * (x[:, None] + x[None, :]), x[:, None] - x[None, :]


def build_pre_state(spec: GridSpec, sel: ProtocolSelection, reg: Regularization,
                    normalize: bool = True) -> Wave2D:
    """Regularized joint eigenstate of (x_plus, p_minus).

    psi(x, x') = exp(-(u - X+)^2 / (4 s^2) + i P- v - v^2 / (4 L^2)) with
    u = (x + x')/2 and v = x - x'.  With ``normalize=False`` the prefactor is
    one, which matches the unnormalized convention of the oracle.
    """
    _check_regularization(spec, reg)
    _check_selection(spec, sel)
    u, v = _collective(spec)
    s2, l2 = reg.sigma_plus ** 2, reg.lam ** 2
    psi = np.exp(-((u - sel.x_plus) ** 2) / (4 * s2) + 1j * sel.p_minus * v - v ** 2 / (4 * l2))
    state = Wave2D(spec, psi)
    return state.normalized() if normalize else state


def build_post_state(spec: GridSpec, sel: ProtocolSelection, reg: Regularization,
                     normalize: bool = True) -> Wave2D:
    """Regularized joint eigenstate of (x_minus, p_plus); roles of u and v exchanged."""
    _check_regularization(spec, reg)
    _check_selection(spec, sel)
    u, v = _collective(spec)
    s2, l2 = reg.sigma_plus ** 2, reg.lam ** 2
    psi = np.exp(-((v - sel.x_minus) ** 2) / (4 * s2) + 1j * sel.p_plus * u - u ** 2 / (4 * l2))
    state = Wave2D(spec, psi)
    return state.normalized() if normalize else state


# ---------------------------------------------------------------------------
# Measurement


def _kraus_mask(xi, y: np.ndarray, eps: float) -> np.ndarray:
    """Position-space Kraus mask (pi eps^2)^(-1/4) exp(-(xi - y)^2 / (2 eps^2))."""
    xi = np.asarray(xi, dtype=float)
    return (math.pi * eps ** 2) ** -0.25 * np.exp(-((xi[..., None] - y) ** 2) / (2 * eps ** 2))


def apply_kraus(state: Wave2D, xi: float, phi: float, eps: float) -> Wave2D:
    """A(xi|phi, eps) on particle 1, returned unnormalized.

    A is a function of X_phi = R(phi)^dagger x R(phi): the particle-1 axis is
    rotated by R(phi), masked in position and rotated back by R(-phi).
    """
    spec = state.spec
    if eps < 2 * spec.dx:
        raise ConfigurationError(f"eps={eps} below the resolution 2 dx = {2 * spec.dx}")
    rotated = spec.rotate(state.amplitudes, phi, axis=0)
    masked = _kraus_mask(xi, spec.x_values, eps)[:, None] * rotated
    return Wave2D(spec, spec.rotate(masked, -phi, axis=0))


def conditional_amplitudes(pre: Wave2D, post: Wave2D, phi: float,
                           eps: float) -> tuple[np.ndarray, np.ndarray]:
    """<post| A(xi_j|phi, eps) |pre> for every xi_j on the particle-1 lattice.

    Both states are rotated on a particle-1 axis of twice the extent, which
    keeps the momentum-heavy postselected state inside the region the
    spectral rotation represents.  The overlap over particle 2 is taken
    first, giving a density rho(y), and each amplitude is a mask-weighted
    sum of rho.
    """
    spec = pre.spec
    if post.spec is not spec:
        raise ConfigurationError("pre and post states must share one GridSpec")
    if eps < spec.dx:
        raise ConfigurationError(f"eps={eps} below the grid resolution dx={spec.dx}")
    big = spec.padded()
    rot_pre = big.rotate(spec.embed(pre.amplitudes, big), phi)
    rot_post = big.rotate(spec.embed(post.amplitudes, big), phi)
    rho = np.sum(rot_post.conj() * rot_pre, axis=1) * spec.dx
    mask = _kraus_mask(spec.x_values, big.x_values, eps)
    return spec.x_values.copy(), mask @ rho * spec.dx


def conditional_distribution(pre: Wave2D, post: Wave2D, phi: float,
                             eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Outcome density proportional to |<post| A(xi|phi, eps) |pre>|^2 with sum p dx = 1."""
    xi, amp = conditional_amplitudes(pre, post, phi, eps)
    w = np.abs(amp) ** 2
    if not np.any(np.abs(amp) > 1e-300):
        raise DegeneratePostselectionError("every conditional amplitude vanishes")
    return xi, w / (np.sum(w) * pre.spec.dx)


# ---------------------------------------------------------------------------
# Phase-space transforms


def delta_expectation(psi: Wave1D, x: float, p: float) -> complex:
    """<psi| Delta(x, p) |psi> = int ds exp(i p s) psi*(x + s/2) psi(x - s/2).

    The sum runs over s = 2 m dx so both arguments are lattice points, hence
    the weight 2 dx.  On the lattice this equals 2 pi [W(x, p) + W(x, p + pi/dx)],
    the second term being the alias that the even-step sum cannot separate.
    """
    spec = psi.spec
    if psi.representation != "position":
        raise ConfigurationError("delta_expectation expects a position-space wave")
    j = spec.nearest_index(x)
    if not (0 <= j < spec.n) or abs(spec.x_values[j] - x) > 1e-9 * spec.dx:
        raise DomainError(f"x={x} is not a lattice point")
    amp = psi.amplitudes
    mmax = min(j, spec.n - 1 - j)
    m = np.arange(-mmax, mmax + 1)
    s = 2 * m * spec.dx
    terms = np.exp(1j * p * s) * np.conj(amp[j + m]) * amp[j - m]
    return complex(np.sum(terms) * 2 * spec.dx)


def _half_step_samples(amp: np.ndarray) -> np.ndarray:
    """Band-limited values on the lattice of half spacing (length 2n)."""
    n = amp.size
    spec_k = np.fft.fftshift(np.fft.fft(amp))
    big = np.zeros(2 * n, dtype=complex)
    big[n // 2:n // 2 + n] = spec_k
    # The Nyquist bin is shared as two halves so real input stays real.
    big[n // 2] *= 0.5
    big[n // 2 + n] = big[n // 2]
    return 2 * np.fft.ifft(np.fft.ifftshift(big))


def wigner(psi: Wave1D) -> np.ndarray:
    """W(x_j, p_k) = (1/2 pi) int dy exp(-i p y) psi(x + y/2) psi*(x - y/2); rows are x_j.

    The separations y = m dx, m in [-n/2, n/2), need psi at half-lattice
    points, taken from band-limited interpolation; values beyond the box are
    zero.
    """
    spec = psi.spec
    if psi.representation != "position":
        raise ConfigurationError("wigner expects a position-space wave")
    n = spec.n
    fine = np.concatenate([_half_step_samples(psi.amplitudes), np.zeros(2 * n, dtype=complex)])
    j = np.arange(n)[:, None]
    m = (np.arange(n) - n // 2)[None, :]
    # psi(x_j + m dx / 2) sits at fine index 2 j + m; out-of-box indices point at the zero tail.
    idx_p = 2 * j + m
    idx_m = 2 * j - m
    bad_p = (idx_p < 0) | (idx_p >= 2 * n)
    bad_m = (idx_m < 0) | (idx_m >= 2 * n)
    idx_p = np.where(bad_p, 2 * n, idx_p)
    idx_m = np.where(bad_m, 2 * n, idx_m)
    corr = fine[idx_p] * np.conj(fine[idx_m])
    # sum_m exp(-i p_k m dx) corr[j, m] with p_k m dx = 2 pi (k - n/2) m / n.
    kern = np.exp(-2j * np.pi * np.outer(np.arange(n) - n // 2, np.arange(n) - n // 2) / n)
    w = corr @ kern.T * spec.dx / (2 * np.pi)
    return w.real


# ---------------------------------------------------------------------------
# Matrix elements


def displacement_matrix_element(pre: Wave2D, post: Wave2D, a: float, b: float) -> complex:
    """<post| exp(i (a x + b p)) (x) 1 |pre>.

    exp(i (a x + b p)) psi(x) = exp(i a b / 2) exp(i a x) psi(x + b); the
    shift is a Fourier phase applied on a doubled particle-1 axis so that
    nothing wraps around the box.
    """
    spec = pre.spec
    if post.spec is not spec:
        raise ConfigurationError("pre and post states must share one GridSpec")
    if abs(a) > spec.p_max / 4 or abs(b) > spec.l / 4:
        raise DomainError(f"displacement (a, b) = ({a}, {b}) leaves the grid interior")
    big = spec.padded()
    wide = spec.embed(pre.amplitudes, big)
    shifted = _ifft_centered(np.exp(1j * big.p_values * b)[:, None] * _fft_centered(wide, big), big)
    shifted = spec.crop(shifted, big)
    phase = np.exp(1j * a * spec.x_values)[:, None]
    total = np.vdot(post.amplitudes, phase * shifted) * spec.dx ** 2
    return complex(np.exp(0.5j * a * b) * total)


def _taper(p: np.ndarray, p_flat: float, p_zero: float) -> np.ndarray:
    t = np.clip((np.abs(p) - p_flat) / (p_zero - p_flat), 0.0, 1.0)
    return np.cos(0.5 * np.pi * t) ** 2


def propagator_modulus(spec: GridSpec, dphi: float, points, band: tuple[float, float] | None = None,
                       ) -> np.ndarray:
    """|<xi'| R(dphi) |xi>| for xi, xi' in ``points`` using band-limited delta states.

    Each |xi> is (2 pi)^-1/2 int dp T(p) exp(-i p xi) |p> with a cos^2 taper
    T that is flat up to ``band[0]`` and vanishes beyond ``band[1]``.  Inside
    the band the exact kernel has constant modulus (2 pi |sin dphi|)^(-1/2).
    The default band is (0.7, 0.86) p_max.
    """
    pts = np.asarray(points, dtype=float).reshape(-1)
    p_flat, p_zero = band if band is not None else (0.7 * spec.p_max, 0.86 * spec.p_max)
    if not 0 < p_flat < p_zero <= spec.p_max:
        raise ConfigurationError(f"invalid band ({p_flat}, {p_zero}) for p_max={spec.p_max}")
    reach = math.hypot(np.max(np.abs(pts)), p_zero)
    if reach > 0.9 * min(spec.l / 2, spec.p_max):
        raise DomainError(f"phase-space reach {reach:.3g} exceeds the rotation-safe disk")
    p = spec.p_values
    tilde = _taper(p, p_flat, p_zero)[:, None] * np.exp(-1j * np.outer(p, pts)) / math.sqrt(2 * np.pi)
    deltas = _ifft_centered(tilde, spec)
    rotated = spec.rotate(deltas, dphi)
    return np.abs(deltas.conj().T @ rotated * spec.dx)

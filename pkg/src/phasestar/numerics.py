"""Shared numerical substrate: phase-space grids, Fourier conventions,
Fresnel integrals, Laguerre/Airy/theta functions and an RK4 integrator."""
from dataclasses import dataclass
from math import erfc, gamma, pi, sqrt

import numpy as np

from . import _kernels
from .errors import (
    BranchAmbiguity,
    ConfigError,
    DegenerateQuadratic,
    NonConvergent,
    OrderTooLarge,
    OutOfRange,
)

#: damping used when a closed form sits exactly on the real axis
EPS_CLOSED_FORM = 1e-8
#: damping used by brute-force quadrature oracles
EPS_QUADRATURE = 1e-3


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform grid for one degree of freedom.

    Positions are ``x_i = x_min + i*dx`` for ``i = 0..n_x-1``; momenta are the
    FFT-conjugate axis ``p_j = (j - n_x/2)*dp`` with ``dp*dx*n_x = 2*pi*hbar``.
    Both axes therefore contain zero when the box is symmetric.
    """

    x_min: float = -8.0
    x_max: float = 8.0
    n_x: int = 128
    hbar: float = 1.0

    def __post_init__(self):
        n = int(self.n_x)
        if n != self.n_x or n < 8 or n & (n - 1):
            raise ConfigError(f"n_x must be a power of two >= 8, got {self.n_x}")
        if not self.x_max > self.x_min:
            raise ConfigError("x_max must exceed x_min")
        if not self.hbar > 0:
            raise ConfigError("hbar must be positive")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.n_x

    @property
    def length(self):
        return self.x_max - self.x_min

    @property
    def dp(self):
        return 2 * pi * self.hbar / (self.n_x * self.dx)

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.n_x)

    @property
    def p(self):
        return self.dp * (np.arange(self.n_x) - self.n_x // 2)

    @property
    def p_max(self):
        return self.dp * self.n_x / 2

    def mesh(self):
        """``(X, P)`` arrays of shape ``(n_x, n_x)``, indexed ``[x, p]``."""
        return np.meshgrid(self.x, self.p, indexing="ij")

    def interior(self, fraction=0.5):
        """Boolean mask of the central ``fraction`` of both axes."""
        xc = 0.5 * (self.x_min + self.x_max)
        half_x = 0.5 * fraction * self.length
        xm = np.abs(self.x - xc) < half_x
        pm = np.abs(self.p) < fraction * self.p_max
        return xm[:, None] & pm[None, :]

    def with_hbar(self, hbar):
        return PhaseGrid(self.x_min, self.x_max, self.n_x, hbar)

    def as_dict(self):
        return {"x_min": self.x_min, "x_max": self.x_max, "n_x": self.n_x, "hbar": self.hbar}


# --------------------------------------------------------------------------
# Fourier conventions
# --------------------------------------------------------------------------

def fourier_x_to_p(values, grid):
    """``F(p) = (1/2 pi hbar) * sum_x f(x) exp(-i x p / hbar) dx`` on the grid.

    Works along the last axis, so a 2D array is transformed row by row.
    """
    f = np.asarray(values, dtype=complex)
    n = grid.n_x
    # exp(-i x_i p_j / hbar) = exp(-i x_min p_j/hbar) * exp(-2 pi i i (j - n/2)/n)
    shifted = f * np.exp(1j * pi * np.arange(n))            # moves p=0 to index n/2
    spec = np.fft.fft(shifted, axis=-1)
    phase = np.exp(-1j * grid.x_min * grid.p / grid.hbar)
    return spec * phase * grid.dx / (2 * pi * grid.hbar)


def fourier_p_to_x(values, grid):
    """Inverse of :func:`fourier_x_to_p`: ``f(x) = sum_p F(p) exp(i x p/hbar) dp``."""
    F = np.asarray(values, dtype=complex)
    n = grid.n_x
    phase = np.exp(1j * grid.x_min * grid.p / grid.hbar)
    spec = np.fft.ifft(F * phase, axis=-1) * n
    return spec * np.exp(-1j * pi * np.arange(n)) * grid.dp


def upsample2(values, axis=-1):
    """Band-limited (periodic FFT) interpolation onto a grid twice as fine.

    Output index ``2k`` reproduces input sample ``k``; odd indices are the
    half-step midpoints. The Nyquist bin is split symmetrically so real input
    stays real.
    """
    a = np.moveaxis(np.asarray(values), axis, -1)
    n = a.shape[-1]
    spec = np.fft.fft(a, axis=-1)
    pad = np.zeros(a.shape[:-1] + (2 * n,), dtype=complex)
    h = n // 2
    pad[..., :h] = spec[..., :h]
    pad[..., -h + 1:] = spec[..., h + 1:]
    pad[..., h] = 0.5 * spec[..., h]
    pad[..., -h] = 0.5 * spec[..., h]
    out = np.fft.ifft(pad, axis=-1) * 2
    if not np.iscomplexobj(values):
        out = out.real
    return np.moveaxis(out, -1, axis)


def spectral_derivative(values, step, axis=-1, order=1):
    """Periodic FFT derivative of the given order along ``axis``."""
    a = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    n = a.shape[-1]
    k = 2 * pi * np.fft.fftfreq(n, d=step)
    if order % 2 == 1:
        k[n // 2] = 0.0  # odd derivatives of the Nyquist mode are ill-defined
    out = np.fft.ifft((1j * k) ** order * np.fft.fft(a, axis=-1), axis=-1)
    return np.moveaxis(out, -1, axis)


_erfc = np.vectorize(erfc, otypes=[float])


def plateau_window(u, radius, width):
    """Smooth plateau ``erfc((|u| - radius)/width) / 2``: ~1 inside, Gaussian tails outside.

    Multiplying a non-decaying symbol (a polynomial, a free-particle star
    exponential) by a wide plateau makes it representable on a finite grid
    while leaving star products unchanged, up to ``exp(-d^2/width^2)``, at
    distance ``d`` inside the plateau.
    """
    return 0.5 * _erfc((np.abs(np.asarray(u, dtype=float)) - radius) / width)


# --------------------------------------------------------------------------
# Gaussian / Fresnel integrals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianExponent:
    """Exponent ``i*(a*y**2 + b*y + c)``; fields may be numpy arrays."""

    a: complex
    b: complex = 0.0
    c: complex = 0.0


def fresnel_integral(g, tol=EPS_CLOSED_FORM):
    """``int exp(i(a y^2 + b y + c)) dy`` over the real line.

    The integral converges for ``Im a > 0`` and is defined on the real axis as
    the damped limit ``a + i0`` (``t -> t(1 - i0)`` for propagator phases).
    The closed form ``sqrt(i pi / a) exp(i(c - b^2/4a))`` with the principal
    root is continued analytically into ``Im a < 0``; it is continuous
    everywhere except across the negative imaginary ``a`` axis, where the
    square root has its cut. Points within ``tol`` of that cut raise
    :class:`BranchAmbiguity` instead of picking a sign.
    """
    a = np.asarray(g.a, dtype=complex)
    b = np.asarray(g.b, dtype=complex)
    c = np.asarray(g.c, dtype=complex)
    if np.any(a == 0):
        raise DegenerateQuadratic("quadratic coefficient vanishes")
    if np.any((np.abs(a.real) <= tol * np.abs(a)) & (a.imag < 0)):
        raise BranchAmbiguity("a lies on the branch cut of sqrt(i*pi/a)")
    out = np.sqrt(1j * pi / a) * np.exp(1j * (c - b * b / (4 * a)))
    return out[()] if out.ndim == 0 else out


def fresnel(a, b=0.0, c=0.0):
    return fresnel_integral(GaussianExponent(a, b, c))


# --------------------------------------------------------------------------
# Special functions
# --------------------------------------------------------------------------

LAGUERRE_MAX_ORDER = 64


def laguerre(n, x):
    """Laguerre polynomial ``L_n(x)`` by the three-term recurrence."""
    if n < 0 or int(n) != n:
        raise ConfigError("order must be a non-negative integer")
    if n > LAGUERRE_MAX_ORDER:
        raise OrderTooLarge(f"order {n} exceeds {LAGUERRE_MAX_ORDER}")
    xa = np.asarray(x, dtype=float)
    table = _kernels.laguerre_table(int(n), np.ascontiguousarray(xa.ravel()))
    out = table[int(n)].reshape(xa.shape)
    return out[()] if out.ndim == 0 else out


AIRY_RANGE = 40.0
_AI0 = 3.0 ** (-2.0 / 3.0) / gamma(2.0 / 3.0)
_AIP0 = 3.0 ** (-1.0 / 3.0) / gamma(1.0 / 3.0)
_SERIES_LO = -7.0   # below: oscillatory asymptotic expansion
_SERIES_HI = 1.0    # above: exponentially weighted integral


def _airy_series(x):
    x3 = x ** 3
    f = np.ones_like(x)
    g = x.copy()
    tf = np.ones_like(x)
    tg = x.copy()
    for k in range(200):
        tf = tf * x3 / ((3 * k + 2) * (3 * k + 3))
        tg = tg * x3 / ((3 * k + 3) * (3 * k + 4))
        f += tf
        g += tg
        if np.all(np.abs(tf) + np.abs(tg) < 1e-18 * (np.abs(f) + np.abs(g) + 1e-300)):
            break
    return _AI0 * f - _AIP0 * g


def _airy_positive(x):
    # Ai(x) = exp(-zeta)/pi * int_0^inf exp(-sqrt(x) t^2) cos(t^3/3) dt
    s = np.sqrt(x)
    zeta = 2.0 / 3.0 * x * s
    tmax = np.sqrt(42.0 / s)
    nodes = np.linspace(0.0, 1.0, 801)
    t = tmax[:, None] * nodes[None, :]
    vals = np.exp(-s[:, None] * t * t) * np.cos(t ** 3 / 3.0)
    h = tmax / 800.0
    integral = h * (vals.sum(axis=1) - 0.5 * vals[:, 0] - 0.5 * vals[:, -1])
    return np.exp(-zeta) / pi * integral


def _airy_negative(x):
    z = -x
    zeta = 2.0 / 3.0 * z ** 1.5
    u = [1.0]
    for k in range(1, 40):
        u.append(u[-1] * (6 * k - 5) * (6 * k - 3) * (6 * k - 1) / ((2 * k - 1) * 216 * k))
    P = np.zeros_like(z)
    Q = np.zeros_like(z)
    last = np.full_like(z, np.inf)
    done = np.zeros(z.shape, dtype=bool)
    for k, uk in enumerate(u):
        term = uk / zeta ** k
        grow = term > last
        done |= grow
        use = ~done
        sign = (-1) ** (k // 2)
        if k % 2 == 0:
            P = np.where(use, P + sign * term, P)
        else:
            Q = np.where(use, Q + sign * term, Q)
        last = np.where(use, term, last)
        done |= term < 1e-17
    phase = zeta - pi / 4
    return (np.cos(phase) * P + np.sin(phase) * Q) / (sqrt(pi) * z ** 0.25)


def airy_ai(x):
    """Airy function Ai on ``|x| <= 40``.

    Maclaurin series on ``[-7, 1]``, the integral
    ``exp(-zeta)/pi * int exp(-sqrt(x) t^2) cos(t^3/3) dt`` (trapezoid) above,
    and the oscillatory Poincare expansion below ``-7``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(np.abs(xa) > AIRY_RANGE):
        raise OutOfRange(f"Airy argument outside [-{AIRY_RANGE}, {AIRY_RANGE}]")
    flat = xa.ravel()
    out = np.empty_like(flat)
    lo = flat < _SERIES_LO
    hi = flat > _SERIES_HI
    mid = ~lo & ~hi
    if np.any(mid):
        out[mid] = _airy_series(flat[mid])
    if np.any(hi):
        out[hi] = _airy_positive(flat[hi])
    if np.any(lo):
        out[lo] = _airy_negative(flat[lo])
    out = out.reshape(xa.shape)
    return out[()] if out.ndim == 0 else out


THETA_TAIL = 1e-17
THETA_MAX_TERMS = 2_000_000


def theta_terms(z, tau):
    """Number of terms ``N`` so that ``|k| > N`` contributes below ``THETA_TAIL``."""
    imt = np.imag(tau)
    imz = float(np.max(np.abs(np.imag(z)))) if np.size(z) else 0.0
    target = -np.log(THETA_TAIL)
    # -pi*Im(tau)*k^2 + 2*k*|Im z| < -target  for all k >= N
    n = (2 * imz + np.sqrt(4 * imz * imz + 4 * pi * imt * target)) / (2 * pi * imt)
    return int(np.ceil(n)) + 1


def theta3(z, tau, eps=EPS_CLOSED_FORM):
    """Jacobi theta ``sum_k exp(i pi tau k^2 + 2 i k z)``.

    A real ``tau`` is damped to ``tau + i*eps``; ``Im(tau) < 0`` raises.
    """
    tau = complex(tau)
    if tau.imag == 0:
        tau = tau + 1j * eps
    if tau.imag <= 0:
        raise NonConvergent("theta series needs Im(tau) > 0")
    za = np.asarray(z, dtype=complex)
    nmax = theta_terms(za, tau)
    if nmax > THETA_MAX_TERMS:
        raise NonConvergent(f"theta series needs {nmax} terms")
    out = _kernels.theta_sum(np.ascontiguousarray(za.ravel()), tau, nmax).reshape(za.shape)
    return out[()] if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Second-order linear ODEs
# --------------------------------------------------------------------------

ZERO_BAND = 1e-12


def sample_callable(fn, t):
    """Evaluate ``fn`` on the array ``t``, vectorised when ``fn`` allows it."""
    try:
        vals = np.asarray(fn(t), dtype=float)
        if vals.shape == t.shape:
            return vals
        if vals.ndim == 0:
            return np.full(t.shape, float(vals))
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(s)) for s in t])


def solve_linear_ode(coeff_c, m, t0, t1, steps, initial, forcing=None, coeff_f=None):
    """RK4 trajectories of ``m y'' + c(t) y = w*f(t)`` for several initial states.

    ``initial`` has shape ``(k, 2)`` with rows ``(y(t0), y'(t0))``; ``forcing``
    gives ``w`` per row (default 0). Returns ``(t, traj)`` where ``traj`` has
    shape ``(k, steps+1, 2)``.
    """
    if steps < 16:
        raise ConfigError("steps must be >= 16")
    h = (t1 - t0) / steps
    th = t0 + 0.5 * h * np.arange(2 * steps + 1)
    cgrid = sample_callable(coeff_c, th)
    fgrid = sample_callable(coeff_f, th) if coeff_f is not None else np.zeros_like(th)
    y0 = np.atleast_2d(np.asarray(initial, dtype=float))
    w = np.zeros(y0.shape[0]) if forcing is None else np.asarray(forcing, dtype=float)
    traj = _kernels.rk4_linear(cgrid, fgrid, float(m), float(h), np.ascontiguousarray(y0), w)
    return th[::2], traj


def count_zeros(phi, start_sign=1.0, tol=ZERO_BAND):
    """Sign changes of ``phi[1:]``; entering the ``|phi| <= tol`` band counts as one."""
    return int(_kernels.zero_count(np.ascontiguousarray(phi, dtype=float), float(tol), float(start_sign)))


def integrate_ode_2nd(coeff_c, m, t0, t1, steps):
    """Solve ``m phi'' + c(t) phi = 0`` with ``phi(t0)=0, phi'(t0)=1`` by RK4.

    Returns ``(phi(t1), phi'(t1), zero_count)`` where ``zero_count`` is the
    number of sign changes of ``phi`` on ``(t0, t1]``.
    """
    _, traj = solve_linear_ode(coeff_c, m, t0, t1, steps, [[0.0, 1.0]])
    phi = traj[0, :, 0]
    start = 1.0 if t1 >= t0 else -1.0
    return float(phi[-1]), float(traj[0, -1, 1]), count_zeros(phi, start)

"""Quantum propagators: closed forms, the Gelfand-Yaglom construction for
quadratic Lagrangians, time-sliced Gaussian composition and spectral sums."""
from dataclasses import dataclass, field
from math import pi, sqrt
from typing import Callable

import numpy as np

from .errors import (
    CausticAtEndpoint,
    CausticCrossing,
    CausticSingularity,
    ConfigError,
    DegenerateQuadratic,
    NonConvergent,
    UnsupportedFamily,
    ZeroTime,
)
from .numerics import count_zeros, fresnel, sample_callable, solve_linear_ode, theta3

CAUSTIC_WINDOW = 1e-6
ENDPOINT_TOL = 1e-10
CIRCLE_EPS = 0.05
CIRCLE_AGREEMENT = 1e-10


def _positive(name, value):
    if not value > 0:
        raise ConfigError(f"{name} must be positive, got {value}")


# --------------------------------------------------------------------------
# Families
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Free:
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        _positive("m", self.m)
        _positive("hbar", self.hbar)


@dataclass(frozen=True)
class HarmonicOscillator:
    m: float = 1.0
    omega: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        _positive("m", self.m)
        _positive("omega", self.omega)
        _positive("hbar", self.hbar)


@dataclass(frozen=True)
class LinearPotential:
    """``H = p^2 + q``: mass 1/2 in the potential ``V(q) = q`` (unit force toward -q)."""

    hbar: float = 1.0

    def __post_init__(self):
        _positive("hbar", self.hbar)

    def as_quadratic(self):
        return QuadraticModel(m=0.5, c=lambda t: 0.0, f=lambda t: -1.0)


@dataclass(frozen=True)
class Circle:
    """Free rotor ``L = I phi'^2 / 2`` on the circle, evaluated at damped time ``t - i eps |t|``."""

    inertia: float = 1.0
    n_max: int | None = None
    eps: float = CIRCLE_EPS
    hbar: float = 1.0

    def __post_init__(self):
        _positive("inertia", self.inertia)
        _positive("hbar", self.hbar)
        _positive("eps", self.eps)
        if self.n_max is not None and self.n_max < 1:
            raise ConfigError("n_max must be >= 1")

    def damped(self, t):
        t = complex(t)
        return t.real - 1j * self.eps * abs(t.real) + 1j * t.imag

    def terms(self, t):
        """Dual-sum truncation from the Gaussian tail bound at the damped time."""
        if self.n_max is not None:
            return self.n_max
        decay = self.hbar * (-self.damped(t).imag) / (2 * self.inertia)
        return int(np.ceil(sqrt(40.0 / decay))) + 1


@dataclass(frozen=True)
class QuadraticModel:
    """``L = m q'^2/2 - c(t) q^2/2 + f(t) q``."""

    m: float = 1.0
    c: Callable = field(default=lambda t: 0.0)
    f: Callable = field(default=lambda t: 0.0)

    def __post_init__(self):
        _positive("m", self.m)


@dataclass(frozen=True)
class Quadratic:
    model: QuadraticModel
    steps: int = 2000
    hbar: float = 1.0


@dataclass(frozen=True)
class Sliced:
    model: QuadraticModel
    N: int = 64
    hbar: float = 1.0

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("Sliced needs N >= 2")


# --------------------------------------------------------------------------
# Gaussian kernels
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianKernel:
    """``prefactor * exp(i/hbar (A xf^2 + B xf x0 + C x0^2 + D xf + E x0 + F))``."""

    prefactor: complex
    quadratic: tuple
    linear: tuple = (0.0, 0.0)
    constant: complex = 0.0
    maslov: int = 0
    hbar: float = 1.0

    def action(self, xf, x0):
        A, B, C = self.quadratic
        D, E = self.linear
        xf = np.asarray(xf)
        x0 = np.asarray(x0)
        return A * xf ** 2 + B * xf * x0 + C * x0 ** 2 + D * xf + E * x0 + self.constant

    def __call__(self, xf, x0):
        return self.prefactor * np.exp(1j * self.action(xf, x0) / self.hbar)

    @property
    def coefficients(self):
        return np.array([*self.quadratic, *self.linear, self.constant], dtype=complex)


def compose(later, earlier):
    """Kernel of ``later o earlier``: ``int later(y, z) earlier(z, x) dz`` in closed form."""
    hbar = earlier.hbar
    A, B, C = earlier.quadratic
    D, E = earlier.linear
    al, be, ga = later.quadratic
    de, ep = later.linear
    den = A + ga
    if abs(den) < 1e-12 * (abs(A) + abs(ga) + 1e-300):
        raise CausticCrossing("composition denominator vanishes")
    lin = D + ep
    try:
        gauss = complex(fresnel(den / hbar))
    except DegenerateQuadratic as exc:
        raise CausticCrossing(str(exc)) from exc
    return GaussianKernel(
        prefactor=earlier.prefactor * later.prefactor * gauss,
        quadratic=(al - be * be / (4 * den), -B * be / (2 * den), C - B * B / (4 * den)),
        linear=(de - be * lin / (2 * den), E - B * lin / (2 * den)),
        constant=earlier.constant + later.constant - lin * lin / (4 * den),
        maslov=earlier.maslov + later.maslov + (1 if np.real(den) < 0 else 0),
        hbar=hbar,
    )


def _simpson(y, h):
    n = y.shape[-1] - 1
    return h / 3 * (y[..., 0] + y[..., -1] + 4 * y[..., 1:n:2].sum(-1) + 2 * y[..., 2:n - 1:2].sum(-1))


def gelfand_yaglom(model, t, steps=2000, hbar=1.0):
    """Propagator of a quadratic Lagrangian from the Jacobi field and the classical action.

    ``phi`` solves ``m phi'' + c phi = 0`` with ``phi(0)=0, phi'(0)=1``; the
    classical path is assembled from ``phi``, the companion solution ``chi``
    (``chi(0)=1, chi'(0)=0``) and a forced particular solution, and its action
    is integrated with Simpson's rule. The Maslov index is the number of zeros
    of ``phi`` on ``(0, t]``.
    """
    if t == 0:
        raise ZeroTime("propagator needs t != 0")
    if t < 0:
        raise ConfigError("gelfand_yaglom integrates forward in time (t > 0)")
    steps = int(steps) + (int(steps) % 2)
    m = model.m
    ts, traj = solve_linear_ode(model.c, m, 0.0, t, steps, [[0.0, 1.0], [1.0, 0.0], [0.0, 0.0]],
                                forcing=[0.0, 0.0, 1.0], coeff_f=model.f)
    phi, chi, part = traj[0, :, 0], traj[1, :, 0], traj[2, :, 0]
    dphi, dchi, dpart = traj[0, :, 1], traj[1, :, 1], traj[2, :, 1]
    phiT = phi[-1]
    if abs(phiT) < ENDPOINT_TOL:
        raise CausticAtEndpoint(f"phi(t) = {phiT:.3e}: t is a caustic")
    u = np.stack([phi / phiT, chi - chi[-1] * phi / phiT, part - part[-1] * phi / phiT])
    du = np.stack([dphi / phiT, dchi - chi[-1] * dphi / phiT, dpart - part[-1] * dphi / phiT])
    c = sample_callable(model.c, ts)
    f = sample_callable(model.f, ts)
    h = t / steps
    M = np.empty((3, 3))
    for k in range(3):
        for l in range(k, 3):
            M[k, l] = M[l, k] = _simpson(0.5 * m * du[k] * du[l] - 0.5 * c * u[k] * u[l], h)
    N = np.array([_simpson(f * u[k], h) for k in range(3)])
    nu = count_zeros(phi)
    pref = sqrt(m / (2 * pi * hbar * abs(phiT))) * np.exp(-0.25j * pi) * np.exp(-0.5j * pi * nu)
    return GaussianKernel(
        prefactor=complex(pref),
        quadratic=(M[0, 0], 2 * M[0, 1], M[1, 1]),
        linear=(2 * M[0, 2] + N[0], 2 * M[1, 2] + N[1]),
        constant=M[2, 2] + N[2],
        maslov=nu,
        hbar=hbar,
    )


def _slice_kernel(model, t0, dt, hbar, measure):
    tm = t0 + 0.5 * dt
    cm = float(sample_callable(model.c, np.array([tm]))[0])
    fm = float(sample_callable(model.f, np.array([tm]))[0])
    m = model.m
    diag = m / (2 * dt) - dt * cm / 8
    cross = -m / dt - dt * cm / 4
    weight = m / dt if measure == "flat" else -cross
    return GaussianKernel(
        prefactor=complex(np.sqrt(weight / (2j * pi * hbar))),
        quadratic=(diag, cross, diag),
        linear=(dt * fm / 2, dt * fm / 2),
        hbar=hbar,
    )


def time_sliced(model, t, N, hbar=1.0, t0=0.0, measure="van_vleck"):
    """N-slice propagator with the midpoint action, composed slice by slice in closed form.

    Each slice carries the Van Vleck weight ``sqrt(-d2S/dxdy / 2 pi i hbar)`` of
    its own discretised action, which makes the whole kernel (prefactor
    included) converge as ``N^-2``. ``measure="flat"`` uses the bare
    ``sqrt(m / 2 pi i hbar dt)`` instead; the exponent coefficients still
    converge as ``N^-2`` but the prefactor then converges only as ``N^-1``.
    """
    if measure not in ("van_vleck", "flat"):
        raise ConfigError("measure must be 'van_vleck' or 'flat'")
    if N < 2:
        raise ConfigError("N must be >= 2")
    if t == 0:
        raise ZeroTime("propagator needs t != 0")
    dt = t / N
    out = _slice_kernel(model, t0, dt, hbar, measure)
    for k in range(1, N):
        out = compose(_slice_kernel(model, t0 + k * dt, dt, hbar, measure), out)
    return out


# --------------------------------------------------------------------------
# Closed forms
# --------------------------------------------------------------------------

def _free_root(m, hbar, t):
    """``sqrt(m / (2 pi i hbar t))`` on the branch continuous from ``Im t < 0``."""
    return np.sqrt(m / (2j * pi * hbar * complex(t)))


def sqrt_sin(theta):
    """``sqrt(sin theta)`` continued analytically from ``Im theta < 0``.

    Writing ``sin theta = e^{i theta}/(2i) (1 - e^{-2i theta})`` keeps
    ``|e^{-2i theta}| <= 1`` on the closed lower half plane, so the principal
    root of the second factor never crosses its cut. On the real axis this
    equals ``e^{i pi nu/2} sqrt|sin theta|`` with ``nu = floor(theta/pi)``, so
    its reciprocal carries the Maslov phase ``e^{-i pi nu/2}``.
    """
    theta = np.asarray(theta, dtype=complex)
    return np.exp(0.5j * theta - 0.25j * pi) / sqrt(2.0) * np.sqrt(1 - np.exp(-2j * theta))


def maslov_index(omega, t):
    """Number of zeros of ``sin(omega s)`` for ``s`` in ``(0, t]``."""
    return int(np.floor(omega * t / pi))


def _check_time(t):
    if t == 0:
        raise ZeroTime("propagator needs t != 0")


def _ho(spec, xf, t, x0):
    m, w, hb = spec.m, spec.omega, spec.hbar
    tc = complex(t)
    th = w * tc
    if tc.imag == 0:
        k = np.round(th.real / pi)
        if abs(th.real - k * pi) < CAUSTIC_WINDOW:
            raise CausticSingularity(f"omega*t = {th.real:.9g} is within {CAUSTIC_WINDOW} of a caustic")
    elif tc.imag > 0:
        raise ConfigError("complex times need Im t <= 0")
    s = np.sin(th)
    pref = np.sqrt(m * w / (2j * pi * hb)) / sqrt_sin(th)
    if tc.imag == 0:
        # explicit Maslov form on the real axis
        nu = maslov_index(w, tc.real) if tc.real > 0 else -maslov_index(w, -tc.real) - 1
        pref = np.sqrt(m * w / (2j * pi * hb * abs(s.real))) * np.exp(-0.5j * pi * nu)
    phase = 1j * m * w / (2 * hb * s) * ((xf ** 2 + x0 ** 2) * np.cos(th) - 2 * xf * x0)
    return pref * np.exp(phase)


def _circle_dual(spec, xf, t, x0, n_terms=None):
    td = spec.damped(t)
    N = spec.terms(t) if n_terms is None else n_terms
    n = np.arange(-N, N + 1)
    d = np.asarray(xf - x0, dtype=float)
    w = np.exp(-1j * spec.hbar * n ** 2 * td / (2 * spec.inertia))
    return (np.exp(1j * np.multiply.outer(d, n)) @ w) / (2 * pi)


def _circle_theta(spec, xf, t, x0):
    td = spec.damped(t)
    I, hb = spec.inertia, spec.hbar
    d = np.asarray(xf - x0, dtype=float)
    d = (d + pi) % (2 * pi) - pi
    z = pi * I * d / (hb * td)
    tau = 2 * pi * I / (hb * td)
    return np.sqrt(I / (2j * pi * hb * td)) * np.exp(1j * I * d ** 2 / (2 * hb * td)) * theta3(z, tau)


def propagate(spec, xf, t, x0, check_circle=True):
    """``K(xf, t, x0, 0)`` from the family's closed form; arrays broadcast over ``xf, x0``."""
    _check_time(t)
    xf = np.asarray(xf, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    if isinstance(spec, Free):
        tc = complex(t)
        out = _free_root(spec.m, spec.hbar, tc) * np.exp(1j * spec.m * (xf - x0) ** 2 / (2 * spec.hbar * tc))
    elif isinstance(spec, HarmonicOscillator):
        out = _ho(spec, xf, t, x0)
    elif isinstance(spec, LinearPotential):
        tc = complex(t)
        hb = spec.hbar
        out = _free_root(0.5, hb, tc) * np.exp(
            1j * (xf - x0) ** 2 / (4 * tc * hb) - 1j * tc * (xf + x0) / (2 * hb) - 1j * tc ** 3 / (12 * hb)
        )
    elif isinstance(spec, Circle):
        out = _circle_theta(spec, xf, t, x0)
        if check_circle:
            dual = _circle_dual(spec, xf, t, x0)
            scale = max(float(np.max(np.abs(dual))), 1.0)
            if np.max(np.abs(out - dual)) > CIRCLE_AGREEMENT * scale:
                raise NonConvergent("theta and dual-sum forms of the circle propagator disagree")
    elif isinstance(spec, Quadratic):
        out = gelfand_yaglom(spec.model, t, spec.steps, spec.hbar)(xf, x0)
    elif isinstance(spec, Sliced):
        out = time_sliced(spec.model, t, spec.N, spec.hbar)(xf, x0)
    else:
        raise UnsupportedFamily(f"unknown propagator family {type(spec).__name__}")
    out = np.asarray(out, dtype=complex)
    return out[()] if out.ndim == 0 else out


def hermite_functions(n_terms, x, m=1.0, omega=1.0, hbar=1.0):
    """Oscillator eigenfunctions ``psi_0 .. psi_{n_terms-1}`` at ``x`` by the stable recurrence."""
    x = np.asarray(x, dtype=float)
    xi = x * sqrt(m * omega / hbar)
    out = np.empty((n_terms,) + x.shape)
    out[0] = (m * omega / (pi * hbar)) ** 0.25 * np.exp(-0.5 * xi ** 2)
    if n_terms > 1:
        out[1] = sqrt(2.0) * xi * out[0]
    for k in range(1, n_terms - 1):
        out[k + 1] = sqrt(2.0 / (k + 1)) * xi * out[k] - sqrt(k / (k + 1)) * out[k - 1]
    return out


def spectral_form(spec, xf, t, x0, n_terms):
    """Truncated eigenfunction expansion ``sum exp(-i E_n t/hbar) psi_n(xf) conj(psi_n(x0))``.

    For the circle ``n`` runs over ``-n_terms..n_terms`` and ``t`` is used as
    given (pass a damped time).
    """
    if n_terms < 1:
        raise ConfigError("n_terms must be >= 1")
    tc = complex(t)
    xf, x0 = np.broadcast_arrays(np.asarray(xf, dtype=float), np.asarray(x0, dtype=float))
    if isinstance(spec, HarmonicOscillator):
        psi_f = hermite_functions(n_terms, xf, spec.m, spec.omega, spec.hbar)
        psi_0 = hermite_functions(n_terms, x0, spec.m, spec.omega, spec.hbar)
        e = np.exp(-1j * spec.omega * (np.arange(n_terms) + 0.5) * tc)
        out = np.tensordot(e, psi_f * psi_0, axes=1)
    elif isinstance(spec, Circle):
        n = np.arange(-n_terms, n_terms + 1)
        d = np.asarray(xf, dtype=float) - np.asarray(x0, dtype=float)
        w = np.exp(-1j * spec.hbar * n ** 2 * tc / (2 * spec.inertia))
        out = (np.exp(1j * np.multiply.outer(d, n)) @ w) / (2 * pi)
    else:
        raise UnsupportedFamily("spectral_form needs a discrete spectrum (oscillator or circle)")
    out = np.asarray(out, dtype=complex)
    return out[()] if out.ndim == 0 else out

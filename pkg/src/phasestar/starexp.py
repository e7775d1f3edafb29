"""Star exponentials from propagators and back, spectral inversion to Wigner
functions, level projection and Fourier-Dirichlet partial sums."""
from dataclasses import dataclass
from math import pi

import numpy as np

from . import _kernels
from .errors import (
    CausticSingularity,
    ConfigError,
    DegenerateQuadratic,
    UnsupportedFamily,
    WindowTooSmall,
)
from .numerics import PhaseGrid, fresnel, laguerre
from .propagators import (
    CAUSTIC_WINDOW,
    Circle,
    Free,
    GaussianKernel,
    HarmonicOscillator,
    LinearPotential,
    Quadratic,
    Sliced,
    _circle_theta,
    _free_root,
    gelfand_yaglom,
    propagate,
    sqrt_sin,
    time_sliced,
)
from .weyl import SampledSymbol

TAIL_TOL = 1e-12
QUAD_TAIL_TOL = 1e-10
FFT_EPS = 0.01
FFT_SPREAD = 0.25
MAX_NODES = 1_000_000
LEVEL_NODES = 96
CIRCLE_NODES = 512
TILT_SCALE = 1.0
# the oscillator star exponential is refused for omega*t within this distance of an odd multiple of pi
STAREXP_CAUSTIC_WINDOW = 1e-5


def _out(a):
    a = np.asarray(a, dtype=complex)
    return a[()] if a.ndim == 0 else a


def hamiltonian(spec, q, p):
    """Classical Hamiltonian of a family (circle: ``p^2 / 2I``)."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if isinstance(spec, Free):
        return p ** 2 / (2 * spec.m) + 0 * q
    if isinstance(spec, HarmonicOscillator):
        return p ** 2 / (2 * spec.m) + 0.5 * spec.m * spec.omega ** 2 * q ** 2
    if isinstance(spec, LinearPotential):
        return p ** 2 + q
    if isinstance(spec, Circle):
        return p ** 2 / (2 * spec.inertia) + 0 * q
    raise UnsupportedFamily(f"no Hamiltonian for {type(spec).__name__}")


def _ho_caustic(spec, t):
    tc = complex(t)
    if tc.imag == 0:
        half = spec.omega * tc.real / 2
        k = np.round(half / pi - 0.5)
        if abs(half - (k + 0.5) * pi) < 0.5 * STAREXP_CAUSTIC_WINDOW:
            raise CausticSingularity("omega*t is an odd multiple of pi")


def circle_star_exp(spec, p, t, n_terms=None):
    """``sum_n exp(-i hbar n^2 t / 2I) sinc(p/hbar - n)``, truncated at ``|n| <= n_terms``."""
    p = np.asarray(p, dtype=float)
    tc = complex(t)
    N = spec.terms(t) if n_terms is None else n_terms
    n = np.arange(-N, N + 1)
    w = np.exp(-1j * spec.hbar * n ** 2 * tc / (2 * spec.inertia))
    return np.sinc(np.subtract.outer(p / spec.hbar, n)) @ w


class StarExponentialClosedForm:
    """Closed-form ``Exp(-itH/hbar)(q, p)`` of a propagator family.

    Complex ``t`` with ``Im t <= 0`` is accepted everywhere. For the circle the
    sinc sum is evaluated at the family's damped time unless ``damped=False``.
    """

    def __init__(self, spec):
        if not isinstance(spec, (Free, HarmonicOscillator, LinearPotential, Circle)):
            raise UnsupportedFamily(f"no closed-form star exponential for {type(spec).__name__}")
        self.spec = spec

    @property
    def hbar(self):
        return self.spec.hbar

    def __call__(self, q, p, t, damped=True):
        s = self.spec
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        shape = np.broadcast(q, p).shape
        if t == 0:
            return _out(np.ones(shape))
        tc = complex(t)
        hb = s.hbar
        if isinstance(s, Free):
            out = np.exp(-1j * tc * p ** 2 / (2 * s.m * hb)) + 0 * q
        elif isinstance(s, HarmonicOscillator):
            _ho_caustic(s, tc)
            half = s.omega * tc / 2
            out = np.exp(-2j * np.tan(half) * hamiltonian(s, q, p) / (hb * s.omega)) / np.cos(half)
        elif isinstance(s, LinearPotential):
            out = np.exp(-1j * tc * (q + p ** 2 + tc ** 2 / 12) / hb)
        else:
            tt = s.damped(tc) if damped else tc
            out = circle_star_exp(s, p, tt, s.terms(tc)) + 0 * q
        return _out(np.broadcast_to(out, shape))


# --------------------------------------------------------------------------
# Star exponential from a propagator
# --------------------------------------------------------------------------

def gaussian_kernel(spec, t):
    """Exact Gaussian form of the propagator for Gaussian families."""
    tc = complex(t)
    if isinstance(spec, Free):
        a = spec.m / (2 * tc)
        return GaussianKernel(_free_root(spec.m, spec.hbar, tc), (a, -2 * a, a), hbar=spec.hbar)
    if isinstance(spec, HarmonicOscillator):
        pref = complex(propagate(spec, 0.0, t, 0.0))
        th = spec.omega * tc
        mw = spec.m * spec.omega
        a = mw * np.cos(th) / (2 * np.sin(th))
        return GaussianKernel(pref, (a, -mw / np.sin(th), a), hbar=spec.hbar)
    if isinstance(spec, LinearPotential):
        a = 1 / (4 * tc)
        return GaussianKernel(_free_root(0.5, spec.hbar, tc), (a, -2 * a, a), (-tc / 2, -tc / 2),
                              -tc ** 3 / 12, hbar=spec.hbar)
    if isinstance(spec, Quadratic):
        return gelfand_yaglom(spec.model, t, spec.steps, spec.hbar)
    if isinstance(spec, Sliced):
        return time_sliced(spec.model, t, spec.N, spec.hbar)
    raise UnsupportedFamily(f"{type(spec).__name__} has no Gaussian propagator")


def _qprime_coefficients(kernel, q):
    """Quadratic, linear and constant coefficients in ``q'`` of ``S(q+q', q-q')``."""
    A, B, C = kernel.quadratic
    D, E = kernel.linear
    a2 = A - B + C
    a1 = 2 * (A - C) * q + D - E
    a0 = (A + B + C) * q ** 2 + (D + E) * q + kernel.constant
    return a2, a1, a0


def _fresnel_route(kernel, q, p):
    hb = kernel.hbar
    a2, a1, a0 = _qprime_coefficients(kernel, q)
    try:
        val = fresnel(a2 / hb, (a1 - 2 * p) / hb, a0 / hb)
    except DegenerateQuadratic as exc:
        raise CausticSingularity("star exponential is singular at this time") from exc
    return 2 * kernel.prefactor * val


def _window_for(kernel, tol=TAIL_TOL):
    """Half-width ``Q`` with ``exp(-Im(a2) Q^2 / hbar) < tol``."""
    a2 = kernel.quadratic[0] - kernel.quadratic[1] + kernel.quadratic[2]
    decay = np.imag(a2) / kernel.hbar
    if decay <= 0:
        raise WindowTooSmall("kernel is not damped in q'; use a complex time")
    return float(np.sqrt(-np.log(tol) / decay)), a2


def _quadrature_route(kernel, q, p, window=None):
    hb = kernel.hbar
    need, a2 = _window_for(kernel, QUAD_TAIL_TOL)
    Q = need if window is None else float(window)
    if Q < need * (1 - 1e-12):
        tail = np.exp(-np.imag(a2) * Q * Q / hb)
        raise WindowTooSmall(f"q' window {Q:.4g} leaves a tail of {tail:.2e}")
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q, p = np.broadcast_arrays(q, p)
    flat_q, flat_p = q.ravel(), p.ravel()
    # the damped chirp exp(i a2 s^2 / hbar) has spectrum ~ exp(-k^2 Im(a2) hbar / 4|a2|^2);
    # sample so that its first alias, offset by the largest linear frequency, is below tol
    shift = (np.max(np.abs(_qprime_coefficients(kernel, flat_q)[1])) + 2 * np.max(np.abs(flat_p))) / hb
    k_nyq = shift + 2 * abs(a2) / hb * np.sqrt(-np.log(QUAD_TAIL_TOL) * hb / np.imag(a2))
    nodes = int(np.ceil(Q * k_nyq / pi)) + 1
    nodes += (nodes + 1) % 2
    if nodes > MAX_NODES:
        raise WindowTooSmall(f"quadrature would need {nodes} nodes")
    # the q'-linear coefficient fixes the integral up to the phase exp(i a0 / hbar), so
    # points are grouped by it (a single group when the kernel is symmetric, A = C)
    _, a1, a0 = _qprime_coefficients(kernel, flat_q)
    a1 = np.broadcast_to(a1, flat_q.shape)
    out = np.empty(flat_q.shape, dtype=complex)
    for ua in np.unique(a1):
        sel = a1 == ua
        up, inv = np.unique(flat_p[sel], return_inverse=True)
        coef = np.array([a2, ua, 0.0], dtype=complex) / hb
        out[sel] = _kernels.gaussian_fourier_sum(coef, Q, nodes, 2 * up / hb)[inv]
    out *= np.exp(1j * a0 / hb)
    return (2 * kernel.prefactor * out).reshape(q.shape)


def _circle_route(spec, q, p, t, nodes=CIRCLE_NODES):
    """``2 int_{-pi/2}^{pi/2} exp(-2iq'p/hbar) K_theta(q+q', t, q-q') dq'`` by Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    qp = 0.5 * pi * x
    w = 0.5 * pi * w
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    q, p = np.broadcast_arrays(q, p)
    K = _circle_theta(spec, 2 * qp, t, 0.0)          # depends only on xf - x0 = 2q'
    phase = np.exp(-2j * np.multiply.outer(p.ravel(), qp) / spec.hbar)
    return (2 * phase @ (w * K)).reshape(p.shape)


def _adaptive_eps(spec, q, p, t):
    """Largest damping ``eps <= FFT_EPS`` with ``eps |t| |d log Exp / dt| <= FFT_SPREAD``.

    Damping ``t -> t(1 - i eps)`` multiplies the value by roughly
    ``exp(-eps t |d log Exp/dt|)`` (``H / hbar`` for the free and linear
    families); after the three-point extrapolation the remainder is about
    ``spread^3 / 48``.
    """
    H = float(np.max(np.abs(hamiltonian(spec, q, p))))
    if isinstance(spec, LinearPotential):
        H += abs(t) ** 2 / 4
    rate = H / spec.hbar
    if isinstance(spec, HarmonicOscillator):
        # d/dt of the exponent and of log sec(omega t / 2)
        half = spec.omega * abs(t) / 2
        rate = rate / np.cos(half) ** 2 + spec.omega * abs(np.tan(half)) / 2
    spread = abs(t) * rate
    return FFT_EPS if spread <= FFT_SPREAD / FFT_EPS else FFT_SPREAD / spread


def star_exp_from_propagator(spec, q, p, t, route="fresnel", eps=None, window=None):
    """``Exp(-itH/hbar)(q,p) = 2 int exp(-2iq'p/hbar) K(q+q', t, q-q', 0) dq'``.

    ``route="fresnel"`` does the Gaussian ``q'`` integral in closed form.
    ``route="fft"`` sums it on a uniform ``q'`` window at the damped times
    ``t(1 - i eps)``, ``t(1 - i eps/2)``, ``t(1 - i eps/4)`` and extrapolates to
    ``eps -> 0``; by default ``eps`` shrinks with ``t max|H|`` so that the
    extrapolation remainder stays near ``3e-4``. The circle is always integrated numerically over one turn at
    its damped time.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    shape = np.broadcast(q, p).shape
    if t == 0:
        return _out(np.ones(shape))
    if isinstance(spec, Circle):
        return _out(_circle_route(spec, q, p, t))
    if route == "fresnel":
        if isinstance(spec, HarmonicOscillator):
            _ho_caustic(spec, t)
        return _out(np.broadcast_to(_fresnel_route(gaussian_kernel(spec, t), q, p), shape))
    if route != "fft":
        raise ConfigError("route must be 'fresnel' or 'fft'")
    if isinstance(spec, (Quadratic, Sliced)):
        raise UnsupportedFamily("the damped quadrature route needs a closed-form propagator")
    tc = complex(t)
    if eps is None:
        eps = _adaptive_eps(spec, q, p, tc)
    vals = [_quadrature_route(gaussian_kernel(spec, tc * (1 - 1j * e)), q, p, window)
            for e in (eps, eps / 2, eps / 4)]
    return _out(np.reshape((vals[0] - 6 * vals[1] + 8 * vals[2]) / 3, shape))


def propagator_from_star_exp(cf, xf, t, x0):
    """``K = (1/2 pi hbar) int exp(i(xf-x0)p/hbar) Exp((xf+x0)/2, p) dp``.

    The momentum integral is a Fresnel integral for the free, oscillator and
    linear families; for the circle the sinc terms transform to plane waves
    restricted to one turn.
    """
    if t == 0:
        raise DegenerateQuadratic("the t = 0 star exponential gives a delta function")
    s = cf.spec if isinstance(cf, StarExponentialClosedForm) else cf
    xf = np.asarray(xf, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    q = 0.5 * (xf + x0)
    d = xf - x0
    hb = s.hbar
    tc = complex(t)
    if isinstance(s, Free):
        return _out(fresnel(-tc / (2 * s.m * hb), d / hb, 0 * q) / (2 * pi * hb))
    if isinstance(s, HarmonicOscillator):
        _ho_caustic(s, tc)
        half = s.omega * tc / 2
        tn = np.tan(half)
        a = -tn / (s.m * hb * s.omega)
        c = -tn * s.m * s.omega * q ** 2 / hb
        return _out(fresnel(a, d / hb, c) / (np.cos(half) * 2 * pi * hb))
    if isinstance(s, LinearPotential):
        return _out(fresnel(-tc / hb, d / hb, -tc * (q + tc ** 2 / 12) / hb) / (2 * pi * hb))
    if isinstance(s, Circle):
        td = s.damped(tc)
        N = s.terms(tc)
        n = np.arange(-N, N + 1)
        dd = (d + pi) % (2 * pi) - pi
        w = np.exp(-1j * hb * n ** 2 * td / (2 * s.inertia))
        return _out((np.exp(1j * np.multiply.outer(dd, n)) @ w) / (2 * pi))
    raise UnsupportedFamily(f"{type(s).__name__} has no closed-form star exponential")


# --------------------------------------------------------------------------
# Spectral inversion
# --------------------------------------------------------------------------

@dataclass
class SpectralSlice:
    """One spectral component: a discrete level ``n`` or a continuum energy."""

    family: str
    energy: float
    rho: SampledSymbol
    n: int | None = None
    degeneracy: int = 1


def airy_wigner(q, p, E, hbar=1.0):
    """Energy-normalised Wigner function of ``H = p^2 + q`` at energy ``E``."""
    from .numerics import AIRY_RANGE, airy_ai

    u = np.asarray(p, dtype=float) ** 2 + np.asarray(q, dtype=float) - E
    scale = (4 * hbar) ** (1 / 3)
    arg = 4 ** (1 / 3) * u / hbar ** (2 / 3)
    # Ai(x) < 1e-70 beyond the evaluator's range on the decaying side
    ai = airy_ai(np.where(arg > AIRY_RANGE, AIRY_RANGE, arg))
    return scale / (2 * pi * hbar ** 2) * np.where(arg > AIRY_RANGE, 0.0, ai)


def _trapezoid_nodes(S, nodes):
    s = np.linspace(-S, S, nodes)
    w = np.full(nodes, s[1] - s[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return s, w


def wigner_continuous(cf, E, grid, t_window=None, eps=0.2, nodes=None):
    """``rho_E = (2 pi hbar)^-2 int Exp(-itH/hbar) exp(iEt/hbar) dt`` on ``grid``.

    Linear potential: the time integral runs along the tilted contour
    ``t = s(1 - i eps tanh(s / TILT_SCALE))``, where the cubic phase decays;
    the integrand is entire, so the tilt does not change the value, and a
    smooth tilt keeps the trapezoid rule spectrally accurate. Free particle: the real
    axis is damped by ``exp(-eps |t|)``, giving a Lorentzian of half-width
    ``eps hbar`` in ``p^2/2m - E``; ``nodes`` applies to the linear family only.
    """
    s = cf.spec if isinstance(cf, StarExponentialClosedForm) else cf
    hb = s.hbar
    if not eps > 0:
        raise ConfigError("eps must be positive")
    X, P = grid.mesh()
    pref = 1 / (2 * pi * hb) ** 2
    if isinstance(s, LinearPotential):
        u = (X + P ** 2 - E).ravel()
        # |integrand| <= exp(-eps (|s|^3/4 - |s| max(-u)) / hbar) on the tilted rays
        uneg = max(0.0, -float(np.min(u)))
        target = -np.log(TAIL_TOL) * hb / eps
        need = (4 * target) ** (1 / 3)
        while np.tanh(need / TILT_SCALE) * (need ** 3 / 4 - need * uneg) < target:
            need *= 1.05
        S = need if t_window is None else float(t_window)
        if S < need * (1 - 1e-12):
            raise WindowTooSmall(f"time window {S:.4g} < {need:.4g}")
        fmax = (np.max(np.abs(u)) + S * S / 4 * (1 + eps)) / hb
        n_nodes = nodes or int(np.ceil(2 * S * fmax / 2.5)) * 2 + 1
        sgrid, w = _trapezoid_nodes(S, n_nodes)
        th = np.tanh(sgrid / TILT_SCALE)
        tt = sgrid * (1 - 1j * eps * th)
        dt_ds = 1 - 1j * eps * (th + sgrid * (1 - th * th) / TILT_SCALE)
        base = w * dt_ds * np.exp(-1j * tt ** 3 / (12 * hb))
        out = np.empty(u.shape, dtype=complex)
        for lo in range(0, u.size, 2048):
            chunk = u[lo:lo + 2048]
            out[lo:lo + 2048] = np.exp(-1j * np.outer(chunk, tt) / hb) @ base
        vals = (pref * out).reshape(X.shape)
        return SampledSymbol(vals.real, grid, f"rho_E={E:g}")
    if isinstance(s, Free):
        need = -np.log(TAIL_TOL) / eps
        T = need if t_window is None else float(t_window)
        if T < need * (1 - 1e-12):
            raise WindowTooSmall(f"time window {T:.4g} < {need:.4g}")
        w_e = (grid.p ** 2 / (2 * s.m) - E) / hb
        # each half-line carries a pure exponential, integrated exactly over [0, T]
        rate = eps + 1j * w_e
        col = pref * 2 * np.real((1 - np.exp(-rate * T)) / rate)
        vals = np.broadcast_to(col[None, :], X.shape)
        return SampledSymbol(vals.copy(), grid, f"rho_E={E:g}")
    raise UnsupportedFamily("continuous-spectrum inversion needs the free or linear family")


def ho_level(n, q, p, m=1.0, omega=1.0, hbar=1.0):
    """Oscillator level ``((-1)^n / pi hbar) exp(-2H/hbar w) L_n(4H/hbar w)``."""
    H = hamiltonian(HarmonicOscillator(m, omega, hbar), q, p)
    x = 2 * H / (hbar * omega)
    return (-1) ** n / (pi * hbar) * np.exp(-x) * laguerre(n, 2 * x)


def circle_level(n, p, hbar=1.0):
    """Rotor level ``(1 / 2 pi hbar) sinc(p/hbar - n)``."""
    return np.sinc(np.asarray(p, dtype=float) / hbar - n) / (2 * pi * hbar)


def project_level(cf, n, grid, nodes=LEVEL_NODES, shift=None):
    """Extract level ``n`` by averaging ``Exp * exp(iE_n t/hbar)`` over one period.

    The period integral is taken along ``t = s - i shift``: the integrand is
    periodic and analytic below the real axis, so the shifted contour gives
    the same value while avoiding the oscillator's real-axis poles, and the
    trapezoid rule converges geometrically. The result is divided by
    ``2 pi hbar`` so that it is a unit-normalised Wigner function. Circle
    levels ``n`` and ``-n`` share an energy, so the circle returns their sum.
    """
    s = cf.spec if isinstance(cf, StarExponentialClosedForm) else cf
    if not isinstance(s, (HarmonicOscillator, Circle)):
        raise UnsupportedFamily("level projection needs a discrete spectrum")
    if n < 0 or int(n) != n:
        raise ConfigError("level index must be a non-negative integer")
    hb = s.hbar
    X, P = grid.mesh()
    if isinstance(s, HarmonicOscillator):
        period = 2 * pi / s.omega
        energy = hb * s.omega * (n + 0.5)
        delta = (1.0 / s.omega) if shift is None else shift
        closed = StarExponentialClosedForm(s)
        acc = np.zeros(X.shape, dtype=complex)
        H = hamiltonian(s, X, P)
        for k in range(nodes):
            t = period * k / nodes - 1j * delta
            half = s.omega * t / 2
            acc += np.exp(-2j * np.tan(half) * H / (hb * s.omega)) / np.cos(half) * np.exp(1j * energy * t / hb)
        rho = acc / nodes / (2 * pi * hb)
        return SpectralSlice("harmonic", energy, SampledSymbol(rho.real, grid, f"rho_{n}"), n=n)
    period = 4 * pi * s.inertia / hb
    energy = hb ** 2 * n ** 2 / (2 * s.inertia)
    delta = (2 * s.inertia / hb) if shift is None else shift
    N = int(np.ceil(np.sqrt(40 * 2 * s.inertia / (hb * delta)))) + abs(n) + 1
    m_nodes = max(CIRCLE_NODES, 4 * N * N)
    pv = grid.p
    acc = np.zeros(pv.shape, dtype=complex)
    for k in range(m_nodes):
        t = period * k / m_nodes - 1j * delta
        acc += circle_star_exp(s, pv, t, N) * np.exp(1j * energy * t / hb)
    rho = np.broadcast_to((acc / m_nodes / (2 * pi * hb)).real[None, :], X.shape)
    return SpectralSlice("circle", energy, SampledSymbol(rho.copy(), grid, f"rho_{n}"), n=n,
                         degeneracy=1 if n == 0 else 2)


def fd_partial_sum(spec, N, q, p, t, pairing=None):
    """Fourier-Dirichlet partial sum ``sum_{n <= N} exp(-iE_n t/hbar) c rho_n(q,p)``.

    ``c`` defaults to ``2 pi hbar``, the weight that turns unit-normalised
    Wigner functions into the spectral projector symbols of the star
    exponential. The circle sums ``|n| <= N``.
    """
    hb = spec.hbar
    c = 2 * pi * hb if pairing is None else pairing
    tc = complex(t)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if isinstance(spec, HarmonicOscillator):
        out = 0
        for n in range(N + 1):
            out = out + np.exp(-1j * spec.omega * (n + 0.5) * tc) * ho_level(n, q, p, spec.m, spec.omega, hb)
        return _out(c * out)
    if isinstance(spec, Circle):
        out = 0
        for n in range(-N, N + 1):
            out = out + np.exp(-1j * hb * n ** 2 * tc / (2 * spec.inertia)) * circle_level(n, p, hb)
        return _out(c * out + 0 * q)
    raise UnsupportedFamily("Fourier-Dirichlet sums need a discrete spectrum")

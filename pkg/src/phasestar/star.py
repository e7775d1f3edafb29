"""Moyal star products: operator composition, the 4D integral, the exact
bidifferential series on polynomials, brackets, Bopp-shift residuals and
unitary evolution of Wigner functions."""
import ast
from dataclasses import dataclass
from math import factorial, pi

import numpy as np

from . import _kernels
from .errors import ConfigError, DegreeOverflow, GridMismatch, GridTooLarge, UnsupportedHamiltonian
from .numerics import PhaseGrid, spectral_derivative, upsample2
from .weyl import OperatorKernel, SampledSymbol, kernel_from_symbol, symbol_from_kernel

MAX_DEGREE = 8
INTEGRAL_MAX_N = 64


# --------------------------------------------------------------------------
# Polynomial symbols
# --------------------------------------------------------------------------

class PolySymbol:
    """Polynomial ``sum c[a, b] x^a p^b`` of total degree at most 8."""

    __slots__ = ("coeffs", "hbar")

    def __init__(self, coeffs, hbar=1.0):
        c = np.zeros((MAX_DEGREE + 1, MAX_DEGREE + 1), dtype=complex)
        src = np.asarray(coeffs, dtype=complex)
        if src.ndim != 2:
            raise ConfigError("coefficients must be a 2D array indexed [x power, p power]")
        a, b = np.nonzero(src)
        if a.size and np.max(a + b) > MAX_DEGREE:
            raise DegreeOverflow(f"total degree exceeds {MAX_DEGREE}")
        c[a, b] = src[a, b]
        if not np.all(np.isfinite(c)):
            raise ConfigError("non-finite coefficient")
        if not hbar > 0:
            raise ConfigError("hbar must be positive")
        self.coeffs = c
        self.hbar = float(hbar)

    # construction -------------------------------------------------------
    @classmethod
    def monomial(cls, a, b, coeff=1.0, hbar=1.0):
        c = np.zeros((a + 1, b + 1), dtype=complex)
        c[a, b] = coeff
        return cls(c, hbar)

    @classmethod
    def constant(cls, value, hbar=1.0):
        return cls.monomial(0, 0, value, hbar)

    @classmethod
    def parse(cls, text, hbar=1.0, **params):
        """Build from an expression such as ``"p**2/2 + 0.5*x^2"``."""
        try:
            expr = ast.parse(text.replace("^", "**"), mode="eval").body
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse polynomial {text!r}: {exc.msg}") from None
        return _from_ast(expr, hbar, params)

    @classmethod
    def harmonic(cls, m=1.0, omega=1.0, hbar=1.0):
        return cls.parse("p**2/(2*m) + m*w**2*x**2/2", hbar, m=m, w=omega)

    # algebra ------------------------------------------------------------
    @property
    def degree(self):
        a, b = np.nonzero(self.coeffs)
        return int(np.max(a + b)) if a.size else 0

    def _like(self, coeffs):
        return PolySymbol(coeffs, self.hbar)

    def __add__(self, other):
        if isinstance(other, PolySymbol):
            return self._like(self.coeffs + other.coeffs)
        return self._like(self.coeffs + _const_array(other))

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PolySymbol):
            return self._like(_poly_product(self.coeffs, other.coeffs))
        return self._like(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self._like(self.coeffs / scalar)

    def __pow__(self, k):
        out = PolySymbol.constant(1.0, self.hbar)
        for _ in range(int(k)):
            out = out * self
        return out

    def __eq__(self, other):
        return isinstance(other, PolySymbol) and np.array_equal(self.coeffs, other.coeffs)

    def allclose(self, other, atol=1e-12):
        return np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol)

    def derivative(self, nx=0, np_=0):
        """``d^nx/dx^nx d^np_/dp^np_`` of the polynomial."""
        c = self.coeffs
        n = MAX_DEGREE + 1
        out = np.zeros_like(c)
        if nx < n and np_ < n:
            a = np.arange(nx, n)
            b = np.arange(np_, n)
            fa = np.array([factorial(k) / factorial(k - nx) for k in a])
            fb = np.array([factorial(k) / factorial(k - np_) for k in b])
            out[: n - nx, : n - np_] = c[nx:, np_:] * fa[:, None] * fb[None, :]
        return self._like(out)

    def conj(self):
        return self._like(self.coeffs.conj())

    def __call__(self, x, p):
        x = np.asarray(x, dtype=complex)
        p = np.asarray(p, dtype=complex)
        out = np.zeros(np.broadcast(x, p).shape, dtype=complex)
        for a, b in zip(*np.nonzero(self.coeffs)):
            out = out + self.coeffs[a, b] * x ** a * p ** b
        return out

    def sample(self, grid, window=None):
        """Sample onto ``grid``, optionally multiplied by ``window(X, P)``."""
        X, P = grid.mesh()
        vals = self(X, P)
        if window is not None:
            vals = vals * window(X, P)
        return SampledSymbol(vals, grid)

    def __repr__(self):
        terms = [f"({self.coeffs[a, b]:.6g})*x^{a}*p^{b}" for a, b in zip(*np.nonzero(self.coeffs))]
        return "PolySymbol(" + (" + ".join(terms) or "0") + f", hbar={self.hbar})"


def _const_array(value):
    c = np.zeros((MAX_DEGREE + 1, MAX_DEGREE + 1), dtype=complex)
    c[0, 0] = value
    return c


def _poly_product(c1, c2):
    n = MAX_DEGREE + 1
    out = np.zeros((2 * n - 1, 2 * n - 1), dtype=complex)
    for a, b in zip(*np.nonzero(c1)):
        out[a:a + n, b:b + n] += c1[a, b] * c2
    a, b = np.nonzero(out)
    if a.size and np.max(a + b) > MAX_DEGREE:
        raise DegreeOverflow(f"product degree exceeds {MAX_DEGREE}")
    return out[:n, :n]


_ALLOWED_NAMES = {"x": (1, 0), "p": (0, 1)}


def _from_ast(node, hbar, params):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
        return PolySymbol.constant(node.value, hbar)
    if isinstance(node, ast.Name):
        if node.id in _ALLOWED_NAMES:
            return PolySymbol.monomial(*_ALLOWED_NAMES[node.id], hbar=hbar)
        if node.id == "hbar":
            return PolySymbol.constant(hbar, hbar)
        if node.id in params:
            return PolySymbol.constant(params[node.id], hbar)
        raise ConfigError(f"unknown symbol {node.id!r} in polynomial")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        inner = _from_ast(node.operand, hbar, params)
        return -inner if isinstance(node.op, ast.USub) else inner
    if isinstance(node, ast.BinOp):
        left = _from_ast(node.left, hbar, params)
        right = _from_ast(node.right, hbar, params)
        if isinstance(node.op, ast.Add):
            return left + right
        if isinstance(node.op, ast.Sub):
            return left - right
        if isinstance(node.op, ast.Mult):
            return left * right
        if isinstance(node.op, ast.Div):
            if right.degree != 0:
                raise ConfigError("division by a non-constant")
            return left / right.coeffs[0, 0]
        if isinstance(node.op, ast.Pow):
            k = right.coeffs[0, 0]
            if right.degree != 0 or k.imag != 0 or k.real != int(k.real) or k.real < 0:
                raise ConfigError("exponent must be a non-negative integer")
            return left ** int(k.real)
    raise ConfigError(f"unsupported expression: {ast.dump(node)}")


def star_poly(f, g):
    """Exact Moyal product of two polynomials (the series terminates)."""
    if f.hbar != g.hbar:
        raise ConfigError("polynomials carry different hbar")
    if f.degree + g.degree > MAX_DEGREE:
        raise DegreeOverflow(f"deg f + deg g = {f.degree + g.degree} exceeds {MAX_DEGREE}")
    h = 0.5j * f.hbar
    out = PolySymbol(np.zeros((1, 1)), f.hbar)
    for m in range(f.degree + 1):
        for n in range(f.degree + 1 - m):
            if m + n > g.degree:
                continue
            coef = h ** (m + n) * (-1) ** m / (factorial(m) * factorial(n))
            out = out + coef * (f.derivative(n, m) * g.derivative(m, n))
    return out


def poisson_bracket(f, g):
    return f.derivative(1, 0) * g.derivative(0, 1) - f.derivative(0, 1) * g.derivative(1, 0)


# --------------------------------------------------------------------------
# Grid routes
# --------------------------------------------------------------------------

def _same_grid(f, g):
    if f.grid != g.grid:
        raise GridMismatch("symbols live on different grids")


def star_kernel(f, g):
    """Star product by operator composition: ``W^-1(W(f) W(g))``."""
    _same_grid(f, g)
    return symbol_from_kernel(kernel_from_symbol(f).compose(kernel_from_symbol(g)))


def star(f, g):
    """Dispatch to :func:`star_poly` or :func:`star_kernel` by argument type."""
    if isinstance(f, PolySymbol) and isinstance(g, PolySymbol):
        return star_poly(f, g)
    return star_kernel(f, g)


def moyal_bracket(f, g):
    """``(f*g - g*f) / (i hbar)`` on either route."""
    hbar = f.hbar if isinstance(f, PolySymbol) else f.grid.hbar
    return (star(f, g) - star(g, f)) * (1.0 / (1j * hbar))


def star_integral(f, g):
    """4D integral representation, summed directly (small grids only).

    ``(f*g)(x,p) = (pi hbar)^-2 int f(a,b) g(c,d)
    exp(-2i/hbar [p(a-c) + x(d-b) + (cb - ad)]) da db dc dd``
    evaluated on a grid refined by 2 in both directions so the doubled phase
    frequencies are resolved.
    """
    _same_grid(f, g)
    grid = f.grid
    n = grid.n_x
    if n > INTEGRAL_MAX_N:
        raise GridTooLarge(f"star_integral is limited to n_x <= {INTEGRAL_MAX_N}")
    hb = grid.hbar
    f2 = upsample2(upsample2(f.values, axis=0), axis=1)
    g2 = upsample2(upsample2(g.values, axis=0), axis=1)
    xf = grid.x_min + 0.5 * grid.dx * np.arange(2 * n)
    pf = 0.5 * grid.dp * (np.arange(2 * n) - n)
    shifts = np.arange(-(2 * n - 1), 2 * n)
    u = 0.5 * grid.dp * shifts
    v = 0.5 * grid.dx * shifts
    ec = np.exp(2j * np.outer(u, xf) / hb)
    ed = np.exp(2j * np.outer(pf, v) / hb)
    ghat = ec @ g2 @ ed
    e1 = np.exp(-2j * np.outer(grid.p, xf) / hb)
    e2 = np.exp(2j * np.outer(grid.x, pf) / hb)
    raw = _kernels.star_integral_sum(
        np.ascontiguousarray(f2), np.ascontiguousarray(ghat),
        np.ascontiguousarray(e1), np.ascontiguousarray(e2), n,
    )
    pref = (0.25 * grid.dx * grid.dp) ** 2 / (pi * hb) ** 2
    return SampledSymbol(raw * pref, grid)


def _position_kernel_table(f):
    """Half-step table ``A[k, s + n] = (1/2 pi hbar) int f(X_k, p) exp(i p s dx / 2 hbar) dp``.

    Rows are the refined positions ``X_k = x_min + k dx/2``; lags ``s`` run over
    ``[-n, n)`` in units of ``dx/2``, which is the resolution that the doubled
    lags of the two-slice formula require.
    """
    n = f.grid.n_x
    fine = upsample2(f.values, axis=0)
    padded = np.zeros((2 * n, 2 * n), dtype=complex)
    padded[:, :n] = fine
    sigma = np.arange(2 * n)
    sigma = np.where(sigma >= n, sigma - 2 * n, sigma)
    A = np.fft.ifft(padded, axis=1) * 2 * n * np.exp(-0.5j * pi * sigma) / (n * f.grid.dx)
    return np.roll(A, n, axis=1)


def star_path(f, g):
    """Star product from the two-slice reduction of the H = 0 phase-space path integral.

    With no Hamiltonian the path weight is the pure symplectic phase. Keeping
    the two intermediate points and doing the momentum integrals of each slice
    analytically leaves

    ``(f*g)(x,p) = 4 int da db exp(-2i(a-b)p/hbar) A_f(x+a, -2b) A_g(x+b, 2a)``

    where ``A_h(X, s)`` is the Fourier transform of ``h(X, .)`` at lag ``s``.
    The remaining 2D integral is a Riemann sum over half-step displacements.
    """
    _same_grid(f, g)
    grid = f.grid
    n = grid.n_x
    if n > INTEGRAL_MAX_N:
        raise GridTooLarge(f"star_path is limited to n_x <= {INTEGRAL_MAX_N}")
    r = n // 2 - 1
    S = _kernels.star_path_rows(
        np.ascontiguousarray(_position_kernel_table(f)),
        np.ascontiguousarray(_position_kernel_table(g)), r,
    )[::2]
    step = 0.5 * grid.dx
    lag = np.arange(-2 * r, 2 * r + 1) * step
    phase = np.exp(-2j * np.outer(lag, grid.p) / grid.hbar)
    return SampledSymbol(4 * step ** 2 * (S @ phase), grid)


# --------------------------------------------------------------------------
# Quadratic Hamiltonians: Bopp shift and evolution
# --------------------------------------------------------------------------

def _quadratic_terms(H):
    if H.degree > 2:
        raise DegreeOverflow("Bopp-shift residual needs a Hamiltonian of degree <= 2")
    c = H.coeffs
    return {k: c[k] for k in [(0, 0), (1, 0), (0, 1), (2, 0), (0, 2), (1, 1)] if c[k] != 0}


def bopp_apply(H, rho):
    """``H * rho`` computed as ``H(x + i hbar/2 d_p, p - i hbar/2 d_x) rho`` (Weyl ordered)."""
    grid = rho.grid
    X, P = grid.mesh()
    ih2 = 0.5j * grid.hbar

    def xs(v):
        return X * v + ih2 * spectral_derivative(v, grid.dp, axis=1)

    def ps(v):
        return P * v - ih2 * spectral_derivative(v, grid.dx, axis=0)

    v = rho.values
    out = np.zeros_like(v)
    for (a, b), c in _quadratic_terms(H).items():
        if (a, b) == (0, 0):
            term = v
        elif (a, b) == (1, 0):
            term = xs(v)
        elif (a, b) == (0, 1):
            term = ps(v)
        elif (a, b) == (2, 0):
            term = xs(xs(v))
        elif (a, b) == (0, 2):
            term = ps(ps(v))
        else:
            term = 0.5 * (xs(ps(v)) + ps(xs(v)))
        out = out + c * term
    return SampledSymbol(out, grid)


def star_genvalue_residual(H, rho, E, mask=None):
    """Relative residual ``max|H*rho - E rho| / max|rho|`` of the star-genvalue equation."""
    lhs = bopp_apply(H, rho).values - E * rho.values
    if mask is None:
        return float(np.max(np.abs(lhs)) / np.max(np.abs(rho.values)))
    return float(np.max(np.abs(lhs[mask])) / np.max(np.abs(rho.values[mask])))


def momentum_matrix(grid, power=1):
    """Spectral matrix of ``(-i hbar d/dx)^power`` on the periodic position grid."""
    n = grid.n_x
    k = 2 * pi * np.fft.fftfreq(n, d=grid.dx) * grid.hbar
    if power % 2 == 1:
        k[n // 2] = 0.0
    F = np.fft.fft(np.eye(n), axis=0)
    return np.fft.ifft((k ** power)[:, None] * F, axis=0)


def hamiltonian_matrix(H, grid):
    """Weyl-ordered operator matrix of a polynomial Hamiltonian of degree <= 2."""
    if H.degree > 2:
        raise UnsupportedHamiltonian("only Hamiltonians of degree <= 2 can be evolved")
    if abs(H.hbar - grid.hbar) > 1e-15 * grid.hbar:
        raise ConfigError("Hamiltonian and grid carry different hbar")
    n = grid.n_x
    X = np.diag(grid.x.astype(complex))
    P = momentum_matrix(grid, 1)
    c = H.coeffs
    A = c[0, 0] * np.eye(n) + c[1, 0] * X + c[2, 0] * X @ X
    A = A + c[0, 1] * P + c[0, 2] * momentum_matrix(grid, 2) + c[1, 1] * 0.5 * (X @ P + P @ X)
    return 0.5 * (A + A.conj().T)


def evolution_matrix(H, grid, t):
    """``exp(-i t A / hbar)`` for the Hamiltonian matrix ``A`` (complex ``t`` allowed)."""
    lam, V = np.linalg.eigh(hamiltonian_matrix(H, grid))
    return (V * np.exp(-1j * t * lam / grid.hbar)) @ V.conj().T


def evolve_wigner(rho0, H, t):
    """Conjugate ``rho0`` by the star exponential of ``H``, in operator form.

    ``rho(t) = Exp(-itH/hbar) * rho0 * Exp(itH/hbar)``; the star exponential is
    represented by its unitary kernel so that nothing non-band-limited is
    sampled.
    """
    grid = rho0.grid
    if H.degree > 2:
        raise UnsupportedHamiltonian("only Hamiltonians of degree <= 2 can be evolved")
    if t == 0:
        return SampledSymbol(rho0.values.copy(), grid, rho0.label, rho0.normalized)
    U = evolution_matrix(H, grid, t)
    R = kernel_from_symbol(rho0).matrix * grid.dx
    Rt = U @ R @ U.conj().T
    out = symbol_from_kernel(OperatorKernel(Rt / grid.dx, grid))
    vals = out.values.real if np.all(rho0.values.imag == 0) else out.values
    return SampledSymbol(vals, grid, rho0.label, rho0.normalized)


def star_exp_symbol(H, grid, t):
    """Symbol of ``exp(-itH/hbar)`` from its kernel; meaningful when it is band-limited (``Im t < 0``)."""
    U = evolution_matrix(H, grid, t)
    return symbol_from_kernel(OperatorKernel(U / grid.dx, grid))

"""Discrete Weyl correspondence between phase-space symbols and operator
kernels, Wigner functions and phase-space averages."""
from dataclasses import dataclass, field
from math import pi

import numpy as np

from .errors import ConfigError, GridMismatch, NotNormalized
from .numerics import PhaseGrid, fresnel, upsample2

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-8
REALITY_TOL = 1e-10


@dataclass
class SampledSymbol:
    """Complex phase-space function sampled on ``grid``; ``values[i, j] = f(x_i, p_j)``."""

    values: np.ndarray
    grid: PhaseGrid
    label: str = ""
    normalized: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        n = self.grid.n_x
        if self.values.shape != (n, n):
            raise ConfigError(f"symbol shape {self.values.shape} does not match grid ({n}, {n})")
        if not np.all(np.isfinite(self.values)):
            raise ConfigError("symbol contains non-finite values")

    @classmethod
    def from_function(cls, fn, grid, label=""):
        X, P = grid.mesh()
        vals = np.broadcast_to(np.asarray(fn(X, P), dtype=complex), X.shape)
        return cls(vals.copy(), grid, label)

    def _check(self, other):
        if self.grid != other.grid:
            raise GridMismatch("symbols live on different grids")

    def __add__(self, other):
        if isinstance(other, SampledSymbol):
            self._check(other)
            return SampledSymbol(self.values + other.values, self.grid)
        return SampledSymbol(self.values + other, self.grid)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, SampledSymbol):
            self._check(other)
            return SampledSymbol(self.values - other.values, self.grid)
        return SampledSymbol(self.values - other, self.grid)

    def __mul__(self, scalar):
        return SampledSymbol(self.values * scalar, self.grid, self.label)

    __rmul__ = __mul__

    def conj(self):
        return SampledSymbol(self.values.conj(), self.grid, self.label)

    def integral(self):
        return complex(self.values.sum() * self.grid.dx * self.grid.dp)

    def max_abs(self, mask=None):
        v = self.values if mask is None else self.values[mask]
        return float(np.max(np.abs(v)))


@dataclass
class OperatorKernel:
    """Integral kernel ``matrix[i, k] = kappa(x_i, x_k)``; operators act as ``matrix @ psi * dx``."""

    matrix: np.ndarray
    grid: PhaseGrid
    hermitian: bool = field(default=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        n = self.grid.n_x
        if self.matrix.shape != (n, n):
            raise ConfigError(f"kernel shape {self.matrix.shape} does not match grid")
        if not np.all(np.isfinite(self.matrix)):
            raise ConfigError("kernel contains non-finite values")
        if self.hermitian:
            scale = max(np.max(np.abs(self.matrix)), 1.0)
            if np.max(np.abs(self.matrix - self.matrix.conj().T)) > HERMITIAN_TOL * scale:
                raise ConfigError("kernel flagged Hermitian but kappa(x,y) != conj(kappa(y,x))")

    def compose(self, other):
        """Kernel of the operator product ``self * other``."""
        if self.grid != other.grid:
            raise GridMismatch("kernels live on different grids")
        return OperatorKernel(self.matrix @ other.matrix * self.grid.dx, self.grid)

    def adjoint(self):
        return OperatorKernel(self.matrix.conj().T, self.grid, self.hermitian)

    def trace(self):
        return complex(np.trace(self.matrix) * self.grid.dx)

    def apply(self, psi):
        return self.matrix @ np.asarray(psi, dtype=complex) * self.grid.dx


def kernel_from_symbol(f):
    """Weyl map: ``kappa(x,y) = (1/2 pi hbar) int f((x+y)/2, p) exp(ip(x-y)/hbar) dp``.

    Midpoints ``(x_i + x_k)/2`` that fall between nodes are filled by
    band-limited (FFT) interpolation along x. Separations are kept within
    half the box; the entry at exactly half the box carries weight 1/2 so that
    the discrete sum stays symmetric.
    """
    grid = f.grid
    n = grid.n_x
    half = upsample2(f.values, axis=0)                  # rows at x_min + m dx/2
    d = np.arange(n)
    # (1/(n dx)) sum_j f(X, p_j) exp(2 pi i (j - n/2) d / n)
    G = np.fft.ifft(half, axis=1) * ((-1.0) ** d) / grid.dx
    i = np.arange(n)[:, None]
    k = np.arange(n)[None, :]
    sep = i - k
    kappa = G[i + k, sep % n]
    w = np.where(np.abs(sep) < n // 2, 1.0, np.where(np.abs(sep) == n // 2, 0.5, 0.0))
    herm = bool(np.max(np.abs(f.values.imag)) == 0.0)
    mat = kappa * w
    if herm:
        mat = 0.5 * (mat + mat.conj().T)
    return OperatorKernel(mat, grid, herm)


def _diagonal_strip(matrix):
    """``C[i, m] = kappa(x_i + m dx/2, x_i - m dx/2)`` for ``m`` in ``[-n/2, n/2)``, stored mod n."""
    n = matrix.shape[0]
    fine = upsample2(upsample2(matrix, axis=0), axis=1)
    i = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    m = np.where(m >= n // 2, m - n, m)
    return fine[(2 * i + m) % (2 * n), (2 * i - m) % (2 * n)]


def _strip_to_symbol(strip, grid):
    n = grid.n_x
    m = np.arange(n)
    # sum_m C[i, m] exp(-i p_j m dx / hbar) dx, with p_j m dx/hbar = 2 pi (j - n/2) m / n
    return np.fft.fft(strip * ((-1.0) ** m), axis=1) * grid.dx


def symbol_from_kernel(k, label=""):
    """Inverse Weyl map: ``f(x,p) = int kappa(x + y/2, x - y/2) exp(-i y p / hbar) dy``.

    Off-grid kernel values on the anti-diagonal strip come from 2D
    band-limited interpolation of the kernel matrix.
    """
    vals = _strip_to_symbol(_diagonal_strip(k.matrix), k.grid)
    if k.hermitian:
        vals = vals.real.astype(complex)
    return SampledSymbol(vals, k.grid, label)


def wigner_from_wavefunction(psi, grid, label="wigner"):
    """Wigner function ``(1/2 pi hbar) int psi(x+y/2) conj(psi(x-y/2)) exp(-iyp/hbar) dy``."""
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (grid.n_x,):
        raise ConfigError("wavefunction length does not match grid")
    norm = float(np.sum(np.abs(psi) ** 2) * grid.dx)
    if abs(norm - 1.0) > NORM_TOL:
        raise NotNormalized(f"sum |psi|^2 dx = {norm:.12g}")
    n = grid.n_x
    fine = upsample2(psi)
    i = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    m = np.where(m >= n // 2, m - n, m)
    strip = fine[(2 * i + m) % (2 * n)] * fine[(2 * i - m) % (2 * n)].conj()
    rho = _strip_to_symbol(strip, grid) / (2 * pi * grid.hbar)
    scale = max(np.max(np.abs(rho)), 1e-300)
    if np.max(np.abs(rho.imag)) > REALITY_TOL * max(scale, 1.0):
        raise ArithmeticError("Wigner function has a spurious imaginary part")
    return SampledSymbol(rho.real, grid, label, normalized=True)


def projector_kernel(psi, grid):
    """Kernel ``psi(x) conj(psi(y))`` of the projector onto ``psi``."""
    psi = np.asarray(psi, dtype=complex)
    return OperatorKernel(np.outer(psi, psi.conj()), grid, hermitian=True)


def expectation(rho, a):
    """Phase-space average ``sum rho * a dx dp`` (Riemann sum on the grid)."""
    if rho.grid != a.grid:
        raise GridMismatch("rho and observable live on different grids")
    g = rho.grid
    return complex(np.sum(rho.values * a.values) * g.dx * g.dp)


def marginals(rho):
    """Position and momentum marginals ``(int rho dp, int rho dx)``."""
    g = rho.grid
    return rho.values.sum(axis=1) * g.dp, rho.values.sum(axis=0) * g.dx


@dataclass(frozen=True)
class NondiagSymbol:
    """Symbol of ``|x0><xf|``: ``(1/2 pi hbar) exp(i(xf - x0)p/hbar) delta(x - (xf+x0)/2)``.

    The delta is kept analytic; pairing with a phase-space function only
    needs that function on the line ``x = (xf + x0)/2``.
    """

    x0: float
    xf: float
    hbar: float = 1.0

    @property
    def center(self):
        return 0.5 * (self.xf + self.x0)

    def phase(self, p):
        return np.exp(1j * (self.xf - self.x0) * np.asarray(p) / self.hbar) / (2 * pi * self.hbar)

    def pair(self, fn, p):
        """``int int rho f dx dp`` for callable ``fn(x, p)`` using trapezoid nodes ``p``."""
        p = np.asarray(p, dtype=float)
        vals = self.phase(p) * np.asarray(fn(self.center, p), dtype=complex)
        return complex(np.trapezoid(vals, p))

    def pair_gaussian(self, a, b=0.0, c=0.0):
        """Pairing with ``exp(i(a p^2 + b p + c))`` evaluated on the delta line, in closed form."""
        shift = (self.xf - self.x0) / self.hbar
        return complex(fresnel(a, b + shift, c)) / (2 * pi * self.hbar)

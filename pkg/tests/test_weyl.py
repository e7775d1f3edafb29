import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from phasestar.errors import ConfigError, GridMismatch, NotNormalized
from phasestar.numerics import PhaseGrid
from phasestar.weyl import (
    NondiagSymbol,
    OperatorKernel,
    SampledSymbol,
    expectation,
    kernel_from_symbol,
    marginals,
    projector_kernel,
    symbol_from_kernel,
    wigner_from_wavefunction,
)


def _hermite_state(n, x, hbar=1.0):
    u = x / np.sqrt(hbar)
    g = np.exp(-u ** 2 / 2) / (np.pi * hbar) ** 0.25
    if n == 0:
        return g + 0j
    if n == 1:
        return np.sqrt(2) * u * g + 0j
    raise ValueError(n)


def _coherent(x, x0, p0, hbar=1.0):
    return np.exp(-(x - x0) ** 2 / (2 * hbar) + 1j * p0 * x / hbar) / (np.pi * hbar) ** 0.25


@pytest.fixture
def grid():
    return PhaseGrid(-10, 10, 128)


def test_ground_state_wigner(grid):
    rho = wigner_from_wavefunction(_hermite_state(0, grid.x), grid)
    X, P = grid.mesh()
    exact = np.exp(-(X ** 2 + P ** 2)) / np.pi
    assert rho.normalized
    assert np.max(np.abs(rho.values - exact)) < 1e-12
    assert rho.integral() == pytest.approx(1.0, abs=1e-12)


def test_ground_state_wigner_other_hbar():
    g = PhaseGrid(-6, 6, 128, hbar=0.3)
    rho = wigner_from_wavefunction(_hermite_state(0, g.x, 0.3), g)
    X, P = g.mesh()
    assert np.max(np.abs(rho.values - np.exp(-(X ** 2 + P ** 2) / 0.3) / (0.3 * np.pi))) < 1e-11


def test_first_excited_state_is_negative_at_origin(grid):
    rho = wigner_from_wavefunction(_hermite_state(1, grid.x), grid)
    X, P = grid.mesh()
    r2 = X ** 2 + P ** 2
    assert np.max(np.abs(rho.values - (2 * r2 - 1) * np.exp(-r2) / np.pi)) < 1e-10
    assert rho.values[64, 64] == pytest.approx(-1 / np.pi)


@settings(max_examples=20, deadline=None)
@given(hs.floats(-3, 3), hs.floats(-3, 3))
def test_coherent_state_is_shifted_gaussian(x0, p0):
    g = PhaseGrid(-12, 12, 128)
    rho = wigner_from_wavefunction(_coherent(g.x, x0, p0), g)
    X, P = g.mesh()
    exact = np.exp(-((X - x0) ** 2 + (P - p0) ** 2)) / np.pi
    assert np.max(np.abs(rho.values - exact)) < 1e-10
    assert rho.integral() == pytest.approx(1.0, abs=1e-10)


def test_marginals(grid):
    psi = _coherent(grid.x, 0.7, -1.1)
    rho = wigner_from_wavefunction(psi, grid)
    px, pp = marginals(rho)
    assert np.max(np.abs(px - np.abs(psi) ** 2)) < 1e-6
    assert np.max(np.abs(pp - np.exp(-(grid.p + 1.1) ** 2) / np.sqrt(np.pi))) < 1e-6


@pytest.mark.parametrize("n, energy", [(0, 0.5), (1, 1.5)])
def test_oscillator_expectation(grid, n, energy):
    rho = wigner_from_wavefunction(_hermite_state(n, grid.x), grid)
    H = SampledSymbol.from_function(lambda x, p: (x ** 2 + p ** 2) / 2, grid)
    assert expectation(rho, H) == pytest.approx(energy, abs=1e-10)


def test_wigner_rejects_unnormalised_and_wrong_length(grid):
    with pytest.raises(NotNormalized):
        wigner_from_wavefunction(2 * _hermite_state(0, grid.x), grid)
    with pytest.raises(ConfigError):
        wigner_from_wavefunction(np.ones(10), grid)


def test_grid_mismatch(grid):
    other = PhaseGrid(-8, 8, 128)
    a = SampledSymbol.from_function(lambda x, p: x + p, grid)
    b = SampledSymbol.from_function(lambda x, p: x + p, other)
    with pytest.raises(GridMismatch):
        a + b
    with pytest.raises(GridMismatch):
        expectation(a, b)
    with pytest.raises(GridMismatch):
        kernel_from_symbol(a).compose(kernel_from_symbol(b))


def test_symbol_validation(grid):
    with pytest.raises(ConfigError):
        SampledSymbol(np.zeros((4, 4)), grid)
    bad = np.zeros((128, 128))
    bad[3, 3] = np.nan
    with pytest.raises(ConfigError):
        SampledSymbol(bad, grid)
    m = np.zeros((128, 128), dtype=complex)
    m[0, 1] = 1j
    with pytest.raises(ConfigError):
        OperatorKernel(m, grid, hermitian=True)


def test_identity_symbol_gives_identity_operator(grid):
    one = SampledSymbol.from_function(lambda x, p: np.ones_like(x), grid)
    k = kernel_from_symbol(one)
    assert k.hermitian
    assert np.max(np.abs(k.matrix * grid.dx - np.eye(128))) < 1e-12
    assert k.trace() == pytest.approx(128)


def test_momentum_symbol_differentiates(grid):
    k = kernel_from_symbol(SampledSymbol.from_function(lambda x, p: p + 0 * x, grid))
    psi = _coherent(grid.x, 0.3, 0.0)
    dpsi = -(grid.x - 0.3) * psi
    # separations are cut at half the box, so only points whose neighbourhood holds psi are exact
    inner = np.abs(grid.x) < 3
    assert np.max(np.abs(k.apply(psi) - (-1j) * dpsi)[inner]) < 1e-10


def test_position_symbol_multiplies(grid):
    k = kernel_from_symbol(SampledSymbol.from_function(lambda x, p: x + 0 * p, grid))
    psi = _hermite_state(0, grid.x)
    assert np.max(np.abs(k.apply(psi) - grid.x * psi)) < 1e-12


def test_projector_symbol_is_scaled_wigner(grid):
    psi = _coherent(grid.x, -1.0, 0.5)
    sym = symbol_from_kernel(projector_kernel(psi, grid))
    rho = wigner_from_wavefunction(psi, grid)
    assert np.max(np.abs(sym.values / (2 * np.pi) - rho.values)) < 1e-12


@settings(max_examples=20, deadline=None)
@given(hs.floats(-2, 2), hs.floats(-2, 2), hs.floats(1.0, 1.6), hs.floats(-0.2, 0.2))
def test_weyl_round_trip(x0, p0, width, skew):
    g = PhaseGrid(-10, 10, 128)
    f = SampledSymbol.from_function(
        lambda x, p: np.exp(-((x - x0) ** 2 + (p - p0) ** 2) / width ** 2 + 1j * skew * x * p), g)
    back = symbol_from_kernel(kernel_from_symbol(f))
    assert np.max(np.abs(back.values - f.values)) < 1e-9


def test_trace_pairing(grid):
    f = SampledSymbol.from_function(lambda x, p: np.exp(-(x ** 2 + 2 * p ** 2) / 3) * (1 + x), grid)
    h = SampledSymbol.from_function(lambda x, p: np.exp(-((x - 1) ** 2 + p ** 2) / 2) * (p - 1j), grid)
    tr = kernel_from_symbol(f).compose(kernel_from_symbol(h)).trace()
    pair = np.sum(f.values * h.values) * grid.dx * grid.dp / (2 * np.pi)
    assert tr == pytest.approx(pair, abs=1e-10)


def test_adjoint_is_complex_conjugate_symbol(grid):
    f = SampledSymbol.from_function(lambda x, p: np.exp(-(x ** 2 + p ** 2) / 2) * (x + 1j * p), grid)
    adj = symbol_from_kernel(kernel_from_symbol(f).adjoint())
    assert np.max(np.abs(adj.values - f.values.conj())) < 1e-10


def test_nondiag_symbol_pairing():
    s = NondiagSymbol(x0=-0.4, xf=0.9, hbar=0.8)
    assert s.center == pytest.approx(0.25)
    p = np.linspace(-20, 20, 40001)
    numeric = s.pair(lambda x, q: np.exp(-q ** 2 + 0.3j * q + 0 * x), p)
    closed = s.pair_gaussian(1j, 0.3)
    assert numeric == pytest.approx(closed, abs=1e-10)
    # int exp(-p^2 + i d p / hbar) dp / (2 pi hbar) = sqrt(pi) exp(-d^2 / 4 hbar^2) / (2 pi hbar)
    d = 1.3 / 0.8
    assert s.pair_gaussian(1j) == pytest.approx(np.sqrt(np.pi) * np.exp(-d * d / 4) / (2 * np.pi * 0.8))


def test_nondiag_pairing_with_state_gives_matrix_element():
    # pairing |x0><xf| with the Weyl symbol of A gives <xf|A|x0>; for A = exp(-p^2 / 2) that is a Gaussian
    s = NondiagSymbol(x0=0.2, xf=-0.5)
    d = s.xf - s.x0
    expected = np.exp(-d * d / 2) / np.sqrt(2 * np.pi)
    assert s.pair_gaussian(0.5j).real == pytest.approx(expected, rel=1e-13)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from phasestar.errors import CausticSingularity, ConfigError, UnsupportedFamily, WindowTooSmall
from phasestar.numerics import PhaseGrid, airy_ai
from phasestar.propagators import (
    Circle,
    Free,
    HarmonicOscillator,
    LinearPotential,
    Quadratic,
    QuadraticModel,
    propagate,
)
from phasestar.star import PolySymbol, bopp_apply
from phasestar.starexp import (
    StarExponentialClosedForm,
    airy_wigner,
    circle_level,
    fd_partial_sum,
    hamiltonian,
    ho_level,
    project_level,
    propagator_from_star_exp,
    star_exp_from_propagator,
    wigner_continuous,
)
from phasestar.weyl import SampledSymbol

GAUSSIAN_FAMILIES = [Free(), HarmonicOscillator(), LinearPotential(), Free(m=2.0, hbar=0.5),
                     HarmonicOscillator(m=0.5, omega=1.7, hbar=0.8)]


@pytest.mark.parametrize("spec", GAUSSIAN_FAMILIES + [Circle()])
def test_zero_time_is_unit(spec):
    q = np.linspace(-2, 2, 5)
    assert np.all(StarExponentialClosedForm(spec)(q, 0.3, 0) == 1)
    assert np.all(star_exp_from_propagator(spec, q, 0.3, 0) == 1)


def test_oscillator_quarter_period():
    cf = StarExponentialClosedForm(HarmonicOscillator())
    q, p = 0.7, -1.2
    H = (q * q + p * p) / 2
    assert cf(q, p, np.pi / 2) == pytest.approx(np.sqrt(2) * np.exp(-2j * H), rel=1e-14)


def test_oscillator_caustic():
    cf = StarExponentialClosedForm(HarmonicOscillator())
    for t in (np.pi, 3.14159, 3 * np.pi):
        with pytest.raises(CausticSingularity):
            cf(0.0, 0.0, t)
    with pytest.raises(CausticSingularity):
        star_exp_from_propagator(HarmonicOscillator(), 0.0, 0.0, np.pi)
    assert np.isfinite(cf(0.0, 0.0, 3.1))


@pytest.mark.parametrize("spec", GAUSSIAN_FAMILIES)
@pytest.mark.parametrize("t", [0.3, 1.0, 2.2, 1.0 - 0.5j])
def test_fresnel_route_matches_closed_form(spec, t):
    rng = np.random.default_rng(3)
    q = rng.uniform(-3, 3, 50)
    p = rng.uniform(-3, 3, 50)
    got = star_exp_from_propagator(spec, q, p, t)
    ref = StarExponentialClosedForm(spec)(q, p, t)
    assert np.max(np.abs(got - ref) / np.maximum(1.0, np.abs(ref))) < 1e-12


@pytest.mark.parametrize("t", [0.4, 1.3, 2.9])
def test_circle_route_matches_sinc_sum(t):
    spec = Circle()
    p = np.linspace(-4, 4, 33)
    got = star_exp_from_propagator(spec, 0.1, p, t)
    ref = StarExponentialClosedForm(spec)(0.1, p, t)
    assert np.max(np.abs(got - ref)) < 1e-9


def test_quadratic_family_uses_gelfand_yaglom():
    model = QuadraticModel(m=1.0, c=lambda t: 1.0)
    q = np.array([-1.0, 0.0, 0.8])
    got = star_exp_from_propagator(Quadratic(model, steps=4000), q, 0.5, 1.3)
    ref = StarExponentialClosedForm(HarmonicOscillator())(q, 0.5, 1.3)
    assert np.max(np.abs(got - ref)) < 1e-9
    with pytest.raises(UnsupportedFamily):
        star_exp_from_propagator(Quadratic(model), q, 0.5, 1.3, route="fft")
    with pytest.raises(UnsupportedFamily):
        StarExponentialClosedForm(Quadratic(model))


@pytest.mark.parametrize("spec", [Free(), HarmonicOscillator(), LinearPotential()])
def test_damped_quadrature_route(spec):
    q, p = np.meshgrid(np.linspace(-2, 2, 5), np.linspace(-2, 2, 5), indexing="ij")
    got = star_exp_from_propagator(spec, q, p, 1.0, route="fft")
    ref = StarExponentialClosedForm(spec)(q, p, 1.0)
    assert got.shape == (5, 5)
    assert np.max(np.abs(got - ref) / np.abs(ref)) < 1e-3


def test_damped_quadrature_window_and_route_checks():
    with pytest.raises(WindowTooSmall):
        star_exp_from_propagator(Free(), 0.0, 0.0, 1.0, route="fft", window=1.0)
    with pytest.raises(ConfigError):
        star_exp_from_propagator(Free(), 0.0, 0.0, 1.0, route="simpson")


@settings(max_examples=30, deadline=None)
@given(hs.floats(-4, 4), hs.floats(-4, 4), hs.floats(0.05, 3.0))
def test_unit_modulus_on_real_times(q, p, t):
    assert abs(StarExponentialClosedForm(Free())(q, p, t)) == pytest.approx(1.0, rel=1e-13)
    assert abs(StarExponentialClosedForm(LinearPotential())(q, p, t)) == pytest.approx(1.0, rel=1e-13)
    if abs(np.cos(t / 2)) > 1e-3:
        ho = StarExponentialClosedForm(HarmonicOscillator())(q, p, t)
        assert abs(ho) == pytest.approx(1 / abs(np.cos(t / 2)), rel=1e-12)


@pytest.mark.parametrize("spec", [Free(), HarmonicOscillator(), LinearPotential()])
def test_propagator_round_trip(spec):
    xf = np.linspace(-2, 2, 9)
    for t in (0.6, 1.9):
        back = propagator_from_star_exp(StarExponentialClosedForm(spec), xf, t, 0.3)
        assert np.allclose(back, propagate(spec, xf, t, 0.3), rtol=1e-12, atol=0)


def test_circle_propagator_round_trip():
    spec = Circle()
    xf = np.linspace(-3, 3, 13)
    for t in (0.4, 2.9):
        back = propagator_from_star_exp(spec, xf, t, -0.5)
        assert np.allclose(back, propagate(spec, xf, t, -0.5), atol=1e-10)


def test_differential_equation():
    # i hbar d/dt Exp = H * Exp, checked with the Bopp shift on a band-limited complex time
    g = PhaseGrid(-10, 10, 128)
    X, P = g.mesh()
    cf = StarExponentialClosedForm(HarmonicOscillator())
    t, h = 0.5 - 0.5j, 1e-4
    E = SampledSymbol(cf(X, P, t), g)
    dE = (cf(X, P, t + h) - cf(X, P, t - h)) / (2 * h)
    lhs = 1j * dE
    rhs = bopp_apply(PolySymbol.harmonic(), E).values
    inner = g.interior()
    assert np.max(np.abs(lhs - rhs)[inner]) < 1e-6


# --- spectral data ----------------------------------------------------------------

def test_airy_wigner_at_origin():
    assert airy_wigner(0.0, 0.0, 0.0) == pytest.approx(2 ** (2 / 3) / (2 * np.pi) * airy_ai(0.0), rel=1e-14)


@settings(max_examples=30, deadline=None)
@given(hs.floats(-5, 5), hs.floats(-3, 3), hs.floats(-3, 3))
def test_airy_wigner_translation_covariance(q, p, E):
    assert airy_wigner(q, p, E) == pytest.approx(airy_wigner(q - E, p, 0.0), rel=1e-12, abs=1e-300)


def test_linear_continuum_matches_airy():
    g = PhaseGrid(-6, 6, 32)
    X, P = g.mesh()
    for E in (-1.0, 0.5):
        rho = wigner_continuous(LinearPotential(), E, g)
        assert np.max(np.abs(rho.values - airy_wigner(X, P, E))) < 1e-10


def test_continuum_errors():
    g = PhaseGrid(-6, 6, 32)
    with pytest.raises(WindowTooSmall):
        wigner_continuous(LinearPotential(), 0.0, g, t_window=1.0)
    with pytest.raises(ConfigError):
        wigner_continuous(LinearPotential(), 0.0, g, eps=0)
    with pytest.raises(UnsupportedFamily):
        wigner_continuous(HarmonicOscillator(), 0.0, g)


def test_free_continuum_is_lorentzian_in_energy():
    g = PhaseGrid(-6, 6, 32)
    eps = 0.2
    rho = wigner_continuous(Free(), 1.0, g, eps=eps)
    w = g.p ** 2 / 2 - 1.0
    lorentz = 2 * eps / (eps ** 2 + w ** 2) / (2 * np.pi) ** 2
    assert np.max(np.abs(rho.values[0] - lorentz)) < 1e-12


def test_oscillator_level_values():
    assert ho_level(0, 0.0, 0.0) == pytest.approx(1 / np.pi)
    assert ho_level(1, 0.0, 0.0) == pytest.approx(-1 / np.pi)
    assert circle_level(2, 2.0) == pytest.approx(1 / (2 * np.pi))


@pytest.mark.parametrize("n", [0, 1, 3, 5])
def test_level_projection_matches_closed_form(n):
    g = PhaseGrid(-8, 8, 64)
    X, P = g.mesh()
    sl = project_level(HarmonicOscillator(), n, g)
    assert sl.energy == pytest.approx(n + 0.5)
    assert np.max(np.abs(sl.rho.values - ho_level(n, X, P))) < 1e-10


def test_circle_projection_returns_the_pair():
    g = PhaseGrid(-4, 4, 32)
    sl = project_level(Circle(), 2, g)
    assert sl.degeneracy == 2 and sl.energy == pytest.approx(2.0)
    pair = circle_level(2, g.p) + circle_level(-2, g.p)
    assert np.max(np.abs(sl.rho.values[0] - pair)) < 1e-10
    assert project_level(Circle(), 0, g).degeneracy == 1


def test_projection_errors():
    g = PhaseGrid(-4, 4, 32)
    with pytest.raises(UnsupportedFamily):
        project_level(Free(), 0, g)
    with pytest.raises(ConfigError):
        project_level(HarmonicOscillator(), -1, g)


def test_partial_sums_converge_for_damped_oscillator():
    spec = HarmonicOscillator()
    q, p, t = 0.5, -0.3, 1.0 - 0.7j
    ref = StarExponentialClosedForm(spec)(q, p, t)
    errs = [abs(fd_partial_sum(spec, N, q, p, t) - ref) for N in (5, 10, 20, 40)]
    assert errs[-1] < 1e-10
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_partial_sum_is_exact_for_circle():
    spec = Circle()
    p = np.linspace(-3, 3, 13)
    t = 1.3
    N = spec.terms(t)
    ref = StarExponentialClosedForm(spec)(0.0, p, t, damped=False)
    assert np.max(np.abs(fd_partial_sum(spec, N, 0.0, p, t) - ref)) < 1e-13


def test_hamiltonians():
    assert hamiltonian(LinearPotential(), 2.0, 3.0) == 11.0
    assert hamiltonian(Circle(inertia=2.0), 0.0, 2.0) == 1.0
    with pytest.raises(UnsupportedFamily):
        hamiltonian(object(), 0.0, 0.0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from phasestar.errors import (
    CausticAtEndpoint,
    CausticSingularity,
    ConfigError,
    UnsupportedFamily,
    ZeroTime,
)
from phasestar.propagators import (
    Circle,
    Free,
    HarmonicOscillator,
    LinearPotential,
    Quadratic,
    QuadraticModel,
    Sliced,
    compose,
    gelfand_yaglom,
    maslov_index,
    propagate,
    spectral_form,
    sqrt_sin,
    time_sliced,
)


def _ho_model(omega=1.0, m=1.0):
    return QuadraticModel(m=m, c=lambda t: m * omega ** 2)


def _assert_same_kernel(a, b, tol):
    assert abs(a.prefactor - b.prefactor) < tol * abs(b.prefactor)
    assert np.max(np.abs(a.coefficients - b.coefficients)) < tol * max(1.0, np.max(np.abs(b.coefficients)))


# --- closed forms -------------------------------------------------------------

def test_free_coincident_value():
    assert propagate(Free(), 0.0, 1.0, 0.0) == pytest.approx(np.sqrt(1 / (2j * np.pi)), rel=1e-15)
    assert propagate(Free(m=2.0, hbar=0.5), 0.3, 2.0, 0.3) == pytest.approx(np.sqrt(2 / (2j * np.pi)))


@settings(max_examples=30, deadline=None)
@given(hs.floats(-5, 5), hs.floats(-5, 5), hs.floats(0.05, 10), hs.floats(0.2, 3))
def test_free_modulus(xf, x0, t, m):
    k = propagate(Free(m=m), xf, t, x0)
    assert abs(k) ** 2 == pytest.approx(m / (2 * np.pi * t), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(hs.floats(-5, 5), hs.floats(-5, 5), hs.floats(0.05, 12))
def test_oscillator_modulus(xf, x0, t):
    if abs(np.sin(t)) < 1e-3:
        return
    k = propagate(HarmonicOscillator(), xf, t, x0)
    assert abs(k) ** 2 == pytest.approx(1 / (2 * np.pi * abs(np.sin(t))), rel=1e-10)


def test_oscillator_tends_to_free():
    xf, x0, t = 0.7, -0.4, 1.3
    k = propagate(HarmonicOscillator(omega=1e-5), xf, t, x0)
    assert k == pytest.approx(propagate(Free(), xf, t, x0), rel=1e-9)


def test_oscillator_real_axis_is_limit_from_below():
    spec = HarmonicOscillator()
    for t in (0.5, 2.0, 4.0, 7.0, 10.0):
        real = propagate(spec, 0.3, t, -0.2)
        below = propagate(spec, 0.3, t - 1e-9j, -0.2)
        assert real == pytest.approx(below, rel=1e-7)


def test_oscillator_against_eigenfunction_sum():
    spec = HarmonicOscillator()
    t = 1.1 - 0.6j
    xf = np.linspace(-2, 2, 7)
    x0 = 0.4
    assert np.allclose(propagate(spec, xf, t, x0), spectral_form(spec, xf, t, x0, 80), atol=1e-12)


def test_sqrt_sin_branch():
    theta = np.array([0.3, 2.0, 4.0, 7.0, 9.5])
    nu = np.floor(theta / np.pi)
    assert np.allclose(sqrt_sin(theta), np.exp(0.5j * np.pi * nu) * np.sqrt(np.abs(np.sin(theta))))
    z = np.array([1 - 0.2j, 5 - 3j, -2 - 0.1j])
    assert np.allclose(sqrt_sin(z) ** 2, np.sin(z))


def test_maslov_index():
    assert [maslov_index(1.0, t) for t in (1.0, 3.2, 6.3, 9.5)] == [0, 1, 2, 3]
    assert maslov_index(2.0, 2.0) == 1


def test_linear_potential_against_gelfand_yaglom():
    spec = LinearPotential()
    t = 1.7
    k = gelfand_yaglom(spec.as_quadratic(), t, 2000)
    xf = np.linspace(-3, 3, 9)
    assert np.allclose(k(xf, 0.5), propagate(spec, xf, t, 0.5), rtol=1e-10, atol=1e-12)


def test_circle_forms_agree():
    rng = np.random.default_rng(7)
    spec = Circle()
    xf = rng.uniform(-np.pi, np.pi, 20)
    x0 = rng.uniform(-np.pi, np.pi, 20)
    for t in (0.4, 1.3, 2.9):
        # propagate raises NonConvergent if the theta and dual sums disagree
        k = propagate(spec, xf, t, x0)
        assert np.allclose(k, spectral_form(spec, xf, spec.damped(t), x0, spec.terms(t)), atol=1e-10)
        assert np.allclose(propagate(spec, xf + 2 * np.pi, t, x0), k, atol=1e-10)


def test_family_validation():
    with pytest.raises(ConfigError):
        Free(m=0)
    with pytest.raises(ConfigError):
        HarmonicOscillator(omega=-1)
    with pytest.raises(ConfigError):
        Circle(n_max=0)
    with pytest.raises(ConfigError):
        Sliced(QuadraticModel(), N=1)
    with pytest.raises(UnsupportedFamily):
        propagate(object(), 0.0, 1.0, 0.0)
    with pytest.raises(UnsupportedFamily):
        spectral_form(Free(), 0.0, 1.0, 0.0, 5)


def test_time_errors():
    with pytest.raises(ZeroTime):
        propagate(Free(), 0.0, 0, 0.0)
    with pytest.raises(ZeroTime):
        time_sliced(_ho_model(), 0.0, 8)
    with pytest.raises(CausticSingularity):
        propagate(HarmonicOscillator(), 0.0, np.pi, 0.0)
    with pytest.raises(CausticSingularity):
        propagate(HarmonicOscillator(omega=2.0), 0.0, np.pi, 0.0)
    with pytest.raises(ConfigError):
        propagate(HarmonicOscillator(), 0.0, 1 + 0.1j, 0.0)
    with pytest.raises(CausticAtEndpoint):
        gelfand_yaglom(_ho_model(), np.pi, 2000)


def test_free_kernel_evolves_gaussian():
    # int K(x, t, y) psi(y) dy against the exact spreading Gaussian
    t = 0.05
    y = np.linspace(-10, 10, 200_001)
    psi0 = np.exp(-y ** 2 / 2)
    x = np.array([-1.0, 0.0, 0.6, 1.5])
    out = np.array([np.trapezoid(propagate(Free(), xi, t, y) * psi0, y) for xi in x])
    exact = np.exp(-x ** 2 / (2 * (1 + 1j * t))) / np.sqrt(1 + 1j * t)
    assert np.max(np.abs(out - exact)) < 1e-8
    # and it approaches the initial state
    assert np.max(np.abs(out - np.exp(-x ** 2 / 2))) < 2 * t


# --- Gelfand-Yaglom and slicing ---------------------------------------------------

@pytest.mark.parametrize("t", [0.7, 2.5, 4.0, 8.0])
def test_gelfand_yaglom_matches_oscillator(t):
    k = gelfand_yaglom(_ho_model(), t, 4000)
    assert k.maslov == maslov_index(1.0, t)
    xf = np.linspace(-2, 2, 5)
    ref = propagate(HarmonicOscillator(), xf, t, -0.3)
    assert np.allclose(k(xf, -0.3), ref, rtol=1e-9, atol=0)


def test_gelfand_yaglom_matches_free():
    k = gelfand_yaglom(QuadraticModel(m=1.5), 2.0, 200)
    assert np.allclose(k(np.array([0.0, 1.0]), 0.5), propagate(Free(m=1.5), np.array([0.0, 1.0]), 2.0, 0.5))


def test_gelfand_yaglom_rejects_negative_time():
    with pytest.raises(ConfigError):
        gelfand_yaglom(_ho_model(), -1.0)


def test_chapman_kolmogorov_across_a_caustic():
    model = _ho_model()
    full = gelfand_yaglom(model, 4.0, 4000)
    halves = compose(gelfand_yaglom(model, 2.0, 2000), gelfand_yaglom(model, 2.0, 2000))
    _assert_same_kernel(halves, full, 1e-9)
    assert halves.maslov == full.maslov == 1


def _driven_model():
    return QuadraticModel(m=1.0, c=lambda t: 1.0 + 0.5 * np.sin(2 * t), f=lambda t: 0.3 * np.cos(t))


def test_time_slicing_converges_at_second_order():
    model = _driven_model()
    t = 1.5
    ref = gelfand_yaglom(model, t, 20000)
    Ns = np.array([8, 16, 32, 64, 128])
    x = np.linspace(-1, 1, 5)
    err = [np.max(np.abs(time_sliced(model, t, N)(x, 0.2) - ref(x, 0.2))) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(err), 1)[0]
    assert slope == pytest.approx(-2.0, abs=0.1)


def test_flat_measure_prefactor_converges_at_first_order():
    model = _ho_model()
    t = 1.5
    ref = gelfand_yaglom(model, t, 8000).prefactor
    Ns = np.array([16, 32, 64, 128])
    err = [abs(time_sliced(model, t, N, measure="flat").prefactor - ref) for N in Ns]
    slope = np.polyfit(np.log(Ns), np.log(err), 1)[0]
    assert slope == pytest.approx(-1.0, abs=0.15)
    with pytest.raises(ConfigError):
        time_sliced(model, t, 8, measure="other")


def test_sliced_family_dispatch():
    model = _ho_model()
    direct = time_sliced(model, 1.0, 32)(0.5, 0.1)
    assert propagate(Sliced(model, N=32), 0.5, 1.0, 0.1) == pytest.approx(direct)
    assert propagate(Quadratic(model), 0.5, 1.0, 0.1) == pytest.approx(
        propagate(HarmonicOscillator(), 0.5, 1.0, 0.1), rel=1e-9)

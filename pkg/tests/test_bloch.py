import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import linalg, signal

from mwhom.bloch import (
    BlochDynamics,
    BlochVector,
    TlsParams,
    bloch_system,
    coherent_fraction,
    g1_tls_closed,
    g1_tls_regression,
    g2_continuous_output,
    g2_polarized_output,
    g2_tls_closed,
    g2_tls_regression,
    propagator,
    steady_state,
)

rates = st.floats(0.05, 5.0)
rabi = st.builds(complex, st.floats(-10, 10), st.floats(-10, 10))
params = st.builds(TlsParams, st.floats(0.2, 5.0), st.floats(0, 5.0), rabi, st.floats(-5, 5))
resonant = st.builds(TlsParams, st.floats(0.2, 5.0), st.floats(0, 5.0), rabi)


def pop(p):
    w2 = abs(p.omega) ** 2
    return w2 / (p.gamma1 * p.gamma2 + 2 * w2)


# --- parameters and the Bloch system --------------------------------------------------------

def test_params_validation():
    with pytest.raises(ValueError):
        TlsParams(0.0)
    with pytest.raises(ValueError):
        TlsParams(1.0, -0.1)
    with pytest.raises(ValueError):
        TlsParams(1.0, 0.0, complex("nan"))
    assert TlsParams(1.0, 0.75).gamma2 == 2.5


def test_undriven_matrix_is_diagonal():
    a, b = bloch_system(TlsParams(1.0, 0.5))
    assert np.array_equal(a, np.diag([-1.0, -1.0, -1.0]).astype(complex))
    assert np.array_equal(b, [0, 0, -1.0])


@given(params)
def test_trace_and_stability(p):
    a, _ = bloch_system(p)
    assert np.trace(a) == pytest.approx(-p.gamma2 - p.gamma1, rel=1e-14)
    assert np.all(np.linalg.eigvals(a).real < 0)


# --- steady state -----------------------------------------------------------------------------

def test_ground_state_without_drive():
    v = steady_state(TlsParams(1.0, 0.3))
    assert (v.sp, v.sm, v.sz) == (0, 0, -1)


@given(resonant)
def test_steady_population_matches_closed_form(p):
    v = steady_state(p)
    assert v.excited_population == pytest.approx(pop(p), rel=1e-10, abs=1e-14)
    assert g1_tls_closed(p, 0.0)[0] == pytest.approx(v.excited_population, rel=1e-10, abs=1e-14)


@given(params)
def test_steady_state_is_physical(p):
    assert steady_state(p).is_physical()


def test_saturation():
    assert abs(steady_state(TlsParams(1.0, 0.0, 1e4)).sz) < 1e-7


def test_bloch_vector_round_trip():
    v = BlochVector(0.1 + 0.2j, 0.1 - 0.2j, -0.5)
    assert BlochVector.from_array(v.as_array()) == v
    assert not BlochVector(0.6, 0.6, 0.0).is_physical()


# --- propagator --------------------------------------------------------------------------------

def test_propagator_at_zero_delay():
    prop = propagator(TlsParams(1.0, 0.5, 2.0 + 1j), 0.0)
    assert np.max(np.abs(prop.c_matrix - np.eye(3))) < 1e-12
    assert np.max(np.abs(prop.d_vector)) < 1e-12


def test_undriven_propagator_is_diagonal():
    p = TlsParams(1.0, 0.5, 0.0, 0.8)
    tau = 1.3
    expected = np.diag(np.exp(np.array([-p.gamma2 / 2 + 0.8j, -p.gamma2 / 2 - 0.8j, -1.0]) * tau))
    assert np.allclose(propagator(p, tau).c_matrix, expected, atol=1e-14)


@settings(max_examples=50)
@given(params, st.floats(0, 3), st.floats(0, 3))
def test_semigroup(p, t1, t2):
    dyn = BlochDynamics(p)
    lhs = dyn.c_matrix(t1 + t2)
    rhs = dyn.c_matrix(t2) @ dyn.c_matrix(t1)
    assert np.max(np.abs(lhs - rhs)) < 1e-10


@given(params)
def test_steady_state_is_a_fixed_point(p):
    dyn = BlochDynamics(p)
    for tau in np.logspace(-3, 2, 11):
        assert np.max(np.abs(dyn.propagator(tau).apply(dyn.v_ss) - dyn.v_ss)) < 1e-10


@settings(max_examples=50)
@given(params, st.floats(0, 2 * math.pi), st.floats(0, math.pi), st.floats(0, 1), st.floats(0, 5))
def test_propagation_keeps_conjugate_pair(p, azimuth, polar, radius, tau):
    sp = 0.5 * radius * math.sin(polar) * complex(math.cos(azimuth), math.sin(azimuth))
    v0 = np.array([sp, np.conj(sp), radius * math.cos(polar)])
    v = propagator(p, tau).apply(v0)
    assert abs(v[1] - np.conj(v[0])) < 1e-10
    assert abs(v[2].imag) < 1e-10


def test_matches_matrix_exponential():
    p = TlsParams(1.0, 0.5, 1.7 - 0.4j, 0.6)
    a, _ = bloch_system(p)
    for tau in (0.1, 1.0, 7.0):
        assert np.allclose(propagator(p, tau).c_matrix, linalg.expm(a * tau), atol=1e-12)


def test_defective_matrix_takes_the_fallback():
    # kappa = 0 exactly: the two damped eigenvalues coincide
    p = TlsParams(1.0, 0.0, 0.25)
    dyn = BlochDynamics(p)
    assert dyn.use_expm
    prop = dyn.propagator(2.0)
    assert prop.meta["fallback_expm"]
    assert np.max(np.abs(prop.apply(dyn.v_ss) - dyn.v_ss)) < 1e-12
    tau = np.linspace(0, 8, 41)
    assert np.allclose(dyn.g1(tau).real, g1_tls_closed(p, tau), rtol=1e-9, atol=1e-14)
    assert not BlochDynamics(TlsParams(1.0, 0.0, 1.0)).use_expm


def test_negative_delay_rejected():
    with pytest.raises(ValueError):
        propagator(TlsParams(1.0), -1.0)


# --- emitter correlations ---------------------------------------------------------------------

@settings(max_examples=40)
@given(resonant)
def test_closed_forms_match_regression(p):
    tau = np.linspace(0, 10 / p.gamma1, 60)
    assert np.allclose(g1_tls_closed(p, tau), g1_tls_regression(p, tau).real, rtol=1e-6, atol=1e-14)
    assert np.allclose(g2_tls_closed(p, tau)[0], g2_tls_regression(p, tau), rtol=1e-6, atol=1e-14)


@pytest.mark.parametrize("gamma_p", [0.0, 0.5, 2.0])
def test_long_delay_plateaus(gamma_p):
    p = TlsParams(1.0, gamma_p, 0.8)
    d = p.gamma1 * p.gamma2 + 2 * 0.64
    assert g1_tls_closed(p, 80.0)[0] == pytest.approx(0.64 / d**2, rel=1e-9)
    assert g2_tls_closed(p, 80.0)[1][0] == pytest.approx(1.0, abs=1e-6)
    assert coherent_fraction(p) * pop(p) == pytest.approx(0.64 / d**2, rel=1e-10)


@given(resonant)
def test_antibunching(p):
    tau = np.linspace(0, 0.05 / (p.gamma1 + p.gamma2), 5)
    g2 = g2_tls_closed(p, tau)[1]
    assert abs(g2[0]) < 1e-10
    assert np.all(np.diff(g2) > 0)


def test_rabi_oscillation_frequency():
    p = TlsParams(1.0, 0.0, 10.0)
    kappa = abs(np.sqrt(complex((2 * p.gamma1 - p.gamma2) ** 2 - 16 * 100)) / 4)
    tau = np.linspace(0, 6, 60001)
    g2 = g2_tls_closed(p, tau)[1]
    peaks, _ = signal.find_peaks(g2)
    spacing = np.diff(tau[peaks])[:3]
    assert np.allclose(spacing, 2 * math.pi / kappa, rtol=1e-3)


def test_near_degenerate_kappa_is_continuous():
    # kappa^2 = (1 - 16 omega^2) / 16 for gamma1 = 1, gamma_p = 0
    exact = TlsParams(1.0, 0.0, 0.25)
    near = TlsParams(1.0, 0.0, math.sqrt(1 - 16e-16) / 4)
    tau = np.linspace(0, 10, 101)
    for f in (g1_tls_closed, lambda p, t: g2_tls_closed(p, t)[0]):
        a, b = f(exact, tau), f(near, tau)
        assert np.max(np.abs(a - b) / np.maximum(np.abs(a), 1e-300)) < 1e-6


def test_closed_forms_need_resonance():
    with pytest.raises(ValueError, match="resonant"):
        g1_tls_closed(TlsParams(1.0, 0.0, 1.0, 0.5), 0.0)


# --- output ports ------------------------------------------------------------------------------

def test_identical_emitters_suppress_coincidences():
    p = TlsParams(1.0, 0.5, 0.7)
    out = g2_continuous_output(p, p, 0.0, np.linspace(0, 10, 51))
    assert abs(out.cross_norm[0]) < 1e-12
    assert out.auto_norm[0] == pytest.approx(1.0, rel=1e-12)
    assert out.normalization == pytest.approx(pop(p) ** 2, rel=1e-12)


def test_identical_emitter_form():
    p = TlsParams(1.0, 0.2, 1.3)
    delta = 3.0
    tau = np.linspace(0, 10, 101)
    out = g2_continuous_output(p, p, delta, tau)
    g1 = g1_tls_closed(p, tau)
    g2 = g2_tls_closed(p, tau)[0]
    beat = np.cos(delta * tau) * g1**2
    assert np.allclose(out.auto, 0.5 * (g2 + beat + pop(p) ** 2), rtol=1e-12)
    assert np.allclose(out.cross, 0.5 * (g2 - beat + pop(p) ** 2), rtol=1e-12, atol=1e-16)


def test_quantum_beat_spacing():
    p = TlsParams(1.0, 0.0, 0.5)
    delta = 10.0
    tau = np.linspace(0, 3, 30001)
    cross = g2_continuous_output(p, p, delta, tau).cross_norm
    minima, _ = signal.find_peaks(-cross)
    spacing = tau[minima[1]] - tau[minima[0]]
    assert spacing == pytest.approx(2 * math.pi / delta, rel=0.05)


def test_swapping_emitters_flips_the_detuning():
    pa, pb = TlsParams(1.0, 0.2, 0.7), TlsParams(1.5, 0.0, 1.1)
    tau = np.linspace(0, 5, 21)
    ab = g2_continuous_output(pa, pb, 2.0, tau)
    ba = g2_continuous_output(pb, pa, -2.0, tau)
    assert np.allclose(ab.cross, ba.cross, rtol=1e-13)
    assert np.allclose(ab.auto, ba.auto, rtol=1e-13)


def test_detuned_emitters_use_regression():
    p = TlsParams(1.0, 0.2, 0.7, 0.3)
    out = g2_continuous_output(p, p, 0.0, np.linspace(0, 5, 11))
    assert abs(out.cross_norm[0]) < 1e-12


def test_plateau_residual_is_recorded():
    p = TlsParams(1.0, 0.0, 3.0)
    out = g2_continuous_output(p, p, 0.0, np.array([0.0, 60.0]))
    residual = out.meta["plateau_residual"]
    assert out.cross_norm[-1] == pytest.approx(1 - residual, rel=1e-9)
    assert out.auto_norm[-1] == pytest.approx(1 + residual, rel=1e-9)


def test_parallel_polarization_equals_zero_detuning():
    p = TlsParams(1.0, 0.5, 1.2)
    tau = np.linspace(0, 8, 41)
    pol = g2_polarized_output(p, 0.0, tau)
    cont = g2_continuous_output(p, p, 0.0, tau)
    assert np.allclose(pol.cross, cont.cross, rtol=1e-12, atol=1e-16)
    assert np.allclose(pol.auto, cont.auto, rtol=1e-12)


def test_orthogonal_polarization_removes_interference():
    p = TlsParams(1.0, 0.5, 1.2)
    out = g2_polarized_output(p, math.pi / 2, np.linspace(0, 8, 41))
    assert np.max(np.abs(out.auto - out.cross)) < 1e-10 * np.max(out.auto)


@pytest.mark.parametrize("phi,expected", [(0.0, 0.0), (math.pi / 4, 0.25), (math.pi / 2, 0.5)])
def test_zero_delay_dip_follows_cos_squared(phi, expected):
    out = g2_polarized_output(TlsParams(1.0, 0.3, 0.9), phi, np.array([0.0]))
    assert out.cross_norm[0] == pytest.approx(expected, abs=1e-12)

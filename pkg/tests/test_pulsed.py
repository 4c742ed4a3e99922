import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from mwhom.oracle import g2_numeric_pulsed, probabilities_numeric
from mwhom.pulsed import (
    GaussianModeParams,
    LorentzianModeParams,
    ProbabilityTable,
    correlation_probabilities,
    eval_gaussian_mode,
    eval_lorentzian_mode,
    g2_gaussian_closed,
    g2_lorentzian_closed,
    hom_dip_scan,
    lorentzian_spectral_density,
    make_mode,
    mode_pair,
    pair_intensity_correlation,
)


# --- parameters and modes ------------------------------------------------------------

@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan")])
def test_params_reject_non_positive_width(bad):
    with pytest.raises(ValueError):
        GaussianModeParams(bad)
    with pytest.raises(ValueError):
        LorentzianModeParams(bad)


def test_params_reject_unknown_branch():
    with pytest.raises(ValueError):
        GaussianModeParams(1.0, branch="c")


def test_gaussian_peak_value():
    assert eval_gaussian_mode(GaussianModeParams(0.7), 0.0) == pytest.approx((1 / (math.pi * 0.49)) ** 0.25)


def test_gaussian_branches_mirror():
    p = GaussianModeParams(1.0, delta_tau=2.0)
    t = np.linspace(-4, 4, 33)
    a = np.abs(eval_gaussian_mode(p, t))
    b = np.abs(eval_gaussian_mode(GaussianModeParams(1.0, 2.0, branch="b"), -t))
    assert np.allclose(a, b, rtol=1e-14)


def test_lorentzian_step_onset_and_pre_release():
    p = LorentzianModeParams(2.0, delta_t=0.4)
    assert eval_lorentzian_mode(p, -0.2) == pytest.approx(math.sqrt(4.0))
    assert eval_lorentzian_mode(p, -0.2 - 1e-12) == 0


@pytest.mark.parametrize("params", [
    GaussianModeParams(0.8, 0.5, 3.0, 1.0),
    GaussianModeParams(0.8, 0.5, 3.0, 1.0, "b"),
    LorentzianModeParams(1.5, 0.4, 2.0, 1.0),
    LorentzianModeParams(1.5, 0.4, 2.0, 1.0, "b"),
])
def test_modes_are_normalized(params):
    assert make_mode(params).norm() == pytest.approx(1.0, abs=1e-6)


def test_shifted_mode_translates_envelope():
    base = make_mode(LorentzianModeParams(1.0))
    shifted = base.shifted(3.0)
    s = np.linspace(0, 2, 9)
    assert np.allclose(np.abs(shifted(3.0 + s)), np.abs(base(s)), rtol=1e-15)


# --- spectral density ---------------------------------------------------------------------

def test_spectral_density_on_carrier():
    p = LorentzianModeParams(2.0, 0.3, 5.0, 1.0)
    for branch, sign in (("a", 1), ("b", -1)):
        q = LorentzianModeParams(2.0, 0.3, 5.0, 1.0, branch)
        value = lorentzian_spectral_density(q, 5.0 + sign * 0.5)
        assert value == pytest.approx(math.sqrt(2.0 / math.pi) / 2.0)
    w = np.linspace(-10, 10, 41)
    mod = np.abs(lorentzian_spectral_density(p, 5.5 + w))
    assert np.allclose(mod, mod[::-1], rtol=1e-14)


@pytest.mark.parametrize("branch", ["a", "b"])
def test_spectral_density_is_fourier_transform_of_mode(branch):
    p = LorentzianModeParams(1.0, 0.8, 0.0, 2.0, branch)
    mode = make_mode(p)
    r = mode.support()[0]
    carrier = mode.carrier
    for dw in np.linspace(-10, 10, 9):
        w = carrier + dw
        f = lambda t, part: getattr(mode(t) * np.exp(1j * w * t), part)
        kw = dict(limit=2000, epsabs=1e-12, weight=None)
        re = integrate.quad(f, r, r + 60, args=("real",), **kw)[0]
        im = integrate.quad(f, r, r + 60, args=("imag",), **kw)[0]
        numeric = complex(re, im) / math.sqrt(2 * math.pi)
        closed = lorentzian_spectral_density(p, w)
        assert abs(numeric - closed) <= 1e-4 * abs(closed)


# --- pair intensity correlation -----------------------------------------------------------

@given(st.floats(-3, 3), st.floats(0, 2), st.floats(-5, 5))
def test_pair_cross_vanishes_at_zero_delay(t, delta_t, delta):
    ma, mb = mode_pair(LorentzianModeParams(1.0, delta_t, 0.0, delta))
    assert pair_intensity_correlation(ma, mb, t, 0.0)[1] == 0.0


def test_pair_auto_for_identical_modes():
    ma, mb = mode_pair(GaussianModeParams(1.0))
    t, tau = 0.3, 0.8
    auto = pair_intensity_correlation(ma, mb, t, tau)[0]
    assert auto == pytest.approx(abs(ma(t + tau) * ma(t)) ** 2, rel=1e-14)


def test_pair_matches_closed_branch_for_lorentzian():
    gamma, delta_t = 1.0, 1.0
    ma, mb = mode_pair(LorentzianModeParams(gamma, delta_t))
    t, tau = 0.6, 0.1
    auto, cross = pair_intensity_correlation(ma, mb, t, tau)
    # both photons released, a at -1/2 and b at +1/2
    za = lambda s: math.sqrt(2) * math.exp(-(s + 0.5))
    zb = lambda s: math.sqrt(2) * math.exp(-(s - 0.5))
    x, y = za(t + tau) * zb(t), zb(t + tau) * za(t)
    assert cross == pytest.approx(0.25 * (x - y) ** 2, rel=1e-12)
    assert auto == pytest.approx(0.25 * (x + y) ** 2, rel=1e-12)


# --- closed-form G2 ---------------------------------------------------------------------------

def test_gaussian_zero_delay_values():
    sigma = 0.7
    auto, cross = g2_gaussian_closed(GaussianModeParams(sigma), 0.0)
    assert cross == 0.0
    assert auto == pytest.approx(1 / math.sqrt(2 * math.pi * sigma**2))


def test_gaussian_matches_oracle_example():
    p = GaussianModeParams(1.0, 1.0, 0.0, 2.0)
    closed = np.array(g2_gaussian_closed(p, 0.5))
    numeric = np.array(g2_numeric_pulsed(*mode_pair(p), 0.5)).ravel()
    assert np.allclose(closed, numeric, rtol=1e-6)


def test_lorentzian_indistinguishable():
    gamma = 1.7
    tau = np.linspace(-3, 3, 61)
    auto, cross = g2_lorentzian_closed(LorentzianModeParams(gamma), tau)
    assert np.all(cross == 0)
    assert np.allclose(auto, gamma * np.exp(-2 * gamma * np.abs(tau)), rtol=1e-14)


@pytest.mark.parametrize("tau", [0.2, 0.7, 1.5])
def test_lorentzian_matches_oracle_example(tau):
    p = LorentzianModeParams(1.0, 0.7, 0.0, 3.0)
    closed = np.array(g2_lorentzian_closed(p, tau))
    numeric = np.array(g2_numeric_pulsed(*mode_pair(p), tau)).ravel()
    assert np.allclose(closed, numeric, rtol=1e-6)


def test_lorentzian_continuous_at_offset():
    p = LorentzianModeParams(1.3, 0.9, 0.0, 2.2)
    eps = 1e-12
    below = np.array(g2_lorentzian_closed(p, 0.9 - eps))
    above = np.array(g2_lorentzian_closed(p, 0.9 + eps))
    assert np.allclose(below, above, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["gaussian", "lorentzian"]), st.floats(0.5, 2), st.floats(-3, 3),
       st.floats(-4, 4), st.floats(-3, 3))
def test_closed_forms_are_even_and_ordered(shape, width, offset, delta, tau):
    if shape == "gaussian":
        p = GaussianModeParams(width, offset, 0.0, delta)
        f = g2_gaussian_closed
    else:
        p = LorentzianModeParams(width, offset, 0.0, delta)
        f = g2_lorentzian_closed
    auto, cross = f(p, tau)
    auto_m, cross_m = f(p, -tau)
    assert auto == pytest.approx(auto_m, rel=1e-12, abs=1e-300)
    assert cross == pytest.approx(cross_m, rel=1e-12, abs=1e-300)
    assert auto >= 0 and cross >= -1e-15
    # swapping the sources leaves both correlations unchanged
    swapped = type(p)(width, -offset, 0.0, -delta)
    assert f(swapped, tau)[1] == pytest.approx(cross, rel=1e-12, abs=1e-300)


# --- probabilities ------------------------------------------------------------------------------

@pytest.mark.parametrize("params,shape", [
    (GaussianModeParams(1.0), "gaussian"),
    (LorentzianModeParams(1.0), "lorentzian"),
])
def test_indistinguishable_photons_never_coincide(params, shape):
    table = correlation_probabilities(shape, params)
    assert table.p_ab == 0 and table.coincidence == 0
    assert table.p_aa == 0.5


def test_distinguishable_limit():
    assert correlation_probabilities("gaussian", GaussianModeParams(1.0, 12.0)).coincidence == pytest.approx(0.5)
    assert correlation_probabilities("lorentzian", LorentzianModeParams(1.0, 20.0)).coincidence == pytest.approx(0.5)


def test_lorentzian_eighth_example():
    p = LorentzianModeParams(1.0, math.log(2) / 2)
    assert correlation_probabilities("lorentzian", p).p_ab == pytest.approx(1 / 8, rel=1e-14)
    assert probabilities_numeric("lorentzian", p).p_ab == pytest.approx(1 / 8, rel=1e-9)


def test_shape_must_match_params():
    with pytest.raises(TypeError):
        correlation_probabilities("gaussian", LorentzianModeParams(1.0))
    with pytest.raises(ValueError):
        correlation_probabilities("square", GaussianModeParams(1.0))


@settings(max_examples=200)
@given(st.sampled_from(["gaussian", "lorentzian"]), st.floats(0.1, 10), st.floats(0, 5),
       st.floats(0, 10))
def test_probabilities_sum_to_one(shape, width, offset_units, delta_units):
    if shape == "gaussian":
        p = GaussianModeParams(width, offset_units * width, 0.0, delta_units / width)
    else:
        p = LorentzianModeParams(width, offset_units / width, 0.0, delta_units * width)
    t = correlation_probabilities(shape, p)
    assert abs(t.total - 1) < 1e-9
    assert t.p_ba == t.p_ab and t.p_bb == t.p_aa
    assert 0 <= t.p_ab <= 0.5 + 1e-12 and 0 <= t.p_aa <= 0.5 + 1e-12


def test_coincidence_is_integral_of_cross():
    p = GaussianModeParams(1.0, 0.8, 0.0, 0.9)
    total = integrate.quad(lambda x: g2_gaussian_closed(p, x)[1], -20, 20, limit=200)[0]
    assert total == pytest.approx(correlation_probabilities("gaussian", p).coincidence, rel=1e-6)


def test_probability_table_symmetric_constructor():
    t = ProbabilityTable.symmetric(0.3, 0.2)
    assert (t.p_aa, t.p_ab, t.p_ba, t.p_bb) == (0.3, 0.2, 0.2, 0.3)
    assert t.total == pytest.approx(1.0)


# --- dip scans -----------------------------------------------------------------------------------

def test_dip_scan_at_zero():
    assert hom_dip_scan("gaussian", GaussianModeParams(1.0), [0.0]) == [(0.0, 0.0)]


def test_dip_scan_quarter_point():
    sigma = 1.3
    offset = sigma * math.sqrt(2 * math.log(2))
    [(_, pc)] = hom_dip_scan("gaussian", GaussianModeParams(sigma), [offset])
    assert pc == pytest.approx(0.25, rel=1e-14)


def test_dip_scan_symmetric_and_monotone():
    sweep = np.linspace(-4, 4, 41)
    scan = hom_dip_scan("gaussian", GaussianModeParams(1.0), sweep)
    pc = np.array([v for _, v in scan])
    assert np.allclose(pc, pc[::-1], rtol=1e-14)
    assert np.all(np.diff(pc[20:]) > 0)


def test_dip_scan_over_detuning():
    scan = hom_dip_scan("lorentzian", LorentzianModeParams(1.0), [0.0, 2.0], variable="delta")
    assert scan[0][1] == 0.0
    assert scan[1][1] == pytest.approx(0.5 * (1 - 4 / 8))


def test_dip_scan_rejects_empty_sweep():
    with pytest.raises(ValueError):
        hom_dip_scan("gaussian", GaussianModeParams(1.0), [])

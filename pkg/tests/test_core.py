import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mwhom.core import (
    BS_MATRIX,
    CorrelationSeries,
    GridMismatchError,
    InputCorrelations,
    NegativeCorrelationError,
    NumericalError,
    TimeGrid,
    beamsplitter_transform,
    coherent_moment,
    direct_output_intensity,
    fock_moment,
    full_output_intensity_correlation,
    output_g2_from_inputs,
    output_intensities,
    output_intensity_terms,
    term_signs,
)
from mwhom.pulsed import (
    GaussianModeParams,
    LorentzianModeParams,
    mode_pair,
    pair_intensity_correlation,
)

finite = st.floats(-10, 10, allow_nan=False)
amplitude = st.builds(complex, finite, finite)


# --- grids and series ------------------------------------------------------------

def test_grid_points_are_exact_multiples():
    g = TimeGrid(-1.0, 0.25, 9)
    assert np.array_equal(g.points, -1.0 + 0.25 * np.arange(9))
    assert g.stop == 1.0


def test_symmetric_grid_contains_zero():
    g = TimeGrid.symmetric(1.0, 0.1)
    assert g.points[g.index_of(0.0)] == pytest.approx(0.0, abs=1e-15)
    assert g.n == 21


@pytest.mark.parametrize("dt,n", [(0.0, 5), (-1.0, 5), (0.1, 1)])
def test_grid_rejects_bad_shape(dt, n):
    with pytest.raises(ValueError):
        TimeGrid(0.0, dt, n)


def test_series_rejects_wrong_length():
    with pytest.raises(ValueError):
        CorrelationSeries(TimeGrid(0, 1, 3), np.zeros(4), "G2_auto")


def test_series_rejects_negative_g2_but_tolerates_roundoff():
    g = TimeGrid(0, 1, 3)
    CorrelationSeries(g, np.array([0.0, -5e-10, 1.0]), "G2_cross")
    with pytest.raises(NegativeCorrelationError):
        CorrelationSeries(g, np.array([0.0, -1e-6, 1.0]), "G2_cross")


def test_series_rejects_non_finite():
    with pytest.raises(NumericalError):
        CorrelationSeries(TimeGrid(0, 1, 2), np.array([0.0, np.nan]), "G1")


def test_series_rejects_complex_g2():
    with pytest.raises(ValueError):
        CorrelationSeries(TimeGrid(0, 1, 2), np.array([0.0, 1j]), "G2_auto")


def test_normalization_accumulates():
    s = CorrelationSeries(TimeGrid(0, 1, 2), np.array([2.0, 4.0]), "G2_auto")
    n = s.normalized(2.0).normalized(2.0)
    assert np.array_equal(n.values, [0.5, 1.0])
    assert n.normalization == 4.0


def test_clamping_only_on_request():
    s = CorrelationSeries(TimeGrid(0, 1, 2), np.array([-1e-12, 1.0]), "G2_cross")
    assert s.values[0] < 0
    assert s.clamped()[0] == 0.0


def test_inputs_must_share_grid():
    a = CorrelationSeries(TimeGrid(0, 1, 3), np.ones(3), "G1")
    b = CorrelationSeries(TimeGrid(0, 0.5, 3), np.ones(3), "G1")
    with pytest.raises(GridMismatchError):
        InputCorrelations(a, b, a, a, 1.0, 1.0)


# --- beam splitter -------------------------------------------------------------------

def test_beamsplitter_rows():
    a, b = beamsplitter_transform(1, 0)
    assert (a, b) == pytest.approx((1 / math.sqrt(2), 1 / math.sqrt(2)))
    a, b = beamsplitter_transform(1, 1)
    assert (a, b) == pytest.approx((0.0, math.sqrt(2)))


def test_beamsplitter_is_unitary():
    assert np.allclose(BS_MATRIX.conj().T @ BS_MATRIX, np.eye(2), atol=1e-15)


@given(amplitude, amplitude)
def test_beamsplitter_conserves_intensity(x, y):
    a, b = beamsplitter_transform(x, y)
    assert abs(a) ** 2 + abs(b) ** 2 == pytest.approx(abs(x) ** 2 + abs(y) ** 2, rel=1e-12, abs=1e-12)


@given(st.floats(0, 10), st.floats(0, 10))
def test_mean_output_intensity_conserved(i_a, i_b):
    o_a, o_b = output_intensities(i_a, i_b)
    assert o_a + o_b == pytest.approx(i_a + i_b)


# --- output correlations from input correlations ---------------------------------------

def _series(values, kind, grid):
    return CorrelationSeries(grid, np.asarray(values), kind)


def test_identical_sources_reduce_to_half_form():
    grid = TimeGrid(0.0, 0.1, 30)
    tau = grid.points
    g1 = 0.3 * np.exp(-tau) * np.exp(0.7j * tau)
    g2 = 0.09 * (1 - np.exp(-2 * tau))
    inputs = InputCorrelations.identical(_series(g1, "G1", grid), _series(g2, "G2_auto", grid), 0.3)
    auto = output_g2_from_inputs(inputs, "auto").values
    cross = output_g2_from_inputs(inputs, "cross").values
    assert np.allclose(auto, 0.5 * (g2 + np.abs(g1) ** 2 + 0.09), rtol=1e-14)
    assert np.allclose(cross, 0.5 * (g2 - np.abs(g1) ** 2 + 0.09), rtol=1e-14, atol=1e-17)
    # zero delay: the first-order terms cancel in the cross output
    assert cross[0] == pytest.approx(0.5 * g2[0], abs=1e-15)
    assert auto[0] == pytest.approx(0.5 * g2[0] + 0.09, rel=1e-12)


def test_swapping_inputs_leaves_outputs_unchanged():
    grid = TimeGrid(0.0, 0.2, 20)
    tau = grid.points
    g1a = _series(0.4 * np.exp(-tau + 1j * tau), "G1", grid)
    g1b = _series(0.2 * np.exp(-2 * tau), "G1", grid)
    g2a = _series(0.16 * (1 - np.exp(-tau)), "G2_auto", grid)
    g2b = _series(0.04 * (1 - np.exp(-3 * tau)), "G2_auto", grid)
    ab = InputCorrelations(g1a, g1b, g2a, g2b, 0.4, 0.2)
    ba = InputCorrelations(g1b, g1a, g2b, g2a, 0.2, 0.4)
    for port in ("auto", "cross"):
        assert np.allclose(output_g2_from_inputs(ab, port).values,
                           output_g2_from_inputs(ba, port).values, rtol=1e-15)


def test_emitter_inputs_match_master_equation_oracle():
    from mwhom.bloch import TlsParams, g1_tls_closed, g2_tls_closed
    from mwhom.oracle import tls_correlation_numeric

    p = TlsParams(1.0, 0.5, 1.3)
    grid = TimeGrid(0.0, 0.5, 12)
    g1c = g1_tls_closed(p, grid.points)
    g2c = g2_tls_closed(p, grid.points)[0]
    g1n, g2n = tls_correlation_numeric(p, grid.points)
    closed = InputCorrelations.identical(_series(g1c, "G1", grid), _series(g2c, "G2_auto", grid), g1c[0])
    numeric = InputCorrelations.identical(_series(g1n, "G1", grid), _series(g2n, "G2_auto", grid),
                                          g1n[0].real)
    for port in ("auto", "cross"):
        a = output_g2_from_inputs(closed, port).values
        b = output_g2_from_inputs(numeric, port).values
        assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12)) < 1e-6


# --- the eight-term expansion -------------------------------------------------------------

def test_term_signs_follow_the_beam_splitter_matrix():
    # first input-intensity and intensity-product terms always add; the
    # interference term flips between ports
    assert list(term_signs("auto")) == [1, 1, 1, 1, -1, -1, -1, -1]
    assert list(term_signs("cross")) == [1, 1, -1, -1, 1, 1, -1, -1]


@settings(max_examples=60)
@given(amplitude, amplitude, st.floats(-2, 2), st.floats(-2, 2))
def test_coherent_inputs_match_classical_fields(alpha, beta, t, tau):
    modes = mode_pair(GaussianModeParams(1.0, 0.4, 0.0, 1.1))

    def moment(source, ops):
        return coherent_moment(modes[source], (alpha, beta)[source], ops)

    ea = lambda s: alpha * modes[0](s)
    eb = lambda s: beta * modes[1](s)
    out_a = lambda s: (ea(s) - eb(s)) / math.sqrt(2)
    out_b = lambda s: (ea(s) + eb(s)) / math.sqrt(2)
    exact = {
        "auto": abs(out_a(t)) ** 2 * abs(out_a(t + tau)) ** 2,
        "cross": abs(out_b(t)) ** 2 * abs(out_a(t + tau)) ** 2,
    }
    for port in ("auto", "cross"):
        grouped = output_intensity_terms(moment, t, tau, port).sum()
        direct = direct_output_intensity(moment, t, tau, port)
        scale = max(1.0, exact[port])
        assert abs(grouped - exact[port]) < 1e-11 * scale
        assert abs(direct - exact[port]) < 1e-11 * scale


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_phase_dependent_terms_vanish_for_single_photons(t, tau):
    modes = mode_pair(LorentzianModeParams(1.0, 0.3, 0.0, 2.0))
    terms = output_intensity_terms(lambda s, ops: fock_moment(modes[s], ops), t, tau, "cross")
    assert np.all(terms[3:] == 0)


def test_fock_moment_rejects_unordered_strings():
    mode = mode_pair(GaussianModeParams(1.0))[0]
    with pytest.raises(ValueError):
        fock_moment(mode, [(False, 0.0), (True, 0.0)])


def test_fock_moment_counts_photons():
    mode = mode_pair(GaussianModeParams(1.0))[0]
    ops = [(True, 0.0), (True, 0.0), (False, 0.0), (False, 0.0)]
    assert fock_moment(mode, ops, n=1) == 0
    assert fock_moment(mode, ops, n=2) == pytest.approx(2 * abs(mode(0.0)) ** 4)


def test_full_expansion_indistinguishable_cross_vanishes_at_zero_delay():
    ma, mb = mode_pair(LorentzianModeParams(1.0))
    auto, cross = full_output_intensity_correlation(ma, mb, 0.3, 0.0)
    assert cross == 0.0
    assert auto > 0


def test_full_expansion_matches_pair_formula_gaussian():
    ma, mb = mode_pair(GaussianModeParams(1.0, 0.6, 0.0, 1.5))
    full = full_output_intensity_correlation(ma, mb, 0.0, 1.0)
    pair = pair_intensity_correlation(ma, mb, 0.0, 1.0)
    assert full == pytest.approx(tuple(float(x) for x in pair), rel=1e-12, abs=1e-15)


@settings(max_examples=50)
@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(0, 1.5), st.floats(-3, 3))
def test_full_expansion_matches_pair_formula_lorentzian(t, tau, delta_t, delta):
    ma, mb = mode_pair(LorentzianModeParams(1.0, delta_t, 0.0, delta))
    full = full_output_intensity_correlation(ma, mb, t, tau)
    pair = pair_intensity_correlation(ma, mb, t, tau)
    assert full == pytest.approx(tuple(float(x) for x in pair), rel=1e-12, abs=1e-14)


def test_negativity_bound_scales_with_magnitude():
    g = TimeGrid(0, 1, 2)
    values = np.array([-2e-9, 0.0])
    with pytest.raises(NegativeCorrelationError):
        CorrelationSeries(g, values, "G2_cross")
    s = CorrelationSeries(g, values, "G2_cross", magnitude=5e7)
    assert s.normalized(2.0).magnitude == 5e7

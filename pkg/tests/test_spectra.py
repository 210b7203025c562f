import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import kernel_by_quadrature, masked_trapezoid
from polsource.constants import C_NM_THZ, itu_frequency, wavelength_to_frequency
from polsource.spectra import (
    FilterSpec,
    FrequencyGrid,
    SpectralKernel,
    SpectralProfile,
    filter_overlap,
    filtered_profile,
    interference_kernel,
    make_dwdm_filter,
    make_source_spectrum,
    measure_fwhm,
    same_side_probability,
    window_filter,
)


def test_grid_spacing_and_bounds(grid):
    nu = grid.frequencies
    assert len(nu) == 4096
    assert np.allclose(np.diff(nu), grid.step, rtol=0, atol=1e-12)
    assert math.isclose(grid.step, grid.span / (grid.n_points - 1))
    assert np.all(nu > 0)


@pytest.mark.parametrize("kw", [dict(n_points=1), dict(span=0.0), dict(span=-1.0)])
def test_grid_rejects_bad_parameters(kw):
    args = dict(center_frequency=194.6, span=1.0, n_points=100) | kw
    with pytest.raises(ValueError):
        FrequencyGrid(**args)


def test_source_fwhm_matches_requested():
    fine = FrequencyGrid.around_wavelength(n_points=16385)
    prof = make_source_spectrum("H", 1540.2, 0.85, fine)
    nu0 = wavelength_to_frequency(1540.2)
    fwhm_nm = C_NM_THZ * measure_fwhm(prof) / nu0**2
    step_nm = C_NM_THZ * fine.step / nu0**2
    assert abs(fwhm_nm - 0.85) <= step_nm


def test_h_and_v_envelopes_identical_and_normalized(sources):
    h, v = sources
    assert h.allclose(v)
    assert abs(h.power() - 1.0) < 1e-9


def test_sinc2_option_normalized(grid):
    prof = make_source_spectrum("V", 1540.2, 0.85, grid, shape="sinc2")
    assert abs(prof.power() - 1.0) < 1e-9


def test_coarse_grid_rejected():
    coarse = FrequencyGrid.around_wavelength(n_points=40)
    with pytest.raises(ValueError, match="too coarse"):
        make_source_spectrum("H", 1540.2, 0.85, coarse)


def test_filter_peak_is_unity(filters100):
    for f in filters100:
        assert f.intensity.max() == pytest.approx(1.0, abs=1e-12)


def test_plus_channel_is_long_wavelength(filters100):
    plus, minus = filters100
    nu_plus = plus.frequencies[np.argmax(plus.intensity)]
    nu_minus = minus.frequencies[np.argmax(minus.intensity)]
    assert nu_plus < nu_minus
    assert FilterSpec.itu(46, "+").itu_center > FilterSpec.itu(47, "-").itu_center


def test_adjacent_channel_crossover_order_one_percent(setup_of):
    s = setup_of("paper-spectrum")
    assert 1e-3 < filter_overlap(s.filt_plus, s.filt_minus) < 1e-1


def test_full_grid_spacing_filters_cross_at_half(filters100):
    # order-4 passbands as wide as the 100 GHz spacing meet at half transmission
    assert filter_overlap(*filters100) == pytest.approx(0.5, abs=5e-3)


def test_order_one_is_gaussian(grid):
    f = make_dwdm_filter(FilterSpec.itu(46, "+", 100.0, shape_order=1), grid)
    d = grid.frequencies - itu_frequency(46)
    expected = np.exp(-4 * math.log(2) * (d / 0.1) ** 2)
    assert np.allclose(f.intensity, expected, atol=1e-14)


def test_filter_outside_grid_rejected():
    small = FrequencyGrid.around_wavelength(span_nm=0.5, n_points=1001)
    with pytest.raises(ValueError, match="not contained"):
        make_dwdm_filter(FilterSpec.itu(40, "+"), small)


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec(1540.0, "x")
    with pytest.raises(ValueError):
        FilterSpec(1540.0, "+", bandwidth_fwhm=0)


def test_identity_and_annihilator_filters(grid, sources):
    h = sources[0]
    ones = SpectralProfile(grid, np.ones(grid.n_points))
    zeros = SpectralProfile(grid, np.zeros(grid.n_points))
    assert filtered_profile(h, ones).allclose(h)
    assert np.all(filtered_profile(h, zeros).amplitude == 0)


def test_filtered_profile_grid_mismatch(grid, sources):
    other = FrequencyGrid.around_wavelength(n_points=2048)
    with pytest.raises(ValueError, match="grid mismatch"):
        filtered_profile(sources[0], SpectralProfile(other, np.ones(2048)))


def test_flat_top_fraction_against_trapezoid_oracle(grid, sources):
    h = sources[0]
    c = grid.center_frequency
    lo, hi = c - 0.05, c + 0.05
    got = filtered_profile(h, window_filter(grid, lo, hi)).power()
    want = masked_trapezoid(h.intensity, grid.frequencies, lo, hi)
    assert got == pytest.approx(want, rel=1e-12)
    # sanity: close to the analytic Gaussian fraction
    width = C_NM_THZ / (1540.2 - 0.425) - C_NM_THZ / (1540.2 + 0.425)
    analytic = math.erf(0.05 * 2 * math.sqrt(math.log(2)) / width)
    assert got == pytest.approx(analytic, abs=5e-3)


def test_csv_round_trip(sources):
    h = sources[0]
    back = SpectralProfile.from_csv(h.to_csv())
    assert back.allclose(h)


def test_same_side_disjoint_rectangular_is_zero(grid, sources):
    c = grid.center_frequency
    lo, hi = grid.bounds
    plus = window_filter(grid, lo - 1, c)
    minus = window_filter(grid, c, hi + 1)
    assert same_side_probability(*sources, plus, minus) == 0.0


def test_same_side_identical_filters_is_one(grid, sources):
    c = grid.center_frequency
    win = window_filter(grid, c - 0.2, c + 0.2)
    assert same_side_probability(*sources, win, win) == pytest.approx(1.0, abs=1e-12)


def test_same_side_paper_filters_below_quarter_percent(setup_of):
    s = setup_of("paper-spectrum")
    p = same_side_probability(s.source_H, s.source_V, s.filt_plus, s.filt_minus, s.pump_frequency)
    assert 0 <= p < 2.5e-3


def test_same_side_zero_transmission_signaled(grid, sources):
    zeros = SpectralProfile(grid, np.zeros(grid.n_points))
    with pytest.raises(ZeroDivisionError):
        same_side_probability(*sources, zeros, zeros)


def test_same_side_monotone_in_overlap_rectangular(grid, sources):
    c = grid.center_frequency
    values = []
    for delta in np.linspace(0.0, 0.06, 13):
        plus = window_filter(grid, c - 0.2, c + delta)
        minus = window_filter(grid, c - delta, c + 0.2)
        values.append(same_side_probability(*sources, plus, minus))
    assert values[0] == 0.0
    assert all(b >= a for a, b in zip(values, values[1:]))


def test_same_side_monotone_in_bandwidth(grid, sources):
    values = []
    for bw in (60.0, 70.0, 78.0, 90.0, 100.0, 110.0):
        fp = make_dwdm_filter(FilterSpec.itu(46, "+", bw), grid)
        fm = make_dwdm_filter(FilterSpec.itu(47, "-", bw), grid)
        values.append(same_side_probability(*sources, fp, fm))
    assert all(b >= a for a, b in zip(values, values[1:]))


@pytest.fixture(scope="module")
def kernel100(sources, filters100):
    return SpectralKernel.from_sources(*sources, *filters100)


def test_kernel_unity_at_zero(kernel100):
    assert kernel100(0.0) == pytest.approx(1.0 + 0j, abs=1e-12)


def test_kernel_vanishes_at_fiber_delay(kernel100):
    assert abs(kernel100(22000.0)) < 1e-6


def test_kernel_against_quadrature_oracle(kernel100, grid):
    want = kernel_by_quadrature(5.0, 2.0 * grid.center_frequency)
    assert abs(kernel100(5.0) - want) < 1e-9


def test_interference_kernel_wrapper(kernel100):
    k = kernel100
    got = interference_kernel(k.plus_H, k.plus_V, k.minus_H, k.minus_V, 3.0)
    assert got == pytest.approx(k(3.0), abs=1e-15)


def test_kernel_below_one_for_different_envelopes(grid, filters100):
    h = make_source_spectrum("H", 1540.2, 0.85, grid)
    v = make_source_spectrum("V", 1540.25, 0.95, grid)
    k = SpectralKernel.from_sources(h, v, *filters100)
    assert abs(k(0.0)) < 1 - 1e-6


@settings(max_examples=40, deadline=None)
@given(st.floats(-200.0, 200.0))
def test_kernel_bounded_and_hermitian(kernel100, tau):
    g = kernel100(tau)
    assert abs(g) <= 1 + 1e-12
    assert kernel100(-tau) == pytest.approx(np.conj(g), abs=1e-12)


def test_grid_doubling_convergence(grid):
    fine = grid.refined(2)
    out = []
    for g in (grid, fine):
        h = make_source_spectrum("H", 1540.2, 0.85, g)
        v = make_source_spectrum("V", 1540.2, 0.85, g)
        fp = make_dwdm_filter(FilterSpec.itu(46, "+", 78.0), g)
        fm = make_dwdm_filter(FilterSpec.itu(47, "-", 78.0), g)
        k = SpectralKernel.from_sources(h, v, fp, fm)
        out.append((h.power(), same_side_probability(h, v, fp, fm), k(5.0), k(2.0)))
    for a, b in zip(*out):
        assert abs(a - b) < 1e-6

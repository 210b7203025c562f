import logging
import math

import numpy as np
import pytest

from polsource.detection import (
    GATED,
    IDEAL,
    IDQ_201,
    IDQ_220,
    CountingConfig,
    DetectorParams,
    ExpectedRates,
    accidentals_from_tag_streams,
    brightness_to_pair_rate,
    db_to_transmission,
    expected_rates,
    point_rng,
    raw_and_net_visibility,
    sample_coincidences,
    simulate_counts,
    source_budget,
)
from polsource.fitting import ScanResult, fit_fringe

BOB = np.arange(0.0, 90.0, 2.5)


def test_pair_rate_from_brightness():
    assert brightness_to_pair_rate(2e4, 2.5, 100) == pytest.approx(5e6)
    assert brightness_to_pair_rate(3.0, 0.0, 7.0) == 0.0
    assert brightness_to_pair_rate(1, 1, 1) == 1
    with pytest.raises(ValueError):
        brightness_to_pair_rate(-1, 1, 1)


def test_three_db_loss():
    assert db_to_transmission(3.0) == pytest.approx(0.501, abs=1e-3)


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorParams(1.2, 0.0)
    with pytest.raises(ValueError):
        DetectorParams(0.2, -1e-6)
    with pytest.raises(ValueError):
        DetectorParams(0.2, 0.0, "sometimes")
    with pytest.raises(ValueError):
        CountingConfig(coincidence_window=0.0)


def test_noiseless_limit_has_no_accidentals():
    acc = [expected_rates(CountingConfig(w, 1.0, 1e6, 0.5, (IDEAL, IDEAL), 1), 0.3).accidental_coinc
           for w in (1.0, 1e-3, 1e-6)]
    assert acc[1] == pytest.approx(acc[0] * 1e-3) and acc[2] < 1e-3
    dark_only = CountingConfig(1.0, 1.0, 0.0, 0.5, (IDEAL, IDEAL), 1)
    assert expected_rates(dark_only, 0.5).accidental_coinc == 0.0


def test_dip_floor_is_accidentals_only():
    cfg = CountingConfig(4.5, 1.0, 5e6, 0.5, (IDQ_220, IDQ_201), 1)
    r = expected_rates(cfg, 0.0)
    assert r.true_coinc == 0.0
    assert r.total_coinc == r.accidental_coinc > 0


def test_gated_singles_are_gate_clicks():
    cfg = CountingConfig(4.5, 1.0, 5e6, 0.5, (IDQ_220, IDQ_201), 1)
    r = expected_rates(cfg, 0.5)
    assert IDQ_201.mode == GATED
    assert r.singles2 == pytest.approx(r.true_coinc + r.accidental_coinc)


def test_accidentals_against_tag_stream_oracle():
    # budget-level singles, 1e-6/ns dark counts, 1 ns window, 10 s of clicks
    budget = source_budget(CountingConfig(1.0, 1.0, 0.0, 0.5, (IDQ_220, IDQ_220), 0), 2.5, 100.0)
    s1, s2 = budget.singles
    cfg = CountingConfig(1.0, 10.0, 0.0, 0.5, (DetectorParams(0.2, s1 * 1e-9), DetectorParams(0.2, s2 * 1e-9)), 0)
    analytic = expected_rates(cfg, 0.0).accidental_coinc * 10.0
    counted = accidentals_from_tag_streams(s1, s2, 1.0, 10.0, point_rng(2024))
    assert abs(counted - analytic) < 3 * math.sqrt(analytic)


def test_poisson_mean_over_seeds():
    rates = ExpectedRates(0.0, 0.0, 1100.0, 0.0)
    n = 10_000
    counts = [simulate_counts(CountingConfig(rng_seed=s), rates).counts["true_coinc"] for s in range(n)]
    assert abs(np.mean(counts) - 1100) < 3 * math.sqrt(1100 / n)


def test_zero_rates_and_fixed_seed():
    zero = ExpectedRates(0.0, 0.0, 0.0, 0.0)
    rec = simulate_counts(CountingConfig(rng_seed=3), zero)
    assert all(v == 0 for v in rec.counts.values())
    rates = ExpectedRates(1e4, 2e4, 500.0, 20.0)
    a = simulate_counts(CountingConfig(rng_seed=9), rates)
    b = simulate_counts(CountingConfig(rng_seed=9), rates)
    assert a == b and a.to_csv() == b.to_csv()


def test_counts_nonnegative_integers():
    cfg = CountingConfig(4.5, 1.0, 5e6, 0.5, (IDQ_220, IDQ_201), 5)
    counts = sample_coincidences(cfg, np.linspace(0, 1, 50))
    assert counts.dtype.kind == "i" and np.all(counts >= 0)


def test_sampling_independent_of_workers():
    cfg = CountingConfig(4.5, 1.0, 5e6, 0.5, (IDQ_220, IDQ_201), 77)
    probs = np.linspace(0, 1, 40)
    assert np.array_equal(sample_coincidences(cfg, probs, workers=1), sample_coincidences(cfg, probs, workers=8))


def test_monte_carlo_converges_as_inverse_sqrt():
    lam, reps = 50.0, 200
    ns = [100, 1000, 10000]
    rms = []
    for n in ns:
        errs = [point_rng(11, n, r).poisson(lam, n).mean() - lam for r in range(reps)]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(ns), np.log(rms), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)


def _fringe(visibility, scale, floor):
    th = np.radians(BOB)
    true = scale * (1 + visibility * np.cos(4 * th)) / 2
    rate = true + floor
    fit = fit_fringe(BOB, rate, None)
    return ScanResult(BOB, rate, np.sqrt(rate), fit, None, "synthetic", fit_fringe)


def test_zero_accidentals_raw_equals_net():
    res = _fringe(0.97, 1e4, 0.0)
    vp = raw_and_net_visibility(res, 0.0, 1.0)
    assert vp.raw == vp.net


def test_net_recovers_injected_visibility():
    res = _fringe(0.95, 2e4, 300.0)
    vp = raw_and_net_visibility(res, 300.0, 1.0)
    assert vp.raw < 0.95
    assert vp.net == pytest.approx(0.95, abs=2e-3)
    # with Poisson noise at high counts
    rng = point_rng(8)
    noisy = rng.poisson(res.rate * 100).astype(float)
    scan = ScanResult(BOB, noisy, np.sqrt(noisy), fit_fringe(BOB, noisy, np.sqrt(noisy)), 8, "n", fit_fringe)
    assert raw_and_net_visibility(scan, 300.0 * 100, 1.0).net == pytest.approx(0.95, abs=2e-3)


def test_over_subtraction_clamped_with_warning(caplog):
    res = _fringe(1.0, 1e3, 5.0)
    with caplog.at_level(logging.WARNING):
        vp = raw_and_net_visibility(res, 50.0, 1.0)
    assert vp.clamped
    assert np.all(vp.net_scan.rate >= 0)
    assert "clamped" in caplog.text


def test_raw_visibility_monotone_in_dark_counts():
    values = []
    for dark in (0.0, 1e-7, 1e-6, 1e-5, 1e-4):
        det = DetectorParams(0.2, dark)
        cfg = CountingConfig(4.5, 1.0, 5e6, 0.5, (det, det), 1, 0.5)
        probs = (1 + np.cos(4 * np.radians(BOB))) / 4
        rate = np.array([expected_rates(cfg, p).total_coinc for p in probs])
        values.append(fit_fringe(BOB, rate, None).visibility)
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))


def test_budget_surfaces_discrepancy(setup_of):
    s = setup_of("paper-budget")
    rep = source_budget(s.counting, 2.5, 100.0)
    assert rep.pair_rate == pytest.approx(5e6)
    assert rep.expected_coincidences > rep.reported_coincidences
    assert rep.discrepancy_factor == pytest.approx(rep.expected_coincidences / 1100.0)
    assert "discrepancy_factor" in rep.to_text()

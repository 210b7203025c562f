import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import analyzer_probability, rotation_4x4
from polsource.constants import PMF_LENGTH_M, PMF_RATE_PS_PER_M, WAVEGUIDE_WALKOFF_PS
from polsource.polarization import (
    BiphotonState,
    analyzer_projector,
    apply_element,
    apply_elements,
    birefringent_delay,
    channel_delay,
    hwp,
    jones_matrix,
    make_psi_phi,
    outcome_probabilities,
    pbs,
    pbs_project,
    pmf,
    product_state,
    qwp,
    rotation,
    sb_phase,
    transmission_probability,
    unitary,
)

R = 1 / math.sqrt(2)
angles = st.floats(-360.0, 360.0, allow_nan=False)


def test_psi_plus_and_minus():
    plus = make_psi_phi(0.0)
    minus = make_psi_phi(math.pi)
    assert np.allclose(plus.amp, [0, R, R, 0])
    assert np.allclose(minus.amp, [0, R, -R, 0])
    assert plus.norm() == pytest.approx(1.0, abs=1e-15)


def test_state_validation():
    with pytest.raises(ValueError):
        BiphotonState([1, 0, 0])


def test_hwp_zero_is_identity():
    s = make_psi_phi(0.0)
    assert apply_element(s, hwp(0.0)).equivalent(s)


def test_hwp_convention():
    # HWP at 22.5 deg takes H to diagonal
    m = jones_matrix(hwp(22.5))
    assert np.allclose(m @ [1, 0], [R, R])
    assert np.allclose(jones_matrix(hwp(45.0)) @ [1, 0], [0, 1])


def test_45_degree_rotation_collects_eight_terms():
    out = apply_element(make_psi_phi(0.0), rotation(45.0))
    # HV and VH terms cancel pairwise; HH and VV survive with opposite signs
    assert np.allclose(out.amp, [-R, 0, 0, R], atol=1e-15)


def test_psi_minus_rotation_against_4x4_oracle():
    amp = np.array([0, 1, -1, 0]) / math.sqrt(2)
    want = rotation_4x4(45.0) @ amp
    got = apply_element(BiphotonState(amp), rotation(45.0)).amp
    assert np.allclose(got, want, atol=1e-15)
    probs = outcome_probabilities(BiphotonState(got))
    assert probs["HV"] + probs["VH"] == pytest.approx(1.0, abs=1e-12)


def test_coalescence_after_rotation():
    probs = outcome_probabilities(apply_element(make_psi_phi(0.0), rotation(45.0)))
    assert probs["HV"] + probs["VH"] == pytest.approx(0.0, abs=1e-15)
    assert probs["HH"] + probs["VV"] == pytest.approx(1.0, abs=1e-12)


def test_walkoff_arithmetic_with_pmf():
    s = BiphotonState([0, R, R, 0])
    s = apply_elements(s, [birefringent_delay(WAVEGUIDE_WALKOFF_PS), pmf(PMF_LENGTH_M, PMF_RATE_PS_PER_M)])
    assert s.walkoff_H_minus_V == pytest.approx(4.40 - 3.2 * 1.38, abs=1e-12)
    assert s.walkoff_H_minus_V == pytest.approx(-0.016, abs=1e-12)


def test_pbs_on_psi_plus():
    s = make_psi_phi(0.0)
    p, collapsed = pbs_project(s, "H", "H")
    assert p == 0.0
    p, collapsed = pbs_project(s, "H", "V")
    assert p == pytest.approx(0.5)
    assert collapsed.norm() == pytest.approx(1.0)


@pytest.mark.parametrize("a,b,want", [(0, 0, 0.0), (45, 45, 0.5), (45, -45, 0.0)])
def test_analyzer_pairs_against_contraction_oracle(a, b, want):
    s = make_psi_phi(0.0)
    got = transmission_probability(s, analyzer_projector(a, b))
    assert got == pytest.approx(analyzer_probability(s.amp, a, b), abs=1e-12)
    assert got == pytest.approx(want, abs=1e-12)


def test_pbs_is_idempotent():
    s = apply_element(make_psi_phi(0.3), rotation(20.0))
    once = apply_element(s, pbs("H", "plus"))
    twice = apply_element(once, pbs("H", "plus"))
    assert np.allclose(once.amp, twice.amp)


def test_csv_row_round_trip():
    s = apply_elements(make_psi_phi(1.1), [qwp(10.0), birefringent_delay(2.5), channel_delay(7.0)])
    back = BiphotonState.from_csv_row(s.to_csv_row())
    assert np.array_equal(back.amp, s.amp)
    assert back.walkoff_H_minus_V == s.walkoff_H_minus_V
    assert back.channel_delay == s.channel_delay


def test_unitary_rejects_non_unitary():
    with pytest.raises(ValueError):
        unitary(np.array([[1, 1], [0, 1]]))


def _element(kind, angle, target):
    return {"hwp": hwp, "qwp": qwp, "rot": rotation}[kind](angle, target) if kind != "sb" else sb_phase(angle)


element_st = st.tuples(st.sampled_from(["hwp", "qwp", "rot", "sb"]), angles,
                       st.sampled_from(["plus", "minus", "both"]))


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 2 * math.pi), st.lists(element_st, max_size=8))
def test_unitary_sequences_preserve_norm(phi, seq):
    s = make_psi_phi(phi)
    out = apply_elements(s, [_element(*e) for e in seq])
    assert abs(out.norm() - 1.0) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 2 * math.pi))
def test_sb_phase_is_additive(p1, p2, phi):
    s = make_psi_phi(phi)
    a = apply_elements(s, [sb_phase(p1), sb_phase(p2)])
    b = apply_element(s, sb_phase(p1 + p2))
    assert a.equivalent(b)


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.lists(element_st, max_size=5))
def test_pbs_outcomes_sum_to_one(phi, seq):
    s = apply_elements(make_psi_phi(phi), [_element(*e) for e in seq])
    total = sum(pbs_project(s, a, b)[0] for a in "HV" for b in "HV")
    assert abs(total - 1.0) < 1e-9


@settings(max_examples=100, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-1e5, 1e5), st.lists(element_st, max_size=5))
def test_channel_delay_changes_no_probability(phi, delay, seq):
    s = make_psi_phi(phi)
    elements = [_element(*e) for e in seq]
    a = apply_elements(s, elements)
    b = apply_elements(apply_element(s, channel_delay(delay)), elements)
    for x in "HV":
        for y in "HV":
            assert pbs_project(a, x, y)[0] == pytest.approx(pbs_project(b, x, y)[0], abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-20, 20), st.floats(-10, 10), st.floats(-20, 20))
def test_delays_additive_and_commute_with_phase(d1, phi, d2):
    s = make_psi_phi(0.0)
    a = apply_elements(s, [birefringent_delay(d1), sb_phase(phi), birefringent_delay(d2)])
    b = apply_elements(s, [sb_phase(phi), birefringent_delay(d1 + d2)])
    assert a.equivalent(b)


def test_product_state_basis():
    assert np.allclose(product_state("H", "V").amp, [0, 1, 0, 0])

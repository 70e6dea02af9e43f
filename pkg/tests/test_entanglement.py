import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from iontrap.entanglement import (
    LINEAR_HERALD,
    QUOTED_BASELINE_RATE,
    TWO_PHOTON,
    EmitterNode,
    EntanglementLink,
    comparison_report,
    coupling_from_geometry,
    entanglement_rate,
    per_attempt_probability,
    rate_ratio,
    simulate_attempts,
)

frac = st.floats(0.0, 1.0)


def link(c, protocol=LINEAR_HERALD, rate=1e5):
    n = EmitterNode(0.005, c, 0.15)
    return EntanglementLink(n, n, rate, protocol)


def test_coupling_from_geometry():
    assert coupling_from_geometry(0.5, 0.10) == 0.45
    assert coupling_from_geometry(0.035, 0.0) == 0.035
    with pytest.raises(ValueError):
        coupling_from_geometry(1.2, 0.0)


def test_proposed_unit_rate():
    r = entanglement_rate(link(0.45))
    assert r.per_attempt_probability == pytest.approx(3.375e-4)
    assert r.rate == pytest.approx(33.75)
    assert 30 / 1.25 <= r.rate <= 30 * 1.25


def test_bulk_baseline_both_models():
    lin = entanglement_rate(link(0.004))
    coin = entanglement_rate(link(0.004, TWO_PHOTON))
    assert lin.rate == pytest.approx(0.3)  # 0.005 * 0.004 * 0.15 * 1e5
    assert coin.rate == pytest.approx(4.5e-7)
    assert lin.rate != pytest.approx(QUOTED_BASELINE_RATE, rel=0.5)
    assert coin.rate != pytest.approx(QUOTED_BASELINE_RATE, rel=0.5)


def test_comparison_report_flags_discrepancy():
    rep = comparison_report(link(0.45), link(0.004))
    assert rep["baseline"]["discrepancy"] is True
    assert rep["baseline"]["quoted_rate_per_s"] == 2e-3
    assert rep["baseline"]["models"][LINEAR_HERALD]["rate_per_s"] == pytest.approx(0.3)
    assert rep["baseline"]["models"][TWO_PHOTON]["rate_per_s"] == pytest.approx(4.5e-7)
    assert rep["ratio_model"] == pytest.approx(112.5)
    assert rep["ratio_quoted_rates"] == pytest.approx(1.5e4)


def test_rate_ratio():
    r = entanglement_rate(link(0.45))
    assert rate_ratio(r, r) == 1.0
    zero = entanglement_rate(EntanglementLink(EmitterNode(0, 0.5, 0.5), EmitterNode(0, 0.5, 0.5), 1e5))
    assert zero.rate == 0.0
    with pytest.raises(ValueError):
        rate_ratio(r, zero)


def test_validation():
    with pytest.raises(ValueError):
        EmitterNode(1.1, 0.5, 0.5)
    with pytest.raises(ValueError):
        EntanglementLink(EmitterNode(0.1, 0.1, 0.1), EmitterNode(0.1, 0.1, 0.1), 0.0)
    with pytest.raises(ValueError):
        EntanglementLink(EmitterNode(0.1, 0.1, 0.1), EmitterNode(0.1, 0.1, 0.1), 1.0, "teleport")
    with pytest.raises(ValueError):
        EntanglementLink(EmitterNode(0.1, 0.1, 0.1), EmitterNode(0.1, 0.1, 0.1), 1.0, herald_prefactor=1.5)


@settings(max_examples=60, deadline=None)
@given(frac, frac, frac, frac, frac, frac, st.floats(1.0, 1e6))
def test_properties(ba, ca, qa, bb, cb, qb, rate):
    a, b = EmitterNode(ba, ca, qa), EmitterNode(bb, cb, qb)
    lin = EntanglementLink(a, b, rate, LINEAR_HERALD, 1.0)
    coin = EntanglementLink(a, b, rate, TWO_PHOTON, 1.0)
    p_lin = per_attempt_probability(lin)
    p_coin = per_attempt_probability(coin)
    assert 0 <= p_coin <= p_lin + 1e-15 <= 1 + 1e-15
    assert entanglement_rate(lin).rate == pytest.approx(rate * p_lin)
    doubled = EntanglementLink(a, b, 2 * rate, LINEAR_HERALD, 1.0)
    assert entanglement_rate(doubled).rate == pytest.approx(2 * entanglement_rate(lin).rate)


@settings(max_examples=40, deadline=None)
@given(frac, frac, frac, st.floats(1.0, 2.0))
def test_monotone_in_coupling(b, c, q, k):
    c2 = min(1.0, c * k)
    lo = entanglement_rate(EntanglementLink(EmitterNode(b, c, q), EmitterNode(b, c, q), 1e5)).rate
    hi = entanglement_rate(EntanglementLink(EmitterNode(b, c2, q), EmitterNode(b, c2, q), 1e5)).rate
    assert hi >= lo


def test_monte_carlo_within_three_standard_errors():
    lk = link(0.45)
    hits, est, se = simulate_attempts(lk, 10_000_000, seed=1)
    assert abs(est - entanglement_rate(lk).rate) < 3 * se
    assert simulate_attempts(lk, 1000, seed=4) == simulate_attempts(lk, 1000, seed=4)

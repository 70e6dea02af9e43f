import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from iontrap import scenarios as S
from iontrap.detection import (
    NOISELESS,
    AmplifierChain,
    CollectionGeometry,
    DetectorSpec,
    FilmLayer,
    FilmStack,
    LockinNoise,
    budget,
    collection_efficiency,
    detector_qe,
    detector_responsivity_at,
    effective_resistivity,
    effective_sheet_resistance,
    end_to_end_gain,
    histogram,
    lockin_output_analytic,
    lockin_simulate,
    noise_budget,
    photocurrent,
    pooled_std,
    simulate_scenario,
    solid_angle_fraction,
)
from iontrap.fluorescence import ModulationSpec
from iontrap.units import photon_energy

PD = DetectorSpec("photodiode", ((4.0, 0.01), (77.0, 0.1), (300.0, 0.1)))


def preset(name):
    return S.parse(S.load_preset_doc(name))[1]


def quad_fraction(ap, d):
    x0, x1, y0, y1 = ap
    v, _ = integrate.dblquad(lambda y, x: d / (x * x + y * y + d * d) ** 1.5, x0, x1, y0, y1,
                             epsabs=0, epsrel=1e-11)
    return v / (4 * np.pi)


@pytest.mark.parametrize("ap,d", [
    ((-7.5e-3, 7.5e-3, -7.5e-3, 7.5e-3), 200e-6),
    ((-1e-3, 3e-3, -2e-3, 0.5e-3), 1e-3),
    ((-8.6e-3, 8.6e-3, -8.6e-3, 8.6e-3), 20e-3),
])
def test_solid_angle_matches_quadrature(ap, d):
    g = CollectionGeometry(ap, d, 0.0, 0.0)
    assert solid_angle_fraction(g) == pytest.approx(quad_fraction(ap, d), rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-4, 1e-1), st.floats(1e-5, 1e-1))
def test_solid_angle_bounds_and_monotone(side, d):
    small = solid_angle_fraction(CollectionGeometry((-side / 2, side / 2) * 2, d))
    big = solid_angle_fraction(CollectionGeometry((-side, side) * 2, d))
    assert 0 < small <= big < 0.5


def test_infinite_plane_limit():
    g = CollectionGeometry((-10.0, 10.0, -10.0, 10.0), 100e-6)
    assert solid_angle_fraction(g) == pytest.approx(0.5, abs=1e-5)


def test_ito_pd_budget_row():
    row = budget(preset("ito-pd"))
    assert row["light_collection_efficiency"] == pytest.approx(0.30, rel=0.05)
    assert row["power_at_detector_W"] == pytest.approx(60e-12, rel=0.05)
    assert row["detector_qe"] == pytest.approx(0.30, rel=0.05)
    assert row["photocurrent_A"] == pytest.approx(6e-12, rel=0.05)
    assert row["lockin_output_V"] == pytest.approx(0.120, rel=0.05)


def test_pmt_budget_row():
    row = budget(preset("pmt-bulk"))
    assert row["light_collection_efficiency"] == pytest.approx(0.05, rel=1e-6)
    assert row["power_at_detector_W"] == pytest.approx(10e-12, rel=1e-6)
    assert row["detector_qe"] == 0.2
    assert row["photocurrent_A"] is None and row["lockin_output_V"] is None


def test_vlpc_total_efficiency_near_forty_percent():
    sc = preset("vlpc")
    total = S.total_detection_efficiency(sc)
    assert total == pytest.approx(0.396, rel=1e-2)


def test_responsivity_table_interpolation():
    assert detector_responsivity_at(PD, 77.0) == pytest.approx(0.1)
    assert detector_responsivity_at(PD, 4.0) == pytest.approx(0.01)
    assert detector_responsivity_at(PD, 1.0) == pytest.approx(0.01)  # constant below the table
    assert detector_responsivity_at(PD, 400.0) == pytest.approx(0.1)
    mid = detector_responsivity_at(PD, np.sqrt(4.0 * 77.0))
    assert mid == pytest.approx(np.sqrt(0.01 * 0.1), rel=1e-12)  # log-log midpoint
    with pytest.raises(ValueError):
        detector_responsivity_at(PD, -1.0)


def test_photocurrent_uses_responsivity():
    assert photocurrent(PD, 60e-12, 77.0) == pytest.approx(6e-12)
    assert photocurrent(PD, 60e-12, 4.0) == pytest.approx(0.6e-12)
    with pytest.raises(ValueError):
        photocurrent(PD, -1.0, 77.0)


def test_qe_from_fixed_value():
    assert detector_qe(DetectorSpec("VLPC", (), 0.88), 4.0) == pytest.approx(0.88, rel=1e-12)


def test_detector_validation():
    with pytest.raises(ValueError):
        DetectorSpec("photodiode")
    with pytest.raises(ValueError):
        DetectorSpec("CCD", quantum_efficiency=0.5)
    with pytest.raises(ValueError):
        DetectorSpec("PMT", quantum_efficiency=1.5)


def test_stack_transmission_and_partial_layer():
    g = CollectionGeometry((-10.0, 10.0, -10.0, 10.0), 100e-6)
    s = FilmStack((FilmLayer("ITO", 400e-9, 0.9),), 0.95)
    au = FilmLayer("Au", 5e-9, 0.6)
    assert collection_efficiency(g, s) == pytest.approx(0.5 * 0.9 * 0.95, rel=1e-4)
    partial = collection_efficiency(g, s, au, 0.25)
    assert partial == pytest.approx(0.5 * 0.9 * 0.95 * (0.75 + 0.25 * 0.6), rel=1e-4)


def test_film_resistance():
    ito = FilmLayer("ITO", 400e-9, 1.0, 1e-5)
    au = FilmLayer("Au", 50e-9, 0.1, 2.44e-8)
    assert effective_sheet_resistance(FilmStack((ito,))) == pytest.approx(25.0)
    both = FilmStack((ito, au))
    rs = 1 / (400e-9 / 1e-5 + 50e-9 / 2.44e-8)
    assert effective_sheet_resistance(both) == pytest.approx(rs)
    # referred to the gold thickness this is the few-1e-8 ohm m regime
    assert effective_resistivity(both, 50e-9) == pytest.approx(2.39e-8, rel=1e-2)
    with pytest.raises(ValueError):
        effective_sheet_resistance(FilmStack((FilmLayer("x", 1e-9, 1.0),)))


def test_end_to_end_gain_convention():
    a = AmplifierChain()
    assert end_to_end_gain(a, ModulationSpec()) == pytest.approx(1e9 * 40 * 0.5)
    assert lockin_output_analytic(a, 6e-12, ModulationSpec()) == pytest.approx(0.12)


def test_noise_budget_components():
    a = AmplifierChain()
    nb = noise_budget(a, 6e-12, 1.0, 77.0)
    assert nb.shot_rms == pytest.approx(np.sqrt(2 * 1.602176634e-19 * 6e-12))
    assert nb.johnson_rms == pytest.approx(np.sqrt(4 * 1.380649e-23 * 77.0 / 1e9))
    assert nb.amp_rms == pytest.approx(1e-15)
    assert nb.total_rms == pytest.approx(np.sqrt(nb.shot_rms ** 2 + nb.johnson_rms ** 2 + nb.amp_rms ** 2))


@pytest.mark.parametrize("duty", [0.5, 0.3, 0.7])
def test_noiseless_lockin_converges_to_analytic(duty):
    a = AmplifierChain()
    mod = ModulationSpec(300.0, duty, 1.0)
    flux = 3.7e7  # photons/s, roughly the 50-ion on-state flux
    res = lockin_simulate(a, lambda t: flux * mod.envelope(t), PD, 77.0, 100 * a.lockin_time_constant,
                          30000.0, seed=0, noise=NOISELESS, modulation=mod)
    i_peak = photocurrent(PD, flux * photon_energy(422e-9), 77.0)
    assert res.mean == pytest.approx(lockin_output_analytic(a, i_peak, mod), rel=1e-2)


def test_lockin_rejects_bad_sampling():
    a = AmplifierChain()
    with pytest.raises(ValueError):
        lockin_simulate(a, lambda t: 0 * t, PD, 77.0, 10.0, 1000.0, seed=0)
    with pytest.raises(ValueError):
        lockin_simulate(a, lambda t: 0 * t, PD, 77.0, 0.1, 6000.0, seed=0)


def test_lockin_deterministic_under_seed():
    sc = preset("ito-pd")
    a = simulate_scenario(sc, 5, duration=20.0)
    b = simulate_scenario(sc, 5, duration=20.0)
    c = simulate_scenario(sc, 6, duration=20.0)
    assert np.array_equal(a.v_out, b.v_out)
    assert not np.array_equal(a.v_out, c.v_out)


def test_signal_linear_in_ion_number_without_noise():
    sc = preset("ito-pd")
    means = [simulate_scenario(sc, 0, n_ions=n, noise=NOISELESS, duration=5.0).mean for n in (10, 50, 100)]
    assert means[1] / means[0] == pytest.approx(5.0, rel=1e-9)
    assert means[2] / means[0] == pytest.approx(10.0, rel=1e-9)


def test_histogram_constant_samples_single_bin():
    c, n = histogram(np.full(10, 0.123), 0.01)
    assert len(n) == 1 and n[0] == 10
    assert c[0] == pytest.approx(0.125)


def test_histogram_left_closed():
    c, n = histogram([0.0, 0.1, 0.1999, 0.2], 0.1)
    assert list(n) == [1, 2, 1]


@pytest.mark.parametrize("bad", [0.0, -0.1])
def test_histogram_rejects_bad_width(bad):
    with pytest.raises(ValueError):
        histogram([0.0, 1.0], bad)


def test_histogram_needs_two_samples():
    with pytest.raises(ValueError):
        histogram([1.0], 0.1)


def test_histogram_gaussian_against_erf():
    rng = np.random.default_rng(11)
    x = rng.standard_normal(1_000_000)
    centres, counts = histogram(x, 0.1)
    assert counts.sum() == x.size
    lo, hi = centres - 0.05, centres + 0.05
    p = 0.5 * (special.erf(hi / np.sqrt(2)) - special.erf(lo / np.sqrt(2)))
    expected = x.size * p
    se = np.sqrt(expected * (1 - p))
    ok = expected > 5
    assert np.all(np.abs(counts[ok] - expected[ok]) < 5 * se[ok])


def test_pooled_std():
    a = np.array([1.0, 2.0, 3.0])
    b = np.array([2.0, 4.0, 6.0, 8.0])
    expected = np.sqrt((2 * a.var(ddof=1) + 3 * b.var(ddof=1)) / 5)
    assert pooled_std(a, b) == pytest.approx(expected)


def test_background_changes_noise_not_seed_reproducibility():
    sc = preset("ito-pd")
    quiet = simulate_scenario(sc, 3, with_ions=False, noise=LockinNoise(False, False, False), duration=20.0)
    assert quiet.mean == 0.0 and quiet.std == 0.0

import dataclasses

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from metascreen import DomainError
from metascreen.screen import PixelGrid, extract_features, random_pattern
from metascreen.surrogate import (
    DrudeParams,
    FrequencyGrid,
    OracleConfig,
    SpectralResponse,
    band_indices,
    band_slice,
    derive_resonators,
    drude_permittivity,
    response_from_csv,
    response_to_csv,
    simulate,
    surface_resistance,
)
from strategies import grids, symmetric_grids

ORACLE = OracleConfig()
FREQ = FrequencyGrid()


def _oracle_eps(w, wp, g):
    # independent transcription of the Drude expression, term by term
    real = 1 - wp ** 2 / (w ** 2 + g ** 2)
    imag = wp ** 2 * g / (w * (w ** 2 + g ** 2))
    return complex(real, imag)


def test_drude_hand_value():
    eps = drude_permittivity(1.0, DrudeParams(2.0, 1.0))
    assert abs(eps - complex(-1, 2)) < 1e-12


def test_drude_plasma_frequency_zero_crossing():
    wp = 3.0e15
    eps = drude_permittivity(wp, DrudeParams(wp, 1e-9 * wp))
    assert abs(eps.real) < 1e-6


def test_drude_high_frequency_limit():
    p = DrudeParams(2.0e15, 1.0e15)
    assert abs(drude_permittivity(1e3 * p.omega_p, p) - 1) < 1e-5


@given(st.floats(1e-3, 1e3), st.floats(1e-2, 1e2), st.floats(1e-2, 1e2))
def test_drude_matches_formula(w, wp, g):
    got = drude_permittivity(w, DrudeParams(wp, g))
    ref = _oracle_eps(w, wp, g)
    assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


@pytest.mark.parametrize("params", [DrudeParams(), DrudeParams(2.0, 1.0), DrudeParams(1e3, 0.5)])
def test_drude_monotonic(params):
    w = np.geomspace(0.01, 100, 2000) * params.gamma
    eps = drude_permittivity(w, params)
    assert np.all(np.diff(eps.real) > 0)
    assert np.all(np.diff(eps.imag) < 0)


@pytest.mark.parametrize("w", [0.0, -1.0, [1.0, 0.0]])
def test_drude_rejects_non_positive(w):
    with pytest.raises(DomainError):
        drude_permittivity(w, DrudeParams())


def test_surface_resistance_small_and_growing():
    r = surface_resistance(np.array([0.2, 1.0, 1.9]), DrudeParams())
    assert np.all(r > 0) and np.all(r < 0.01)
    assert np.all(np.diff(r) > 0)


def test_parameter_validation():
    with pytest.raises(DomainError):
        DrudeParams(0.0, 1.0)
    with pytest.raises(DomainError):
        FrequencyGrid(f_min=0.0)
    with pytest.raises(DomainError):
        OracleConfig(alpha=-1)
    assert OracleConfig.from_dict(ORACLE.to_dict()) == ORACLE


def test_frequency_grid_points():
    p = FREQ.points
    assert len(p) == 1024 and p[0] == 0.002 and p[-1] == 2.0
    assert np.all(np.diff(p) > 0)


def test_band_split_default_grid():
    assert band_indices(FREQ, "low") == slice(0, 512)
    assert band_indices(FREQ, "high") == slice(512, 1024)


@given(st.integers(4, 3000))
def test_bands_partition(count):
    freq = FrequencyGrid(count)
    lo, hi = band_indices(freq, "low"), band_indices(freq, "high")
    assert lo.start == 0 and lo.stop == hi.start and hi.stop == count
    f = freq.points
    assert f[lo.stop - 1] <= 1.0 + freq.step / 2 < f[hi.start]


def test_band_errors():
    with pytest.raises(DomainError):
        band_indices(FrequencyGrid(10, 0.002, 0.9), "high")
    with pytest.raises(DomainError):
        band_indices(FREQ, "mid")


def test_band_slice_reassembles():
    r = simulate(random_pattern(1, 0.4))
    lo, hi = band_slice(r, FREQ, "low"), band_slice(r, FREQ, "high")
    for ch in ("amp_x", "amp_y", "phase"):
        assert np.array_equal(np.concatenate([lo.channel(ch), hi.channel(ch)]), r.channel(ch))


def test_empty_grid():
    g = PixelGrid.zeros()
    assert derive_resonators(extract_features(g), g) == []
    r = simulate(g)
    d = ORACLE.t0 * np.exp(-ORACLE.alpha * FREQ.points / FREQ.f_max)
    assert np.all(r.amp_y <= ORACLE.eta0)
    assert np.all(np.abs(r.amp_x - d) <= ORACLE.eta0)


@given(symmetric_grids())
def test_symmetric_grid_has_no_cross_polarisation(g):
    assert all(r.cross_pol_fraction == 0 for r in derive_resonators(extract_features(g), g))
    assert np.all(simulate(g).amp_y <= ORACLE.eta0)


@given(grids)
def test_resonator_invariants(g):
    rs = derive_resonators(extract_features(g), g)
    assert len(rs) <= 6
    if g.cells.any():
        assert 1 <= len(rs)
    for r in rs:
        assert 0.2 < r.f0 < 1.9
        assert r.q_factor > 0 and 0 <= r.strength <= 1 and 0 <= r.cross_pol_fraction <= 1
    assert rs == derive_resonators(extract_features(g), g)


@given(grids)
def test_response_bounds_and_determinism(g):
    r = simulate(g)
    assert len(r) == FREQ.count
    for a in (r.amp_x, r.amp_y):
        assert np.all((a >= 0) & (a <= 1))
    assert np.all(np.abs(r.phase) <= np.pi)
    assert r.equals(simulate(g))


def test_fixed_grid_bit_identical_and_constants_matter():
    g = random_pattern(11, 0.5)
    a, b = simulate(g), simulate(g)
    assert a.equals(b)
    c = simulate(g, oracle=dataclasses.replace(ORACLE, alpha=0.0))
    assert not a.equals(c)


def test_damping_off_gives_symmetric_envelope():
    quiet = dataclasses.replace(ORACLE, alpha=0.0, eta0=0.0)
    r = simulate(PixelGrid.zeros(), oracle=quiet)
    assert np.all(r.amp_x == quiet.t0) and np.all(r.amp_y == 0)


def test_csv_round_trip():
    r = simulate(random_pattern(2, 0.3))
    text = response_to_csv(r, FREQ)
    assert text.splitlines()[0] == "f_thz,amp_x,amp_y,phase"
    f, back = response_from_csv(text)
    assert np.array_equal(f, FREQ.points) and back.equals(r)
    with pytest.raises(DomainError):
        response_from_csv("a,b\n")


def test_spectral_response_validation():
    with pytest.raises(DomainError):
        SpectralResponse(np.zeros(3), np.zeros(2), np.zeros(3))
    with pytest.raises(DomainError):
        SpectralResponse(np.zeros(3), np.zeros(3), np.zeros(3)).channel("x")

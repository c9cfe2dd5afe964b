import math

import numpy as np
import pytest

from dimerwave import homogenize as hz
from dimerwave import layerpot as lp
from dimerwave import resonance as rs


@pytest.fixture(scope="module")
def sec6(base, caps):
    """Calibrated reproduction setup (rho = kappa = 5e3, rho_b = kappa_b = 1)."""
    p = lp.MediumParams(5e3, 5e3, 1.0, 1.0)
    r = rs.muller_resonances(base, p, 8)
    s = r.omega1.real / 4.6171
    return p, r.scaled(s)


def _sweep(sec6, caps, omegas, LV=1.0, LB=0.5):
    p, r = sec6
    return hz.dispersion_sweep(omegas, caps, caps.P, 2.0, r.omega1, r.omega2, p.delta, LV, LB)


# --- frequencies and constants -------------------------------------------


def test_hybridized_frequencies_linear_in_mu(caps):
    a = hz.hybridized_frequencies(1.0, caps)
    b = hz.hybridized_frequencies(2.0, caps)
    assert b == pytest.approx((2 * a[0], 2 * a[1]))
    assert a[0] < a[1]


def test_hybridized_frequencies_decoupled():
    w1, w2 = hz.hybridized_frequencies(1.0, lp.CapacitanceSet(4 * math.pi, -1e-14))
    assert w1 == pytest.approx(w2, rel=1e-14)


def test_hybridized_frequencies_limit(base, caps):
    mu = 1.0
    wM1, wM2 = hz.hybridized_frequencies(mu, caps)
    gaps = []
    svals = (0.1, 0.05, 0.025)
    for s in svals:
        r = rs.muller_resonances(base, lp.MediumParams.from_contrast((mu * s) ** 2), 8).scaled(s)
        gaps.append(abs(r.omega1.real - wM1))
        assert r.omega2.real == pytest.approx(wM2, rel=0.05)
    # corrections are O(delta) = O(s^2) relative to omega_M1
    assert np.polyfit(np.log(svals), np.log(gaps), 1)[0] > 1.5


def test_tilde_constants_limits(caps):
    wM1, wM2 = hz.hybridized_frequencies(1.0, caps)
    eta = -16.48
    args = (caps, caps.P, 2.0, wM1, wM2, eta)
    g0, g1_far = hz.tilde_constants(1.0, 1e12, *args)
    assert abs(g1_far) < 1e-9
    assert g0 == pytest.approx(2 * (caps.C11 + caps.C12) / (1 - wM1**2 / wM2**2))
    assert hz.tilde_constants(1.0, eta - 1.0, *args)[1] > 0
    assert hz.tilde_constants(1.0, eta + 1.0, *args)[1] < 0
    with pytest.raises(ZeroDivisionError):
        hz.tilde_constants(1.0, eta, *args)


def test_dispersive_g0_sign_change(caps, sec6):
    p, r = sec6
    w = np.linspace(4.0, 5.2, 300)
    g0, _ = hz.dispersive_constants(w, caps, caps.P, 2.0, r.omega1, r.omega2, p.delta)
    flips = np.nonzero(np.diff(np.sign(g0.real)))[0]
    assert len(flips) == 1
    assert w[flips[0]] <= r.omega1.real <= w[flips[0] + 1] + 1e-2


# --- ensembles -----------------------------------------------------------


def test_ensemble_generation_reproducible():
    a = hz.EnsembleSpec.generate((0, 0, 0), (1, 1, 1), 64, 0.01, 1.0, seed=4)
    b = hz.EnsembleSpec.generate((0, 0, 0), (1, 1, 1), 64, 0.01, 1.0, seed=4)
    np.testing.assert_array_equal(a.positions, b.positions)
    np.testing.assert_array_equal(a.orientations, b.orientations)
    assert a.N == 64 and a.Lambda == pytest.approx(0.64) and a.delta == pytest.approx(1e-4)


def test_ensemble_separation_guaranteed():
    spec = hz.EnsembleSpec.generate((0, 0, 0), (1, 1, 1), 1000, 1e-3, 1.0, seed=2, jitter=0.5, eta=0.49)
    # jitter 0.5 on a spacing-1/10 grid keeps neighbours at least half a cell apart
    assert spec.measured_eta >= 0.49
    with pytest.raises(ValueError):
        hz.EnsembleSpec.generate((0, 0, 0), (1, 1, 1), 1000, 1e-3, 1.0, seed=2, jitter=0.5, eta=0.6)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        hz.EnsembleSpec((0, 0, 0), (1, 1, 1), [[2.0, 0.5, 0.5]], [[1.0, 0, 0]], 0.1, 1.0)
    with pytest.raises(ValueError):
        hz.EnsembleSpec((0, 0, 0), (1, 1, 1), [[0.5, 0.5, 0.5]], [[2.0, 0, 0]], 0.1, 1.0)
    with pytest.raises(ValueError):
        hz.EnsembleSpec.generate((0, 0, 0), (1, 1, 1), 0, 0.1, 1.0, seed=0)


def test_statistics_uniform_box():
    spec = hz.EnsembleSpec.generate((0, 0, 0), (20, 20, 20), 1000, 1e-3, 1.0, seed=9)
    V, B = hz.ensemble_statistics(spec)
    assert V == pytest.approx(1.25e-4)


def test_statistics_fixed_orientation():
    spec = hz.EnsembleSpec.generate((0, 0, 0), (2, 2, 2), 27, 0.01, 1.0, seed=1, orientation=(1, 0, 0))
    _, B = hz.ensemble_statistics(spec)
    np.testing.assert_allclose(B, np.diag([1 / 8, 0, 0]), atol=1e-15)


def test_statistics_isotropic_limit():
    N = 10_000
    spec = hz.EnsembleSpec.generate((0, 0, 0), (1, 1, 1), N, 1e-4, 1.0, seed=123)
    _, B = hz.ensemble_statistics(spec)
    off = B - np.diag(np.diag(B))
    assert np.abs(off).max() < 3 / math.sqrt(N)
    np.testing.assert_allclose(np.diag(B), 1 / 3, atol=3 / math.sqrt(N))


# --- effective medium ----------------------------------------------------


def test_empty_ensemble_medium():
    m = hz.effective_coefficients(3.0, 2.0, 0.5, 0.3, 0.0, 1.7)
    np.testing.assert_array_equal(m.M1, np.eye(3))
    assert m.M2 == pytest.approx(1.7**2)
    assert m.regime == "double-positive"


def test_regime_double_negative_detuned(caps):
    mu = 1.0
    wM1, wM2 = hz.hybridized_frequencies(mu, caps)
    eta = -16.48
    g0, g1 = hz.tilde_constants(mu, eta - 0.5, caps, caps.P, 2.0, wM1, wM2, eta)
    m = hz.effective_coefficients(g0, g1, 1.0, 0.5, 100.0, wM2)
    assert m.regime == "double-negative"


def test_regime_single_negative_between(caps, sec6):
    p, r = sec6
    row = _sweep(sec6, caps, [4.9, 4.95])[0]
    assert row.rho_eff.real > 0 and row.kappa_eff.real < 0
    assert row.regime == "single-negative-modulus"


def test_classification_exhaustive():
    labels = {hz.classify(a, b) for a in (1, -1) for b in (1, -1)}
    assert labels == set(hz.REGIMES)


def test_refractive_index_branch():
    n, conj = hz.refractive_index(-1.0 + 1e-3j, -1.0 + 1e-3j)
    assert n.real < 0 and n.imag >= 0
    n, conj = hz.refractive_index(4.0, 1.0)
    assert n == pytest.approx(2.0) and not conj


def test_lambda_threshold():
    g1, b = 0.2 + 0.01j, 0.5
    lam = hz.density_sign_threshold(g1, b)
    assert lam == pytest.approx(10.0)
    for L, sign in ((0.9 * lam, 1), (1.1 * lam, -1)):
        m = hz.effective_coefficients(1.0, g1, 1.0, b, L, 1.0)
        assert np.sign(m.rho_eff.real) == sign
    assert hz.density_sign_threshold(-0.2, b) == math.inf


def test_dispersion_off_resonance(caps, sec6):
    p, r = sec6
    rows = _sweep(sec6, caps, np.linspace(0.2, 0.4, 5))
    for row in rows:
        g0_static = 2 * (caps.C11 + caps.C12) / (1 - r.omega1**2 / row.omega**2)
        assert row.rho_eff == pytest.approx(1.0, abs=1e-2)
        assert row.kappa_eff == pytest.approx(1 / (1 - g0_static / row.omega**2), rel=1e-12)
        assert row.n_eff.real > 0 and abs(row.n_eff.imag) < 1e-2 * row.n_eff.real
        assert row.regime == "double-positive"


def test_dispersion_below_half_monopole(caps, sec6):
    rows = _sweep(sec6, caps, np.linspace(0.1, 4.6171 / 2, 50))
    assert all(r.regime == "double-positive" for r in rows)


def test_double_negative_window(caps, sec6):
    p, r = sec6
    rows = _sweep(sec6, caps, np.linspace(5.2, 5.4, 2001))
    windows = hz.double_negative_windows(rows)
    assert len(windows) == 1
    lo, hi = windows[0]
    assert hi < r.omega2.real and r.omega2.real - hi < 0.01
    for row in rows:
        if lo <= row.omega <= hi:
            assert row.n_eff.real < 0
    im = np.array([row.n_eff.imag for row in rows])
    assert np.all(im > 0)


def test_dispersion_rejects_bad_grid(caps, sec6):
    with pytest.raises(ValueError):
        _sweep(sec6, caps, [5.0])
    with pytest.raises(ValueError):
        _sweep(sec6, caps, [5.0, 4.0])

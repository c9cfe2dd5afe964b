import cmath
import math

import numpy as np
import pytest
from scipy import special

from dimerwave import specfun as sf


def _jn_power_series(n, z, terms=60):
    # j_n(z) = z^n sum_k (-z^2/2)^k / (k! (2n+2k+1)!!)
    total, dfact = 0j, math.prod(range(1, 2 * n + 2, 2))
    term = z**n / dfact
    for k in range(terms):
        total += term
        term *= -(z * z) / 2 / (k + 1) / (2 * n + 2 * k + 3)
    return total


def test_j0_closed_form():
    assert sf.spherical_bessel_j(0, 1.0) == pytest.approx(math.sin(1.0), abs=1e-15)
    assert abs(sf.spherical_bessel_j(1, 0.0)) == 0


@pytest.mark.parametrize("n,z", [(5, 2.0 + 0.5j), (2, 0.01), (8, 3.0 - 1.0j), (0, 4.0)])
def test_jn_power_series(n, z):
    ref = _jn_power_series(n, complex(z), terms=120)
    assert abs(sf.spherical_bessel_j(n, z) - ref) <= 1e-12 * max(abs(ref), 1e-300) + 1e-16


def test_jn_real_matches_scipy():
    z = np.linspace(0.05, 30, 37)
    got = sf.sph_jn_all(12, z)
    for n in range(13):
        np.testing.assert_allclose(got[n].real, special.spherical_jn(n, z), rtol=1e-11, atol=1e-15)


def test_hankel_closed_forms():
    assert sf.spherical_hankel_h1(0, 1.0) == pytest.approx(-1j * cmath.exp(1j) / 1.0, abs=1e-14)
    z = 1.0
    assert sf.spherical_hankel_h1(1, z) == pytest.approx(-cmath.exp(1j * z) * (z + 1j) / z**2, abs=1e-14)


def test_hankel_upward_recurrence():
    z = 3.0 - 0.2j
    h = [-1j * cmath.exp(1j * z) / z, -cmath.exp(1j * z) * (z + 1j) / z**2]
    for n in range(1, 4):
        h.append((2 * n + 1) / z * h[n] - h[n - 1])
    assert abs(sf.spherical_hankel_h1(4, z) - h[4]) < 1e-12 * abs(h[4])


def test_hankel_real_matches_scipy():
    z = np.linspace(0.3, 20, 11)
    got = sf.sph_hn_all(6, z)
    for n in range(7):
        ref = special.spherical_jn(n, z) + 1j * special.spherical_yn(n, z)
        np.testing.assert_allclose(got[n], ref, rtol=1e-11)


def test_derivatives_match_scipy():
    z = np.linspace(0.2, 10, 9)
    dj = sf.derivatives(sf.sph_jn_all(6, z), z)
    for n in range(6):
        np.testing.assert_allclose(dj[n].real, special.spherical_jn(n, z, derivative=True), rtol=1e-10, atol=1e-14)


def test_assoc_legendre_normalization():
    assert sf.assoc_legendre(0, 0, 0.3) == pytest.approx(1 / math.sqrt(4 * math.pi))
    c = math.sqrt(3 / (4 * math.pi))
    assert sf.assoc_legendre(1, 0, 1.0) == pytest.approx(c)
    assert sf.assoc_legendre(1, 0, 0.4) == pytest.approx(0.4 * c)
    x = 0.5
    norm = math.sqrt(7 / (4 * math.pi) * math.factorial(1) / math.factorial(5))
    assert sf.assoc_legendre(3, 2, x) == pytest.approx(norm * 15 * x * (1 - x * x), rel=1e-13)


def test_condon_shortley_phase():
    th, ph = np.array([0.7]), np.array([0.3])
    Y = sf.sph_harm_all(1, th, ph)[0]
    assert Y[sf.index(1, 1)] == pytest.approx(-math.sqrt(3 / (8 * math.pi)) * math.sin(0.7) * cmath.exp(0.3j))
    assert Y[sf.index(1, -1)] == pytest.approx(math.sqrt(3 / (8 * math.pi)) * math.sin(0.7) * cmath.exp(-0.3j))


def test_harmonics_orthonormal():
    quad = sf.quadrature_for_degree(20)
    Y = sf.harmonics_on(8, quad)
    G = (Y.conj().T * quad.weights) @ Y
    np.testing.assert_allclose(G, np.eye(sf.nidx(8)), atol=1e-13)


def test_index_roundtrip():
    n, m = sf.degree_order(6)
    assert len(n) == sf.nidx(6) == 49
    for i, (a, b) in enumerate(zip(n, m)):
        assert sf.index(a, b) == i and abs(b) <= a


def test_projection_roundtrip():
    rng = np.random.default_rng(1)
    c = rng.standard_normal(sf.nidx(6)) + 1j * rng.standard_normal(sf.nidx(6))
    quad = sf.quadrature_for_degree(16)
    vals = sf.harmonics_on(6, quad) @ c
    np.testing.assert_allclose(sf.project(vals, 6, quad), c, atol=1e-13)


@pytest.mark.parametrize("k", [0.0, 0.8, 2.0 + 0.1j])
def test_translation_reproduces_monopole(k):
    rng = np.random.default_rng(2)
    t = np.array([0.4, -0.3, 2.0])
    T = sf.build_translation_matrix(k, t, 12)
    c = np.zeros(sf.nidx(12), dtype=complex)
    c[0] = 1.0
    pts = t + 0.3 * (rng.random((20, 3)) - 0.5)
    exact = sf.outgoing_field(c, k, np.zeros(3), pts)
    approx = sf.regular_field(T.apply(c), k, t, pts)
    np.testing.assert_allclose(approx, exact, rtol=1e-10)


def test_translation_axial_block_diagonal():
    T = sf.build_translation_matrix(1.3, (0, 0, 2.5), 6).entries
    _, m = sf.degree_order(6)
    off = np.abs(T[m[:, None] != m[None, :]]).max()
    assert off < 1e-13 * np.abs(T).max()


def test_translation_self_convergence():
    t = np.array([1.0, 0.5, 1.5])
    rng = np.random.default_rng(5)
    pts = t + 0.25 * (rng.random((10, 3)) - 0.5)
    c = np.zeros(sf.nidx(3), dtype=complex)
    c[sf.index(2, 1)] = 1.0
    vals = []
    for nmax in (16, 32):
        cc = np.zeros(sf.nidx(nmax), dtype=complex)
        cc[: len(c)] = c
        T = sf.build_translation_matrix(0.9, t, nmax)
        vals.append(sf.regular_field(T.apply(cc), 0.9, t, pts))
    assert np.abs(vals[0] - vals[1]).max() < 1e-12 * np.abs(vals[1]).max()


def test_monopole_is_green_function():
    k = 1.7
    x = np.array([[0.3, 0.2, -0.5], [2.0, 1.0, 0.1]])
    c = np.array([1.0 + 0j])
    r = np.linalg.norm(x, axis=1)
    G = -np.exp(1j * k * r) / (4 * math.pi * r)
    # G = -(i k / 4 pi) h0 = -(i k / sqrt(4 pi)) * (Y00 h0)
    np.testing.assert_allclose(sf.outgoing_field(c, k, np.zeros(3), x) * (-1j * k / math.sqrt(4 * math.pi)), G)


def test_index_object():
    assert sf.SphericalWaveIndex(3, -2).flat == 10
    with pytest.raises(ValueError):
        sf.SphericalWaveIndex(2, 3)

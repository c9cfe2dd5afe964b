import math

import numpy as np
import pytest

from dimerwave import layerpot as lp
from dimerwave import specfun as sf


@pytest.fixture(scope="module")
def dimer():
    return lp.DimerGeometry(1.0, 1.0)


@pytest.fixture(scope="module")
def cluster(dimer):
    return dimer.cluster(8)


@pytest.fixture(scope="module")
def static(cluster):
    return lp.StaticSolver(cluster)


def _random_densities(cl, count=10, seed=0):
    rng = np.random.default_rng(seed)
    return [rng.standard_normal(cl.size) + 1j * rng.standard_normal(cl.size) for _ in range(count)]


# --- geometry ------------------------------------------------------------


@pytest.mark.parametrize("r0,d0", [(1.0, 0.0), (1.0, -0.5), (0.0, 1.0), (-1.0, 1.0)])
def test_degenerate_geometry_rejected(r0, d0):
    with pytest.raises(lp.GeometryError):
        lp.DimerGeometry(r0, d0)


def test_overlapping_cluster_rejected():
    with pytest.raises(lp.GeometryError):
        lp.SphereCluster([[0, 0, 0], [1.5, 0, 0]], [1.0, 1.0], 4)


def test_normalized_dimer_has_unit_balls():
    g = lp.DimerGeometry.normalized(5.0)
    assert g.ball_volume == pytest.approx(1.0)
    assert g.d0 / g.r0 == pytest.approx(5.0)


def test_world_centers_follow_orientation():
    g = lp.DimerGeometry(1.0, 2.0, 0.5, (0, 1, 0), (1, 2, 3))
    c = g.centers()
    np.testing.assert_allclose(c.mean(axis=0), [1, 2, 3])
    np.testing.assert_allclose(np.abs(c[0] - c[1]), [0, 0.5 * 4.0, 0], atol=1e-14)


def test_ball_integral_volume(cluster):
    vol = lp.ball_integral(cluster, lambda x: np.ones(len(x)), 0)
    assert vol.real == pytest.approx(4 * math.pi / 3, rel=1e-13)


# --- operators -----------------------------------------------------------


def test_isolated_sphere_static_eigenvalue():
    R = 1.7
    cl = lp.SphereCluster([[0, 0, 0]], [R], 4)
    S0, K0 = lp.helmholtz_operators(cl, 0.0)
    n, _ = sf.degree_order(4)
    # S^0 Y_n = -R/(2n+1) Y_n and K^{0,*} Y_n = 1/(2(2n+1)) Y_n
    np.testing.assert_allclose(np.diag(S0), -R / (2 * n + 1), rtol=1e-13)
    np.testing.assert_allclose(np.diag(K0), 1 / (2 * (2 * n + 1)), rtol=1e-13)


def test_build_layer_operators_requires_nmax(dimer):
    with pytest.raises(ValueError):
        lp.build_layer_operators(dimer, 1.0, 1)
    ops = lp.build_layer_operators(dimer, 1.0, 3)
    assert set(ops) == {"S", "K"}


@pytest.mark.parametrize("k", [0.0, 0.7, 1.5 + 0.05j])
def test_jump_relation(k):
    # normal derivatives of the exterior and interior representations of
    # S_D^k[phi] on a sphere differ by phi
    cl = lp.SphereCluster([[0, 0, 0]], [0.8], 6)
    rng = np.random.default_rng(3)
    n, _ = sf.degree_order(6)
    _, _, a, b = lp._self_factors(6, k, 0.8)
    quad = cl.quadrature
    steps = np.array([-2, -1, 1, 2]) * 1e-3
    wts = np.array([1, -8, 8, -1]) / 12e-3
    for _ in range(10):
        c = rng.standard_normal(cl.size) + 1j * rng.standard_normal(cl.size)
        dout = sum(w * sf.outgoing_field(c * a[n], k, np.zeros(3), (0.8 + h) * quad.unit) for h, w in zip(steps, wts))
        din = sum(w * sf.regular_field(c * b[n], k, np.zeros(3), (0.8 + h) * quad.unit) for h, w in zip(steps, wts))
        jump = sf.project(dout - din, 6, quad)
        assert np.abs(jump - c).max() < 1e-9 * np.abs(c).max()


def test_static_block_is_zeroth_term(cluster):
    S0, K0 = lp.helmholtz_operators(cluster, 0.0)
    np.testing.assert_allclose(lp.low_freq_term(cluster, 0, "S"), S0, atol=1e-14)
    np.testing.assert_allclose(lp.low_freq_term(cluster, 0, "K"), K0, atol=1e-14)


def test_K1_vanishes(cluster):
    assert np.abs(lp.low_freq_term(cluster, 1, "K")).max() < 1e-12


def test_low_frequency_expansion_order(cluster):
    phi = _random_densities(cluster, 1, seed=4)[0]
    terms = {n: lp.low_freq_term(cluster, n, "S") for n in range(5)}

    def err(eps, order):
        exact = lp.helmholtz_operators(cluster, eps)[0] @ phi
        approx = sum(eps**n * (terms[n] @ phi) for n in range(order + 1))
        return np.linalg.norm(exact - approx) / np.linalg.norm(exact)

    # truncation after n = 2 over tiny eps; after n = 4 over moderate eps
    # (eps^5 falls below round-off for eps <= 1e-3)
    small = [1e-2, 1e-3, 1e-4]
    slope2 = np.polyfit(np.log(small), np.log([err(e, 2) for e in small]), 1)[0]
    assert slope2 == pytest.approx(3.0, abs=0.15)
    mid = [0.2, 0.1, 0.05]
    slope4 = np.polyfit(np.log(mid), np.log([err(e, 4) for e in mid]), 1)[0]
    assert slope4 == pytest.approx(5.0, abs=0.2)


def test_single_layer_continuity(cluster, dimer):
    phi = _random_densities(cluster, 1, seed=8)[0]
    S = lp.helmholtz_operators(cluster, 0.9)[0]
    x = cluster.nodes(0)
    nu = cluster.normals(0)
    out = lp.single_layer_potential(cluster, 0.9, phi, x + 1e-9 * nu)
    inn = lp.single_layer_potential(cluster, 0.9, phi, x - 1e-9 * nu)
    np.testing.assert_allclose(out, inn, atol=1e-7)
    # the Galerkin block is the degree-nmax projection of the trace
    proj = sf.project(out, cluster.nmax, cluster.quadrature)
    np.testing.assert_allclose(proj, (S @ phi)[cluster.sl(0)], atol=1e-8)


# --- identities ----------------------------------------------------------


def test_identity_half_minus_K0(cluster, static):
    for phi in _random_densities(cluster):
        for j in (0, 1):
            assert abs(cluster.integral(0.5 * phi - static.K0 @ phi, j)) < 1e-9


def test_identity_half_plus_K0(cluster, static):
    for phi in _random_densities(cluster):
        for j in (0, 1):
            lhs = cluster.integral(0.5 * phi + static.K0 @ phi, j)
            assert abs(lhs - cluster.integral(phi, j)) < 1e-9 * max(1, abs(lhs))


def test_identity_K2_volume(cluster):
    K2 = lp.low_freq_term(cluster, 2, "K")
    for phi in _random_densities(cluster, 4):
        for j in (0, 1):
            lhs = cluster.integral(K2 @ phi, j)
            rhs = -lp.ball_integral(cluster, lambda x: lp.single_layer_potential(cluster, 0.0, phi, x), j)
            assert abs(lhs - rhs) < 1e-8 * max(1, abs(rhs))


def test_identity_K3(cluster):
    K3 = lp.low_freq_term(cluster, 3, "K")
    vol = 4 * math.pi / 3
    for phi in _random_densities(cluster):
        for j in (0, 1):
            lhs = cluster.integral(K3 @ phi, j)
            rhs = 1j * vol / (4 * math.pi) * cluster.integral(phi)
            assert abs(lhs - rhs) < 1e-9 * max(1, abs(rhs))


# --- psi, capacitance, P, polarizability ----------------------------------


def test_psi_kernel_membership(cluster, static):
    for p in static.psi:
        assert cluster.norm(-0.5 * p + static.K0 @ p) < 1e-9


def test_psi_swap_symmetry(cluster):
    p1, p2 = lp.solve_psi12(cluster, 8)
    n, m = sf.degree_order(8)
    # reflection z -> -z maps Y_n^m to (-1)^(n+m) Y_n^m and swaps the balls
    sign = (-1.0) ** (n + m)
    np.testing.assert_allclose(p2.block(1), sign * p1.block(0), atol=1e-10)
    np.testing.assert_allclose(p2.block(0), sign * p1.block(1), atol=1e-10)


def test_psi_decoupled_limit():
    r0 = 1.0
    cross = []
    for d0 in (10.0, 100.0):
        st = lp.StaticSolver(lp.DimerGeometry(r0, d0).cluster(6))
        p1 = st.psi[0]
        own = p1[st.cluster.sl(0)]
        const = own[0] / math.sqrt(4 * math.pi)
        assert const == pytest.approx(-1 / r0, rel=3 * r0 / (d0 + 2 * r0))
        cross.append(np.abs(p1[st.cluster.sl(1)]).max() / abs(own[0]))
    # the cross term decays like r0 / distance
    assert cross[1] < cross[0] / 5


def test_capacitance_alpha():
    alpha, T = lp.bispherical_params(1.0, 1.0)
    assert alpha == pytest.approx(math.sqrt(1.25), abs=1e-6)
    assert T == pytest.approx(math.asinh(math.sqrt(1.25)))


@pytest.mark.parametrize("d0", [0.5, 1.0, 2.0, 5.0])
def test_capacitance_routes_agree(d0):
    g = lp.DimerGeometry(1.0, d0)
    num = lp.capacitance_numeric(g, 14)
    C11, C12 = lp.capacitance_series(1.0, d0)
    assert num.C11 == pytest.approx(C11, rel=1e-6)
    assert num.C12 == pytest.approx(C12, rel=1e-6)
    assert num.C11 > 0 > num.C12 and num.C11 > abs(num.C12)
    np.testing.assert_array_less(0, np.linalg.eigvalsh(num.matrix))


def test_capacitance_isolated_limit():
    assert lp.capacitance_series(1.0, 100.0)[0] == pytest.approx(4 * math.pi, rel=1e-3)
    num = lp.capacitance_numeric(lp.DimerGeometry(1.0, 50.0), 8)
    assert num.C11 == pytest.approx(4 * math.pi, rel=5e-3)


def test_capacitance_invalid_inputs():
    with pytest.raises(lp.GeometryError):
        lp.capacitance_series(1.0, -1.0)
    with pytest.raises(ValueError):
        lp.CapacitanceSet(1.0, 0.5)


def test_dipole_coupling_routes_and_symmetry():
    g = lp.DimerGeometry(1.0, 1.0)
    P, mom = lp.dipole_coupling_numeric(g, 14)
    assert P == pytest.approx(lp.dipole_coupling_series(1.0, 1.0), rel=1e-6)
    assert abs(mom[1]) < 1e-10 and abs(mom[2]) < 1e-10
    assert lp.dipole_coupling_P(g, 14) == pytest.approx(P)


def test_dipole_coupling_leading_term():
    # series = -4 pi r0 (r0 + d0/2) + correction; the isolated-sphere value
    # of P is twice the first term
    for d0, tol in ((100.0, 0.02), (1000.0, 2e-3)):
        P = lp.dipole_coupling_series(1.0, d0)
        assert P == pytest.approx(-8 * math.pi * (1 + d0 / 2), rel=tol)


def test_dipole_route_disagreement():
    with pytest.raises(lp.RouteDisagreement):
        lp.dipole_coupling_P(lp.DimerGeometry(1.0, 0.1), 2, rtol=1e-6)


def test_polarizability_structure():
    g = lp.DimerGeometry.normalized(5.0)
    M = lp.static_polarizability(g, 12)
    assert np.abs(M - np.diag(np.diag(M))).max() < 1e-10
    np.testing.assert_allclose(M, M.T, atol=1e-12)
    assert M[1, 1] == pytest.approx(M[2, 2], rel=1e-12)


def test_polarizability_single_sphere():
    # (S^0)^{-1}[x_i] = -(3/r) x_i on the sphere, so M = -4 pi r^3 I
    r = 0.7
    cl = lp.SphereCluster([[0, 0, 0]], [r], 4)
    st = lp.StaticSolver(cl)
    M = np.array([[cl.moment(st.solve(st.coordinate(i)), j).real for j in range(3)] for i in range(3)])
    np.testing.assert_allclose(M, -4 * math.pi * r**3 * np.eye(3), rtol=1e-12, atol=1e-13)


def test_polarizability_includes_offset_term():
    # about the dimer centre the axial entry carries the ball-offset contribution
    g = lp.DimerGeometry.normalized(5.0)
    M = lp.static_polarizability(g, 12)
    caps = lp.capacitance_set(g, 12)
    assert M[0, 0] < M[1, 1] < 0
    c = g.half_spacing
    assert abs(M[0, 0] - M[1, 1]) > 0.5 * (caps.C11 - caps.C12) * c**2

"""Layer potentials on unions of spheres in a spherical-harmonic basis.

Densities on each sphere are expanded as ``phi = sum_nm c_nm Y_nm(s)`` with
``s`` the unit vector from the sphere centre.  Operators act on the
concatenated coefficient vectors (one block of ``(nmax+1)**2`` per sphere)
and return the harmonic coefficients of the surface trace, so the identity
operator is the identity matrix.

The fundamental solution is ``G(x, k) = -exp(ik|x|) / (4 pi |x|)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import linalg
from scipy.special import roots_jacobi, eval_legendre

from . import specfun as sf

log = logging.getLogger(__name__)

UNIT_BALL_RADIUS = (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)


class GeometryError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Geometry and material data
# --------------------------------------------------------------------------


def rotation_to(d) -> np.ndarray:
    """Rotation matrix taking e3 to the unit vector ``d``."""
    d = np.asarray(d, dtype=float)
    d = d / np.linalg.norm(d)
    e3 = np.array([0.0, 0.0, 1.0])
    c = float(e3 @ d)
    if c > 1 - 1e-15:
        return np.eye(3)
    if c < -1 + 1e-15:
        return np.diag([1.0, -1.0, -1.0])
    v = np.cross(e3, d)
    s = np.linalg.norm(v)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx * ((1 - c) / s**2)


# local frame (dimer axis = e3) -> dimer frame with x1 along the axis
_LOCAL_TO_DIMER = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


@dataclass(frozen=True)
class DimerGeometry:
    """Two identical balls of radius ``scale*r0`` with surface gap ``scale*d0``.

    Ball 1 sits at ``center + scale*(r0 + d0/2)*orientation`` and ball 2 at
    the mirror position.  ``r0`` and ``d0`` describe the unscaled dimer.
    """

    r0: float
    d0: float
    scale: float = 1.0
    orientation: tuple = (1.0, 0.0, 0.0)
    center: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.r0 > 0:
            raise GeometryError("r0 must be positive")
        if not self.d0 > 0:
            raise GeometryError("d0 must be positive (balls must be disjoint)")
        if not self.scale > 0:
            raise GeometryError("scale must be positive")
        d = np.asarray(self.orientation, dtype=float)
        nd = np.linalg.norm(d)
        if nd == 0:
            raise GeometryError("orientation must be nonzero")
        object.__setattr__(self, "orientation", tuple(d / nd))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @classmethod
    def normalized(cls, gap_ratio: float = 5.0, **kw) -> "DimerGeometry":
        """Unit-volume balls with gap ``gap_ratio * r0``."""
        r0 = UNIT_BALL_RADIUS
        return cls(r0=r0, d0=gap_ratio * r0, **kw)

    @property
    def radius(self) -> float:
        return self.scale * self.r0

    @property
    def half_spacing(self) -> float:
        return self.scale * (self.r0 + 0.5 * self.d0)

    @property
    def ball_volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3

    @property
    def volume(self) -> float:
        return 2.0 * self.ball_volume

    @property
    def rotation(self) -> np.ndarray:
        return rotation_to(self.orientation)

    def centers(self) -> np.ndarray:
        d = np.asarray(self.orientation)
        z = np.asarray(self.center)
        return np.stack([z + self.half_spacing * d, z - self.half_spacing * d])

    def unscaled(self) -> "DimerGeometry":
        return DimerGeometry(self.r0, self.d0)

    def scaled(self, s: float) -> "DimerGeometry":
        return DimerGeometry(self.r0, self.d0, self.scale * s, self.orientation, self.center)

    def cluster(self, nmax: int, frame: str = "local") -> "SphereCluster":
        """Sphere cluster in the local frame (axis along e3, centre at origin)
        or in world coordinates."""
        if frame == "local":
            c = np.array([[0, 0, self.half_spacing], [0, 0, -self.half_spacing]], dtype=float)
        elif frame == "world":
            c = self.centers()
        else:
            raise ValueError(frame)
        return SphereCluster(c, np.full(2, self.radius), nmax)


@dataclass(frozen=True)
class MediumParams:
    """Background (rho, kappa) and bubble (rho_b, kappa_b) constants."""

    rho: float
    kappa: float
    rho_b: float
    kappa_b: float

    def __post_init__(self):
        for name in ("rho", "kappa", "rho_b", "kappa_b"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def from_contrast(cls, delta: float, v: float = 1.0, v_b: float = 1.0) -> "MediumParams":
        """Medium with unit background density and the given contrast and speeds."""
        return cls(rho=1.0, kappa=v * v, rho_b=delta, kappa_b=delta * v_b * v_b)

    @property
    def v(self) -> float:
        return math.sqrt(self.kappa / self.rho)

    @property
    def v_b(self) -> float:
        return math.sqrt(self.kappa_b / self.rho_b)

    @property
    def delta(self) -> float:
        return self.rho_b / self.rho

    def k(self, omega) -> complex:
        return omega * math.sqrt(self.rho / self.kappa)

    def k_b(self, omega) -> complex:
        return omega * math.sqrt(self.rho_b / self.kappa_b)


# --------------------------------------------------------------------------
# Sphere clusters and surface densities
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SphereCluster:
    centers: np.ndarray
    radii: np.ndarray
    nmax: int

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=float))
        r = np.asarray(self.radii, dtype=float).ravel()
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "radii", r)
        if self.nmax < 0:
            raise ValueError("nmax must be nonnegative")
        for i in range(len(r)):
            for j in range(i):
                if np.linalg.norm(c[i] - c[j]) <= r[i] + r[j]:
                    raise GeometryError(f"spheres {j} and {i} overlap")

    @property
    def count(self) -> int:
        return len(self.radii)

    @property
    def block(self) -> int:
        return sf.nidx(self.nmax)

    @property
    def size(self) -> int:
        return self.count * self.block

    def sl(self, j: int) -> slice:
        return slice(j * self.block, (j + 1) * self.block)

    @cached_property
    def quadrature(self) -> sf.SphereQuadrature:
        return sf.quadrature_for_degree(2 * self.nmax + 24)

    @cached_property
    def harmonics(self) -> np.ndarray:
        return sf.harmonics_on(self.nmax, self.quadrature)

    def nodes(self, j: int) -> np.ndarray:
        return self.centers[j] + self.radii[j] * self.quadrature.unit

    def normals(self, j: int) -> np.ndarray:
        return self.quadrature.unit

    def surface_weights(self, j: int) -> np.ndarray:
        return self.radii[j] ** 2 * self.quadrature.weights

    def values(self, coeffs: np.ndarray, j: int) -> np.ndarray:
        """Density values at the quadrature nodes of sphere j."""
        return self.harmonics @ coeffs[self.sl(j)]

    def project(self, func) -> np.ndarray:
        """Coefficients of the surface function ``func(points, normals, j)``."""
        out = np.zeros(self.size, dtype=complex)
        for j in range(self.count):
            vals = func(self.nodes(j), self.normals(j), j)
            out[self.sl(j)] = sf.project(np.asarray(vals, dtype=complex), self.nmax, self.quadrature)
        return out

    def integral(self, coeffs: np.ndarray, j: int | None = None) -> complex:
        """Surface integral over sphere j (or all spheres)."""
        js = range(self.count) if j is None else [j]
        y00 = math.sqrt(4 * math.pi)
        return sum(y00 * self.radii[i] ** 2 * coeffs[self.sl(i)][0] for i in js)

    def signed_integral(self, coeffs: np.ndarray) -> complex:
        """``int_{dD_1} - int_{dD_2}`` of a density on a two-sphere cluster."""
        return self.integral(coeffs, 0) - self.integral(coeffs, 1)

    def moment(self, coeffs: np.ndarray, axis: int) -> complex:
        """``int y_axis phi(y) dsigma`` over all spheres."""
        total = 0j
        for j in range(self.count):
            y = self.nodes(j)[:, axis]
            total += np.sum(self.surface_weights(j) * y * self.values(coeffs, j))
        return total

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """L2(dD) inner product ``int a conj(b)``."""
        w = np.repeat(self.radii**2, self.block)
        return np.sum(w * a * np.conj(b))

    def norm(self, a: np.ndarray) -> float:
        return math.sqrt(abs(self.inner(a, a)))


@dataclass(frozen=True)
class SurfaceDensity:
    cluster: SphereCluster
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (self.cluster.size,):
            raise ValueError("coefficient count does not match the cluster")
        if not np.all(np.isfinite(self.coeffs)):
            raise ValueError("non-finite density coefficients")

    def block(self, j: int) -> np.ndarray:
        return self.coeffs[self.cluster.sl(j)]


@dataclass(frozen=True)
class OperatorBlock:
    label: str
    matrix: np.ndarray

    def __matmul__(self, other):
        return self.matrix @ other


# --------------------------------------------------------------------------
# Helmholtz / Laplace operators
# --------------------------------------------------------------------------


def _self_factors(nmax: int, k, R: float):
    """Eigenvalues of S and K* on an isolated sphere, and the exterior scaling."""
    n = np.arange(nmax + 1)
    k = complex(k)
    if k == 0:
        lam = -R / (2 * n + 1.0) + 0j
        lj = n / R
        lh = -(n + 1) / R
        a = -(R ** (n + 2.0)) / (2 * n + 1)  # S[Y] = a r^{-n-1} Y outside
        b = -(R ** (1.0 - n)) / (2 * n + 1)  # S[Y] = b r^n Y inside
        return lam, 0.5 * lam * (lj + lh), a + 0j, b + 0j
    z = k * R
    j = sf.sph_jn_all(nmax + 1, z)
    h = sf.sph_hn_all(nmax + 1, z)
    lam = -1j * k * R * R * j[:-1] * h[:-1]
    lj = n / R - k * j[1:] / j[:-1]
    lh = n / R - k * h[1:] / h[:-1]
    a = -1j * k * R * R * j[:-1]
    b = -1j * k * R * R * h[:-1]
    return lam, 0.5 * lam * (lj + lh), a, b


def helmholtz_operators(cluster: SphereCluster, k) -> tuple[np.ndarray, np.ndarray]:
    """Galerkin matrices of ``S^k_D`` and ``K^{k,*}_D`` on a sphere cluster.

    Self-interaction blocks are diagonal (sphere eigenvalues).  Coupling blocks
    are the exact outgoing fields of the source sphere projected onto the
    harmonics of the target sphere; the normal derivative follows from the
    regular-wave radial factor ``k j_n'(kR)/j_n(kR)``.
    """
    N = cluster.nmax
    n, _ = sf.degree_order(N)
    S = np.zeros((cluster.size, cluster.size), dtype=complex)
    K = np.zeros_like(S)
    for j in range(cluster.count):
        lam, kap, a, _ = _self_factors(N, k, cluster.radii[j])
        S[cluster.sl(j), cluster.sl(j)] = np.diag(lam[n])
        K[cluster.sl(j), cluster.sl(j)] = np.diag(kap[n])
        for i in range(cluster.count):
            if i == j:
                continue
            t = cluster.centers[i] - cluster.centers[j]
            P = sf.project_outgoing(k, t, N, N, cluster.radii[i], scale=a)
            S[cluster.sl(i), cluster.sl(j)] = P
            K[cluster.sl(i), cluster.sl(j)] = sf.jn_logderiv(N, k, cluster.radii[i])[n][:, None] * P
    return S, K


def build_layer_operators(geom, k, nmax: int) -> dict[str, OperatorBlock]:
    """``S_D^k`` and ``K_D^{k,*}`` for a dimer (local frame) or a sphere cluster."""
    if nmax < 2:
        raise ValueError("nmax must be at least 2")
    cl = geom.cluster(nmax) if isinstance(geom, DimerGeometry) else geom
    S, K = helmholtz_operators(cl, k)
    return {"S": OperatorBlock(f"S^k (k={complex(k)})", S), "K": OperatorBlock(f"K^k* (k={complex(k)})", K)}


def single_layer_potential(cluster: SphereCluster, k, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Evaluate ``S^k_D[phi]`` at arbitrary points (inside or outside balls)."""
    pts = np.asarray(points, dtype=float)
    out = np.zeros(pts.shape[:-1], dtype=complex)
    N = cluster.nmax
    n, _ = sf.degree_order(N)
    for j in range(cluster.count):
        R = cluster.radii[j]
        _, _, a, b = _self_factors(N, k, R)
        rel = pts - cluster.centers[j]
        r = np.linalg.norm(rel, axis=-1)
        inside = r < R
        c = coeffs[cluster.sl(j)]
        if np.any(~inside):
            out[~inside] += sf.outgoing_field(c * a[n], k, np.zeros(3), rel[~inside])
        if np.any(inside):
            out[inside] += sf.regular_field(c * b[n], k, np.zeros(3), rel[inside])
    return out


def ball_integral(cluster: SphereCluster, func, j: int, n_radial: int = 24) -> complex:
    """``int_{D_j} func(x) dx`` by Gauss-Legendre in r times the surface rule."""
    t, w = np.polynomial.legendre.leggauss(n_radial)
    R = cluster.radii[j]
    r = 0.5 * R * (t + 1)
    wr = 0.5 * R * w * r**2
    quad = cluster.quadrature
    pts = cluster.centers[j] + r[:, None, None] * quad.unit[None, :, :]
    vals = np.asarray(func(pts.reshape(-1, 3))).reshape(len(r), -1)
    return complex(np.sum(wr[:, None] * quad.weights[None, :] * vals))


# --------------------------------------------------------------------------
# Low-frequency expansion terms S_D^n, K_D^n
# --------------------------------------------------------------------------


def _prefactor_S(n: int) -> complex:
    return -(1j**n) / (4 * math.pi * math.factorial(n))


def _prefactor_K(n: int) -> complex:
    return -(1j**n) * (n - 1) / (4 * math.pi * math.factorial(n))


def _funk_hecke_powers(nmax: int, p: float, R: float) -> np.ndarray:
    """``int_{|y|=R} |x-y|^p Y_l(y) dsigma / Y_l(x)`` for l = 0..nmax."""
    # |x-y| = R sqrt(2(1-t)); weight (1-t)^(p/2) handled by Gauss-Jacobi
    t, w = roots_jacobi(nmax + 4, p / 2.0, 0.0)
    l = np.arange(nmax + 1)
    Pl = eval_legendre(l[:, None], t[None, :])
    return 2 * math.pi * R * R * (R * math.sqrt(2.0)) ** p * (Pl @ w)


def _cross_kernel(n: int, kind: str, x: np.ndarray, nu: np.ndarray, y: np.ndarray) -> np.ndarray:
    diff = x[:, None, :] - y[None, :, :]
    r = np.linalg.norm(diff, axis=-1)
    if kind == "S":
        return r ** (n - 1.0)
    proj = np.einsum("ijk,ik->ij", diff, nu)
    return proj * r ** (n - 3.0)


def low_freq_term(cluster: SphereCluster, n: int, kind: str, quad_degree: int | None = None) -> np.ndarray:
    """Galerkin matrix of ``S_D^n`` (kind 'S') or ``K_D^n`` (kind 'K').

    Self blocks use the Funk-Hecke formula with Gauss-Jacobi quadrature (exact
    for the singular zonal kernels); coupling blocks use tensor
    Gauss-Legendre x trapezoid quadrature on both spheres.  ``n = 0`` returns
    the static operators.
    """
    if not 0 <= n <= 5:
        raise ValueError("expansion order must be in 0..5")
    if kind not in ("S", "K"):
        raise ValueError(kind)
    if n == 0:
        S0, K0 = helmholtz_operators(cluster, 0.0)
        return S0 if kind == "S" else K0
    N = cluster.nmax
    deg, _ = sf.degree_order(N)
    out = np.zeros((cluster.size, cluster.size), dtype=complex)
    if kind == "K" and n == 1:
        return out
    pref = _prefactor_S(n) if kind == "S" else _prefactor_K(n)
    quad = sf.quadrature_for_degree(quad_degree or (2 * N + 40))
    Y = sf.harmonics_on(N, quad)
    for j in range(cluster.count):
        R = cluster.radii[j]
        fh = _funk_hecke_powers(N, n - 1.0, R)
        if kind == "K":
            fh = fh / (2 * R)
        out[cluster.sl(j), cluster.sl(j)] = np.diag(pref * fh[deg])
        y = cluster.centers[j] + R * quad.unit
        right = (R * R * quad.weights)[:, None] * Y
        for i in range(cluster.count):
            if i == j:
                continue
            x = cluster.centers[i] + cluster.radii[i] * quad.unit
            ker = _cross_kernel(n, kind, x, quad.unit, y)
            left = (Y.conj() * quad.weights[:, None]).T
            out[cluster.sl(i), cluster.sl(j)] = pref * (left @ (ker @ right))
    return out


def build_low_freq_terms(geom, nmax: int, n: int) -> dict[str, OperatorBlock]:
    cl = geom.cluster(nmax) if isinstance(geom, DimerGeometry) else geom
    return {
        "S": OperatorBlock(f"S^{n}", low_freq_term(cl, n, "S")),
        "K": OperatorBlock(f"K^{n}", low_freq_term(cl, n, "K")),
    }


# --------------------------------------------------------------------------
# psi_1, psi_2, capacitance and dipole coupling
# --------------------------------------------------------------------------


@dataclass
class StaticSolver:
    """Factorised ``S_D^0`` of a cluster; solves ``S_D^0[phi] = f``."""

    cluster: SphereCluster
    S0: np.ndarray = field(init=False, repr=False)
    K0: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.S0, self.K0 = helmholtz_operators(self.cluster, 0.0)
        self._lu = linalg.lu_factor(self.S0)
        cond = np.linalg.cond(self.S0)
        log.debug("S_D^0 condition number %.3e (nmax=%d)", cond, self.cluster.nmax)
        if not np.isfinite(cond) or cond > 1e14:
            raise SolverError(f"S_D^0 is numerically singular (cond={cond:.3e})")
        self.condition = cond

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.lu_solve(self._lu, rhs)

    def constant_on(self, j: int) -> np.ndarray:
        rhs = np.zeros(self.cluster.size, dtype=complex)
        rhs[self.cluster.sl(j).start] = math.sqrt(4 * math.pi)
        return rhs

    def coordinate(self, axis: int) -> np.ndarray:
        """Coefficients of the surface function ``y_axis``."""
        return self.cluster.project(lambda p, nu, j: p[:, axis])

    @cached_property
    def psi(self) -> list[np.ndarray]:
        return [self.solve(self.constant_on(j)) for j in range(self.cluster.count)]


def solve_psi12(geom, nmax: int) -> tuple[SurfaceDensity, SurfaceDensity]:
    """Densities with ``S_D^0[psi_i] = 1`` on ``dD_i`` and 0 on the other ball."""
    cl = geom.cluster(nmax) if isinstance(geom, DimerGeometry) else geom
    st = StaticSolver(cl)
    p1, p2 = st.psi[:2]
    return SurfaceDensity(cl, p1), SurfaceDensity(cl, p2)


@dataclass(frozen=True)
class CapacitanceSet:
    C11: float
    C12: float
    P: float | None = None
    method: str = ""

    def __post_init__(self):
        if not self.C11 > 0:
            raise ValueError(f"C11 must be positive, got {self.C11}")
        if not self.C12 < 0:
            raise ValueError(f"C12 must be negative, got {self.C12}")
        if not self.C11 > abs(self.C12):
            raise ValueError("capacitance matrix is not positive definite")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.C11, self.C12], [self.C12, self.C11]])

    def C(self, a, b):
        """``a (C11 + C12) + b (C21 + C22)``."""
        return a * (self.C11 + self.C12) + b * (self.C12 + self.C11)

    def scaled(self, s: float) -> "CapacitanceSet":
        return CapacitanceSet(s * self.C11, s * self.C12, None if self.P is None else s * s * self.P, self.method)


def _capacitance_from(cl: SphereCluster, psi) -> tuple[float, float]:
    C = np.array([[-cl.integral(psi[i], j).real for j in range(2)] for i in range(2)])
    C11 = 0.5 * (C[0, 0] + C[1, 1])
    C12 = 0.5 * (C[0, 1] + C[1, 0])
    asym = max(abs(C[0, 0] - C[1, 1]), abs(C[0, 1] - C[1, 0])) / abs(C11)
    if asym > 1e-8:
        log.warning("capacitance matrix asymmetry %.2e before symmetrisation", asym)
    return C11, C12


def capacitance_numeric(geom: DimerGeometry, nmax: int = 14) -> CapacitanceSet:
    """``C_ij = -int_{dD_j} psi_i`` from the boundary-integral densities."""
    st = StaticSolver(geom.cluster(nmax))
    C11, C12 = _capacitance_from(st.cluster, st.psi)
    return CapacitanceSet(C11, C12, method="numeric")


def bispherical_params(r0: float, d0: float) -> tuple[float, float]:
    """Focal half-distance ``alpha`` and sphere coordinate ``T = asinh(alpha/r0)``."""
    alpha = math.sqrt(d0 * (r0 + d0 / 4.0))
    return alpha, math.asinh(alpha / r0)


def capacitance_series(r0: float, d0: float, tol: float = 1e-14) -> tuple[float, float]:
    """Bispherical-coordinate series for ``(C11, C12)`` of two equal balls."""
    if not (r0 > 0 and d0 > 0):
        raise GeometryError("r0 and d0 must be positive")
    alpha, T = bispherical_params(r0, d0)
    s11 = s12 = 0.0
    for n in range(100000):
        q = (2 * n + 1) * T
        # e^q/(e^{2q}-1) = 1/(2 sinh q); 1/(e^{2q}-1) = e^{-q}/(2 sinh q)
        t11 = 0.5 / math.sinh(q) if q < 700 else 0.0
        t12 = math.exp(-q) * t11
        s11 += t11
        s12 += t12
        if t11 <= tol * s11:
            break
    return 8 * math.pi * alpha * s11, -8 * math.pi * alpha * s12


def dipole_coupling_series(r0: float, d0: float, tol: float = 1e-14) -> float:
    """Bispherical series for ``P = int y_1 (psi_1 - psi_2)``."""
    alpha, T = bispherical_params(r0, d0)
    acc = 0.0
    for n in range(100000):
        q = (2 * n + 1) * T
        term = (2 * n + 1) * math.exp(-q) / math.tanh((n + 0.5) * T)
        acc += term
        if term <= tol * acc:
            break
    return -4 * math.pi * r0 * (r0 + d0 / 2.0) - 8 * math.pi * alpha**2 * acc


class RouteDisagreement(SolverError):
    pass


def dipole_coupling_numeric(geom: DimerGeometry, nmax: int = 14) -> tuple[float, np.ndarray]:
    """``int y (psi_1 - psi_2)`` from the densities; returns (P, moment vector).

    Coordinates are taken in the dimer frame (x1 along the axis) about the
    dimer centre.
    """
    st = StaticSolver(geom.cluster(nmax))
    diff = st.psi[0] - st.psi[1]
    local = np.array([st.cluster.moment(diff, a) for a in range(3)])
    mom = _LOCAL_TO_DIMER @ local
    return float(mom[0].real), mom


def dipole_coupling_P(geom: DimerGeometry, nmax: int = 14, rtol: float = 1e-4) -> float:
    """Dipole coupling constant ``P``, cross-checked between two routes."""
    Pn, mom = dipole_coupling_numeric(geom, nmax)
    Ps = geom.scale**2 * dipole_coupling_series(geom.r0, geom.d0)
    gap = abs(Pn - Ps) / abs(Ps)
    if gap > rtol:
        raise RouteDisagreement(f"P routes disagree: numeric {Pn:.10g}, series {Ps:.10g} (rel {gap:.2e})")
    if max(abs(mom[1]), abs(mom[2])) > 1e-8 * abs(Pn):
        raise SolverError("transverse moments of psi_1 - psi_2 do not vanish")
    return Pn


def static_polarizability(geom: DimerGeometry, nmax: int = 14) -> np.ndarray:
    """``int (S_D^0)^{-1}[x_i] y_j dsigma`` in the dimer frame (x1 along d).

    Coordinates are measured from the dimer centre.
    """
    st = StaticSolver(geom.cluster(nmax))
    M = np.zeros((3, 3))
    for i in range(3):
        dens = st.solve(st.coordinate(i))
        for j in range(3):
            M[i, j] = st.cluster.moment(dens, j).real
    return _LOCAL_TO_DIMER @ M @ _LOCAL_TO_DIMER.T


def capacitance_set(geom: DimerGeometry, nmax: int = 14, method: str = "numeric") -> CapacitanceSet:
    """C11, C12 and P for a (possibly scaled) dimer."""
    if method == "series":
        C11, C12 = capacitance_series(geom.r0, geom.d0)
        P = dipole_coupling_series(geom.r0, geom.d0)
        s = geom.scale
        return CapacitanceSet(s * C11, s * C12, s * s * P, "series")
    st = StaticSolver(geom.cluster(nmax))
    C11, C12 = _capacitance_from(st.cluster, st.psi)
    diff = st.psi[0] - st.psi[1]
    P = float(st.cluster.moment(diff, 2).real)
    return CapacitanceSet(C11, C12, P, "numeric")

"""Spherical Bessel/Hankel functions, orthonormal spherical harmonics and
spherical-wave translation.

Angular convention (used everywhere in the package)::

    Y_n^m(theta, phi) = Pbar_n^m(cos theta) * exp(i m phi)

with ``Pbar`` the orthonormal associated Legendre function including the
Condon-Shortley phase, so that ``int |Y_n^m|^2 dOmega = 1`` and
``Y_n^{-m} = (-1)^m conj(Y_n^m)``.  Coefficient vectors are flattened with
``index(n, m) = n*n + n + m``.

Radial convention: outgoing waves ``O_nm(x) = h_n(k|x|) Y_nm(x/|x|)`` and
regular waves ``R_nm(x) = j_n(k|x|) Y_nm(x/|x|)``; in the static limit
``k = 0`` they become ``|x|^{-n-1} Y_nm`` and ``|x|^n Y_nm``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


def nidx(nmax: int) -> int:
    """Number of (n, m) pairs with n <= nmax."""
    return (nmax + 1) ** 2


def index(n: int, m: int) -> int:
    return n * n + n + m


@lru_cache(maxsize=None)
def degree_order(nmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Degree and order arrays for the flattened index."""
    n = np.concatenate([np.full(2 * l + 1, l) for l in range(nmax + 1)])
    m = np.concatenate([np.arange(-l, l + 1) for l in range(nmax + 1)])
    n.setflags(write=False)
    m.setflags(write=False)
    return n, m


@dataclass(frozen=True)
class SphericalWaveIndex:
    degree: int
    order: int

    def __post_init__(self):
        if self.degree < 0 or abs(self.order) > self.degree:
            raise ValueError(f"invalid spherical wave index ({self.degree}, {self.order})")

    @property
    def flat(self) -> int:
        return index(self.degree, self.order)


# --------------------------------------------------------------------------
# Radial functions
# --------------------------------------------------------------------------

_SERIES_RADIUS = 1.0


def _jn_series(nmax: int, z: np.ndarray) -> np.ndarray:
    # j_n(z) = z^n/(2n+1)!! * sum_k (-z^2/2)^k / (k! (2n+3)(2n+5)...(2n+2k+1))
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    w = -0.5 * z * z
    lead = np.ones_like(z, dtype=complex)
    for n in range(nmax + 1):
        if n > 0:
            lead = lead * z / (2 * n + 1)
        term = np.ones_like(z, dtype=complex)
        acc = term.copy()
        for k in range(1, 40):
            term = term * w / (k * (2 * n + 2 * k + 1))
            acc = acc + term
        out[n] = lead * acc
    return out


def _jn_miller(nmax: int, z: np.ndarray) -> np.ndarray:
    """Backward recurrence normalised by sin(z)/z (or j_1 near zeros of j_0)."""
    start = nmax + 16 + int(np.max(np.abs(z))) + 1
    out = np.zeros((nmax + 1,) + z.shape, dtype=complex)
    jp1 = np.zeros_like(z, dtype=complex)
    jc = np.full_like(z, 1e-30, dtype=complex)
    for n in range(start, 0, -1):
        jm1 = (2 * n + 1) / z * jc - jp1
        jp1, jc = jc, jm1
        if n - 1 <= nmax:
            out[n - 1] = jc
        big = np.abs(jc) > 1e150
        if np.any(big):
            f = np.where(big, 1e-150, 1.0)
            jc = jc * f
            jp1 = jp1 * f
            out *= f
    j0 = np.sin(z) / z
    j1 = np.sin(z) / z**2 - np.cos(z) / z
    use0 = np.abs(j0) >= np.abs(j1)
    with np.errstate(invalid="ignore", divide="ignore"):
        norm = np.where(use0, j0 / out[0], j1 / out[1])
    return out * norm


def _jn_upward(nmax: int, z: np.ndarray) -> np.ndarray:
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    out[0] = np.sin(z) / z
    if nmax >= 1:
        out[1] = np.sin(z) / z**2 - np.cos(z) / z
    for n in range(1, nmax):
        out[n + 1] = (2 * n + 1) / z * out[n] - out[n - 1]
    return out


def sph_jn_all(nmax: int, z) -> np.ndarray:
    """Spherical Bessel functions ``j_0..j_nmax`` at (complex) ``z``.

    Returns an array of shape ``(nmax + 1,) + shape(z)``.  Power series for
    ``|z| < 1``, upward recurrence where ``|z| > nmax`` and Miller's backward
    recurrence in between.
    """
    z = np.asarray(z, dtype=complex)
    nm = max(nmax, 1)
    out = np.empty((nm + 1,) + z.shape, dtype=complex)
    a = np.abs(z)
    small = a < _SERIES_RADIUS
    up = a > nm
    mid = ~small & ~up
    if np.any(small):
        out[:, small] = _jn_series(nm, z[small])
    if np.any(up):
        out[:, up] = _jn_upward(nm, z[up])
    if np.any(mid):
        out[:, mid] = _jn_miller(nm, z[mid])
    return out[: nmax + 1]


def sph_hn_all(nmax: int, z) -> np.ndarray:
    """Spherical Hankel functions of the first kind ``h_0..h_nmax``.

    Upward recurrence from the closed forms of ``h_0`` and ``h_1``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise ZeroDivisionError("spherical Hankel function is singular at z = 0")
    out = np.empty((nmax + 1,) + z.shape, dtype=complex)
    e = np.exp(1j * z)
    out[0] = -1j * e / z
    if nmax >= 1:
        out[1] = -e * (z + 1j) / z**2
    for n in range(1, nmax):
        out[n + 1] = (2 * n + 1) / z * out[n] - out[n - 1]
    return out


def spherical_bessel_j(n: int, z) -> complex:
    if n < 0:
        raise ValueError("order must be nonnegative")
    z = complex(z)
    if z == 0:
        return 1.0 + 0j if n == 0 else 0j
    return complex(sph_jn_all(n, z)[n])


def spherical_hankel_h1(n: int, z) -> complex:
    if n < 0:
        raise ValueError("order must be nonnegative")
    return complex(sph_hn_all(n, complex(z))[n])


def derivatives(f: np.ndarray, z) -> np.ndarray:
    """Derivatives of a stack ``f_0..f_N`` of spherical Bessel-type functions.

    Uses ``f_n' = f_{n-1} - (n+1)/z f_n`` and ``f_0' = -f_1``; needs the stack
    to hold one order beyond the last derivative wanted.
    """
    z = np.asarray(z, dtype=complex)
    d = np.empty_like(f[:-1])
    d[0] = -f[1]
    for n in range(1, f.shape[0] - 1):
        d[n] = f[n - 1] - (n + 1) / z * f[n]
    return d


def jn_logderiv(nmax: int, k, radius: float) -> np.ndarray:
    """``k j_n'(k r) / j_n(k r)`` for n = 0..nmax, continuous at k = 0 (-> n/r).

    This is the radial normal derivative factor of a regular wave on a sphere.
    """
    k = complex(k)
    n = np.arange(nmax + 1)
    if k == 0:
        return n / radius
    z = k * radius
    j = sph_jn_all(nmax + 1, z)
    # k j_n'/j_n = n/r - k j_{n+1}/j_n
    return n / radius - k * j[1:] / j[:-1]


# --------------------------------------------------------------------------
# Angular functions
# --------------------------------------------------------------------------


def legendre_normalized_all(nmax: int, x) -> np.ndarray:
    """Orthonormal ``Pbar_n^m(x)`` for 0 <= m <= n <= nmax.

    Returns array of shape ``(nmax+1, nmax+1) + shape(x)`` indexed ``[n, m]``
    (entries with m > n are zero).
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-14):
        raise ValueError("associated Legendre argument outside [-1, 1]")
    x = np.clip(x, -1.0, 1.0)
    sx = np.sqrt(1.0 - x * x)
    P = np.zeros((nmax + 1, nmax + 1) + x.shape)
    pmm = np.full(x.shape, 1.0 / math.sqrt(4 * math.pi))
    for m in range(nmax + 1):
        if m > 0:
            pmm = -math.sqrt((2 * m + 1) / (2 * m)) * sx * pmm
        P[m, m] = pmm
        if m + 1 <= nmax:
            P[m + 1, m] = math.sqrt(2 * m + 3) * x * pmm
        for n in range(m + 2, nmax + 1):
            a = math.sqrt((4 * n * n - 1) / (n * n - m * m))
            b = math.sqrt(((n - 1) ** 2 - m * m) / (4 * (n - 1) ** 2 - 1))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    return P


def assoc_legendre(n: int, m: int, x: float) -> float:
    """Orthonormal associated Legendre value ``Pbar_n^m(x)`` (Condon-Shortley phase)."""
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    if abs(x) > 1:
        raise ValueError("associated Legendre argument outside [-1, 1]")
    return float(legendre_normalized_all(n, x)[n, m])


def sph_harm_all(nmax: int, theta, phi) -> np.ndarray:
    """All ``Y_n^m(theta, phi)``, shape ``shape(theta) + ((nmax+1)**2,)``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    P = legendre_normalized_all(nmax, np.cos(theta))
    n, m = degree_order(nmax)
    am = np.abs(m)
    vals = P[n, am]  # (K,) + shape
    vals = np.moveaxis(vals, 0, -1)
    sign = np.where((m < 0) & (am % 2 == 1), -1.0, 1.0)
    return vals * sign * np.exp(1j * m * phi[..., None])


def cart_to_sph(v: np.ndarray):
    v = np.asarray(v, dtype=float)
    r = np.linalg.norm(v, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        ct = np.where(r > 0, v[..., 2] / np.where(r > 0, r, 1.0), 1.0)
    theta = np.arccos(np.clip(ct, -1.0, 1.0))
    phi = np.arctan2(v[..., 1], v[..., 0])
    return r, theta, phi


# --------------------------------------------------------------------------
# Sphere quadrature
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SphereQuadrature:
    """Gauss-Legendre in cos(theta) times trapezoid in phi on the unit sphere.

    Integrates spherical harmonics exactly up to degree ``2*n_theta - 1``
    in theta and ``n_phi - 1`` in azimuthal order.
    """

    theta: np.ndarray
    phi: np.ndarray
    weights: np.ndarray
    unit: np.ndarray

    @property
    def size(self) -> int:
        return self.weights.size


@lru_cache(maxsize=64)
def sphere_quadrature(n_theta: int, n_phi: int) -> SphereQuadrature:
    x, w = np.polynomial.legendre.leggauss(n_theta)
    th = np.arccos(x)
    ph = 2 * np.pi * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.repeat(w[:, None], n_phi, axis=1) * (2 * np.pi / n_phi)
    T, P, W = T.ravel(), P.ravel(), W.ravel()
    unit = np.stack([np.sin(T) * np.cos(P), np.sin(T) * np.sin(P), np.cos(T)], axis=-1)
    for a in (T, P, W, unit):
        a.setflags(write=False)
    return SphereQuadrature(T, P, W, unit)


def quadrature_for_degree(degree: int) -> SphereQuadrature:
    """Quadrature exact for products of harmonics with total degree <= degree."""
    return sphere_quadrature(degree // 2 + 1, degree + 1)


@lru_cache(maxsize=64)
def _harmonics_on(nmax: int, n_theta: int, n_phi: int) -> np.ndarray:
    q = sphere_quadrature(n_theta, n_phi)
    Y = sph_harm_all(nmax, q.theta, q.phi)
    Y.setflags(write=False)
    return Y


def harmonics_on(nmax: int, quad: SphereQuadrature) -> np.ndarray:
    n_theta = np.unique(quad.theta).size
    n_phi = quad.size // n_theta
    return _harmonics_on(nmax, n_theta, n_phi)


def project(values: np.ndarray, nmax: int, quad: SphereQuadrature) -> np.ndarray:
    """Spherical-harmonic coefficients of sampled functions.

    ``values`` has the quadrature nodes on its first axis; the return value
    has the flattened (n, m) index on its first axis.
    """
    Y = harmonics_on(nmax, quad)
    return (Y.conj() * quad.weights[:, None]).T @ values


# --------------------------------------------------------------------------
# Translation of outgoing waves
# --------------------------------------------------------------------------


def radial_outgoing(nmax: int, k, r) -> np.ndarray:
    """``h_n(k r)`` (or ``r^{-n-1}`` when k = 0), shape ``(nmax+1,) + shape(r)``."""
    k = complex(k)
    r = np.asarray(r, dtype=float)
    if k == 0:
        n = np.arange(nmax + 1).reshape((-1,) + (1,) * r.ndim)
        return r ** (-n - 1.0) + 0j
    return sph_hn_all(nmax, k * r)


def radial_regular(nmax: int, k, r) -> np.ndarray:
    """``j_n(k r)`` (or ``r^n`` when k = 0)."""
    k = complex(k)
    r = np.asarray(r, dtype=float)
    if k == 0:
        n = np.arange(nmax + 1).reshape((-1,) + (1,) * r.ndim)
        return r**n + 0j
    return sph_jn_all(nmax, k * r)


def _tail_degree(ratio: float, nmax: int, tol: float = 1e-17) -> int:
    if ratio <= 0:
        return nmax
    extra = int(math.ceil(math.log(tol) / math.log(ratio))) + nmax // 2
    return min(nmax + extra, nmax + 160)


def project_outgoing(k, displacement, nmax_src: int, nmax_tgt: int, radius: float,
                     scale: np.ndarray | None = None) -> np.ndarray:
    """Harmonic coefficients of ``scale_n * O_nm`` sampled on a sphere.

    The sphere has the given radius and is centred at ``displacement`` relative
    to the source centre.  Entry ``[nu mu, n m]`` is
    ``int scale_n O_nm(displacement + radius*s) conj(Y_numu(s)) dOmega(s)``.
    """
    t = np.asarray(displacement, dtype=float)
    dist = float(np.linalg.norm(t))
    if dist == 0:
        raise ValueError("translation displacement must be nonzero")
    if radius >= dist:
        raise ValueError("projection sphere must not contain the source centre")
    deg = _tail_degree(radius / dist, max(nmax_src, nmax_tgt)) + nmax_tgt
    quad = quadrature_for_degree(deg)
    pts = t + radius * quad.unit
    r, th, ph = cart_to_sph(pts)
    rad = radial_outgoing(nmax_src, k, r)  # (nsrc+1, Q)
    if scale is not None:
        rad = rad * np.asarray(scale)[:, None]
    Y = sph_harm_all(nmax_src, th, ph)  # (Q, K)
    n, _ = degree_order(nmax_src)
    field = Y * rad[n].T  # (Q, K)
    return project(field, nmax_tgt, quad)


@dataclass(frozen=True)
class TranslationMatrix:
    """Outgoing-to-regular translation ``O_nm(x + t) = sum T[numu, nm] R_numu(x)``.

    Here ``x`` is measured from the target centre and ``t`` is the target
    centre minus the source centre; valid for ``|x| < |t|``.
    """

    source: np.ndarray
    target: np.ndarray
    k: complex
    nmax: int
    entries: np.ndarray

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        return self.entries @ coeffs


def build_translation_matrix(k, displacement, nmax: int, radius: float | None = None,
                             source=(0.0, 0.0, 0.0)) -> TranslationMatrix:
    """Outgoing-to-regular translation matrix for a displacement ``t``.

    The coefficients are obtained by exact projection onto regular waves on
    an auxiliary sphere of the given radius about the target centre (default
    ``|t|/2``) with a quadrature that resolves the analytic tail to double
    precision, so the result equals the addition-theorem matrix up to the
    degree truncation.
    """
    t = np.asarray(displacement, dtype=float)
    dist = float(np.linalg.norm(t))
    if dist == 0:
        raise ValueError("translation displacement must be nonzero")
    if nmax < 0:
        raise ValueError("nmax must be nonnegative")
    rho = 0.5 * dist if radius is None else float(radius)
    P = project_outgoing(k, t, nmax, nmax, rho)
    jr = radial_regular(nmax, k, rho)
    n, _ = degree_order(nmax)
    T = P / jr[n][:, None]
    src = np.asarray(source, dtype=float)
    return TranslationMatrix(src, src + t, complex(k), nmax, T)


def outgoing_field(coeffs: np.ndarray, k, center, points: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_nm c_nm O_nm(x - center)`` at points."""
    coeffs = np.asarray(coeffs)
    nmax = int(round(math.sqrt(coeffs.shape[0]))) - 1
    r, th, ph = cart_to_sph(np.asarray(points, dtype=float) - np.asarray(center, dtype=float))
    rad = radial_outgoing(nmax, k, r)
    n, _ = degree_order(nmax)
    Y = sph_harm_all(nmax, th, ph)
    return np.einsum("...k,k...,k->...", Y, rad[n], coeffs)


def regular_field(coeffs: np.ndarray, k, center, points: np.ndarray) -> np.ndarray:
    """Evaluate ``sum_nm c_nm R_nm(x - center)`` at points."""
    coeffs = np.asarray(coeffs)
    nmax = int(round(math.sqrt(coeffs.shape[0]))) - 1
    r, th, ph = cart_to_sph(np.asarray(points, dtype=float) - np.asarray(center, dtype=float))
    rad = radial_regular(nmax, k, r)
    n, _ = degree_order(nmax)
    Y = sph_harm_all(nmax, th, ph)
    return np.einsum("...k,k...,k->...", Y, rad[n], coeffs)

"""Foldy-Lax multiple scattering by point dimers and the homogenised
Lippmann-Schwinger equation."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import LinearOperator, gmres

from ..homogenize import EffectiveMedium, EnsembleSpec
from ..layerpot import DimerGeometry, MediumParams, SolverError, SphereCluster
from ..resonance import ResonancePair
from ..scatter import DimerConstants, IncidentWave, scattering_coefficients, solve_cluster
from ._backend import get_kernels

log = logging.getLogger(__name__)


class SingularSystemError(SolverError):
    pass


class ConvergenceError(SolverError):
    def __init__(self, msg, history=()):
        super().__init__(msg)
        self.history = list(history)


# --------------------------------------------------------------------------
# Foldy-Lax system
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DimerCoefficients:
    """Per-dimer monopole and dipole strengths at the centres ``z``."""

    z: np.ndarray
    g0: np.ndarray
    g1: np.ndarray

    def __post_init__(self):
        z = np.ascontiguousarray(np.atleast_2d(self.z), dtype=float)
        g0 = np.ascontiguousarray(np.atleast_1d(self.g0), dtype=complex)
        g1 = np.ascontiguousarray(np.asarray(self.g1, dtype=complex).reshape(-1, 3, 3))
        if not (len(z) == len(g0) == len(g1)):
            raise ValueError("inconsistent dimer coefficients")
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "g0", g0)
        object.__setattr__(self, "g1", g1)

    @property
    def N(self) -> int:
        return len(self.z)

    def permuted(self, perm) -> "DimerCoefficients":
        perm = np.asarray(perm)
        return DimerCoefficients(self.z[perm], self.g0[perm], self.g1[perm])


def ensemble_coefficients(spec: EnsembleSpec, base: DimerGeometry, params: MediumParams, consts: DimerConstants,
                          resonances: ResonancePair, omega: float) -> DimerCoefficients:
    """Coefficients of the dimers ``z_j + s R_{d_j} D``.

    ``resonances`` belong to the scaled dimer ``sD``; they do not depend on
    the orientation.
    """
    g0 = np.empty(spec.N, dtype=complex)
    g1 = np.empty((spec.N, 3, 3), dtype=complex)
    for j in range(spec.N):
        geom = DimerGeometry(base.r0, base.d0, spec.s, tuple(spec.orientations[j]), tuple(spec.positions[j]))
        c = scattering_coefficients(geom, params, consts, resonances, omega)
        g0[j], g1[j] = c.g0, c.g1
    return DimerCoefficients(spec.positions, g0, g1)


@dataclass
class FoldyState:
    """Self-consistent local fields ``u_j`` and ``grad u_j`` at the dimer centres."""

    coeffs: DimerCoefficients
    k: complex
    x: np.ndarray
    backend: str
    timings: dict = field(default_factory=dict)

    @property
    def u(self) -> np.ndarray:
        return self.x[0::4]

    @property
    def grad(self) -> np.ndarray:
        return self.x.reshape(-1, 4)[:, 1:]

    def scattered(self, points, backend: str | None = None) -> np.ndarray:
        pts = np.ascontiguousarray(np.atleast_2d(points), dtype=float)
        c = self.coeffs
        q = np.ascontiguousarray(c.g0 * self.u)
        w = np.ascontiguousarray(np.einsum("iab,ia->ib", c.g1, self.grad))
        return get_kernels(backend).field_sum(pts, c.z, q, w, complex(self.k))

    def total(self, points, wave: IncidentWave, backend: str | None = None) -> np.ndarray:
        return wave.value(np.atleast_2d(points)) + self.scattered(points, backend)

    def far_field(self, xhat) -> np.ndarray:
        """Amplitude ``f`` with ``u - u_in ~ f(xhat) exp(ik|x|)/|x|``."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        c = self.coeffs
        q = c.g0 * self.u
        w = np.einsum("iab,ia->ib", c.g1, self.grad)
        phase = np.exp(-1j * self.k * (xhat @ c.z.T))
        return -(phase @ q + 1j * self.k * np.sum((phase @ w) * xhat, axis=1)) / (4 * math.pi)


def assemble_and_solve_foldy(coeffs: DimerCoefficients, wave: IncidentWave, backend: str | None = None,
                             dense_limit: int = 2000) -> FoldyState:
    """Solve ``(I - T) x = x_in`` for the 4N local field unknowns.

    Dense LU up to ``dense_limit`` dimers, GMRES beyond; both are held to
    the same relative residual of 1e-8.
    """
    ker = get_kernels(backend)
    k = complex(wave.k)
    t0 = time.perf_counter()
    T = ker.assemble_foldy(coeffs.z, coeffs.g0, coeffs.g1, k)
    t1 = time.perf_counter()
    A = np.eye(4 * coeffs.N, dtype=complex) - T
    rhs = np.empty(4 * coeffs.N, dtype=complex)
    rhs[0::4] = wave.value(coeffs.z)
    rhs.reshape(-1, 4)[:, 1:] = wave.gradient(coeffs.z)
    try:
        if coeffs.N <= dense_limit:
            lu = linalg.lu_factor(A, overwrite_a=False, check_finite=False)
            x = linalg.lu_solve(lu, rhs)
        else:
            x, info = gmres(A, rhs, rtol=1e-10, atol=0.0, restart=100, maxiter=50)
            if info != 0:
                raise ConvergenceError(f"Foldy GMRES stopped with info={info}")
    except (linalg.LinAlgError, ValueError) as exc:
        smin = linalg.svdvals(A)[-1]
        raise SingularSystemError(f"Foldy system is singular (smallest singular value {smin:.3e})") from exc
    resid = np.linalg.norm(A @ x - rhs) / np.linalg.norm(rhs)
    if not np.isfinite(resid) or resid > 1e-8:
        smin = linalg.svdvals(A)[-1]
        raise SingularSystemError(f"Foldy solve residual {resid:.2e} (smallest singular value {smin:.3e})")
    t2 = time.perf_counter()
    name = ker.__name__.rsplit(".", 1)[-1]
    return FoldyState(coeffs, k, x, "python" if name == "_kernels_py" else "compiled",
                      {"assemble": t1 - t0, "solve": t2 - t1})


def volume_fraction(spec: EnsembleSpec) -> float:
    """Volume fraction of the excluded balls ``B(z_j, sqrt(s))``."""
    return spec.N * 4.0 / 3.0 * math.pi * spec.s**1.5 / spec.volume


# --------------------------------------------------------------------------
# Probes and comparison
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProbeGrid:
    points: np.ndarray
    centers: np.ndarray
    radius: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if len(self.centers):
            from scipy.spatial import cKDTree

            dist, _ = cKDTree(self.centers).query(pts)
            if np.any(dist < self.radius):
                raise ValueError("probe point inside an excluded ball B(z_j, sqrt(s))")

    @classmethod
    def interior(cls, spec: EnsembleSpec, n: int = 5, margin: float = 0.1) -> "ProbeGrid":
        """Lattice of ``n^3`` points inside the domain, dropping excluded ones."""
        from scipy.spatial import cKDTree

        lo, hi = spec.box_lo, spec.box_hi
        span = hi - lo
        axes = [np.linspace(lo[a] + margin * span[a], hi[a] - margin * span[a], n) for a in range(3)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        rad = math.sqrt(spec.s)
        dist, _ = cKDTree(spec.positions).query(pts)
        return cls(pts[dist >= rad], spec.positions, rad)


def compare_micro_macro(micro: np.ndarray, macro: np.ndarray, probes: ProbeGrid | None = None,
                        reference: np.ndarray | None = None):
    """Relative L2 error and per-point rows ``(x, y, z, micro, macro, |diff|)``.

    With ``reference`` (e.g. the incident field) the error is measured on
    ``micro - reference`` and ``macro - reference``.
    """
    micro = np.asarray(micro)
    macro = np.asarray(macro)
    a = micro if reference is None else micro - reference
    b = macro if reference is None else macro - reference
    denom = np.linalg.norm(a)
    err = 0.0 if denom == 0 and np.linalg.norm(a - b) == 0 else float(np.linalg.norm(a - b) / denom)
    rows = []
    pts = probes.points if probes is not None else np.full((len(micro), 3), np.nan)
    for p, mi, ma in zip(pts, micro, macro):
        rows.append((*p, complex(mi), complex(ma), abs(mi - ma)))
    return err, rows


# --------------------------------------------------------------------------
# Homogenised Lippmann-Schwinger equation
# --------------------------------------------------------------------------


def _self_cell_G(k: complex, h: float) -> complex:
    """``int G`` over a ball with the volume of an h-cube."""
    a = h * (3.0 / (4.0 * math.pi)) ** (1.0 / 3.0)
    if abs(k) * a < 1e-6:
        return -a * a / 2
    e = np.exp(1j * k * a)
    return -(e * (a / (1j * k) + 1 / k**2) - 1 / k**2)


@dataclass
class LSSolution:
    axes: tuple
    u: np.ndarray
    iterations: int
    history: list

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(points)
        re = RegularGridInterpolator(self.axes, self.u.real, method="cubic", bounds_error=False, fill_value=None)
        im = RegularGridInterpolator(self.axes, self.u.imag, method="cubic", bounds_error=False, fill_value=None)
        return re(pts) + 1j * im(pts)


class LSOperator:
    """Voxel collocation of ``u - a G*u - div-free dipole term`` on a box."""

    def __init__(self, medium: EffectiveMedium, box_lo, box_hi, n: int):
        lo = np.asarray(box_lo, dtype=float)
        hi = np.asarray(box_hi, dtype=float)
        span = hi - lo
        if not np.allclose(span, span[0]):
            raise ValueError("the voxel solver expects a cubic domain")
        self.n = n
        self.h = h = span[0] / n
        self.axes = tuple(lo[a] + (np.arange(n) + 0.5) * h for a in range(3))
        k = medium.k
        self.k = k
        self.alpha = medium.Lambda * medium.g0 * medium.V
        self.Mdip = medium.Lambda * medium.g1 * medium.B  # 3x3
        m = 2 * n
        off = np.fft.fftfreq(m, 1.0 / m) * h
        X = np.stack(np.meshgrid(off, off, off, indexing="ij"), axis=-1)
        r = np.linalg.norm(X, axis=-1)
        r[0, 0, 0] = 1.0
        e = -np.exp(1j * k * r) / (4 * np.pi * r)
        G = e * h**3
        G[0, 0, 0] = _self_cell_G(k, h)
        gfac = e * (1j * k * r - 1) / r**2 * h**3
        gfac[0, 0, 0] = 0.0
        self._fG = np.fft.fftn(G)
        self._fdG = [np.fft.fftn(gfac * X[..., a]) for a in range(3)]

    def _conv(self, fk, f):
        n, m = self.n, 2 * self.n
        pad = np.zeros((m, m, m), dtype=complex)
        pad[:n, :n, :n] = f
        return np.fft.ifftn(fk * np.fft.fftn(pad))[:n, :n, :n]

    def gradient(self, u):
        return np.stack(np.gradient(u, self.h, edge_order=2), axis=-1)

    def scattered(self, u):
        n = self.n
        out = self.alpha * self._conv(self._fG, u)
        if np.any(self.Mdip != 0):
            w = self.gradient(u) @ self.Mdip.T
            pad = np.zeros((2 * n,) * 3, dtype=complex)
            acc = np.zeros((2 * n,) * 3, dtype=complex)
            for a in range(3):
                pad[:n, :n, :n] = w[..., a]
                acc += self._fdG[a] * np.fft.fftn(pad)
            out = out + np.fft.ifftn(acc)[:n, :n, :n]
        return out

    def matvec(self, x):
        u = x.reshape((self.n,) * 3)
        return (u - self.scattered(u)).ravel()

    def as_linear_operator(self):
        N = self.n**3
        return LinearOperator((N, N), matvec=self.matvec, dtype=complex)

    def grid_points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)


def lippmann_schwinger_solve(medium: EffectiveMedium, box_lo, box_hi, wave: IncidentWave, n: int = 32,
                             rtol: float = 1e-8, maxiter: int = 400, born: bool = False) -> LSSolution:
    """Solve the homogenised volume integral equation on an ``n^3`` voxel grid.

    With ``born=True`` a single Born iterate ``u_in + K[u_in]`` is returned.
    """
    op = LSOperator(medium, box_lo, box_hi, n)
    lam = 2 * math.pi / max(abs(complex(wave.k)), 1e-300)
    if op.h > lam / 8:
        log.warning("voxel size %.3g resolves fewer than 8 points per background wavelength", op.h)
    uin = wave.value(op.grid_points())
    if medium.Lambda == 0:
        return LSSolution(op.axes, uin, 0, [0.0])
    if born:
        return LSSolution(op.axes, uin + op.scattered(uin), 1, [])
    hist = []
    sol, info = gmres(op.as_linear_operator(), uin.ravel(), rtol=rtol, atol=0.0, restart=80,
                      maxiter=maxiter, callback=lambda r: hist.append(float(r)), callback_type="pr_norm")
    res = np.linalg.norm(op.matvec(sol) - uin.ravel()) / np.linalg.norm(uin)
    if info != 0 or res > 10 * rtol:
        raise ConvergenceError(f"GMRES stopped with info={info}, residual {res:.2e}", hist)
    return LSSolution(op.axes, sol.reshape((n,) * 3), len(hist), hist)


def macroscopic_medium(coeffs: DimerCoefficients, spec: EnsembleSpec, k: complex) -> EffectiveMedium:
    """Effective medium built from the ensemble's own per-dimer strengths.

    ``g0~ = mean(g0_j)/s`` and ``Lambda g1~ B~ = (1/|Omega|) sum_j g1_j``.
    """
    s, N = spec.s, spec.N
    g0t = complex(np.mean(coeffs.g0)) / s
    # the dipole tensor is carried in B~ with g1~ = 1; it is complex when
    # the strengths include radiation damping
    B = coeffs.g1.sum(axis=0) / (spec.volume * s * N)
    return EffectiveMedium(g0t, 1.0, 1.0 / spec.volume, B, s * N, k)


# --------------------------------------------------------------------------
# Ensemble files
# --------------------------------------------------------------------------


def write_ensemble(path, spec: EnsembleSpec, extra: dict | None = None) -> None:
    """Whitespace-delimited ``z1 z2 z3 d1 d2 d3`` rows with a ``#`` header."""
    head = {
        "format": "dimerwave-ensemble-1",
        "N": spec.N,
        "box_lo": " ".join(repr(float(v)) for v in spec.box_lo),
        "box_hi": " ".join(repr(float(v)) for v in spec.box_hi),
        "s": repr(float(spec.s)),
        "mu": repr(float(spec.mu)),
        "seed": spec.seed,
        "eta": spec.eta,
        "columns": "z1 z2 z3 d1 d2 d3",
    }
    head.update(extra or {})
    with open(path, "w") as f:
        for key, val in head.items():
            f.write(f"# {key} = {val}\n")
        for z, d in zip(spec.positions, spec.orientations):
            f.write(" ".join(f"{v:.17g}" for v in (*z, *d)) + "\n")


def read_ensemble(path) -> EnsembleSpec:
    head = {}
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                head[key.strip()] = val.strip()
            else:
                rows.append([float(t) for t in line.split()])
    data = np.array(rows, dtype=float).reshape(-1, 6)
    none = lambda v: None if v in (None, "None") else v  # noqa: E731
    seed = none(head.get("seed"))
    eta = none(head.get("eta"))
    return EnsembleSpec(
        np.array(head["box_lo"].split(), dtype=float), np.array(head["box_hi"].split(), dtype=float),
        data[:, :3], data[:, 3:], float(head["s"]), float(head["mu"]),
        None if eta is None else float(eta), None if seed is None else int(seed),
    )


# --------------------------------------------------------------------------
# Brute-force oracle for two dimers
# --------------------------------------------------------------------------


def two_dimer_cluster(geoms: list[DimerGeometry], nmax: int) -> SphereCluster:
    centers = np.concatenate([g.centers() for g in geoms])
    radii = np.concatenate([np.full(2, g.radius) for g in geoms])
    return SphereCluster(centers, radii, nmax)


def brute_force_field(geoms: list[DimerGeometry], params: MediumParams, wave: IncidentWave, omega: float,
                      points, nmax: int = 8) -> np.ndarray:
    """Scattered field of several dimers from the full boundary-integral solve."""
    sol = solve_cluster(two_dimer_cluster(geoms, nmax), params, wave, omega)
    return sol.scattered(points)

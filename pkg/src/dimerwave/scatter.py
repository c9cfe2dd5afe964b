"""Monopole-dipole point-scatterer model of a dimer and the full two-sphere solve."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import green
from . import specfun as sf
from .layerpot import (
    CapacitanceSet,
    DimerGeometry,
    MediumParams,
    SolverError,
    SphereCluster,
    _LOCAL_TO_DIMER,
    capacitance_set,
    helmholtz_operators,
    rotation_to,
    single_layer_potential,
    static_polarizability,
)
from .resonance import ResonancePair

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IncidentWave:
    """Plane wave ``amplitude * exp(i k x.theta)``."""

    direction: tuple
    k: complex
    amplitude: complex = 1.0

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if n == 0:
            raise ValueError("direction must be nonzero")
        object.__setattr__(self, "direction", tuple(d / n))

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(self.direction)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.amplitude * np.exp(1j * self.k * (x @ self.theta))

    def gradient(self, x) -> np.ndarray:
        return (1j * self.k * self.value(x))[..., None] * self.theta


@dataclass(frozen=True)
class ScatteringCoefficients:
    g0: complex
    g1: np.ndarray
    omega: float
    center: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        g1 = np.asarray(self.g1, dtype=complex)
        if g1.shape != (3, 3):
            raise ValueError("g1 must be 3x3")
        object.__setattr__(self, "g1", g1)
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))


@dataclass(frozen=True)
class DimerConstants:
    """Geometry constants of the unscaled dimer D."""

    caps: CapacitanceSet
    polarizability: np.ndarray  # dimer frame, x1 along the axis
    volume: float

    @classmethod
    def compute(cls, geom: DimerGeometry, nmax: int = 12) -> "DimerConstants":
        base = geom.unscaled()
        caps = capacitance_set(base, nmax)
        return cls(caps, static_polarizability(base, nmax), base.volume)


def _dimer_frame_rotation(d) -> np.ndarray:
    """Rotation whose first column is ``d`` (dimer frame -> world)."""
    return rotation_to(d) @ _LOCAL_TO_DIMER.T


def scattering_coefficients(geom: DimerGeometry, params: MediumParams, consts: DimerConstants,
                            resonances: ResonancePair, omega: float) -> ScatteringCoefficients:
    """``g0`` and ``g1`` of the dimer ``geom`` = ``z + s R_d D`` at frequency omega.

    ``resonances`` must be those of the scaled dimer.
    """
    s = geom.scale
    w1, w2 = resonances.omega1, resonances.omega2
    for w in (w1, w2):
        if abs(omega - w) < 1e-6 * abs(w):
            log.warning("omega=%g is within 1e-6 of the pole %s", omega, w)
    caps = consts.caps
    g0 = 2 * (caps.C11 + caps.C12) * s / (1 - w1**2 / omega**2)
    d = np.asarray(geom.orientation)
    Q = _dimer_frame_rotation(d)
    static = s**3 * (Q @ consts.polarizability @ Q.T)
    res = params.delta * params.v_b**2 * s * caps.P**2 / (consts.volume * (w2**2 - omega**2))
    g1 = static + res * np.outer(d, d)
    g1 = 0.5 * (g1 + g1.T)
    return ScatteringCoefficients(complex(g0), g1, omega, np.asarray(geom.center), resonances.method)


def point_scattered_field(coeffs: ScatteringCoefficients, wave: IncidentWave, x) -> np.ndarray:
    """``g0 u_in(z) G(x-z) + grad u_in(z) . g1 grad G(x-z)``."""
    x = np.asarray(x, dtype=float)
    z = coeffs.center
    rel = x - z
    u = wave.value(z)
    gu = wave.gradient(z)
    return coeffs.g0 * u * green.G(rel, wave.k) + green.grad_G(rel, wave.k) @ (coeffs.g1.T @ gu)


# --------------------------------------------------------------------------
# Full boundary-integral solution
# --------------------------------------------------------------------------


@dataclass
class FullSolution:
    cluster: SphereCluster
    k: complex
    k_b: complex
    phi: np.ndarray
    psi: np.ndarray
    condition: float

    def scattered(self, x) -> np.ndarray:
        return single_layer_potential(self.cluster, self.k, self.psi, np.asarray(x, dtype=float))

    def interior(self, x) -> np.ndarray:
        return single_layer_potential(self.cluster, self.k_b, self.phi, np.asarray(x, dtype=float))

    def far_field(self, xhat) -> np.ndarray:
        """Amplitude ``f`` with ``u - u_in ~ f(xhat) exp(ik|x|)/|x|``."""
        xhat = np.atleast_2d(np.asarray(xhat, dtype=float))
        cl = self.cluster
        out = np.zeros(len(xhat), dtype=complex)
        for j in range(cl.count):
            y = cl.nodes(j)
            w = cl.surface_weights(j) * cl.values(self.psi, j)
            out += np.exp(-1j * self.k * (xhat @ y.T)) @ w
        return -out / (4 * math.pi)


def solve_cluster(cluster: SphereCluster, params: MediumParams, wave: IncidentWave, omega: float) -> FullSolution:
    """Solve the transmission problem for bubbles occupying the spheres of ``cluster``."""
    k, kb = params.k(omega), params.k_b(omega)
    if abs(complex(wave.k) - k) > 1e-12 * abs(k):
        raise ValueError("incident wavenumber does not match the background medium")
    Sb, Kb = helmholtz_operators(cluster, kb)
    S, K = helmholtz_operators(cluster, k)
    I = np.eye(cluster.size)
    A = np.block([[Sb, -S], [-0.5 * I + Kb, -params.delta * (0.5 * I + K)]])
    f = cluster.project(lambda p, nu, j: wave.value(p))
    g = cluster.project(lambda p, nu, j: np.sum(wave.gradient(p) * nu, axis=-1))
    rhs = np.concatenate([f, params.delta * g])
    lu = linalg.lu_factor(A)
    sol = linalg.lu_solve(lu, rhs)
    cond = 1.0 / max(np.linalg.cond(A, 1) ** -1, 1e-300)
    if not np.all(np.isfinite(sol)):
        raise SolverError(f"full solve failed (cond={cond:.3e})")
    n = cluster.size
    return FullSolution(cluster, k, kb, sol[:n], sol[n:], cond)


def solve_full(geom: DimerGeometry, params: MediumParams, wave: IncidentWave, nmax: int, omega: float) -> FullSolution:
    return solve_cluster(geom.cluster(nmax, frame="world"), params, wave, omega)


def full_scattered_field(geom: DimerGeometry, params: MediumParams, wave: IncidentWave, nmax: int, x,
                         omega: float | None = None) -> np.ndarray:
    """``u - u_in`` at points ``x`` from the two-sphere boundary-integral solution."""
    if omega is None:
        omega = (complex(wave.k) / params.k(1.0)).real
    return solve_full(geom, params, wave, nmax, omega).scattered(x)


def optical_theorem_gap(sol: FullSolution, wave: IncidentWave, n_theta: int = 24) -> float:
    """Relative mismatch between ``int |f|^2`` and ``(4 pi / k) Im f(theta)``."""
    quad = sf.sphere_quadrature(n_theta, 2 * n_theta)
    f = sol.far_field(quad.unit)
    total = float(np.sum(quad.weights * np.abs(f) ** 2))
    fwd = sol.far_field(wave.theta[None, :])[0]
    rhs = 4 * math.pi / sol.k.real * fwd.imag
    return abs(total - rhs) / abs(rhs)


def ring_points(radius: float, count: int, center=(0.0, 0.0, 0.0), normal=(0.0, 0.0, 1.0)) -> np.ndarray:
    """``count`` equally spaced points on a circle."""
    n = np.asarray(normal, dtype=float)
    Q = rotation_to(n)
    t = 2 * math.pi * np.arange(count) / count
    pts = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=-1) * radius
    return pts @ Q.T + np.asarray(center, dtype=float)

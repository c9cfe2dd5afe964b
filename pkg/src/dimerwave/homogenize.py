"""Effective medium of a dilute ensemble of bubble dimers.

Two conventions for the scattering constants coexist.  ``tilde_constants``
uses the fixed-detuning form ``omega = omega_M2 + a s^2``; the dispersion
sweep uses the frequency-dependent form ``g0(omega) = 2(C11+C12)/(1 -
omega1^2/omega^2)``, ``g1(omega) = delta v_b^2 P^2 / (|D| (omega2^2 -
omega^2))``.  Callers pick one explicitly.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .layerpot import CapacitanceSet

log = logging.getLogger(__name__)

REGIMES = ("double-positive", "single-negative-density", "single-negative-modulus", "double-negative")


# --------------------------------------------------------------------------
# Ensembles
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    """Dimer centres and orientations in an axis-aligned box.

    ``delta = mu^2 s^2`` and ``Lambda = s N`` tie the contrast and the dimer
    size to the dimer count.
    """

    box_lo: np.ndarray
    box_hi: np.ndarray
    positions: np.ndarray
    orientations: np.ndarray
    s: float
    mu: float
    eta: float | None = None
    seed: int | None = None

    def __post_init__(self):
        lo = np.asarray(self.box_lo, dtype=float)
        hi = np.asarray(self.box_hi, dtype=float)
        z = np.atleast_2d(np.asarray(self.positions, dtype=float))
        d = np.atleast_2d(np.asarray(self.orientations, dtype=float))
        if np.any(hi <= lo):
            raise ValueError("empty domain box")
        if z.shape != d.shape or z.shape[1] != 3:
            raise ValueError("positions and orientations must both be (N, 3)")
        if np.any(z < lo) or np.any(z > hi):
            raise ValueError("dimer centres must lie inside the domain")
        nd = np.linalg.norm(d, axis=1)
        if np.any(np.abs(nd - 1) > 1e-12):
            raise ValueError("orientations must be unit vectors")
        if not (self.s > 0 and self.mu > 0):
            raise ValueError("s and mu must be positive")
        for name, val in (("box_lo", lo), ("box_hi", hi), ("positions", z), ("orientations", d)):
            object.__setattr__(self, name, val)
        if self.eta is not None and len(z) > 1 and self.measured_eta < self.eta * (1 - 1e-12):
            raise ValueError(f"separation constant {self.measured_eta:.4g} is below the requested {self.eta}")

    @property
    def N(self) -> int:
        return len(self.positions)

    @property
    def volume(self) -> float:
        return float(np.prod(self.box_hi - self.box_lo))

    @property
    def Lambda(self) -> float:
        return self.s * self.N

    @property
    def delta(self) -> float:
        return (self.mu * self.s) ** 2

    @property
    def min_separation(self) -> float:
        from scipy.spatial import cKDTree

        if self.N < 2:
            return math.inf
        dist, _ = cKDTree(self.positions).query(self.positions, k=2)
        return float(dist[:, 1].min())

    @property
    def measured_eta(self) -> float:
        """``min |z_i - z_j| * N^(1/3)``."""
        return self.min_separation * self.N ** (1.0 / 3.0)

    @classmethod
    def generate(cls, box_lo, box_hi, N: int, s: float, mu: float, seed: int, jitter: float = 0.5,
                 eta: float | None = None, orientation: str = "isotropic") -> "EnsembleSpec":
        """Jittered-grid centres and (by default) isotropic orientations."""
        if N < 1:
            raise ValueError("N must be positive")
        if not 0 <= jitter < 1:
            raise ValueError("jitter must lie in [0, 1)")
        rng = np.random.default_rng(seed)
        lo = np.asarray(box_lo, dtype=float)
        hi = np.asarray(box_hi, dtype=float)
        n = int(math.ceil(N ** (1.0 / 3.0) - 1e-9))
        h = (hi - lo) / n
        idx = np.stack(np.meshgrid(*(np.arange(n),) * 3, indexing="ij"), axis=-1).reshape(-1, 3)
        if len(idx) > N:
            idx = idx[np.sort(rng.permutation(len(idx))[:N])]
        z = lo + (idx + 0.5 + jitter * (rng.random((N, 3)) - 0.5)) * h
        if orientation == "isotropic":
            d = uniform_orientations(rng, N)
        else:
            d = np.tile(np.asarray(orientation, dtype=float) / np.linalg.norm(orientation), (N, 1))
        return cls(lo, hi, z, d, s, mu, eta, seed)


def uniform_orientations(rng: np.random.Generator, N: int) -> np.ndarray:
    """Uniform unit vectors via (cos theta uniform, phi uniform)."""
    ct = rng.uniform(-1.0, 1.0, N)
    ph = rng.uniform(0.0, 2 * math.pi, N)
    st = np.sqrt(1 - ct * ct)
    return np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1)


def ensemble_statistics(spec: EnsembleSpec) -> tuple[float, np.ndarray]:
    """Empirical ``V`` (1/|Omega| for a uniform ensemble) and the raw
    orientation moment ``(1/|Omega|) (1/N) sum d_j d_j^T``."""
    if spec.N < 2:
        raise ValueError("ensemble statistics need N >= 2")
    V = 1.0 / spec.volume
    d = spec.orientations
    B = (d.T @ d) / spec.N / spec.volume
    return V, B


# --------------------------------------------------------------------------
# Constants and effective coefficients
# --------------------------------------------------------------------------


def hybridized_frequencies(mu: float, caps: CapacitanceSet, v_b: float = 1.0) -> tuple[float, float]:
    p, m = caps.C11 + caps.C12, caps.C11 - caps.C12
    if p <= 0 or m <= 0:
        raise ValueError("C11 +- C12 must be positive")
    return v_b * mu * math.sqrt(p), v_b * mu * math.sqrt(m)


def tilde_constants(mu: float, a: float, caps: CapacitanceSet, P: float, volume: float,
                    omega_M1: float, omega_M2: float, eta_hat1: float, v_b: float = 1.0) -> tuple[float, float]:
    """Fixed-detuning constants ``(g0~, g1~)`` at ``omega = omega_M2 + a s^2``."""
    den = mu**3 * eta_hat1 - a
    if den == 0:
        raise ZeroDivisionError("detuning a equals mu^3 eta_hat1")
    g0 = 2 * (caps.C11 + caps.C12) / (1 - omega_M1**2 / omega_M2**2)
    g1 = mu**2 * v_b**2 * P**2 / (2 * volume * omega_M2 * den)
    return g0, g1


def dispersive_constants(omega, caps: CapacitanceSet, P: float, volume: float, omega1: complex, omega2: complex,
                         delta: float, v_b: float = 1.0) -> tuple[complex, complex]:
    """Frequency-dependent ``(g0~(omega), g1~(omega))``."""
    omega = np.asarray(omega, dtype=float)
    g0 = 2 * (caps.C11 + caps.C12) / (1 - omega1**2 / omega**2)
    g1 = delta * v_b**2 * P**2 / (volume * (omega2**2 - omega**2))
    return g0, g1


def classify(rho: complex, kappa: complex) -> str:
    neg_rho = rho.real < 0
    neg_kappa = kappa.real < 0
    if neg_rho and neg_kappa:
        return "double-negative"
    if neg_rho:
        return "single-negative-density"
    if neg_kappa:
        return "single-negative-modulus"
    return "double-positive"


@dataclass(frozen=True)
class EffectiveMedium:
    g0: complex
    g1: complex
    V: float
    B: np.ndarray
    Lambda: float
    k: complex
    M1: np.ndarray = field(init=False)
    M2: complex = field(init=False)

    def __post_init__(self):
        B = np.asarray(self.B)
        B = B.astype(complex) if np.iscomplexobj(B) else B.astype(float)
        if B.ndim == 0:
            B = B * np.eye(3)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "M1", np.eye(3) - self.Lambda * self.g1 * B)
        object.__setattr__(self, "M2", self.k**2 - self.Lambda * self.g0 * self.V)

    @property
    def rho_eff(self) -> complex:
        """Scalar reduction of M1 (mean diagonal entry)."""
        return complex(np.trace(self.M1) / 3)

    @property
    def kappa_eff(self) -> complex:
        return complex(self.k**2 / self.M2)

    @property
    def n_eff(self) -> complex:
        return refractive_index(self.rho_eff, self.kappa_eff)[0]

    @property
    def regime(self) -> str:
        return classify(self.rho_eff, self.kappa_eff)

    def coefficients_at(self, inside: bool):
        """(M1, M2) inside the domain, (I, k^2) outside."""
        return (self.M1, self.M2) if inside else (np.eye(3), self.k**2)


def effective_coefficients(g0: complex, g1: complex, V: float, B, Lambda: float, k: complex) -> EffectiveMedium:
    return EffectiveMedium(complex(g0), complex(g1), float(V), B, float(Lambda), complex(k))


def density_sign_threshold(g1: complex, b: float) -> float:
    """Smallest ``Lambda`` with ``Re M1 = Re(1 - Lambda g1 b) <= 0``.

    Returns ``inf`` when ``Re(g1 b) <= 0``, where no finite loading flips
    the sign of the effective density.
    """
    x = (complex(g1) * b).real
    if x <= 0:
        return math.inf
    return 1.0 / x


def _passive_sqrt(z: complex) -> tuple[complex, bool]:
    r = cmath.sqrt(z)
    if r.imag < 0:
        return r.conjugate(), True
    return r, False


def refractive_index(rho: complex, kappa: complex) -> tuple[complex, bool]:
    """``sqrt(rho) * sqrt(1/kappa)`` with each root taken in the closed upper
    half-plane (principal root, conjugated when its imaginary part is negative).

    Returns the index and whether any factor was conjugated.
    """
    a, fa = _passive_sqrt(complex(rho))
    b, fb = _passive_sqrt(1.0 / complex(kappa))
    return a * b, fa or fb


@dataclass(frozen=True)
class DispersionRow:
    omega: float
    rho_eff: complex
    kappa_eff: complex
    n_eff: complex
    g0: complex
    g1: complex
    regime: str
    conjugated: bool = False
    near_pole: bool = False


def dispersion_sweep(omegas, caps: CapacitanceSet, P: float, volume: float, omega1: complex, omega2: complex,
                     delta: float, Lambda_V: float, Lambda_B: float, v: float = 1.0, v_b: float = 1.0,
                     pole_tol: float = 1e-6) -> list[DispersionRow]:
    """Effective ``rho``, ``kappa`` and ``n`` on a frequency grid.

    ``Lambda_V`` and ``Lambda_B`` are the products ``Lambda * V`` and
    ``Lambda * b`` with ``B = b I``; then ``rho_eff = 1 - Lambda_B g1`` and
    ``kappa_eff = (1 - Lambda_V g0 / k^2)^(-1)``.
    """
    omegas = np.asarray(omegas, dtype=float)
    if omegas.ndim != 1 or omegas.size < 2 or np.any(np.diff(omegas) <= 0):
        raise ValueError("frequency grid must be strictly increasing with at least 2 points")
    rows = []
    for w in omegas:
        g0, g1 = dispersive_constants(w, caps, P, volume, omega1, omega2, delta, v_b)
        g0, g1 = complex(g0), complex(g1)
        k = w / v
        med = effective_coefficients(g0, g1, Lambda_V, Lambda_B, 1.0, k)
        rho, kappa = med.rho_eff, med.kappa_eff
        n, conj = refractive_index(rho, kappa)
        near = min(abs(w - omega1), abs(w - omega2)) < pole_tol * abs(omega2)
        if conj:
            log.debug("omega=%.6f: square-root branch conjugated", w)
        rows.append(DispersionRow(float(w), rho, kappa, n, g0, g1, classify(rho, kappa), conj, near))
    return rows


def double_negative_windows(rows: list[DispersionRow]) -> list[tuple[float, float]]:
    """Contiguous frequency ranges classified double-negative."""
    out, start, prev = [], None, None
    for r in rows:
        if r.regime == "double-negative":
            if start is None:
                start = r.omega
            prev = r.omega
        elif start is not None:
            out.append((start, prev))
            start = None
    if start is not None:
        out.append((start, prev))
    return out

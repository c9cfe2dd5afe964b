"""Hybridised Minnaert resonances of a bubble dimer.

Three fidelities are provided: the closed-form small-contrast asymptotics,
roots of the quasi-static 2x2 system (which keeps the radiative terms), and
characteristic values of the truncated boundary-integral operator found with
Muller's method.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import specfun as sf
from .layerpot import (
    CapacitanceSet,
    DimerGeometry,
    MediumParams,
    SolverError,
    StaticSolver,
    UNIT_BALL_RADIUS,
    helmholtz_operators,
    low_freq_term,
)

log = logging.getLogger(__name__)


class ConvergenceError(SolverError):
    pass


@dataclass(frozen=True)
class ResonancePair:
    omega1: complex
    omega2: complex
    method: str
    nmax: int | None = None
    residuals: tuple = (None, None)
    modes: tuple = (None, None)
    weights: tuple = (None, None)

    def scaled(self, s: float) -> "ResonancePair":
        """Resonances of the dimer scaled by ``s`` (frequencies scale as 1/s)."""
        return ResonancePair(self.omega1 / s, self.omega2 / s, self.method, self.nmax,
                             self.residuals, self.modes, self.weights)


@dataclass(frozen=True)
class AsymptoticCoefficients:
    tau1: float
    eta_hat1: float
    eta_hat2: float
    eta0: float
    variant: str = "rederived"
    extras: dict = field(default_factory=dict, compare=False)


# --------------------------------------------------------------------------
# Closed-form asymptotics
# --------------------------------------------------------------------------


def _check_caps(caps: CapacitanceSet):
    if caps.C11 + caps.C12 <= 0 or caps.C11 - caps.C12 <= 0:
        raise ValueError("capacitance matrix is not positive definite")


def tau1(caps: CapacitanceSet, params: MediumParams, ball_volume: float = 1.0) -> float:
    """Damping prefactor with ``Im omega_1 ~ -tau1 * delta``."""
    c = caps.C11 + caps.C12
    return params.v_b**2 * c * c / (4 * math.pi * params.v * ball_volume**2)


def asymptotic_resonances(params: MediumParams, caps: CapacitanceSet,
                          coeffs: AsymptoticCoefficients | None = None,
                          scale: float = 1.0, ball_volume: float = 1.0) -> ResonancePair:
    """Leading-order hybridised resonances of the dimer ``scale * D``.

    ``caps`` refers to the unscaled dimer ``D`` whose balls have volume
    ``ball_volume`` (1 for the normalised dimer).  Correction terms are
    included when ``coeffs`` is given.
    """
    _check_caps(caps)
    d = params.delta
    if d >= 0.1:
        log.warning("delta=%g is outside the asymptotic regime", d)
    vb2 = params.v_b**2
    w1 = math.sqrt(d * vb2 * (caps.C11 + caps.C12) / ball_volume) - 1j * tau1(caps, params, ball_volume) * d
    w2 = complex(math.sqrt(d * vb2 * (caps.C11 - caps.C12) / ball_volume))
    if coeffs is not None:
        w2 += d**1.5 * coeffs.eta_hat1 + 1j * d * d * coeffs.eta_hat2
    return ResonancePair(w1 / scale, w2 / scale, "asymptotic")


def quasi_static_system_roots(caps: CapacitanceSet, params: MediumParams, ball_volume: float = 1.0,
                              radiative: bool = True) -> tuple[complex, complex]:
    """Roots with positive real part of the 2x2 quasi-static system in (a, b).

    By the mirror symmetry the modes are exactly (1, 1) and (1, -1).  With
    ``radiative=False`` the O(omega^3) and O(delta*omega) terms are dropped.
    """
    _check_caps(caps)
    d, vb, V = params.delta, params.v_b, ball_volume
    c = caps.C11 + caps.C12
    r = 1.0 if radiative else 0.0
    # (a, b) = (1, 1): C(a, b) = 2c
    cubic = [
        -r * 1j * V * 2 * c / (4 * math.pi * vb**3),
        -V / vb**2,
        r * 1j * d * (1 / vb - 1 / params.v) * 2 * c * c / (4 * math.pi),
        d * c,
    ]
    roots1 = np.roots(cubic) if radiative else np.roots(cubic[1:])
    w1 = _positive_root(roots1, math.sqrt(d * vb * vb * c / V))
    # (a, b) = (1, -1): C(a, b) = 0
    w2 = complex(math.sqrt(d * vb * vb * (caps.C11 - caps.C12) / V))
    return w1, w2


def _positive_root(roots, target):
    cand = [z for z in roots if z.real > 0]
    return complex(min(cand, key=lambda z: abs(z - target)))


# --------------------------------------------------------------------------
# Anti-resonance corrections
# --------------------------------------------------------------------------


def _signed(cl, x):
    return cl.signed_integral(x)


def _constrained_solve(st: StaticSolver, A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` with x orthogonal to span{psi1, psi2}.

    ``A`` is singular with kernel span{psi1, psi2} and a range of codimension
    two; the system is bordered by the per-sphere constants and the
    orthogonality constraints.
    """
    cl = st.cluster
    n = cl.size
    w = np.repeat(cl.radii**2, cl.block)
    B = np.zeros((n + 2, n + 2), dtype=complex)
    B[:n, :n] = A
    for j in range(2):
        B[cl.sl(j).start, n + j] = 1.0
        B[n + j, :n] = np.conj(st.psi[j]) * w
    sol = np.linalg.solve(B, np.concatenate([rhs, [0, 0]]))
    cond = np.linalg.cond(B)
    if not np.isfinite(cond) or cond > 1e13:
        raise SolverError(f"constrained solve is singular (cond={cond:.3e})")
    slack = np.abs(sol[n:]).max() / max(np.abs(rhs).max(), 1e-300)
    if slack > 1e-6:
        raise SolverError(f"right-hand side is not in the range (slack {slack:.2e})")
    return sol[:n]


def anti_resonance_corrections(geom: DimerGeometry | None, params: MediumParams, nmax: int = 10,
                               variant: str = "rederived") -> AsymptoticCoefficients:
    """Correction coefficients ``eta_hat1``, ``eta_hat2`` of the anti-resonance.

    The coefficients are computed on the normalised dimer (unit-volume balls,
    same gap ratio as ``geom``).  With ``variant="literal"`` the published
    closed form for ``eta_1`` is used as written; the default uses the re-derived
    normalisation in which ``int_{dD1-dD2} K_D^2[psi1-psi2] = -|D|`` (see the
    decisions ledger).  ``eta_2`` is the same in both variants.
    """
    if variant not in ("rederived", "literal"):
        raise ValueError(variant)
    ratio = 5.0 if geom is None else geom.d0 / geom.r0
    g = DimerGeometry.normalized(ratio)
    cl = g.cluster(nmax)
    st = StaticSolver(cl)
    caps_c11, caps_c12 = _caps_from_psi(st)
    vb, v = params.v_b, params.v
    eta0 = math.sqrt(vb * vb * (caps_c11 - caps_c12))
    lf = {(n, kind): low_freq_term(cl, n, kind) for n in range(2, 6) for kind in "SK"}
    K0 = st.K0
    I = np.eye(cl.size)
    A = -0.5 * I + K0
    phi0 = st.psi[0] - st.psi[1]
    K2, K3, K4, K5 = (lf[(n, "K")] for n in (2, 3, 4, 5))
    S2, S3 = lf[(2, "S")], lf[(3, "S")]

    phi1 = _constrained_solve(st, A, phi0 - eta0**2 / vb**2 * (K2 @ phi0))
    phi2 = _constrained_solve(st, A, -(eta0**3 / vb**3) * (K3 @ phi0))

    Si = lambda x: st.solve(x)  # noqa: E731
    D = 2.0  # |D| for unit-volume balls
    bracket1 = (eta0**2 / vb**2 * _signed(cl, K2 @ phi1) - _signed(cl, phi1)
                + eta0**4 / vb**4 * _signed(cl, K4 @ phi0)
                - eta0**2 * (vb**-2 - v**-2) * _signed(cl, Si(S2 @ phi0)))
    if variant == "literal":
        eta1 = (bracket1 + eta0**2 / v**2) * vb**2 / (2 * eta0)
    else:
        eta1 = (bracket1 + D * eta0**2 / v**2) * vb**2 / (2 * D * eta0)
    bracket2 = (eta0**2 / vb**2 * _signed(cl, K2 @ phi2) - _signed(cl, phi2)
                + eta0**3 / vb**3 * _signed(cl, K3 @ phi1)
                + eta0**5 / vb**5 * _signed(cl, K5 @ phi0)
                - eta0**3 * (vb**-3 - v**-3) * _signed(cl, Si(S3 @ phi0)))
    eta2 = bracket2 * vb**2 / (2 * D * eta0)

    if abs(eta1.imag) > 1e-6 * max(abs(eta1), 1e-300):
        raise SolverError(f"eta_1 is not real: {eta1}")
    if abs(eta2.real) > 1e-6 * max(abs(eta2), 1e-300):
        raise SolverError(f"eta_2 is not imaginary: {eta2}")
    constraint = max(abs(cl.inner(p, q)) for p in (phi1, phi2) for q in st.psi)
    caps = CapacitanceSet(caps_c11, caps_c12)
    return AsymptoticCoefficients(
        tau1=tau1(caps, params), eta_hat1=float(eta1.real), eta_hat2=float((-1j * eta2).real),
        eta0=eta0, variant=variant,
        extras={"constraint_residual": constraint, "phi1_imag": float(np.abs(phi1.imag).max()),
                "phi2_real": float(np.abs(phi2.real).max())},
    )


def _caps_from_psi(st: StaticSolver) -> tuple[float, float]:
    cl = st.cluster
    C = [[-cl.integral(st.psi[i], j).real for j in range(2)] for i in range(2)]
    return 0.5 * (C[0][0] + C[1][1]), 0.5 * (C[0][1] + C[1][0])


# --------------------------------------------------------------------------
# Characteristic values of the boundary-integral system
# --------------------------------------------------------------------------


class DimerSystem:
    """The operator pencil ``A_delta^omega`` of a dimer restricted to m = 0.

    In the local frame (axis along e3) the system decouples by azimuthal
    order; the hybridised Minnaert modes live in the m = 0 block, so the
    determinant is evaluated on that block only.
    """

    def __init__(self, geom: DimerGeometry, params: MediumParams, nmax: int = 8, m: int = 0):
        self.geom = geom
        self.params = params
        self.nmax = nmax
        self.cluster = geom.cluster(nmax)
        n, mm = sf.degree_order(nmax)
        sel = np.flatnonzero(mm == m)
        self.sel = np.concatenate([sel + j * self.cluster.block for j in range(2)])
        self.static = StaticSolver(self.cluster)
        self._ref = None

    def operators(self, k):
        S, K = helmholtz_operators(self.cluster, k)
        ix = np.ix_(self.sel, self.sel)
        return S[ix], K[ix]

    def matrix(self, omega) -> np.ndarray:
        p = self.params
        Sb, Kb = self.operators(omega / p.v_b)
        S, K = self.operators(omega / p.v)
        I = np.eye(len(self.sel))
        return np.block([[Sb, -S], [-0.5 * I + Kb, -p.delta * (0.5 * I + K)]])

    def det(self, omega) -> complex:
        """Determinant scaled by a fixed reference magnitude."""
        sign, logabs = np.linalg.slogdet(self.matrix(omega))
        if self._ref is None:
            self._ref = logabs
        return complex(sign * math.exp(logabs - self._ref))

    def null_vector(self, omega):
        M = self.matrix(omega)
        _, sv, vh = linalg.svd(M)
        vec = np.conj(vh[-1])
        return vec, sv[-1] / sv[0]

    def classify(self, omega):
        """Relative weights of the exterior density on psi1+psi2 and psi1-psi2."""
        vec, res = self.null_vector(omega)
        half = len(self.sel)
        psi = np.zeros(self.cluster.size, dtype=complex)
        psi[self.sel] = vec[half:]
        cl = self.cluster
        out = []
        for sgn in (1.0, -1.0):
            e = self.static.psi[0] + sgn * self.static.psi[1]
            out.append(abs(cl.inner(psi, e)) ** 2 / (cl.inner(psi, psi).real * cl.inner(e, e).real))
        return tuple(out), res


def _guarded(f):
    """Wrap ``f`` so that non-finite values raise ``ConvergenceError``."""

    def g(z):
        try:
            with np.errstate(all="ignore"):
                val = complex(f(z))
        except (ValueError, OverflowError, ZeroDivisionError, np.linalg.LinAlgError) as exc:
            raise ConvergenceError(f"function evaluation failed at {z}: {exc}") from exc
        if not (math.isfinite(val.real) and math.isfinite(val.imag)):
            raise ConvergenceError(f"function is not finite at {z}")
        return val

    return g


def muller(f, z0: complex, *, h: float | None = None, rtol: float = 1e-12, ftol: float = 1e-14,
           maxiter: int = 100) -> tuple[complex, int]:
    """Muller's method for a root of the analytic function ``f`` near ``z0``."""
    h = h if h is not None else 1e-3 * max(abs(z0), 1e-8)
    f = _guarded(f)
    x0, x1, x2 = z0 - h, z0 + h, z0
    f0, f1, f2 = f(x0), f(x1), f(x2)
    for it in range(1, maxiter + 1):
        h1, h2 = x1 - x0, x2 - x1
        d1, d2 = (f1 - f0) / h1, (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = cmath.sqrt(b * b - 4 * f2 * a)
        den = b + disc if abs(b + disc) >= abs(b - disc) else b - disc
        if den == 0:
            raise ConvergenceError("Muller step is undefined (zero denominator)")
        dx = -2 * f2 / den
        x0, x1, x2 = x1, x2, x2 + dx
        f0, f1 = f1, f2
        f2 = f(x2)
        if not (np.isfinite(x2.real) and np.isfinite(x2.imag)):
            raise ConvergenceError("Muller iterate is not finite")
        if abs(dx) <= rtol * abs(x2) or abs(f2) <= ftol:
            return x2, it
    raise ConvergenceError(f"Muller did not converge in {maxiter} iterations (last {x2}, |f|={abs(f2):.2e})")


def muller_resonances(geom: DimerGeometry, params: MediumParams, nmax: int = 8,
                      guesses: tuple | None = None, system: DimerSystem | None = None,
                      residual_tol: float = 1e-8) -> ResonancePair:
    """Two hybridised resonances as characteristic values of ``A_delta^omega``.

    The second root is found on the deflated function ``det/(omega - omega1)``.
    Each root is classified by projecting its null vector onto psi1 +- psi2.
    """
    sysm = system or DimerSystem(geom, params, nmax)
    if guesses is None:
        from .layerpot import capacitance_series
        C11, C12 = capacitance_series(geom.r0, geom.d0)
        caps = CapacitanceSet(C11, C12)
        vol = 4.0 / 3.0 * math.pi * geom.r0**3
        g = asymptotic_resonances(params, caps, scale=geom.scale, ball_volume=vol)
        guesses = (g.omega1, g.omega2)
    g1, g2 = complex(guesses[0]), complex(guesses[1])
    if abs(g1 - g2) < 1e-8 * abs(g1):
        raise ConvergenceError(f"initial guesses coincide: {g1}, {g2}")
    f = sysm.det
    w1, it1 = muller(f, g1)
    w2, it2 = muller(lambda z: f(z) / (z - w1), g2)
    if abs(w1 - w2) < 1e-6 * abs(w1):
        raise ConvergenceError(f"roots collided at {w1} (guesses {g1}, {g2})")
    log.debug("Muller: omega1=%s (%d it), omega2=%s (%d it)", w1, it1, w2, it2)
    (p1, m1), r1 = sysm.classify(w1)
    (p2, m2), r2 = sysm.classify(w2)
    if max(r1, r2) > residual_tol:
        raise ConvergenceError(f"spurious roots {w1}, {w2}: relative residuals {r1:.2e}, {r2:.2e}")
    mode1 = "monopole" if p1 > m1 else "dipole"
    mode2 = "monopole" if p2 > m2 else "dipole"
    return ResonancePair(w1, w2, "root-found", nmax, (r1, r2), (mode1, mode2), ((p1, m1), (p2, m2)))


def normalized_scale(geom: DimerGeometry) -> float:
    """Factor ``s`` with ``geom`` = ``s`` times the unit-volume dimer of the same gap ratio."""
    return geom.radius / UNIT_BALL_RADIUS

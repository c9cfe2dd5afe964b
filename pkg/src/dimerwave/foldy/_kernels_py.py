"""NumPy implementations of the Foldy-Lax hot loops.

Unknowns are interleaved per dimer: ``x[4j] = u_j`` and
``x[4j+1:4j+4] = grad u_j`` at the dimer centre ``z_j``.
"""

from __future__ import annotations

import numpy as np


def _pair_geometry(r, k):
    d = np.linalg.norm(r, axis=-1)
    e = -np.exp(1j * k * d) / (4 * np.pi * d)
    ikd = 1j * k * d
    gfac = e * (ikd - 1) / d**2
    hxx = e * (3 - 3 * ikd - k * k * d * d) / d**4
    return e, gfac, gfac, hxx


def assemble_foldy(z: np.ndarray, g0: np.ndarray, g1: np.ndarray, k: complex,
                   block: int = 256) -> np.ndarray:
    """Coupling matrix ``T`` of the Foldy-Lax system ``(I - T) x = x_in``."""
    z = np.ascontiguousarray(z, dtype=float)
    g0 = np.asarray(g0, dtype=complex)
    g1 = np.asarray(g1, dtype=complex)
    N = len(z)
    T = np.zeros((N, 4, N, 4), dtype=complex)
    for j0 in range(0, N, block):
        jj = slice(j0, min(N, j0 + block))
        r = z[jj, None, :] - z[None, :, :]  # receiver - source
        same = np.zeros(r.shape[:2], dtype=bool)
        idx = np.arange(jj.start, jj.stop)
        same[idx - j0, idx] = True
        r[same] = 1.0  # placeholder, zeroed below
        e, gfac, hdiag, hxx = _pair_geometry(r, k)
        grad = gfac[..., None] * r  # (B, N, 3)
        H = hdiag[..., None, None] * np.eye(3) + hxx[..., None, None] * r[..., :, None] * r[..., None, :]
        blk = T[jj]
        blk[:, 0, :, 0] = g0[None, :] * e
        blk[:, 0, :, 1:] = np.einsum("iab,jib->jia", g1, grad)
        blk[:, 1:, :, 0] = np.moveaxis(g0[None, :, None] * grad, 2, 1)
        HG = np.einsum("jicb,iab->jica", H, g1)
        blk[:, 1:, :, 1:] = np.moveaxis(HG, 2, 1)
        blk[same.nonzero()[0], :, same.nonzero()[1], :] = 0.0
    return T.reshape(4 * N, 4 * N)


def field_sum(x: np.ndarray, z: np.ndarray, q: np.ndarray, w: np.ndarray, k: complex,
              block: int = 2048) -> np.ndarray:
    """``sum_i q_i G(x - z_i) + w_i . grad G(x - z_i)`` at the points ``x``."""
    x = np.ascontiguousarray(x, dtype=float)
    out = np.zeros(len(x), dtype=complex)
    for m0 in range(0, len(x), block):
        mm = slice(m0, min(len(x), m0 + block))
        r = x[mm, None, :] - z[None, :, :]
        e, gfac, _, _ = _pair_geometry(r, k)
        out[mm] = e @ q + np.einsum("mi,mia,ia->m", gfac, r, w)
    return out

"""Closed forms of ``G(x, k) = -exp(ik|x|)/(4 pi |x|)`` and its derivatives."""

from __future__ import annotations

import numpy as np


def G(x: np.ndarray, k) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    return -np.exp(1j * k * r) / (4 * np.pi * r)


def grad_G(x: np.ndarray, k) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    # dG/dr = G (ik - 1/r)
    g = -np.exp(1j * k * r) / (4 * np.pi * r) * (1j * k - 1 / r) / r
    return g[..., None] * x


def hess_G(x: np.ndarray, k) -> np.ndarray:
    """Hessian ``d^2 G / dx_a dx_b``, shape ``(..., 3, 3)``."""
    r = np.linalg.norm(x, axis=-1)
    e = -np.exp(1j * k * r) / (4 * np.pi * r)
    ikr = 1j * k * r
    a = e * (ikr - 1) / r**2  # coefficient of delta_ab
    b = e * (-k * k * r * r - 3 * ikr + 3) / r**4  # coefficient of x_a x_b
    return a[..., None, None] * np.eye(3) + b[..., None, None] * x[..., :, None] * x[..., None, :]

"""Periodic shifts in the guiding-center plane as Fourier multipliers.

Evaluating a grid field at y - d is a circulant operator for both bilinear and
trigonometric interpolation, so a sum of shifted copies is one multiplier.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

INTERPOLATIONS = ("linear", "spectral")


@lru_cache(maxsize=32)
def _theta(n):
    return 2.0 * np.pi * np.fft.fftfreq(n)  # phase per cell, in (-pi, pi]


def _symbol_1d(n, h, d, kind):
    """(K, n) multipliers for shifts d (K,) along one periodic axis."""
    th = _theta(n)[None, :]
    u = (np.asarray(d, dtype=float) / h)[:, None]
    if kind == "linear":
        m = np.floor(u)
        t = u - m
        return np.exp(-1j * th * m) * ((1.0 - t) + t * np.exp(-1j * th))
    if kind == "spectral":
        out = np.exp(-1j * th * u)
        if n % 2 == 0:
            # symmetric treatment of the Nyquist mode keeps the kernel even
            out[:, n // 2] = np.cos(np.pi * u[:, 0])
        return out
    raise ValueError(f"unknown interpolation {kind!r}; expected one of {INTERPOLATIONS}")


def shift_symbols(grid, d, kind="linear"):
    """Multipliers (K, N1, N2): fft2(P) * m is the transform of P(y - d_k)."""
    d = np.atleast_2d(np.asarray(d, dtype=float))
    h1, h2 = grid.steps[0], grid.steps[1]
    s1 = _symbol_1d(grid.n_y[0], h1, d[:, 0], kind)
    s2 = _symbol_1d(grid.n_y[1], h2, d[:, 1], kind)
    return s1[:, :, None] * s2[:, None, :]


def shift_field(P, grid, d, kind="linear"):
    """P(y - d) for a single shift d, with P of layout [y1, y2, ...]."""
    m = shift_symbols(grid, np.asarray(d)[None, :], kind)[0]
    m = m.reshape(m.shape + (1,) * (P.ndim - 2))
    return np.fft.ifft2(np.fft.fft2(P, axes=(0, 1)) * m, axes=(0, 1)).real

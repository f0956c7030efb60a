"""Partner-velocity quadrature for pointwise evaluation of averaged operators."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=32)
def _gl(n):
    return np.polynomial.legendre.leggauss(n)


def split_gauss(a, b, split, n):
    """Gauss-Legendre nodes on [a, b], split at an interior kink to keep spectral accuracy."""
    x, w = _gl(n)
    pieces = [(a, b)]
    if a < split < b:
        pieces = [(a, split), (split, b)]
    nodes, weights = [], []
    for lo, hi in pieces:
        nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * w)
    return np.concatenate(nodes), np.concatenate(weights)


def partner_rule(r, v3, n_r, n_v3, R_max, V_max):
    """Nodes (r', v3') and weights for int_0^R r' dr' int_-V^V dv3' (r' weight included)."""
    rp, wr = split_gauss(0.0, R_max, r, n_r)
    vp, wv = split_gauss(-V_max, V_max, v3, n_v3)
    RP, VP = np.meshgrid(rp, vp, indexing="ij")
    W = (rp * wr)[:, None] * wv[None, :]
    return RP.ravel(), VP.ravel(), W.ravel()

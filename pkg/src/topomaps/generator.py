"""Pattern generation by radial-basis interpolation over the latent grid.

A continuous latent point q activates every unit through a Gaussian
centered on q, and the generated pattern is the activation-weighted
combination of the prototypes: x_hat = W^T u. With a small radius the
output approaches the single nearest prototype; larger radii blend a
neighborhood.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .grid import Codebook

__all__ = ["LatentQuery", "ExtrapolationWarning", "activations", "generate", "generate_batch"]


class ExtrapolationWarning(UserWarning):
    """The query point lies outside the grid's bounding box; the output is
    an extrapolation and may be dominated by edge prototypes."""


@dataclass(frozen=True)
class LatentQuery:
    """A sampling request: where to read the map, how wide, and whether to
    rescale the activation profile to sum to 1.

    Unnormalized activations keep the Gaussian prefactor 1 / (sigma *
    sqrt(2 pi)), so their overall scale depends on sigma. Normalized
    output is a convex combination of prototypes and is the default.
    """

    point: tuple[float, ...]
    sigma: float = 1.0
    normalize: bool = True

    def __post_init__(self):
        pt = tuple(float(v) for v in np.asarray(self.point, dtype=float).reshape(-1))
        if len(pt) not in (1, 2):
            raise ValueError(f"query point must be 1D or 2D, got {len(pt)} components")
        if not all(math.isfinite(v) for v in pt):
            raise ValueError("query point must be finite")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        object.__setattr__(self, "point", pt)


def activations(query: LatentQuery, cb: Codebook) -> np.ndarray:
    """Per-unit activation u_j = exp(-d_j^2 / (2 sigma^2)) / (sigma sqrt(2 pi)),
    with d_j the grid distance from unit j to the query point.

    With normalize=True the profile is rescaled to sum to 1 (computed with
    a shifted exponent, so it stays finite for very small sigma). A point
    outside the grid box emits ExtrapolationWarning but still evaluates.
    """
    topo = cb.topology
    q = np.asarray(query.point, dtype=float)
    if q.size != topo.ndim:
        raise ValueError(
            f"query has {q.size} components for a {topo.ndim}D grid"
        )
    hi = np.asarray(topo.dims, dtype=float) - 1.0
    if np.any(q < 0.0) or np.any(q > hi):
        warnings.warn(
            f"query point {tuple(q)} lies outside the grid box",
            ExtrapolationWarning,
            stacklevel=2,
        )
    d2 = np.square(topo.coordinates() - q).sum(axis=1)
    s = query.sigma
    if query.normalize:
        # Same profile up to the common factor exp(-d2_min / 2s^2) / (s sqrt(2 pi)),
        # which cancels in the normalization.
        shifted = np.exp(-(d2 - d2.min()) / (2.0 * s * s))
        return shifted / shifted.sum()
    return np.exp(-d2 / (2.0 * s * s)) / (s * math.sqrt(2.0 * math.pi))


def generate(query: LatentQuery, cb: Codebook) -> np.ndarray:
    """Pattern read from the map at a latent point: x_hat = W^T u."""
    u = activations(query, cb)
    return cb.weights.T @ u


def generate_batch(points: np.ndarray, cb: Codebook, sigma: float = 1.0,
                   normalize: bool = True) -> np.ndarray:
    """One generated pattern per row of ``points``; returns (P, M)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        pts = pts.reshape(-1, cb.topology.ndim)
    if pts.shape[0] == 0:
        return np.empty((0, cb.m))
    if pts.shape[1] != cb.topology.ndim:
        raise ValueError(
            f"points have {pts.shape[1]} components for a "
            f"{cb.topology.ndim}D grid"
        )
    rows = [generate(LatentQuery(tuple(p), sigma, normalize), cb) for p in pts]
    return np.stack(rows)

"""Winner-takes-all operators.

One competitive update rule, four weightings. For pattern i with winner
r_i, the operator phi(i, j) says how strongly unit j is pulled toward the
pattern:

    hard (k-means)   1 for the winner, 0 elsewhere
    som              exp(-d(j, r_i)^2 / (2 sigma_r^2))
    stm              som factor times exp(-d(j, t_i)^2 / (2 sigma_t^2)),
                     t_i the anchor coordinate of the pattern's label
    lvq              +1 at the winner when it is the label's target unit,
                     -1 at the winner otherwise, 0 elsewhere

Distances d are Euclidean distances between unit coordinates on the grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .grid import Codebook, GridTopology, grid_distance, unit_coord

__all__ = [
    "WtaKind",
    "find_winner",
    "find_winners",
    "phi_hard",
    "phi_som",
    "phi_stm",
    "phi_lvq",
]

KIND_NAMES = ("kmeans", "som", "stm", "lvq")


@dataclass(frozen=True)
class WtaKind:
    """Selects one operator of the family, with any radii that stay fixed
    for a run. Annealed radii are passed per call instead.

    sigma_r is a convenience default for direct operator evaluation; the
    trainers always pass the annealed value explicitly. sigma_t is the
    label-pull radius of the supervised map and stays constant during
    training.
    """

    name: str
    sigma_r: float | None = None
    sigma_t: float | None = None

    def __post_init__(self):
        if self.name not in KIND_NAMES:
            raise ValueError(f"unknown WTA kind '{self.name}'")
        if self.sigma_r is not None:
            if self.name not in ("som", "stm"):
                raise ValueError(f"kind '{self.name}' takes no sigma_r")
            if self.sigma_r <= 0:
                raise ValueError("sigma_r must be positive")
        if self.sigma_t is not None:
            if self.name != "stm":
                raise ValueError(f"kind '{self.name}' takes no sigma_t")
            if self.sigma_t <= 0:
                raise ValueError("sigma_t must be positive")

    @classmethod
    def kmeans(cls) -> "WtaKind":
        return cls("kmeans")

    @classmethod
    def som(cls, sigma_r: float | None = None) -> "WtaKind":
        return cls("som", sigma_r=sigma_r)

    @classmethod
    def stm(cls, sigma_t: float = 2.0, sigma_r: float | None = None) -> "WtaKind":
        return cls("stm", sigma_r=sigma_r, sigma_t=sigma_t)

    @classmethod
    def lvq(cls) -> "WtaKind":
        return cls("lvq")

    @property
    def requires_anchors(self) -> bool:
        return self.name in ("stm", "lvq")


def find_winner(x: Sequence[float], cb: Codebook) -> int:
    """Index of the prototype nearest to ``x``; ties go to the lowest
    index."""
    xv = np.asarray(x, dtype=float).reshape(-1)
    if xv.shape != (cb.m,):
        raise ValueError(f"pattern has {xv.size} features, codebook has {cb.m}")
    if not np.isfinite(xv).all():
        raise ValueError("pattern must be finite")
    d2 = np.square(cb.weights - xv).sum(axis=1)
    return int(np.argmin(d2))


def _sq_distances(block: np.ndarray, weights: np.ndarray, wsq: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, (n, M) block against (K, M) weights,
    via the inner-product expansion. Clipped at zero."""
    d2 = np.square(block).sum(axis=1)[:, None] - 2.0 * (block @ weights.T) + wsq[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def find_winners(patterns: np.ndarray, cb: Codebook, chunk: int = 2048) -> np.ndarray:
    """Winner index per row of ``patterns``; ties go to the lowest index."""
    x = np.asarray(patterns, dtype=float)
    if x.ndim != 2 or x.shape[1] != cb.m:
        raise ValueError(
            f"patterns of shape {x.shape} do not match codebook width {cb.m}"
        )
    if x.size and not np.isfinite(x).all():
        raise ValueError("patterns must be finite")
    w = cb.weights
    wsq = np.square(w).sum(axis=1)
    out = np.empty(x.shape[0], dtype=np.int64)
    for lo in range(0, x.shape[0], chunk):
        block = x[lo : lo + chunk]
        out[lo : lo + block.shape[0]] = np.argmin(_sq_distances(block, w, wsq), axis=1)
    return out


def _gauss_sq(d2, sigma: float):
    """exp(-d2 / (2 sigma^2)) with the d2 == 0 case pinned to exactly 1,
    which also covers the underflow of sigma^2 itself."""
    with np.errstate(invalid="ignore"):
        out = np.exp(np.asarray(d2, dtype=float) * (-0.5 / (sigma * sigma)))
    return np.where(np.asarray(d2) == 0.0, 1.0, out)


def phi_hard(j: int, r: int) -> float:
    """Hard assignment: 1 for the winning unit, 0 otherwise."""
    return 1.0 if int(j) == int(r) else 0.0


def phi_som(j: int, r: int, sigma: float, topo: GridTopology) -> float:
    """Gaussian neighborhood weight of unit j around winner r."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    d = grid_distance(unit_coord(j, topo), unit_coord(r, topo))
    return float(_gauss_sq(d * d, sigma))


def phi_stm(
    j: int,
    r: int,
    t: Sequence[float],
    sigma_r: float,
    sigma_t: float,
    topo: GridTopology,
) -> float:
    """Neighborhood weight around the winner, multiplied by a pull toward
    the anchor coordinate ``t`` of the pattern's label."""
    if sigma_r <= 0:
        raise ValueError("sigma_r must be positive")
    if sigma_t <= 0:
        raise ValueError("sigma_t must be positive")
    tv = np.asarray(t, dtype=float).reshape(-1)
    if tv.size != topo.ndim:
        raise ValueError(
            f"anchor has {tv.size} components for a {topo.ndim}D grid"
        )
    cj = unit_coord(j, topo)
    dr = grid_distance(cj, unit_coord(r, topo))
    dt = grid_distance(cj, tv)
    return float(_gauss_sq(dr * dr, sigma_r) * _gauss_sq(dt * dt, sigma_t))


def phi_lvq(j: int, r: int, t_unit: int) -> float:
    """Signed hard assignment: +1 at the winner when it matches the
    label's target unit, -1 at the winner otherwise, 0 elsewhere."""
    if int(j) != int(r):
        return 0.0
    return 1.0 if int(r) == int(t_unit) else -1.0

"""Lattice geometry and the data containers shared by every algorithm.

Units of the latent map live on a 1D or 2D integer lattice. Unit indices
are row-major: on an (R, C) grid, unit j sits at coordinate
(j // C, j % C), and adjacent units are exactly distance 1 apart. All
distances in latent space are Euclidean distances between these
coordinates, never differences of raw indices.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "GridTopology",
    "Codebook",
    "Dataset",
    "LabelAnchors",
    "TrainingSchedule",
    "unit_coord",
    "grid_distance",
    "init_codebook",
]


@dataclass(frozen=True)
class GridTopology:
    """A 1D or 2D lattice of map units.

    Attributes:
        dims: grid extents, one entry per axis. Length 1 or 2.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) not in (1, 2):
            raise ValueError(f"grid must be 1D or 2D, got {len(dims)} axes")
        if any(d < 1 for d in dims):
            raise ValueError(f"grid extents must be positive, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def unit_count(self) -> int:
        k = 1
        for d in self.dims:
            k *= d
        return k

    def coordinates(self) -> np.ndarray:
        """All unit coordinates as a (unit_count, ndim) float array in
        row-major unit order."""
        k = self.unit_count
        if self.ndim == 1:
            return np.arange(k, dtype=float).reshape(k, 1)
        rows, cols = np.divmod(np.arange(k), self.dims[1])
        return np.stack([rows, cols], axis=1).astype(float)

    def nearest_unit(self, point: Sequence[float]) -> int:
        """Index of the unit closest to a continuous latent point.

        Components round half to even and are clipped to the lattice, so
        any finite point maps to a valid unit.
        """
        p = np.asarray(point, dtype=float).reshape(-1)
        if p.shape != (self.ndim,):
            raise ValueError(
                f"point has {p.size} components, grid has {self.ndim} axes"
            )
        hi = np.asarray(self.dims, dtype=float) - 1.0
        snapped = np.clip(np.rint(p), 0.0, hi).astype(int)
        if self.ndim == 1:
            return int(snapped[0])
        return int(snapped[0] * self.dims[1] + snapped[1])


def unit_coord(j: int, topo: GridTopology) -> np.ndarray:
    """Latent coordinate of unit ``j`` under row-major ordering."""
    j = int(j)
    if not 0 <= j < topo.unit_count:
        raise ValueError(
            f"unit index {j} out of range for a grid of {topo.unit_count} units"
        )
    if topo.ndim == 1:
        return np.array([float(j)])
    row, col = divmod(j, topo.dims[1])
    return np.array([float(row), float(col)])


def grid_distance(a: Sequence[float], b: Sequence[float]) -> float:
    """Euclidean distance between two latent coordinates."""
    av = np.atleast_1d(np.asarray(a, dtype=float))
    bv = np.atleast_1d(np.asarray(b, dtype=float))
    if av.shape != bv.shape or av.ndim != 1:
        raise ValueError(f"coordinate shapes differ: {av.shape} vs {bv.shape}")
    return float(np.linalg.norm(av - bv))


@dataclass
class Codebook:
    """Prototype matrix tied to a topology. weights[j] is the prototype of
    unit j; rows follow row-major unit order."""

    weights: np.ndarray
    topology: GridTopology

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.weights, dtype=np.float64))
        if w.ndim != 2:
            raise ValueError(f"weights must be 2D, got shape {w.shape}")
        if w.shape[0] != self.topology.unit_count:
            raise ValueError(
                f"{w.shape[0]} prototype rows for a grid of "
                f"{self.topology.unit_count} units"
            )
        if not np.isfinite(w).all():
            raise ValueError("prototype weights must be finite")
        self.weights = w

    @property
    def k(self) -> int:
        return self.weights.shape[0]

    @property
    def m(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "Codebook":
        return Codebook(self.weights.copy(), self.topology)


@dataclass
class Dataset:
    """Input patterns with optional string labels.

    Labels are kept as strings; numeric labels are coerced so that anchor
    files and IDX label bytes agree on the same keys.
    """

    patterns: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.patterns, dtype=np.float64))
        if x.ndim != 2:
            raise ValueError(f"patterns must be 2D, got shape {x.shape}")
        if not np.isfinite(x).all():
            raise ValueError("patterns must be finite")
        self.patterns = x
        if self.labels is not None:
            labels = tuple(str(l) for l in self.labels)
            if len(labels) != x.shape[0]:
                raise ValueError(
                    f"{len(labels)} labels for {x.shape[0]} patterns"
                )
            self.labels = labels

    @property
    def n(self) -> int:
        return self.patterns.shape[0]

    @property
    def m(self) -> int:
        return self.patterns.shape[1]

    def label_set(self) -> tuple[str, ...]:
        if self.labels is None:
            return ()
        return tuple(sorted(set(self.labels)))


@dataclass
class LabelAnchors:
    """Map from label to a target coordinate on the latent grid.

    Coordinates may be fractional. Supervised map training pulls patterns
    of a label toward its anchor; LVQ snaps each anchor to the nearest
    unit index instead.
    """

    anchors: dict[str, np.ndarray]

    def __post_init__(self):
        clean: dict[str, np.ndarray] = {}
        arity = None
        for label, coord in self.anchors.items():
            c = np.asarray(coord, dtype=float).reshape(-1)
            if arity is None:
                arity = c.size
            elif c.size != arity:
                raise ValueError(
                    f"anchor '{label}' has {c.size} components, others have {arity}"
                )
            if c.size not in (1, 2):
                raise ValueError(f"anchor '{label}' must be 1D or 2D")
            if not np.isfinite(c).all():
                raise ValueError(f"anchor '{label}' must be finite")
            clean[str(label)] = c
        self.anchors = clean

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.anchors)

    def __len__(self) -> int:
        return len(self.anchors)

    def __contains__(self, label: object) -> bool:
        return str(label) in self.anchors

    def coordinate_for(self, label: str) -> np.ndarray:
        return self.anchors[str(label)].copy()

    def validate_for(self, topo: GridTopology) -> None:
        """Check arity and bounds against a topology.

        Raises ConfigurationError naming the offending label, so callers
        can surface it directly.
        """
        hi = np.asarray(topo.dims, dtype=float) - 1.0
        for label, c in self.anchors.items():
            if c.size != topo.ndim:
                raise ConfigurationError(
                    f"anchor '{label}' has {c.size} components for a "
                    f"{topo.ndim}D grid"
                )
            if np.any(c < 0.0) or np.any(c > hi):
                box = " x ".join(f"[0, {int(h)}]" for h in hi)
                raise ConfigurationError(
                    f"anchor '{label}' at {tuple(c)} lies outside the grid {box}"
                )

    def unit_targets(self, topo: GridTopology) -> dict[str, int]:
        """Nearest unit index per label, for algorithms that need a
        discrete target unit."""
        self.validate_for(topo)
        return {label: topo.nearest_unit(c) for label, c in self.anchors.items()}


@dataclass(frozen=True)
class TrainingSchedule:
    """Hyperparameters shared by the batch and online trainers.

    ``sigma_r_init`` and ``tau`` default to None and are resolved against
    a topology: half the largest grid extent, and epochs / 4.
    """

    eta_init: float = 0.1
    sigma_r_init: float | None = None
    sigma_t_init: float = 2.0
    tau: float | None = None
    epochs: int = 100
    epsilon: float = 1e-4
    max_batch_iters: int = 500
    seed: int = 0

    def __post_init__(self):
        if self.eta_init <= 0:
            raise ValueError("eta_init must be positive")
        if self.sigma_r_init is not None and self.sigma_r_init <= 0:
            raise ValueError("sigma_r_init must be positive")
        if self.sigma_t_init <= 0:
            raise ValueError("sigma_t_init must be positive")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")
        if int(self.epochs) != self.epochs or self.epochs < 0:
            raise ValueError("epochs must be a nonnegative integer")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if int(self.max_batch_iters) != self.max_batch_iters or self.max_batch_iters < 1:
            raise ValueError("max_batch_iters must be a positive integer")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")

    def resolve(self, topo: GridTopology) -> "TrainingSchedule":
        """Fill the topology-dependent defaults and return a complete
        schedule."""
        sigma_r = self.sigma_r_init
        if sigma_r is None:
            sigma_r = max(topo.dims) / 2.0
        tau = self.tau
        if tau is None:
            # epochs == 0 trains nothing; any positive tau keeps anneal valid
            tau = self.epochs / 4.0 if self.epochs > 0 else 1.0
        return replace(self, sigma_r_init=sigma_r, tau=tau)


def _uniform_in_bounds(
    topo: GridTopology, data: Dataset, rng: np.random.Generator
) -> np.ndarray:
    lo = data.patterns.min(axis=0)
    hi = data.patterns.max(axis=0)
    return rng.uniform(lo, hi, size=(topo.unit_count, data.m))


def init_codebook(topo: GridTopology, data: Dataset, seed: int) -> Codebook:
    """Seeded codebook: every entry uniform in the per-dimension
    [min, max] range of the dataset. A constant dataset yields every
    prototype equal to that constant."""
    if data.n == 0:
        raise ValueError("cannot initialize a codebook from an empty dataset")
    rng = np.random.default_rng(seed)
    return Codebook(_uniform_in_bounds(topo, data, rng), topo)

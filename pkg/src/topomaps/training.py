"""Batch and online trainers for the winner-takes-all map family.

Both trainers share one loop shape: evaluate the operator table for the
current codebook, move prototypes, anneal the learning rate and the
neighborhood radius with exp(-t / tau). The label radius sigma_t is not
annealed. Batch training replaces each prototype by its phi-weighted mean
and stops once the summed prototype movement drops below epsilon; online
training visits patterns one at a time in a reshuffled order for a fixed
number of epochs.

Determinism: given the same seed, schedule, and inputs, both trainers are
bitwise reproducible. The batch pass reduces fixed-size pattern chunks in
a fixed order, so the ``threads`` argument changes wall time only, never
the result. Online training is inherently sequential and ignores it.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .grid import (
    Codebook,
    Dataset,
    GridTopology,
    LabelAnchors,
    TrainingSchedule,
    _uniform_in_bounds,
)
from .operators import WtaKind, _gauss_sq, _sq_distances, find_winners

__all__ = [
    "HistoryRecord",
    "TrainingHistory",
    "energy",
    "anneal",
    "batch_step",
    "online_step",
    "train_batch",
    "train_online",
    "quantization_error",
    "anchor_consistency",
]

# Prototypes whose accumulated phi mass falls below this stay where they are.
MASS_FLOOR = 1e-12

_CHUNK = 2048


@dataclass(frozen=True)
class HistoryRecord:
    """One trainer iteration. For batch training the energy is evaluated
    on the codebook entering the iteration; for online training it is
    evaluated after the epoch's updates."""

    iteration: int
    energy: float
    movement: float
    eta: float
    sigma_r: float


@dataclass
class TrainingHistory:
    records: list[HistoryRecord] = field(default_factory=list)
    converged: bool = False

    def append(self, rec: HistoryRecord) -> None:
        self.records.append(rec)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    def movements(self) -> np.ndarray:
        return np.array([r.movement for r in self.records])


def anneal(t: int, sched: TrainingSchedule) -> tuple[float, float, float]:
    """(eta, sigma_r, sigma_t) at iteration t: the first two decay by
    exp(-t / tau), sigma_t stays at its initial value."""
    if t < 0:
        raise ValueError("iteration index must be nonnegative")
    if sched.sigma_r_init is None or sched.tau is None:
        raise ValueError("schedule not resolved; call sched.resolve(topo) first")
    decay = math.exp(-t / sched.tau)
    return sched.eta_init * decay, sched.sigma_r_init * decay, sched.sigma_t_init


def _check_kind_inputs(
    kind: WtaKind, data: Dataset, anchors: LabelAnchors | None, topo: GridTopology
) -> None:
    if kind.requires_anchors:
        if anchors is None:
            raise ConfigurationError(f"kind '{kind.name}' requires label anchors")
        if data.labels is None:
            raise ConfigurationError(f"kind '{kind.name}' requires a labeled dataset")
        anchors.validate_for(topo)
        missing = sorted(set(data.labels) - set(anchors.labels))
        if missing:
            raise ConfigurationError(
                "no anchor for label(s): " + ", ".join(repr(l) for l in missing)
            )
    elif anchors is not None:
        raise ConfigurationError(f"kind '{kind.name}' does not use anchors")


def _anchor_rows(
    data: Dataset, anchors: LabelAnchors, topo: GridTopology
) -> tuple[np.ndarray, np.ndarray]:
    """Per-pattern anchor coordinates (N, ndim) and nearest-unit targets (N,)."""
    coords = np.stack([anchors.coordinate_for(l) for l in data.labels])
    targets = anchors.unit_targets(topo)
    units = np.array([targets[l] for l in data.labels], dtype=np.int64)
    return coords, units


def _resolve_sigma_t(kind: WtaKind, sched: TrainingSchedule | None) -> float | None:
    if kind.name != "stm":
        return None
    if kind.sigma_t is not None:
        return kind.sigma_t
    if sched is not None:
        return sched.sigma_t_init
    raise ValueError("stm kind needs sigma_t")


def _phi_block(
    kind_name: str,
    winners: np.ndarray,
    k: int,
    gd2: np.ndarray,
    sigma_r: float | None,
    sigma_t: float | None,
    coords: np.ndarray,
    anchor_xy: np.ndarray | None,
    anchor_unit: np.ndarray | None,
) -> np.ndarray:
    n = winners.shape[0]
    if kind_name == "kmeans":
        phi = np.zeros((n, k))
        phi[np.arange(n), winners] = 1.0
        return phi
    if kind_name == "som":
        return _gauss_sq(gd2[winners], sigma_r)
    if kind_name == "stm":
        ad2 = np.square(coords[None, :, :] - anchor_xy[:, None, :]).sum(axis=2)
        return _gauss_sq(gd2[winners], sigma_r) * _gauss_sq(ad2, sigma_t)
    # lvq: signed hard assignment
    phi = np.zeros((n, k))
    phi[np.arange(n), winners] = np.where(winners == anchor_unit, 1.0, -1.0)
    return phi


def energy(data: Dataset, cb: Codebook, phi: np.ndarray) -> float:
    """Assignment energy 0.5 * sum_ij phi[i, j] * ||x_i - w_j||^2 for an
    already evaluated operator table."""
    p = np.asarray(phi, dtype=float)
    if p.shape != (data.n, cb.k):
        raise ValueError(
            f"phi table of shape {p.shape} does not match {data.n} patterns "
            f"and {cb.k} units"
        )
    if data.m != cb.m:
        raise ValueError(f"pattern width {data.m} does not match codebook {cb.m}")
    wsq = np.square(cb.weights).sum(axis=1)
    total = 0.0
    for lo in range(0, data.n, _CHUNK):
        block = data.patterns[lo : lo + _CHUNK]
        d2 = _sq_distances(block, cb.weights, wsq)
        total += float((p[lo : lo + block.shape[0]] * d2).sum())
    return 0.5 * total


def _batch_pass(
    patterns: np.ndarray,
    weights: np.ndarray,
    kind_name: str,
    sigma_r: float | None,
    sigma_t: float | None,
    gd2: np.ndarray,
    coords: np.ndarray,
    anchor_xy: np.ndarray | None,
    threads: int,
) -> tuple[np.ndarray, float, float]:
    """One full phi evaluation and prototype replacement.

    Returns (new_weights, movement, energy), where the energy belongs to
    the incoming weights. Chunks are reduced in a fixed order so the
    result does not depend on ``threads``.
    """
    k = weights.shape[0]
    wsq = np.square(weights).sum(axis=1)

    def run(lo: int):
        block = patterns[lo : lo + _CHUNK]
        d2 = _sq_distances(block, weights, wsq)
        winners = np.argmin(d2, axis=1)
        axy = None if anchor_xy is None else anchor_xy[lo : lo + _CHUNK]
        phi = _phi_block(kind_name, winners, k, gd2, sigma_r, sigma_t, coords, axy, None)
        return phi.T @ block, phi.sum(axis=0), float((phi * d2).sum())

    offsets = range(0, patterns.shape[0], _CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, offsets))
    else:
        parts = [run(lo) for lo in offsets]

    num = np.zeros_like(weights)
    den = np.zeros(k)
    raw_energy = 0.0
    for pn, pd, pe in parts:
        num += pn
        den += pd
        raw_energy += pe

    keep = den < MASS_FLOOR
    safe_den = np.where(keep, 1.0, den)
    new_w = np.where(keep[:, None], weights, num / safe_den[:, None])
    movement = float(np.linalg.norm(new_w - weights, axis=1).sum())
    return new_w, movement, 0.5 * raw_energy


def batch_step(
    data: Dataset,
    cb: Codebook,
    kind: WtaKind,
    anchors: LabelAnchors | None = None,
    sigma_r: float | None = None,
    threads: int = 1,
) -> tuple[Codebook, float]:
    """One batch update: replace every prototype with enough phi mass by
    its phi-weighted mean.

    Returns the new codebook and the summed movement of all prototypes.
    The input codebook is left untouched.
    """
    if kind.name == "lvq":
        raise ConfigurationError(
            "lvq trains online only; a signed weighted mean is undefined"
        )
    if data.n == 0:
        raise ValueError("empty dataset")
    if data.m != cb.m:
        raise ValueError(f"pattern width {data.m} does not match codebook {cb.m}")
    _check_kind_inputs(kind, data, anchors, cb.topology)
    if kind.name in ("som", "stm"):
        if sigma_r is None:
            sigma_r = kind.sigma_r
        if sigma_r is None or sigma_r <= 0:
            raise ValueError(f"kind '{kind.name}' needs a positive sigma_r")
    sigma_t = _resolve_sigma_t(kind, None) if kind.name == "stm" else None

    topo = cb.topology
    coords = topo.coordinates()
    gd2 = np.square(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    anchor_xy = None
    if kind.name == "stm":
        anchor_xy, _ = _anchor_rows(data, anchors, topo)
    new_w, movement, _ = _batch_pass(
        data.patterns, cb.weights, kind.name, sigma_r, sigma_t, gd2, coords,
        anchor_xy, threads,
    )
    return Codebook(new_w, topo), movement


def _online_update(
    weights: np.ndarray,
    x: np.ndarray,
    kind_name: str,
    eta: float,
    sigma_r: float | None,
    sigma_t: float | None,
    gd2: np.ndarray,
    coords: np.ndarray,
    anchor_xy: np.ndarray | None,
    anchor_unit: int | None,
) -> None:
    d2 = np.square(weights - x).sum(axis=1)
    r = int(np.argmin(d2))
    if kind_name == "kmeans":
        weights[r] += eta * (x - weights[r])
    elif kind_name == "som":
        phi = _gauss_sq(gd2[r], sigma_r)
        weights += (eta * phi)[:, None] * (x - weights)
    elif kind_name == "stm":
        ad2 = np.square(coords - anchor_xy).sum(axis=1)
        phi = _gauss_sq(gd2[r], sigma_r) * _gauss_sq(ad2, sigma_t)
        weights += (eta * phi)[:, None] * (x - weights)
    else:  # lvq
        sign = 1.0 if r == anchor_unit else -1.0
        weights[r] += eta * sign * (x - weights[r])


def online_step(
    x: np.ndarray,
    cb: Codebook,
    kind: WtaKind,
    anchor: np.ndarray | None = None,
    eta: float = 0.1,
    sigma_r: float | None = None,
) -> Codebook:
    """One single-pattern update, in place. Returns the same codebook.

    For stm, ``anchor`` is the label's anchor coordinate; for lvq it is
    snapped to the nearest unit inside this call.
    """
    xv = np.asarray(x, dtype=float).reshape(-1)
    if xv.shape != (cb.m,):
        raise ValueError(f"pattern has {xv.size} features, codebook has {cb.m}")
    if not np.isfinite(xv).all():
        raise ValueError("pattern must be finite")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if kind.name in ("som", "stm"):
        if sigma_r is None:
            sigma_r = kind.sigma_r
        if sigma_r is None or sigma_r <= 0:
            raise ValueError(f"kind '{kind.name}' needs a positive sigma_r")
    topo = cb.topology
    anchor_xy = None
    anchor_unit = None
    if kind.requires_anchors:
        if anchor is None:
            raise ValueError(f"kind '{kind.name}' needs an anchor coordinate")
        av = np.asarray(anchor, dtype=float).reshape(-1)
        if av.size != topo.ndim:
            raise ValueError(
                f"anchor has {av.size} components for a {topo.ndim}D grid"
            )
        anchor_xy = av
        anchor_unit = topo.nearest_unit(av)
    sigma_t = _resolve_sigma_t(kind, None) if kind.name == "stm" else None
    coords = topo.coordinates()
    gd2 = np.square(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    _online_update(
        cb.weights, xv, kind.name, eta, sigma_r, sigma_t, gd2, coords,
        anchor_xy, anchor_unit,
    )
    return cb


def _start_weights(
    data: Dataset,
    topo: GridTopology,
    initial: Codebook | None,
    rng: np.random.Generator,
) -> np.ndarray:
    if initial is not None:
        if initial.topology != topo:
            raise ValueError("initial codebook topology does not match")
        if initial.m != data.m:
            raise ValueError(
                f"initial codebook width {initial.m} does not match data {data.m}"
            )
        return initial.weights.copy()
    return _uniform_in_bounds(topo, data, rng)


def train_batch(
    data: Dataset,
    topo: GridTopology,
    kind: WtaKind,
    anchors: LabelAnchors | None = None,
    sched: TrainingSchedule | None = None,
    threads: int = 1,
    initial: Codebook | None = None,
) -> tuple[Codebook, TrainingHistory]:
    """Batch training: repeat phi-weighted mean replacement until the
    summed prototype movement drops below epsilon or max_batch_iters is
    hit. A run that hits the cap is returned with converged=False rather
    than raised.

    ``initial`` overrides the seeded uniform initialization, for warm
    starts and for reproducing a run from a saved codebook.
    """
    if kind.name == "lvq":
        raise ConfigurationError(
            "lvq trains online only; a signed weighted mean is undefined"
        )
    if data.n == 0:
        raise ValueError("empty dataset")
    sched = (sched or TrainingSchedule()).resolve(topo)
    _check_kind_inputs(kind, data, anchors, topo)
    sigma_t = _resolve_sigma_t(kind, sched)

    rng = np.random.default_rng(sched.seed)
    weights = _start_weights(data, topo, initial, rng)
    coords = topo.coordinates()
    gd2 = np.square(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    anchor_xy = None
    if kind.name == "stm":
        anchor_xy, _ = _anchor_rows(data, anchors, topo)

    history = TrainingHistory()
    for t in range(sched.max_batch_iters):
        eta, sigma_r, _ = anneal(t, sched)
        new_w, movement, e = _batch_pass(
            data.patterns, weights, kind.name, sigma_r, sigma_t, gd2, coords,
            anchor_xy, threads,
        )
        history.append(HistoryRecord(t, e, movement, eta, sigma_r))
        weights = new_w
        if movement < sched.epsilon:
            history.converged = True
            break
    return Codebook(weights, topo), history


def train_online(
    data: Dataset,
    topo: GridTopology,
    kind: WtaKind,
    anchors: LabelAnchors | None = None,
    sched: TrainingSchedule | None = None,
    threads: int = 1,
    initial: Codebook | None = None,
) -> tuple[Codebook, TrainingHistory]:
    """Online training: ``epochs`` passes over the dataset, one pattern at
    a time in a seeded reshuffled order, annealing per epoch.

    Updates are order-dependent, so this trainer is sequential and
    ``threads`` is accepted only for interface symmetry. History records
    one entry per epoch; converged is True once the full schedule ran.
    """
    del threads
    if data.n == 0:
        raise ValueError("empty dataset")
    sched = (sched or TrainingSchedule()).resolve(topo)
    _check_kind_inputs(kind, data, anchors, topo)
    sigma_t = _resolve_sigma_t(kind, sched)

    rng = np.random.default_rng(sched.seed)
    weights = _start_weights(data, topo, initial, rng)
    coords = topo.coordinates()
    gd2 = np.square(coords[:, None, :] - coords[None, :, :]).sum(axis=2)
    anchor_xy = None
    anchor_units = None
    if kind.requires_anchors:
        anchor_xy, anchor_units = _anchor_rows(data, anchors, topo)

    patterns = data.patterns
    history = TrainingHistory()
    for t in range(sched.epochs):
        eta, sigma_r, _ = anneal(t, sched)
        before = weights.copy()
        for i in rng.permutation(data.n):
            _online_update(
                weights, patterns[i], kind.name, eta, sigma_r, sigma_t, gd2,
                coords,
                None if anchor_xy is None else anchor_xy[i],
                None if anchor_units is None else int(anchor_units[i]),
            )
        movement = float(np.linalg.norm(weights - before, axis=1).sum())
        cb_now = Codebook(weights, topo)
        phi = _full_phi(data, cb_now, kind.name, sigma_r, sigma_t, gd2, coords,
                        anchor_xy, anchor_units)
        history.append(HistoryRecord(t, energy(data, cb_now, phi), movement,
                                     eta, sigma_r))
    history.converged = True
    return Codebook(weights, topo), history


def _full_phi(
    data: Dataset,
    cb: Codebook,
    kind_name: str,
    sigma_r: float | None,
    sigma_t: float | None,
    gd2: np.ndarray,
    coords: np.ndarray,
    anchor_xy: np.ndarray | None,
    anchor_units: np.ndarray | None,
) -> np.ndarray:
    # The formula energy is undefined for lvq's signed table; report the
    # hard assignment energy as the diagnostic instead.
    winners = find_winners(data.patterns, cb)
    name = "kmeans" if kind_name == "lvq" else kind_name
    return _phi_block(name, winners, cb.k, gd2, sigma_r, sigma_t, coords,
                      anchor_xy, anchor_units)


def quantization_error(data: Dataset, cb: Codebook) -> float:
    """Mean Euclidean distance from each pattern to its winning
    prototype."""
    if data.n == 0:
        raise ValueError("empty dataset")
    if data.m != cb.m:
        raise ValueError(f"pattern width {data.m} does not match codebook {cb.m}")
    wsq = np.square(cb.weights).sum(axis=1)
    total = 0.0
    for lo in range(0, data.n, _CHUNK):
        block = data.patterns[lo : lo + _CHUNK]
        d2 = _sq_distances(block, cb.weights, wsq)
        total += float(np.sqrt(d2.min(axis=1)).sum())
    return total / data.n


def anchor_consistency(data: Dataset, cb: Codebook, anchors: LabelAnchors) -> float:
    """Fraction of labeled patterns whose winner lands strictly nearer to
    the pattern's own anchor than to any other anchor. Ties count as
    failures. With a single anchor there is no competitor and the value
    is 1.0."""
    if data.labels is None:
        raise ValueError("dataset has no labels")
    if data.n == 0:
        raise ValueError("empty dataset")
    anchors.validate_for(cb.topology)
    missing = sorted(set(data.labels) - set(anchors.labels))
    if missing:
        raise ConfigurationError(
            "no anchor for label(s): " + ", ".join(repr(l) for l in missing)
        )
    labels = anchors.labels
    if len(labels) == 1:
        return 1.0
    amat = np.stack([anchors.coordinate_for(l) for l in labels])
    pos = {l: i for i, l in enumerate(labels)}
    own = np.array([pos[l] for l in data.labels], dtype=np.int64)

    winners = find_winners(data.patterns, cb)
    wc = cb.topology.coordinates()[winners]
    d2 = np.square(wc[:, None, :] - amat[None, :, :]).sum(axis=2)
    own_d2 = d2[np.arange(data.n), own]
    d2[np.arange(data.n), own] = np.inf
    return float(np.mean(own_d2 < d2.min(axis=1)))

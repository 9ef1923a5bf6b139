"""Groupwise Chamfer alignment loss, its regularizer, and their gradients.

The alignment term sums, over every ordered pair of sets, the squared
distance from each point to its nearest neighbor in the other set (so each
unordered pair is counted twice). Gradients treat the nearest-neighbor
assignment as fixed, which is exact wherever the assignment is locally
stable. The regularizer is the plain sum of per-point drift norms, with
subgradient zero at zero drift.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptySetError, ShapeMismatchError, TooFewSetsError
from .geometry import DriftField, PointSet, apply_drift


class NnIndex:
    """Exact nearest-neighbor index (KD-tree) over one point set."""

    def __init__(self, points: PointSet | np.ndarray):
        arr = points.points if isinstance(points, PointSet) else np.asarray(points, float)
        if arr.ndim != 2:
            raise ShapeMismatchError(f"expected (N, dim) points, got shape {arr.shape}")
        if arr.shape[0] == 0:
            raise EmptySetError("cannot index an empty point set")
        self.points = arr
        self._tree = cKDTree(arr)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def nearest(index: NnIndex, query: np.ndarray) -> tuple[int, float]:
    """Index and squared distance of the nearest stored point.

    Exact ties resolve to the lowest index.
    """
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (index.dim,):
        raise ShapeMismatchError(
            f"query shape {q.shape} does not match index dim {index.dim}"
        )
    dist, _ = index._tree.query(q)
    candidates = index._tree.query_ball_point(q, dist * (1.0 + 1e-9))
    delta = index.points[candidates] - q
    sq = (delta * delta).sum(axis=1)
    best = sq.min()
    idx = min(c for c, s in zip(candidates, sq) if s == best)
    return int(idx), float(best)


def _one_sided_sq(tree: cKDTree, queries: np.ndarray) -> float:
    dist, _ = tree.query(queries, k=1)
    return float(dist @ dist)


def chamfer(x: PointSet, y: PointSet) -> float:
    """Symmetric sum of squared nearest-neighbor distances between two sets."""
    if x.dim != y.dim:
        raise ShapeMismatchError(f"sets mix dimensionalities: {x.dim} vs {y.dim}")
    if len(x) == 0 or len(y) == 0:
        raise EmptySetError("chamfer distance needs non-empty sets")
    return _one_sided_sq(cKDTree(y.points), x.points) + _one_sided_sq(
        cKDTree(x.points), y.points
    )


def _as_arrays(sets: Sequence[PointSet]) -> list[np.ndarray]:
    if len(sets) < 2:
        raise TooFewSetsError(f"need at least 2 sets, got {len(sets)}")
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise ShapeMismatchError(f"sets mix dimensionalities: {dims}")
    if any(len(s) == 0 for s in sets):
        raise EmptySetError("groupwise loss needs non-empty sets")
    return [s.points for s in sets]


def groupwise_chamfer(sets: Sequence[PointSet]) -> float:
    """Sum of pairwise Chamfer distances over all ordered pairs of sets."""
    arrays = _as_arrays(sets)
    k = len(arrays)
    trees = [cKDTree(a) for a in arrays]
    one_sided = np.zeros((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                one_sided[i, j] = _one_sided_sq(trees[j], arrays[i])
    total = 0.0
    for i in range(k):
        for j in range(k):
            if i != j:
                total += one_sided[i, j] + one_sided[j, i]
    return total


def normalized_cd(sets: Sequence[PointSet]) -> float:
    """Groupwise Chamfer divided by (K * (K-1) * mean cardinality).

    A size-insensitive figure for comparing runs with different group
    sizes and cardinalities.
    """
    arrays = _as_arrays(sets)
    k = len(arrays)
    mean_n = float(np.mean([a.shape[0] for a in arrays]))
    return groupwise_chamfer(sets) / (k * (k - 1) * mean_n)


@dataclass(frozen=True)
class LossBreakdown:
    """Alignment term, drift regularizer, their weighted total, and the
    normalized Chamfer of the transformed sets."""

    alignment: float
    regularizer: float
    total: float
    normalized_cd: float


def alignment_terms(arrays: Sequence[np.ndarray]) -> tuple[float, list[np.ndarray]]:
    """Groupwise alignment value and its gradient per point array.

    Each one-sided squared-distance sum enters the ordered-pair total
    twice; gradients flow both to the query point and to the matched
    neighbor, with the match held fixed.
    """
    k = len(arrays)
    trees = [cKDTree(a) for a in arrays]
    grads = [np.zeros_like(a) for a in arrays]
    total = 0.0
    for i in range(k):
        for j in range(k):
            if i == j:
                continue
            dist, idx = trees[j].query(arrays[i], k=1)
            diff = arrays[i] - arrays[j][idx]
            total += 2.0 * float(dist @ dist)
            grads[i] += 4.0 * diff
            n_j = arrays[j].shape[0]
            for c in range(diff.shape[1]):
                grads[j][:, c] -= 4.0 * np.bincount(
                    idx, weights=diff[:, c], minlength=n_j
                )
    return total, grads


def drift_penalty(drifts: np.ndarray) -> tuple[float, np.ndarray]:
    """Sum of per-point drift norms and its subgradient (zero at zero)."""
    norms = np.sqrt((drifts * drifts).sum(axis=1))
    grad = np.zeros_like(drifts)
    nz = norms > 0.0
    grad[nz] = drifts[nz] / norms[nz, None]
    return float(norms.sum()), grad


def _check_pairing(sets: Sequence[PointSet], drifts: Sequence[DriftField]):
    if len(sets) != len(drifts):
        raise ShapeMismatchError(
            f"{len(sets)} sets but {len(drifts)} drift fields"
        )
    for i, (s, d) in enumerate(zip(sets, drifts)):
        if len(s) != len(d) or s.dim != d.dim:
            raise ShapeMismatchError(
                f"set {i} has shape ({len(s)}, {s.dim}) but drift field "
                f"has ({len(d)}, {d.dim})"
            )


def regularized_loss(
    sets: Sequence[PointSet], drifts: Sequence[DriftField], reg_lambda: float
) -> LossBreakdown:
    """Alignment of the drifted sets plus reg_lambda times the drift norms."""
    if reg_lambda < 0.0:
        raise ValueError(f"reg_lambda must be >= 0, got {reg_lambda}")
    _check_pairing(sets, drifts)
    transformed = [apply_drift(s, d) for s, d in zip(sets, drifts)]
    alignment = groupwise_chamfer(transformed)
    regularizer = float(
        sum(np.sqrt((d.drifts * d.drifts).sum(axis=1)).sum() for d in drifts)
    )
    k = len(sets)
    mean_n = float(np.mean([len(s) for s in sets]))
    return LossBreakdown(
        alignment=alignment,
        regularizer=regularizer,
        total=alignment + reg_lambda * regularizer,
        normalized_cd=alignment / (k * (k - 1) * mean_n),
    )


def loss_gradients(
    sets: Sequence[PointSet], drifts: Sequence[DriftField], reg_lambda: float
) -> list[np.ndarray]:
    """Gradient of the regularized loss with respect to each drift vector.

    Nearest neighbors are held fixed at their current assignment.
    """
    if reg_lambda < 0.0:
        raise ValueError(f"reg_lambda must be >= 0, got {reg_lambda}")
    _check_pairing(sets, drifts)
    transformed = _as_arrays([apply_drift(s, d) for s, d in zip(sets, drifts)])
    _, grads = alignment_terms(transformed)
    for g, d in zip(grads, drifts):
        _, unit = drift_penalty(d.drifts)
        g += reg_lambda * unit
    return grads

"""Cartesian-grid partitions of the auxiliary feature space.

Each partitioned feature has a strictly increasing edge list
``e_0 < e_1 < ... < e_B``. Along that feature the value ``v`` falls in

* the underflow bin (index 0) when ``v < e_0``,
* interior bin ``j`` (1..B) when ``e_{j-1} <= v < e_j``; the last interior
  interval is closed, so ``v == e_B`` lands in bin ``B``,
* the overflow bin (index B + 1) when ``v > e_B``.

Per-feature indices are combined in C order into a single bin index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import ScoredDataset


class DegenerateFeatureError(ValueError):
    pass


class BinningWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class BinPartition:
    edges: tuple[np.ndarray, ...]
    feature_indices: tuple[int, ...]
    n_aux: int
    feature_names: tuple[str, ...] = ()

    def __post_init__(self):
        edges = []
        for e in self.edges:
            e = np.array(e, dtype=float).reshape(-1)
            if e.size < 2 or not np.isfinite(e).all():
                raise ValueError("edge lists need at least two finite values")
            if np.any(np.diff(e) <= 0):
                raise ValueError("edge lists must be strictly increasing")
            e.setflags(write=False)
            edges.append(e)
        fi = tuple(int(i) for i in self.feature_indices)
        if len(fi) != len(edges):
            raise ValueError("one edge list per partitioned feature is required")
        if any(i < 0 or i >= self.n_aux for i in fi):
            raise ValueError("feature index out of range")
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "feature_indices", fi)
        names = tuple(self.feature_names) or tuple(f"x{i}" for i in fi)
        object.__setattr__(self, "feature_names", names)

    @classmethod
    def single(cls, n_aux: int) -> "BinPartition":
        """Partition with no binned features: every sample lands in bin 0."""
        return cls((), (), n_aux)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(e.size + 1 for e in self.edges)

    @property
    def n_bins(self) -> int:
        return math.prod(self.shape)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinPartition):
            return NotImplemented
        return (
            self.feature_indices == other.feature_indices
            and self.n_aux == other.n_aux
            and len(self.edges) == len(other.edges)
            and all(np.array_equal(a, b) for a, b in zip(self.edges, other.edges))
        )

    def assign(self, aux) -> np.ndarray:
        """Vectorized bin lookup for an ``(n, n_aux)`` matrix."""
        aux = np.asarray(aux, dtype=float)
        if aux.ndim == 1:
            aux = aux.reshape(1, -1)
        if aux.shape[1] != self.n_aux:
            raise ValueError(f"aux dimension {aux.shape[1]} does not match partition ({self.n_aux})")
        if not np.isfinite(aux).all():
            raise ValueError("aux values must be finite")
        if not self.edges:
            return np.zeros(aux.shape[0], dtype=np.int64)
        per_dim = []
        for e, j in zip(self.edges, self.feature_indices):
            v = aux[:, j]
            idx = np.searchsorted(e, v, side="right")
            idx[v == e[-1]] = e.size - 1
            per_dim.append(idx)
        return np.ravel_multi_index(tuple(per_dim), self.shape)

    def describe(self, index: int) -> str:
        if not self.edges:
            return "all"
        parts = []
        for e, name, j in zip(self.edges, self.feature_names, np.unravel_index(index, self.shape)):
            if j == 0:
                parts.append(f"{name}<{e[0]:g}")
            elif j == e.size:
                parts.append(f"{name}>{e[-1]:g}")
            else:
                close = "]" if j == e.size - 1 else ")"
                parts.append(f"{name} in [{e[j - 1]:g},{e[j]:g}{close}")
        return " & ".join(parts)

    def to_dict(self) -> dict:
        return {
            "n_aux": self.n_aux,
            "feature_indices": list(self.feature_indices),
            "feature_names": list(self.feature_names),
            "edges": [e.tolist() for e in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "BinPartition":
        return cls(
            edges=tuple(np.array(e, dtype=float) for e in doc["edges"]),
            feature_indices=tuple(doc["feature_indices"]),
            n_aux=int(doc["n_aux"]),
            feature_names=tuple(doc.get("feature_names", ())),
        )


def assign_bin(aux: Sequence[float], partition: BinPartition) -> int:
    aux = np.asarray(aux, dtype=float).reshape(-1)
    if aux.size != partition.n_aux:
        raise ValueError(f"aux dimension {aux.size} does not match partition ({partition.n_aux})")
    return int(partition.assign(aux.reshape(1, -1))[0])


def _check_args(data: ScoredDataset, feature_indices, bins_per_feature):
    feature_indices = list(feature_indices)
    bins_per_feature = list(bins_per_feature)
    if len(feature_indices) != len(bins_per_feature) or not feature_indices:
        raise ValueError("need one bin count per selected feature")
    if any(b < 1 for b in bins_per_feature):
        raise ValueError("bins_per_feature entries must be >= 1")
    for j in feature_indices:
        col = data.aux[:, j]
        if col.max() <= col.min():
            raise DegenerateFeatureError(f"feature {data.aux_names[j]!r} is constant")
    return feature_indices, bins_per_feature


def make_equal_width_partition(
    data: ScoredDataset,
    feature_indices: Sequence[int],
    bins_per_feature: Sequence[int],
    ranges: Sequence[tuple[float, float] | None] | None = None,
) -> BinPartition:
    """Equally spaced edges between the observed min and max of each feature.

    ``ranges`` optionally fixes ``(low, high)`` for a feature instead of the
    observed extremes.
    """
    feature_indices, bins_per_feature = _check_args(data, feature_indices, bins_per_feature)
    ranges = list(ranges) if ranges is not None else [None] * len(feature_indices)
    edges = []
    for j, b, r in zip(feature_indices, bins_per_feature, ranges):
        lo, hi = (data.aux[:, j].min(), data.aux[:, j].max()) if r is None else r
        if not hi > lo:
            raise DegenerateFeatureError(f"empty range for feature {data.aux_names[j]!r}")
        edges.append(np.linspace(lo, hi, b + 1))
    return BinPartition(
        tuple(edges), tuple(feature_indices), data.n_features, tuple(data.aux_names[j] for j in feature_indices)
    )


def make_quantile_partition(
    data: ScoredDataset,
    feature_indices: Sequence[int],
    bins_per_feature: Sequence[int],
) -> BinPartition:
    """Edges at empirical quantiles so interior bins hold similar counts.

    Tied quantiles collapse into a single edge, leaving fewer bins than
    requested; a :class:`BinningWarning` is emitted when that happens.
    """
    feature_indices, bins_per_feature = _check_args(data, feature_indices, bins_per_feature)
    edges = []
    for j, b in zip(feature_indices, bins_per_feature):
        q = np.quantile(data.aux[:, j], np.linspace(0.0, 1.0, b + 1))
        e = np.unique(q)
        if e.size < b + 1:
            warnings.warn(
                f"feature {data.aux_names[j]!r}: {b} quantile bins requested, "
                f"{e.size - 1} distinct after collapsing tied edges",
                BinningWarning,
                stacklevel=2,
            )
        edges.append(e)
    return BinPartition(
        tuple(edges), tuple(feature_indices), data.n_features, tuple(data.aux_names[j] for j in feature_indices)
    )

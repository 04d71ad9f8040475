"""Uniform grid on the probability simplex with piecewise-linear interpolation.

Interpolation uses the Freudenthal (Kuhn) triangulation: a point is written as
a convex combination of ``K`` grid vertices of the sub-simplex containing it.
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy import sparse


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


class SimplexGrid:
    def __init__(self, dim: int, resolution: int):
        if dim < 1 or resolution < 1:
            raise ValueError("dim and resolution must be positive")
        self.dim = dim
        self.resolution = resolution if dim > 1 else 1
        counts = np.array(list(_compositions(self.resolution, dim)), dtype=np.int64)
        self.counts = counts
        self.points = counts / self.resolution
        self._index = {tuple(c): i for i, c in enumerate(counts)}

    def __len__(self) -> int:
        return len(self.points)

    def locate(self, d) -> tuple[np.ndarray, np.ndarray]:
        """Vertex indices and barycentric weights for points ``d`` of shape (P, K)."""
        d = np.atleast_2d(np.asarray(d, dtype=float))
        P, K = d.shape
        if K == 1:
            return np.zeros((P, 1), dtype=np.int64), np.ones((P, 1))
        M = self.resolution
        # y_i = M * (d_i + ... + d_{K-1}) for i = 1..K-1, non-increasing in i
        y = M * np.cumsum(d[:, ::-1], axis=1)[:, ::-1][:, 1:]
        y = np.clip(y, 0.0, M)
        # cap at M-1 so that a coordinate sitting on y = M becomes frac = 1
        base = np.minimum(np.floor(y), M - 1)
        frac = y - base
        order = np.argsort(-frac, axis=1, kind="stable")
        sorted_frac = np.take_along_axis(frac, order, axis=1)
        weights = np.empty((P, K))
        weights[:, 0] = 1.0 - sorted_frac[:, 0]
        weights[:, 1:-1] = sorted_frac[:, :-1] - sorted_frac[:, 1:]
        weights[:, -1] = sorted_frac[:, -1]

        idx = np.empty((P, K), dtype=np.int64)
        vert = base.astype(np.int64).copy()
        rows = np.arange(P)
        for v in range(K):
            if v > 0:
                vert[rows, order[:, v - 1]] += 1
            full = np.concatenate([np.full((P, 1), M), vert, np.zeros((P, 1), dtype=np.int64)], axis=1)
            counts = full[:, :-1] - full[:, 1:]
            idx[:, v] = [self._index[tuple(c)] for c in counts]
        return idx, weights

    def interpolate(self, values: np.ndarray, d) -> np.ndarray:
        """Interpolate grid ``values`` (last axis = grid) at points ``d``."""
        idx, w = self.locate(d)
        return (values[..., idx] * w).sum(axis=-1)

    def matrix(self, d) -> sparse.csr_matrix:
        """Sparse (P, G) matrix mapping grid values to values at ``d``."""
        idx, w = self.locate(d)
        P, K = idx.shape
        rows = np.repeat(np.arange(P), K)
        return sparse.csr_matrix((w.ravel(), (rows, idx.ravel())), shape=(P, len(self)))


def normalize_rows(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row directions and masses; zero rows map to the uniform direction."""
    mass = v.sum(axis=-1)
    safe = np.where(mass > 0, mass, 1.0)
    d = v / safe[..., None]
    d = np.where(mass[..., None] > 0, d, 1.0 / v.shape[-1])
    return d, mass

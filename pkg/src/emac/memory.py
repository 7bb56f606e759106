"""Episodic memory: random projection keys mapped to Monte-Carlo returns.

State-action pairs are projected once through a fixed Gaussian matrix into a
low-dimensional key space where squared l2 distances approximately preserve
the original geometry. The table itself is append-only (duplicates included,
no search on insert) and queried by an exhaustive scan: distances to every
stored key, top-K selection, and a softmax-of-negative-distance weighting of
the K stored returns. Keeping the scan exhaustive is what lets tests pin the
lookup against a brute-force oracle exactly.
"""

import struct

import numpy as np
from scipy.spatial.distance import cdist

# Query rows processed per distance-matrix block; keeps the scan cache-friendly.
_QUERY_BLOCK = 128


class MemoryFullError(RuntimeError):
    """Raised when adding to a full table whose overflow policy is ``error``."""


class GaussianProjection:
    """Fixed linear map x -> Mx with Gaussian entries, created once per run.

    Entries are N(0, 1/out_dim) so projected squared norms match the original
    scale in expectation.
    """

    def __init__(self, in_dim, out_dim, rng):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("projection dims must be >= 1")
        self.matrix = rng.normal(0.0, 1.0 / np.sqrt(out_dim), size=(out_dim, in_dim))
        self.in_dim = in_dim
        self.out_dim = out_dim

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"input dim {x.shape[-1]} != projection input {self.in_dim}")
        return x @ self.matrix.T


class EpisodicMemory:
    """Append-only table of (projected key, Monte-Carlo return) records."""

    def __init__(self, key_dim, capacity, epsilon=1e-3, overflow="error"):
        if key_dim < 1 or capacity < 1:
            raise ValueError("key_dim and capacity must be >= 1")
        if epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if overflow not in ("error", "ring"):
            raise ValueError("overflow must be 'error' or 'ring'")
        self.key_dim = key_dim
        self.capacity = capacity
        self.epsilon = float(epsilon)
        self.overflow = overflow
        self._keys = np.empty((capacity, key_dim), dtype=np.float64)
        self._values = np.empty(capacity, dtype=np.float64)
        self._count = 0       # total adds, may exceed capacity in ring mode
        self.size = 0

    def add(self, key, value):
        """Append one record. O(1): no duplicate search, insertion order kept."""
        key = np.asarray(key, dtype=np.float64)
        if key.shape != (self.key_dim,):
            raise ValueError(f"key shape {key.shape} != ({self.key_dim},)")
        value = float(value)
        if not (np.isfinite(key).all() and np.isfinite(value)):
            raise ValueError("non-finite key or value")
        if self.size >= self.capacity and self.overflow == "error":
            raise MemoryFullError(f"memory at capacity {self.capacity}")
        slot = self._count % self.capacity
        self._keys[slot] = key
        self._values[slot] = value
        self._count += 1
        self.size = min(self._count, self.capacity)

    @property
    def keys(self):
        return self._keys[:self.size]

    @property
    def values(self):
        return self._values[:self.size]

    def __len__(self):
        return self.size

    def lookup(self, query_key, k):
        """Distance-weighted mean of the K nearest stored returns.

        Distances are squared l2 plus the table's epsilon; the epsilon shifts
        every distance equally so it never reorders neighbors. Weights are a
        softmax of negative distances over the retrieved set only, so they
        form a probability vector and the result is a convex combination of
        the K stored returns (a weighted mean, never a max).

        Returns ``(q_m, indices, weights)`` with neighbors sorted by
        (distance, insertion index).
        """
        query_key = np.asarray(query_key, dtype=np.float64)
        if query_key.shape != (self.key_dim,):
            raise ValueError(f"query shape {query_key.shape} != ({self.key_dim},)")
        q_m, idx, w = self._query_block(query_key[None, :], k)
        return float(q_m[0]), idx[0], w[0]

    def batch_lookup(self, query_keys, k):
        """Vectorized ``lookup`` over a batch of query keys; returns Q_M per row."""
        query_keys = np.asarray(query_keys, dtype=np.float64)
        if query_keys.ndim != 2 or query_keys.shape[1] != self.key_dim:
            raise ValueError(f"queries must be (B, {self.key_dim}), got {query_keys.shape}")
        out = np.empty(len(query_keys), dtype=np.float64)
        for start in range(0, len(query_keys), _QUERY_BLOCK):
            block = query_keys[start:start + _QUERY_BLOCK]
            q_m, _, _ = self._query_block(block, k)
            out[start:start + _QUERY_BLOCK] = q_m
        return out

    def _query_block(self, queries, k):
        if self.size == 0:
            raise ValueError("lookup on an empty memory table")
        if not 1 <= k <= self.size:
            raise ValueError(f"k={k} out of range for table of size {self.size}")
        # Selection runs on raw squared distances; epsilon shifts every
        # distance equally, so it cannot reorder neighbors or change the
        # softmax weights. It is added to the selected distances afterwards.
        dists = cdist(queries, self._keys[:self.size], "sqeuclidean")
        if k <= 3:
            # Repeated masked argmin: each pass takes the next-nearest record,
            # ties resolving to the lowest index, i.e. the same (distance,
            # index) order as the lexicographic sort below.
            rows = np.arange(len(queries))
            cols, dvals = [], []
            for j in range(k):
                nearest = dists.argmin(axis=1)
                cols.append(nearest)
                dvals.append(dists[rows, nearest].copy())
                if j < k - 1:
                    dists[rows, nearest] = np.inf
            idx = np.stack(cols, axis=1)
            d_sel = np.stack(dvals, axis=1)
        else:
            part = np.argpartition(dists, k - 1, axis=1)[:, :k]
            d_part = np.take_along_axis(dists, part, axis=1)
            order = np.lexsort((part, d_part), axis=1)
            idx = np.take_along_axis(part, order, axis=1)
            d_sel = np.take_along_axis(d_part, order, axis=1)
        d_sel = d_sel + self.epsilon
        # Softmax of negative distance over the retrieved set.
        shifted = d_sel - d_sel.min(axis=1, keepdims=True)
        w = np.exp(-shifted)
        w /= w.sum(axis=1, keepdims=True)
        q_m = (self._values[idx] * w).sum(axis=1)
        return q_m, idx, w

    # -- snapshot ------------------------------------------------------------
    def save(self, path):
        """Write keys and values as little-endian float64 after a (u, count) header."""
        with open(path, "wb") as fh:
            fh.write(struct.pack("<qq", self.key_dim, self.size))
            fh.write(np.ascontiguousarray(self.keys, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path, capacity=None, epsilon=1e-3, overflow="error"):
        with open(path, "rb") as fh:
            key_dim, count = struct.unpack("<qq", fh.read(16))
            keys = np.frombuffer(fh.read(count * key_dim * 8), dtype="<f8")
            values = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if keys.size != count * key_dim or values.size != count:
            raise ValueError("truncated memory snapshot")
        table = cls(key_dim, capacity or max(count, 1), epsilon=epsilon, overflow=overflow)
        table._keys[:count] = keys.reshape(count, key_dim)
        table._values[:count] = values
        table._count = count
        table.size = count
        return table

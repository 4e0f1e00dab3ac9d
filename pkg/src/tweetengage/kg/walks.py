"""Second-order biased random walks (node2vec) over a :class:`TypedGraph`.

The first step from a start node picks a neighbour with probability
proportional to the edge weight. Later steps, coming from ``prev`` and
standing on ``cur``, weight each candidate ``x`` by::

    w(cur, x) * (1/p if x == prev else 1 if x is adjacent to prev else 1/q)

Sampling uses rejection against the first-order distribution, which gives
exactly that law without materialising per-edge alias tables.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numba
import numpy as np

from .graph import TypedGraph


@dataclass(frozen=True)
class WalkParams:
    p: float = 1.0
    q: float = 1.0
    walk_length: int = 40
    walks_per_node: int = 10
    seed: int = 0

    def __post_init__(self) -> None:
        if not (self.p > 0 and self.q > 0):
            raise ValueError(f"p and q must be positive, got p={self.p}, q={self.q}")
        if self.walk_length < 1 or self.walks_per_node < 1:
            raise ValueError("walk_length and walks_per_node must be >= 1")


class WalkCorpus(Sequence):
    """Walks stored flat as node indices; indexing yields tuples of node keys."""

    def __init__(self, nodes: np.ndarray, offsets: np.ndarray, keys: list) -> None:
        self.nodes = nodes
        self.offsets = offsets
        self.keys = keys

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        if i < 0:
            i += len(self)
        if not 0 <= i < len(self):
            raise IndexError(i)
        return tuple(self.keys[j] for j in self.nodes[self.offsets[i]:self.offsets[i + 1]])

    def indices(self, i: int) -> np.ndarray:
        return self.nodes[self.offsets[i]:self.offsets[i + 1]]


@numba.njit(cache=True)
def _pick(indptr, indices, cumw, node):
    lo, hi = indptr[node], indptr[node + 1]
    base = cumw[lo - 1] if lo > 0 else 0.0
    u = base + np.random.random() * (cumw[hi - 1] - base)
    # first position whose cumulative weight exceeds u
    k = np.searchsorted(cumw[lo:hi], u, side="right")
    if k >= hi - lo:
        k = hi - lo - 1
    return indices[lo + k]


@numba.njit(cache=True)
def _adjacent(indptr, indices, a, b):
    lo, hi = indptr[a], indptr[a + 1]
    k = np.searchsorted(indices[lo:hi], b)
    return k < hi - lo and indices[lo + k] == b


@numba.njit(cache=True)
def _walks(indptr, indices, cumw, starts, walk_length, p, q, seed):
    np.random.seed(seed)
    n_walks = starts.shape[0]
    out = np.full((n_walks, walk_length), -1, dtype=np.int64)
    inv_p, inv_q = 1.0 / p, 1.0 / q
    max_bias = max(inv_p, 1.0, inv_q)
    biased = p != 1.0 or q != 1.0
    for w in range(n_walks):
        cur = starts[w]
        out[w, 0] = cur
        if indptr[cur + 1] == indptr[cur]:
            continue
        prev = cur
        cur = _pick(indptr, indices, cumw, cur)
        out[w, 1] = cur
        for step in range(2, walk_length):
            while True:
                cand = _pick(indptr, indices, cumw, cur)
                if not biased:
                    break
                if cand == prev:
                    bias = inv_p
                elif _adjacent(indptr, indices, prev, cand):
                    bias = 1.0
                else:
                    bias = inv_q
                if np.random.random() * max_bias < bias:
                    break
            prev = cur
            cur = cand
            out[w, step] = cur
    return out


def sample_walks(graph: TypedGraph, starts: np.ndarray, walk_length: int,
                 p: float = 1.0, q: float = 1.0, seed: int = 0) -> np.ndarray:
    """Walks from explicit start indices as an (n, walk_length) array.

    Cells after the end of a walk from an isolated node hold -1.
    """
    WalkParams(p=p, q=q, walk_length=walk_length)
    indptr, indices, weights = graph.adjacency()
    # running sum over the whole CSR; per-node ranges are differences of it
    cumw = np.cumsum(weights)
    return _walks(indptr, indices, cumw, np.asarray(starts, dtype=np.int64),
                  int(walk_length), float(p), float(q), int(seed))


def generate_walks(graph: TypedGraph, params: WalkParams) -> WalkCorpus:
    """``walks_per_node`` walks from every node, start order shuffled per round.

    Walks from isolated nodes have length 1.
    """
    if len(graph) == 0:
        raise ValueError("cannot walk an empty graph")
    rng = np.random.default_rng(params.seed)
    n = len(graph)
    starts = np.concatenate([rng.permutation(n) for _ in range(params.walks_per_node)])
    walk_seed = int(rng.integers(0, 2**31 - 1))
    mat = sample_walks(graph, starts, params.walk_length, params.p, params.q, walk_seed)
    lengths = (mat >= 0).sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    nodes = mat[mat >= 0]
    return WalkCorpus(nodes, offsets, list(graph.nodes))


def walks_from_keys(walks: Sequence[Sequence]) -> WalkCorpus:
    """Wrap arbitrary hashable-key walks as a corpus (keys in first-seen order)."""
    index: dict = {}
    key_list: list = []
    flat: list[int] = []
    offsets = [0]
    for walk in walks:
        for key in walk:
            j = index.get(key)
            if j is None:
                j = index[key] = len(key_list)
                key_list.append(key)
            flat.append(j)
        offsets.append(len(flat))
    return WalkCorpus(np.array(flat, dtype=np.int64), np.array(offsets, dtype=np.int64), key_list)

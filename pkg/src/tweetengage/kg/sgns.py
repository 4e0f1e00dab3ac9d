"""Skip-gram with negative sampling over walk corpora, plus the embedding table."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path

import numba
import numpy as np

from .graph import NAMESPACES, NodeKey
from .walks import WalkCorpus, walks_from_keys


class EmbeddingTable:
    """Dense vectors of one shared dimension keyed by node."""

    def __init__(self, keys: list, vectors: np.ndarray, losses: list[float] | None = None) -> None:
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] != len(keys):
            raise ValueError("need one vector row per key")
        if not np.all(np.isfinite(vectors)):
            raise ValueError("embedding entries must be finite")
        self.keys = list(keys)
        self.vectors = vectors
        self.index = {k: i for i, k in enumerate(self.keys)}
        self.losses = list(losses or [])

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return key in self.index

    def get(self, key) -> np.ndarray | None:
        i = self.index.get(key)
        return None if i is None else self.vectors[i]

    def __getitem__(self, key) -> np.ndarray:
        return self.vectors[self.index[key]]

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{len(self.keys)} {self.dimension}\n")
            for key, vec in zip(self.keys, self.vectors):
                fh.write(str(key) + " " + " ".join(repr(float(v)) for v in vec) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> EmbeddingTable:
        with open(path, encoding="utf-8") as fh:
            count, dim = (int(x) for x in fh.readline().split())
            keys, rows = [], []
            for lineno, line in enumerate(fh, start=2):
                parts = line.rstrip("\n").split(" ")
                if len(parts) != dim + 1:
                    raise ValueError(f"{path}:{lineno}: expected {dim + 1} fields")
                name = parts[0]
                ns = name.partition(":")[0]
                keys.append(NodeKey.parse(name) if ns in NAMESPACES else name)
                rows.append([float(v) for v in parts[1:]])
        if len(keys) != count:
            raise ValueError(f"{path}: header announces {count} vectors, found {len(keys)}")
        return cls(keys, np.array(rows, dtype=np.float64).reshape(count, dim))


@numba.njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def _alias_table(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Walker alias table for O(1) draws from a discrete distribution."""
    n = len(weights)
    scaled = weights * (n / weights.sum())
    prob = np.ones(n)
    alias = np.arange(n, dtype=np.int64)
    small = [i for i in range(n) if scaled[i] < 1.0]
    large = [i for i in range(n) if scaled[i] >= 1.0]
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] -= 1.0 - scaled[s]
        (small if scaled[l] < 1.0 else large).append(l)
    return prob, alias


@numba.njit(cache=True)
def _draw(prob, alias):
    x = np.random.random() * prob.shape[0]
    i = int(x)
    if i >= prob.shape[0]:
        i = prob.shape[0] - 1
    return i if x - i < prob[i] else alias[i]


@numba.njit(cache=True, fastmath=True)
def _sgns_epoch(tokens, offsets, w_in, w_out, noise_prob, noise_alias, window, negatives,
                lr0, min_lr, done, total):
    dim = w_in.shape[1]
    grad = np.zeros(dim, dtype=np.float32)
    loss = 0.0
    n_pairs = 0
    n_walks = offsets.shape[0] - 1
    for w in range(n_walks):
        lo, hi = offsets[w], offsets[w + 1]
        for i in range(lo, hi):
            lr = max(lr0 * (1.0 - done / total), min_lr)
            done += 1
            v = w_in[tokens[i]]
            reach = window - np.random.randint(0, window)  # shrunk window, as in word2vec
            for j in range(max(lo, i - reach), min(hi, i + reach + 1)):
                if j == i:
                    continue
                context = tokens[j]
                grad[:] = 0.0
                for d in range(negatives + 1):
                    if d == 0:
                        target = context
                    else:
                        target = _draw(noise_prob, noise_alias)
                        if target == context:
                            continue
                    u = w_out[target]
                    dot = np.float32(0.0)
                    for k in range(dim):
                        dot += v[k] * u[k]
                    if d == 0:
                        loss -= _log_sigmoid(dot)
                        g = np.float32((1.0 - 1.0 / (1.0 + np.exp(-dot))) * lr)
                    else:
                        loss -= _log_sigmoid(-dot)
                        g = np.float32(-lr / (1.0 + np.exp(-dot)))
                    for k in range(dim):
                        grad[k] += g * u[k]
                        u[k] += g * v[k]
                for k in range(dim):
                    v[k] += grad[k]
                n_pairs += 1
    return loss, n_pairs, done


@numba.njit(cache=True)
def _seed_numba(seed):
    np.random.seed(seed)


def train_embeddings(walks: WalkCorpus | Sequence[Sequence], dimension: int = 64, window: int = 5,
                     negatives: int = 5, epochs: int = 5, learning_rate: float = 0.025,
                     seed: int = 0) -> EmbeddingTable:
    """Train node vectors on walk co-occurrences.

    Input vectors start uniform in [-0.5/dim, 0.5/dim] and output vectors at
    zero; negatives come from the unigram distribution raised to 3/4; the
    learning rate decays linearly to 1e-4 of its start. ``table.losses`` holds
    the mean loss per (center, context) pair for each epoch.
    """
    for name, value in (("dimension", dimension), ("window", window),
                        ("negatives", negatives), ("epochs", epochs)):
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}")
    if not learning_rate > 0:
        raise ValueError("learning_rate must be positive")
    corpus = walks if isinstance(walks, WalkCorpus) else walks_from_keys(walks)
    if len(corpus) == 0 or len(corpus.nodes) == 0:
        raise ValueError("no walks to train on")

    present, tokens = np.unique(corpus.nodes, return_inverse=True)
    tokens = tokens.astype(np.int64).ravel()
    keys = [corpus.keys[j] for j in present]
    counts = np.bincount(tokens, minlength=len(keys)).astype(np.float64)
    noise_prob, noise_alias = _alias_table(counts ** 0.75)

    rng = np.random.default_rng(seed)
    w_in = ((rng.random((len(keys), dimension)) - 0.5) / dimension).astype(np.float32)
    w_out = np.zeros((len(keys), dimension), dtype=np.float32)
    _seed_numba(int(rng.integers(0, 2**31 - 1)))

    total = float(epochs * len(tokens))
    done = 0.0
    losses = []
    for _ in range(epochs):
        loss, n_pairs, done = _sgns_epoch(tokens, corpus.offsets, w_in, w_out, noise_prob, noise_alias,
                                          window, negatives, learning_rate,
                                          learning_rate * 1e-4, done, total)
        losses.append(loss / max(n_pairs, 1))
    return EmbeddingTable(keys, w_in, losses)

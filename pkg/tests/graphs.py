"""Small graphs with known structure for walk and embedding checks."""

from __future__ import annotations

import numpy as np

from tweetengage.kg import NodeKey, TypedGraph


def user(name: str) -> NodeKey:
    return NodeKey("User", name)


def barbell(clique: int = 50) -> TypedGraph:
    """Two cliques joined through one bridge node (2 * clique + 1 nodes)."""
    g = TypedGraph()
    for c in "ab":
        for i in range(clique):
            for j in range(i + 1, clique):
                g.add_edge("follow", user(f"{c}{i}"), user(f"{c}{j}"), 1.0)
    g.add_edge("follow", user("a0"), user("bridge"), 1.0)
    g.add_edge("follow", user("bridge"), user("b0"), 1.0)
    return g


def clique_separation(table) -> float:
    """Mean intra-clique cosine minus mean inter-clique cosine (bridge excluded)."""
    V = table.vectors / np.linalg.norm(table.vectors, axis=1, keepdims=True)
    side = np.array([k.local_id[0] if k.local_id != "bridge" else "-" for k in table.keys])
    S = V @ V.T
    intra = []
    for c in "ab":
        m = side == c
        n = int(m.sum())
        intra.append((S[np.ix_(m, m)].sum() - np.trace(S[np.ix_(m, m)])) / (n * (n - 1)))
    inter = S[np.ix_(side == "a", side == "b")].mean()
    return float(np.mean(intra) - inter)


def lattice(size: int) -> TypedGraph:
    g = TypedGraph()
    for x in range(size):
        for y in range(size):
            if x + 1 < size:
                g.add_edge("follow", user(f"{x},{y}"), user(f"{x + 1},{y}"), 1.0)
            if y + 1 < size:
                g.add_edge("follow", user(f"{x},{y}"), user(f"{x},{y + 1}"), 1.0)
    return g

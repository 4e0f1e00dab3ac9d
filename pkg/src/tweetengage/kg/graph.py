"""Typed heterogeneous graph built from engagement logs."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from ..records import ENGAGEMENTS, EngagementRecord

NAMESPACES = ("User", "Tweet", "Hashtag", "Domain", "Language", "TweetType", "Media", "FollowerClass")

# edge type -> (source namespace, target namespace)
EDGE_TYPES: dict[str, tuple[str, str]] = {
    "follow": ("User", "User"),
    "write": ("User", "Tweet"),
    "like": ("User", "Tweet"),
    "reply": ("User", "Tweet"),
    "retweet": ("User", "Tweet"),
    "quote": ("User", "Tweet"),
    "has_type": ("Tweet", "TweetType"),
    "has_media": ("Tweet", "Media"),
    "has_lang": ("Tweet", "Language"),
    "has_hashtag": ("Tweet", "Hashtag"),
    "has_domain": ("Tweet", "Domain"),
    "has_class": ("User", "FollowerClass"),
}

# inclusive upper bound of each follower class
FOLLOWER_CLASS_MAX = (150, 500, 1_000, 10_000, 100_000, 1_000_000, 10_000_000, 200_000_000)

CHALLENGE_EDGES = ("follow", "write", "like", "has_domain", "has_hashtag")


class NodeKey(NamedTuple):
    namespace: str
    local_id: str

    def __str__(self) -> str:
        return f"{self.namespace}:{self.local_id}"

    @classmethod
    def parse(cls, text: str) -> NodeKey:
        namespace, sep, local_id = text.partition(":")
        if not sep or namespace not in NAMESPACES:
            raise ValueError(f"not a node key: {text!r}")
        return cls(namespace, local_id)


@dataclass(frozen=True)
class EdgeSetting:
    enabled: bool = True
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not self.weight > 0:
            raise ValueError(f"edge weight must be positive, got {self.weight}")


def full_edge_config() -> dict[str, EdgeSetting]:
    """Every edge type enabled; attribute edges at half weight."""
    return {t: EdgeSetting(True, 0.5 if t.startswith("has_") else 1.0) for t in EDGE_TYPES}


def default_edge_config() -> dict[str, EdgeSetting]:
    """Only the follow, write, like, has_domain and has_hashtag edges."""
    cfg = full_edge_config()
    return {t: EdgeSetting(t in CHALLENGE_EDGES, s.weight) for t, s in cfg.items()}


def edge_config_from_dict(data: Mapping[str, Mapping | EdgeSetting]) -> dict[str, EdgeSetting]:
    cfg = default_edge_config()
    for name, value in data.items():
        if name not in EDGE_TYPES:
            raise ValueError(f"unknown edge type {name!r}")
        cfg[name] = value if isinstance(value, EdgeSetting) else EdgeSetting(**value)
    return cfg


def follower_class(follower_count: int) -> int:
    """Smallest class whose inclusive maximum covers the count; clamps at 7."""
    if follower_count < 0:
        raise ValueError("follower_count must be non-negative")
    return min(bisect.bisect_left(FOLLOWER_CLASS_MAX, follower_count), 7)


def media_values(media: Iterable[str]) -> list[str]:
    media = list(media)
    values = list(dict.fromkeys(media))
    if media.count("Photo") >= 2:
        values[values.index("Photo")] = "Photos"
    return values


class TypedGraph:
    """Node/edge store; duplicate (type, source, target) edges collapse.

    Direction is kept in storage. :meth:`adjacency` exposes the undirected
    view used by random walks, where parallel edges between two nodes add up.
    """

    def __init__(self) -> None:
        self.nodes: list[NodeKey] = []
        self.index: dict[NodeKey, int] = {}
        self.edges: dict[tuple[str, int, int], float] = {}
        self._csr: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.nodes)

    def add_node(self, key: NodeKey) -> int:
        idx = self.index.get(key)
        if idx is None:
            if key.namespace not in NAMESPACES:
                raise ValueError(f"unknown namespace {key.namespace!r}")
            idx = self.index[key] = len(self.nodes)
            self.nodes.append(key)
            self._csr = None
        return idx

    def add_edge(self, edge_type: str, source: NodeKey, target: NodeKey, weight: float) -> None:
        expected = EDGE_TYPES.get(edge_type)
        if expected is None:
            raise ValueError(f"unknown edge type {edge_type!r}")
        if (source.namespace, target.namespace) != expected:
            raise ValueError(f"{edge_type} edge needs {expected}, got "
                             f"({source.namespace}, {target.namespace})")
        if not weight > 0:
            raise ValueError("edge weight must be positive")
        s, t = self.add_node(source), self.add_node(target)
        if (edge_type, s, t) not in self.edges:
            self.edges[(edge_type, s, t)] = float(weight)
            self._csr = None

    def edge_count(self, edge_type: str | None = None) -> int:
        if edge_type is None:
            return len(self.edges)
        return sum(1 for (t, _, _) in self.edges if t == edge_type)

    def has_edge(self, edge_type: str, source: NodeKey, target: NodeKey) -> bool:
        s, t = self.index.get(source), self.index.get(target)
        return s is not None and t is not None and (edge_type, s, t) in self.edges

    def adjacency(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Undirected CSR (indptr, indices, weights); neighbours sorted by index."""
        if self._csr is None:
            pair_weight: dict[tuple[int, int], float] = {}
            for (_, s, t), w in self.edges.items():
                if s == t:
                    continue
                for a, b in ((s, t), (t, s)):
                    pair_weight[(a, b)] = pair_weight.get((a, b), 0.0) + w
            n = len(self.nodes)
            if pair_weight:
                pairs = np.array(list(pair_weight.keys()), dtype=np.int64)
                weights = np.array(list(pair_weight.values()), dtype=np.float64)
                order = np.lexsort((pairs[:, 1], pairs[:, 0]))
                pairs, weights = pairs[order], weights[order]
                counts = np.bincount(pairs[:, 0], minlength=n)
                indices = pairs[:, 1].copy()
            else:
                counts = np.zeros(n, dtype=np.int64)
                indices = np.zeros(0, dtype=np.int64)
                weights = np.zeros(0, dtype=np.float64)
            indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
            self._csr = (indptr, indices, weights)
        return self._csr

    def degree(self, key: NodeKey) -> int:
        indptr, _, _ = self.adjacency()
        i = self.index[key]
        return int(indptr[i + 1] - indptr[i])

    def neighbors(self, key: NodeKey) -> dict[NodeKey, float]:
        indptr, indices, weights = self.adjacency()
        i = self.index[key]
        return {self.nodes[j]: float(w)
                for j, w in zip(indices[indptr[i]:indptr[i + 1]], weights[indptr[i]:indptr[i + 1]])}

    def write_edge_list(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for (etype, s, t), w in self.edges.items():
                src, tgt = self.nodes[s], self.nodes[t]
                fh.write(f"{etype}\t{src.namespace}\t{src.local_id}\t"
                         f"{tgt.namespace}\t{tgt.local_id}\t{float(w)!r}\n")

    @classmethod
    def read_edge_list(cls, path: str | Path) -> TypedGraph:
        graph = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 6:
                    raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(parts)}")
                etype, sns, sid, tns, tid, w = parts
                graph.add_edge(etype, NodeKey(sns, sid), NodeKey(tns, tid), float(w))
        return graph


def build_graph(records: Iterable[EngagementRecord],
                edge_config: Mapping[str, EdgeSetting] | None = None) -> TypedGraph:
    """Populate the graph record by record.

    Optional edges (media, hashtags, domains) only appear when the record has
    values for them; engagement edges only for engagements that happened.
    """
    cfg = default_edge_config() if edge_config is None else dict(edge_config)
    on = {t for t, s in cfg.items() if s.enabled}
    w = {t: s.weight for t, s in cfg.items()}
    graph = TypedGraph()

    def edge(etype: str, src: NodeKey, tgt: NodeKey) -> None:
        if etype in on:
            graph.add_edge(etype, src, tgt, w[etype])

    for r in records:
        tweet = NodeKey("Tweet", r.tweet_id)
        author = NodeKey("User", r.author.user_id)
        reader = NodeKey("User", r.reader.user_id)
        edge("write", author, tweet)
        edge("has_type", tweet, NodeKey("TweetType", r.tweet_type))
        edge("has_lang", tweet, NodeKey("Language", r.language))
        for user in (r.author, r.reader):
            edge("has_class", NodeKey("User", user.user_id),
                 NodeKey("FollowerClass", str(follower_class(user.follower_count))))
        for m in media_values(r.present_media):
            edge("has_media", tweet, NodeKey("Media", m))
        for h in r.hashtags:
            edge("has_hashtag", tweet, NodeKey("Hashtag", h))
        for d in r.present_domains:
            edge("has_domain", tweet, NodeKey("Domain", d))
        if r.reader_follows_author:
            edge("follow", reader, author)
        for e, ts in zip(ENGAGEMENTS, r.engagement_times()):
            if ts is not None:
                edge(e.label, reader, tweet)
    return graph

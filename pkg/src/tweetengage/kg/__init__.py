"""Knowledge-graph feature group: graph construction, walks and embeddings."""

from .embed import d2_columns, embed_record, embed_records
from .graph import (
    CHALLENGE_EDGES,
    EDGE_TYPES,
    FOLLOWER_CLASS_MAX,
    EdgeSetting,
    NodeKey,
    TypedGraph,
    build_graph,
    default_edge_config,
    edge_config_from_dict,
    follower_class,
    full_edge_config,
)
from .sgns import EmbeddingTable, train_embeddings
from .walks import WalkCorpus, WalkParams, generate_walks, sample_walks, walks_from_keys

__all__ = [
    "CHALLENGE_EDGES", "EDGE_TYPES", "FOLLOWER_CLASS_MAX", "EdgeSetting", "EmbeddingTable",
    "NodeKey", "TypedGraph", "WalkCorpus", "WalkParams", "build_graph", "d2_columns",
    "default_edge_config", "edge_config_from_dict", "embed_record", "embed_records",
    "follower_class", "full_edge_config", "generate_walks", "sample_walks",
    "train_embeddings", "walks_from_keys",
]

"""Reference-free factuality scoring of generated text against a knowledge graph."""

from faith.kg_store import (
    EdgeRecord,
    GraphLoadError,
    IndexFormatError,
    KnowledgeGraph,
    build_index,
    load_edge_list,
    load_index,
    persist_index,
)

__version__ = "0.1.0"

__all__ = [
    "EdgeRecord",
    "GraphLoadError",
    "IndexFormatError",
    "KnowledgeGraph",
    "build_index",
    "load_edge_list",
    "load_index",
    "persist_index",
]

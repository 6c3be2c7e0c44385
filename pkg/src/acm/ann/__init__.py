from acm.ann.brute import BruteForceIndex, brute_search
from acm.ann.hnsw import (
    HnswIndex,
    HnswParams,
    SelectStrategy,
    assign_level,
    level_from_uniform,
    select_neighbors,
)

__all__ = [
    "BruteForceIndex",
    "HnswIndex",
    "HnswParams",
    "SelectStrategy",
    "assign_level",
    "brute_search",
    "level_from_uniform",
    "select_neighbors",
]

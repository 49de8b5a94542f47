"""A miniature tablet-server model: sorted key-value tablets with combiners."""

from .combiners import (
    Combiner,
    LatestValue,
    StreamCombiner,
    SummingCombiner,
    decode_int,
    encode_int,
)
from .runs import DiskRun, MemoryRun, build_run
from .splits import SplitPoints, compute_equal_splits, row_counts, splits_from_counts
from .table import (
    Engine,
    EngineError,
    Entry,
    Key,
    Table,
    TableExistsError,
    TableNotFoundError,
    Tablet,
    dump_tsv,
    gc_paused,
)

__all__ = [
    "Combiner", "DiskRun", "Engine", "EngineError", "Entry", "Key", "LatestValue",
    "MemoryRun", "SplitPoints", "StreamCombiner", "SummingCombiner", "Table",
    "TableExistsError", "TableNotFoundError", "Tablet", "build_run",
    "compute_equal_splits", "decode_int", "dump_tsv", "encode_int", "gc_paused", "row_counts",
    "splits_from_counts",
]

from ntuple2048.ntuple.shape import (
    ARCHITECTURES,
    DEFAULT_ARCHITECTURE,
    Architecture,
    TupleShape,
    get_architecture,
    parameter_count,
)
from ntuple2048.ntuple.symmetry import symmetric_views
from ntuple2048.ntuple.network import NTupleNetwork, stage_of, tuple_index
from ntuple2048.ntuple.fold import fold_redundant
from ntuple2048.ntuple.io import load, save

__all__ = [
    "ARCHITECTURES",
    "DEFAULT_ARCHITECTURE",
    "Architecture",
    "TupleShape",
    "get_architecture",
    "parameter_count",
    "symmetric_views",
    "NTupleNetwork",
    "stage_of",
    "tuple_index",
    "fold_redundant",
    "load",
    "save",
]

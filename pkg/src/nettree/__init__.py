"""Semi-compressed local net-trees with randomized incremental construction."""

from ._backend import BACKEND
from .errors import (
    DuplicatePointError,
    InputError,
    InvariantError,
    NetTreeError,
    ParameterError,
    StateError,
    StructureError,
)
from .metric import MetricSpace, Point, distance, load_points
from .tree_core import NEG_INF, POS_INF, NetTree, NodeKey, Params, new_tree, radius
from .construct import build, insert_point, insertion_level

__version__ = "0.1.0"

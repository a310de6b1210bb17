"""Discrete dynamic graph representation learning with a structure-reinforced
graph transformer over weighted multi-relation difference graphs."""

from .autodiff import Tensor, no_grad
from .diffgraph import DiffGraph, EdgeKind, EdgeState, build_diff_sequence
from .model import SGTConfig, SGTModel
from .snapshots import parse_edge_list, slice_snapshots, split_train_test
from .structures import PairStructure, PathPolicy, all_pairs_structures
from .training import TrainConfig, fit

__all__ = [
    "Tensor", "no_grad", "DiffGraph", "EdgeKind", "EdgeState",
    "build_diff_sequence", "SGTConfig", "SGTModel", "parse_edge_list",
    "slice_snapshots", "split_train_test", "PairStructure", "PathPolicy",
    "all_pairs_structures", "TrainConfig", "fit",
]

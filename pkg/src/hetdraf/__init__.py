"""Oblique and heterogeneous random forests with double (node-level) bagging,
plus the rank statistics used to compare classifiers across datasets."""

from .data import Dataset, DataError, IndexSet, bootstrap, load_csv, make_xor, stratified_kfold
from .forest import ForestModel, ModelFormatError, Variant, evaluate, load, predict, save, train_forest
from .tree import GrowthConfig, grow_tree, predict_tree

__version__ = "0.1.0"

__all__ = [
    "Dataset", "DataError", "IndexSet", "bootstrap", "load_csv", "make_xor", "stratified_kfold",
    "ForestModel", "ModelFormatError", "Variant", "evaluate", "load", "predict", "save", "train_forest",
    "GrowthConfig", "grow_tree", "predict_tree",
]

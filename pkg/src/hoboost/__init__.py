"""Gradient-boosted decision trees with order 2, 3 and 4 leaf-weight updates."""
from .booster import BoostConfig, Model, RoundRecord, evaluate, fit, predict, predict_proba
from .data import Dataset, load_csv, make_synthetic, split_dataset
from .leaf_solver import GradStats, SolverConfig, leaf_score
from .losses import GradBundle, LossKind, derivatives, loss_value
from .model_store import load, save
from .tree import Tree, build_tree, find_best_split, predict_tree

__all__ = [
    "BoostConfig", "Model", "RoundRecord", "evaluate", "fit", "predict", "predict_proba",
    "Dataset", "load_csv", "make_synthetic", "split_dataset",
    "GradStats", "SolverConfig", "leaf_score",
    "GradBundle", "LossKind", "derivatives", "loss_value",
    "load", "save",
    "Tree", "build_tree", "find_best_split", "predict_tree",
]

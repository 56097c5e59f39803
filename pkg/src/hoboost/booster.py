"""Additive training loop and ensemble prediction."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional

import numpy as np

from .data import Dataset
from .leaf_solver import SolverConfig
from .losses import LossKind, derivatives, loss_value, sigmoid
from .tree import Tree, grow_tree, predict_tree_batch

logger = logging.getLogger(__name__)

BASE_SCORE_CLAMP = 10.0


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 1000
    learning_rate: float = 0.1
    order: int = 2
    lam: float = 1.0
    max_depth: int = 6
    min_child_rows: int = 1
    min_gain: float = 0.0
    loss: str = "logloss"
    early_stop_rounds: Optional[int] = None
    seed: int = 0
    cubic_mode: str = "halley"
    trust_alpha: float = 1.0
    fourth_order_formula: str = "classical"

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss).value)
        if self.n_rounds < 0:
            raise ValueError("n_rounds must be >= 0")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_child_rows < 1:
            raise ValueError("min_child_rows must be >= 1")
        if self.early_stop_rounds is not None and self.early_stop_rounds < 1:
            raise ValueError("early_stop_rounds must be >= 1")
        self.solver  # validates order, lambda, modes

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(
            order=self.order,
            lam=self.lam,
            cubic_mode=self.cubic_mode,
            trust_alpha=self.trust_alpha,
            fourth_order_formula=self.fourth_order_formula,
        )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "BoostConfig":
        names = {f.name for f in fields(cls)}
        missing = names - d.keys()
        if missing:
            raise KeyError(f"config is missing fields: {sorted(missing)}")
        return cls(**{k: d[k] for k in names})


@dataclass(frozen=True, eq=False)
class Model:
    base_score: float
    trees: tuple[Tree, ...]
    config: BoostConfig
    feature_count: int

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if not math.isfinite(self.base_score):
            raise ValueError("base_score must be finite")


@dataclass
class RoundRecord:
    round: int
    train_loss: float
    valid_loss: Optional[float] = None
    valid_accuracy: Optional[float] = None
    cumulative_time_ms: float = 0.0
    fallback_count: int = 0
    extra: dict = field(default_factory=dict)


def initial_score(kind, labels) -> float:
    """Loss-minimising constant prediction."""
    mean = float(np.mean(labels))
    if LossKind(kind) is LossKind.SQUARED_ERROR:
        return mean
    if mean <= 0.0:
        return -BASE_SCORE_CLAMP
    if mean >= 1.0:
        return BASE_SCORE_CLAMP
    return float(np.clip(math.log(mean / (1.0 - mean)), -BASE_SCORE_CLAMP, BASE_SCORE_CLAMP))


def accuracy(labels, scores) -> float:
    """Share of rows where ``score > 0`` agrees with ``label == 1``."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("accuracy of an empty dataset is undefined")
    return float(np.mean((np.asarray(scores) > 0.0) == (labels == 1.0)))


def _check_features(model_or_count, data: Dataset):
    expected = getattr(model_or_count, "feature_count", model_or_count)
    if data.n_features != expected:
        raise ValueError(f"dataset has {data.n_features} features, model expects {expected}")


# callback(record, model_so_far) -> True to stop training
Callback = Callable[[RoundRecord, Model], bool]


def fit(
    train: Dataset,
    config: BoostConfig,
    valid: Dataset | None = None,
    base_score: float | None = None,
    callback: Callback | None = None,
):
    """Train an ensemble; returns ``(model, records)``.

    Each round computes the loss derivatives at the current predictions,
    grows one tree with the configured-order leaf solver and adds the
    shrunken tree to the running predictions. ``cumulative_time_ms`` covers
    that work only; metric evaluation and callbacks are not timed.
    """
    kind = LossKind(config.loss)
    if train.n_rows == 0:
        raise ValueError("training set is empty")
    if kind is LossKind.LOGLOSS:
        train.check_binary_labels()
    if valid is not None:
        _check_features(train.n_features, valid)
    solver = config.solver
    eta = config.learning_rate
    rows = np.arange(train.n_rows)

    base = initial_score(kind, train.labels) if base_score is None else float(base_score)
    pred = np.full(train.n_rows, base)
    valid_pred = None if valid is None else np.full(valid.n_rows, base)

    trees: list[Tree] = []
    records: list[RoundRecord] = []
    elapsed = 0.0
    best_valid = math.inf
    since_best = 0
    for t in range(1, config.n_rounds + 1):
        start = time.perf_counter()
        grads = derivatives(kind, train.labels, pred, config.order)
        grown = grow_tree(
            train, rows, grads, solver,
            config.max_depth, config.min_child_rows, config.min_gain,
        )
        tree = grown.tree
        pred = pred + eta * tree.weight[grown.leaf_of_row]
        elapsed += time.perf_counter() - start
        trees.append(tree)

        rec = RoundRecord(
            round=t,
            train_loss=loss_value(kind, train.labels, pred),
            cumulative_time_ms=elapsed * 1000.0,
            fallback_count=grown.n_fallbacks,
        )
        if valid is not None:
            valid_pred = valid_pred + eta * predict_tree_batch(tree, valid.columns)
            rec.valid_loss = loss_value(kind, valid.labels, valid_pred)
            if kind is LossKind.LOGLOSS:
                rec.valid_accuracy = accuracy(valid.labels, valid_pred)
        records.append(rec)
        logger.debug("round %d train_loss %.6f", t, rec.train_loss)

        if callback is not None and callback(rec, Model(base, trees, config, train.n_features)):
            break
        if valid is not None and config.early_stop_rounds is not None:
            if rec.valid_loss < best_valid:
                best_valid = rec.valid_loss
                since_best = 0
            else:
                since_best += 1
                if since_best >= config.early_stop_rounds:
                    logger.info("early stop at round %d", t)
                    break

    return Model(base, trees, config, train.n_features), records


def predict(model: Model, data: Dataset) -> np.ndarray:
    """Raw scores ``base_score + sum(eta * tree(x))``, trees added in order."""
    _check_features(model, data)
    eta = model.config.learning_rate
    out = np.full(data.n_rows, model.base_score)
    for tree in model.trees:
        out = out + eta * predict_tree_batch(tree, data.columns)
    return out


def predict_proba(model: Model, data: Dataset) -> np.ndarray:
    if model.config.loss != LossKind.LOGLOSS.value:
        raise ValueError("probabilities are only defined for logloss models")
    return sigmoid(predict(model, data))


def evaluate(model: Model, data: Dataset) -> tuple[float, float]:
    """Summed loss and accuracy (raw score > 0 predicts class 1)."""
    if data.n_rows == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    scores = predict(model, data)
    return loss_value(model.config.loss, data.labels, scores), accuracy(data.labels, scores)

"""JSON model documents with bit-exact float round trip.

Floats are written by ``json`` using ``repr``, the shortest decimal string
that parses back to the same 64-bit value. See ``docs/model_format.md`` for
the grammar.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .booster import BoostConfig, Model
from .tree import LEAF, Tree

FORMAT_NAME = "hoboost-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


class SchemaError(ModelFormatError):
    pass


class VersionError(ModelFormatError):
    pass


def _tree_to_record(tree: Tree, node: int = 0) -> dict:
    if tree.feature[node] == LEAF:
        return {
            "type": "leaf",
            "weight": float(tree.weight[node]),
            "row_count": int(tree.row_count[node]),
        }
    return {
        "type": "split",
        "feature": int(tree.feature[node]),
        "threshold": float(tree.threshold[node]),
        "row_count": int(tree.row_count[node]),
        "left": _tree_to_record(tree, int(tree.left[node])),
        "right": _tree_to_record(tree, int(tree.right[node])),
    }


def _require(record: dict, key: str, kind, where: str):
    if key not in record:
        raise SchemaError(f"{where}: missing field {key!r}")
    value = record[key]
    if kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise SchemaError(f"{where}: field {key!r} has wrong type {type(value).__name__}")
    if kind is float and not math.isfinite(value):
        raise ModelFormatError(f"{where}: field {key!r} is not finite")
    return value


def _tree_from_record(record, where: str) -> Tree:
    cols = {k: [] for k in ("feature", "threshold", "left", "right", "weight", "row_count")}

    def visit(rec, path):
        if not isinstance(rec, dict):
            raise SchemaError(f"{path}: node must be an object")
        node = len(cols["feature"])
        for arr in cols.values():
            arr.append(0)
        kind = _require(rec, "type", str, path)
        cols["row_count"][node] = _require(rec, "row_count", int, path) if "row_count" in rec else 0
        if kind == "leaf":
            cols["feature"][node] = LEAF
            cols["left"][node] = cols["right"][node] = LEAF
            cols["threshold"][node] = 0.0
            cols["weight"][node] = float(_require(rec, "weight", float, path))
        elif kind == "split":
            feature = _require(rec, "feature", int, path)
            if feature < 0:
                raise SchemaError(f"{path}: negative feature index")
            cols["feature"][node] = feature
            cols["threshold"][node] = float(_require(rec, "threshold", float, path))
            cols["weight"][node] = 0.0
            for side in ("left", "right"):
                _require(rec, side, dict, path)
            cols["left"][node] = visit(rec["left"], path + ".left")
            cols["right"][node] = visit(rec["right"], path + ".right")
        else:
            raise SchemaError(f"{path}: unknown node type {kind!r}")
        return node

    visit(record, where)
    try:
        return Tree(**cols)
    except ValueError as exc:
        raise ModelFormatError(f"{where}: {exc}") from None


def to_document(model: Model) -> dict:
    return {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "base_score": float(model.base_score),
        "feature_count": int(model.feature_count),
        "config": model.config.to_dict(),
        "trees": [_tree_to_record(t) for t in model.trees],
    }


def from_document(doc) -> Model:
    if not isinstance(doc, dict):
        raise SchemaError("model document must be a JSON object")
    if _require(doc, "format", str, "document") != FORMAT_NAME:
        raise SchemaError(f"document is not a {FORMAT_NAME} file")
    version = _require(doc, "format_version", int, "document")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported format_version {version}; expected {FORMAT_VERSION}")
    base = float(_require(doc, "base_score", float, "document"))
    feature_count = _require(doc, "feature_count", int, "document")
    config_rec = _require(doc, "config", dict, "document")
    try:
        config = BoostConfig.from_dict(config_rec)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"config: {exc}") from None
    trees_rec = _require(doc, "trees", list, "document")
    trees = [_tree_from_record(rec, f"trees[{i}]") for i, rec in enumerate(trees_rec)]
    for i, tree in enumerate(trees):
        if tree.feature.size and tree.feature.max() >= feature_count:
            raise ModelFormatError(f"trees[{i}] splits on a feature beyond feature_count")
    return Model(base, trees, config, feature_count)


def dumps(model: Model) -> str:
    return json.dumps(to_document(model), indent=1, allow_nan=False) + "\n"


def _reject_constant(name):
    raise ModelFormatError(f"non-finite number {name} in model document")


def loads(text: str) -> Model:
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not a valid JSON document: {exc}") from None
    return from_document(doc)


def save(model: Model, path) -> None:
    Path(path).write_text(dumps(model))


def load(path) -> Model:
    return loads(Path(path).read_text())

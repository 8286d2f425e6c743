"""Versioned JSON serialization for trained models.

Floats are written with repr (shortest round-trip form), so every weight,
threshold, and variance survives save/load bit-exactly.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .density import KdxModel, PolytopeModel
from .errors import InvalidInputError
from .forest import DecisionTree, ForestConfig, ForestModel
from .network import NetConfig, ReluNetModel
from .signatures import FOREST, NET, MembershipSignature

SCHEMA_VERSION = 1


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=np.float64).ravel()]


def _ints(a):
    return [int(v) for v in np.asarray(a).ravel()]


def _tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "children_left": _ints(tree.children_left),
        "children_right": _ints(tree.children_right),
        "feature": _ints(tree.feature),
        "threshold": _floats(tree.threshold),
        "leaf_counts": [_ints(row) for row in tree.leaf_counts],
    }


def _tree_from_dict(d: dict) -> DecisionTree:
    return DecisionTree(
        children_left=np.array(d["children_left"], dtype=np.int64),
        children_right=np.array(d["children_right"], dtype=np.int64),
        feature=np.array(d["feature"], dtype=np.int64),
        threshold=np.array(d["threshold"], dtype=np.float64),
        leaf_counts=np.array(d["leaf_counts"], dtype=np.int64),
    )


def _forest_to_dict(model: ForestModel) -> dict:
    return {
        "trees": [_tree_to_dict(t) for t in model.trees],
        "tree_count": model.tree_count,
        "class_count": model.class_count,
        "feature_count": model.feature_count,
        "seed": model.seed,
        "config": vars(model.config),
    }


def _forest_from_dict(d: dict) -> ForestModel:
    return ForestModel(
        trees=[_tree_from_dict(t) for t in d["trees"]],
        tree_count=d["tree_count"],
        class_count=d["class_count"],
        feature_count=d["feature_count"],
        seed=d["seed"],
        config=ForestConfig(**d["config"]),
    )


def _net_to_dict(model: ReluNetModel) -> dict:
    cfg = vars(model.config).copy()
    cfg["hidden_widths"] = list(cfg["hidden_widths"])
    return {
        "weights": [[_floats(row) for row in W] for W in model.weights],
        "biases": [_floats(b) for b in model.biases],
        "class_count": model.class_count,
        "seed": model.seed,
        "config": cfg,
    }


def _net_from_dict(d: dict) -> ReluNetModel:
    cfg = d["config"].copy()
    cfg["hidden_widths"] = tuple(cfg["hidden_widths"])
    return ReluNetModel(
        weights=[np.array(W, dtype=np.float64) for W in d["weights"]],
        biases=[np.array(b, dtype=np.float64) for b in d["biases"]],
        class_count=d["class_count"],
        seed=d["seed"],
        config=NetConfig(**cfg),
    )


def _signature_to_dict(sig: MembershipSignature) -> dict:
    if sig.kind == FOREST:
        return {"kind": FOREST, "leaves": _ints(sig.forest_leaves)}
    return {"kind": NET, "layers": [_ints(a) for a in sig.net_activations]}


def _signature_from_dict(d: dict) -> MembershipSignature:
    if d["kind"] == FOREST:
        return MembershipSignature(kind=FOREST, forest_leaves=np.array(d["leaves"], dtype=np.int64))
    return MembershipSignature(
        kind=NET,
        net_activations=tuple(np.array(a, dtype=np.uint8) for a in d["layers"]),
    )


def _kdx_to_dict(model: KdxModel) -> dict:
    return {
        "polytopes": [
            {
                "center": _floats(p.center),
                "variance_diag": _floats(p.variance_diag),
                "weighted_class_counts": _floats(p.weighted_class_counts),
                "representative_signature": _signature_to_dict(p.representative_signature),
                "member_count": p.member_count,
            }
            for p in model.polytopes
        ],
        "class_priors": _floats(model.class_priors),
        "bias": float(model.bias),
        "sample_count": model.sample_count,
        "distance_mode": model.distance_mode,
        "class_weight_totals": _floats(model.class_weight_totals),
    }


def _kdx_from_dict(d: dict) -> KdxModel:
    return KdxModel(
        polytopes=[
            PolytopeModel(
                center=np.array(p["center"], dtype=np.float64),
                variance_diag=np.array(p["variance_diag"], dtype=np.float64),
                weighted_class_counts=np.array(p["weighted_class_counts"], dtype=np.float64),
                representative_signature=_signature_from_dict(p["representative_signature"]),
                member_count=p["member_count"],
            )
            for p in d["polytopes"]
        ],
        class_priors=np.array(d["class_priors"], dtype=np.float64),
        bias=d["bias"],
        sample_count=d["sample_count"],
        distance_mode=d["distance_mode"],
        class_weight_totals=np.array(d["class_weight_totals"], dtype=np.float64),
    )


_TO = {
    ForestModel: ("forest", _forest_to_dict),
    ReluNetModel: ("relu_net", _net_to_dict),
    KdxModel: ("kdx", _kdx_to_dict),
}
_FROM = {
    "forest": _forest_from_dict,
    "relu_net": _net_from_dict,
    "kdx": _kdx_from_dict,
}


def write_json_atomic(payload: str, path) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(model, path) -> None:
    for cls, (name, encode) in _TO.items():
        if isinstance(model, cls):
            doc = {"schema_version": SCHEMA_VERSION, "model_type": name, "payload": encode(model)}
            write_json_atomic(json.dumps(doc, sort_keys=True, separators=(",", ":")), path)
            return
    raise InvalidInputError(f"cannot serialize object of type {type(model).__name__}")


def load_model(path):
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported model schema version: {version!r}")
    decode = _FROM.get(doc.get("model_type"))
    if decode is None:
        raise InvalidInputError(f"unknown model type: {doc.get('model_type')!r}")
    return decode(doc["payload"])

"""Versioned JSON model files.

The document is self-describing and round-trips bit-exactly: floats are
written with Python's shortest exact repr, and write -> read -> write
produces identical bytes. Unknown format versions are rejected on load.
"""

from __future__ import annotations

import json

import numpy as np

from .dataset import PreprocessStats
from .forest import Forest
from .tree import InternalNode, LeafNode, Tree

FORMAT_VERSION = 1
_KIND = "co2forest-model"


def _tree_to_doc(t: Tree) -> dict:
    nodes = []
    for node in t.nodes:
        if isinstance(node, InternalNode):
            nodes.append(
                {"type": "internal", "w": node.w.tolist(), "left": node.left, "right": node.right}
            )
        else:
            nodes.append({"type": "leaf", "theta": node.theta.tolist()})
    return {"depth": t.depth, "nodes": nodes}


def _tree_from_doc(doc: dict, k: int, p: int) -> Tree:
    nodes = []
    for rec in doc["nodes"]:
        if rec["type"] == "internal":
            nodes.append(
                InternalNode(
                    w=np.asarray(rec["w"], dtype=np.float64),
                    left=int(rec["left"]),
                    right=int(rec["right"]),
                )
            )
        elif rec["type"] == "leaf":
            nodes.append(LeafNode(theta=np.asarray(rec["theta"], dtype=np.float64)))
        else:
            raise ValueError(f"unknown node type {rec['type']!r}")
    return Tree(nodes=nodes, depth=int(doc["depth"]), k=k, p=p)


def _preprocess_to_doc(stats: PreprocessStats | None):
    if stats is None:
        return None
    names = ("lo", "hi") if stats.mode == "minmax01" else ("mean", "std")
    return {"mode": stats.mode, names[0]: stats.a.tolist(), names[1]: stats.b.tolist()}


def _preprocess_from_doc(doc) -> PreprocessStats | None:
    if doc is None:
        return None
    mode = doc["mode"]
    names = ("lo", "hi") if mode == "minmax01" else ("mean", "std")
    return PreprocessStats(
        mode=mode,
        a=np.asarray(doc[names[0]], dtype=np.float64),
        b=np.asarray(doc[names[1]], dtype=np.float64),
    )


def forest_to_doc(f: Forest) -> dict:
    return {
        "kind": _KIND,
        "format_version": FORMAT_VERSION,
        "label_map": list(f.label_map),
        "k": f.k,
        "p_raw": f.p_raw,
        "preprocess": _preprocess_to_doc(f.preprocess),
        "class_weights": None if f.class_weights is None else f.class_weights.tolist(),
        "config": f.config,
        "trees": [_tree_to_doc(t) for t in f.trees],
    }


def forest_from_doc(doc: dict) -> Forest:
    if doc.get("kind") != _KIND:
        raise ValueError("not a co2forest model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {doc.get('format_version')!r}")
    k = int(doc["k"])
    p = int(doc["p_raw"]) + 1
    weights = doc.get("class_weights")
    return Forest(
        trees=[_tree_from_doc(t, k, p) for t in doc["trees"]],
        k=k,
        p=p,
        label_map=list(doc["label_map"]),
        preprocess=_preprocess_from_doc(doc.get("preprocess")),
        class_weights=None if weights is None else np.asarray(weights, dtype=np.float64),
        config=dict(doc.get("config", {})),
    )


def save_model(f: Forest, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(forest_to_doc(f), fh)
        fh.write("\n")


def load_model(path) -> Forest:
    with open(path, "r", encoding="ascii") as fh:
        return forest_from_doc(json.load(fh))

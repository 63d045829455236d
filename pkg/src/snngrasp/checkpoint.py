"""Checkpoint files: versioned JSON, exact float round trip.

Schema (format 1)::

    {
      "format": "snngrasp-checkpoint",
      "version": 1,
      "kind": "snn" | "ann",
      "sizes": [N0, N1, N2],
      "w_in":  [N0*N1 floats, row-major],
      "w_out": [N1*N2 floats, row-major],
      "log_std": [N2-1 floats],
      "hidden": {"decay": .., "threshold": .., "reset_mode": ..},   # snn only
      "output": {"decay": .., "threshold": .., "reset_mode": ..},   # snn only
      "window": T, "surrogate_slope": a,                            # snn only
      "meta": {...}                                                  # free-form
    }

Floats are written with ``repr`` precision so a load reproduces every bit.
"""
from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .ann import AnnNetwork
from .snn import LifParams, SpikingNetwork

FORMAT = "snngrasp-checkpoint"
VERSION = 1


def to_dict(net, meta: dict | None = None) -> dict:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "kind": net.kind,
        "sizes": list(net.sizes),
        "w_in": net.w_in.ravel().tolist(),
        "w_out": net.w_out.ravel().tolist(),
        "log_std": net.log_std.tolist(),
    }
    if isinstance(net, SpikingNetwork):
        doc["hidden"] = asdict(net.hidden_params)
        doc["output"] = asdict(net.output_params)
        doc["window"] = net.window
        doc["surrogate_slope"] = net.surrogate_slope
    doc["meta"] = meta or {}
    return doc


def from_dict(doc: dict):
    if doc.get("format") != FORMAT:
        raise ValueError("not a snngrasp checkpoint")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    n0, n1, n2 = doc["sizes"]
    w_in = np.array(doc["w_in"], dtype=float).reshape(n0, n1)
    w_out = np.array(doc["w_out"], dtype=float).reshape(n1, n2)
    log_std = np.array(doc["log_std"], dtype=float)
    if doc["kind"] == "snn":
        return SpikingNetwork(
            w_in,
            w_out,
            hidden_params=LifParams(**doc["hidden"]),
            output_params=LifParams(**doc["output"]),
            log_std=log_std,
            window=doc["window"],
            surrogate_slope=doc["surrogate_slope"],
        )
    if doc["kind"] == "ann":
        return AnnNetwork(w_in, w_out, log_std=log_std)
    raise ValueError(f"unknown network kind {doc['kind']!r}")


def save(net, path, meta: dict | None = None) -> None:
    Path(path).write_text(json.dumps(to_dict(net, meta), indent=1) + "\n")


def load(path):
    return from_dict(json.loads(Path(path).read_text()))


def load_with_meta(path):
    """``(network, meta)`` from a checkpoint file."""
    doc = json.loads(Path(path).read_text())
    return from_dict(doc), dict(doc.get("meta", {}))

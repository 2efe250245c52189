"""JSON serialization of instances, certificate reports and solver results."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .problem import ProblemInstance

INSTANCE_FORMAT = "mcps2-instance"
FORMAT_VERSION = 1


def instance_to_dict(inst: ProblemInstance) -> dict:
    return {
        "format": INSTANCE_FORMAT,
        "version": FORMAT_VERSION,
        "m": inst.m,
        "n": inst.n,
        "k": inst.k,
        "d": inst.d,
        "seed": inst.seed,
        "meta": inst.meta,
        "support": inst.support.tolist(),
        "A": inst.A.tolist(),
        "x_true": inst.x_true.tolist(),
        "eta": inst.eta.tolist(),
        "y": inst.y.tolist(),
    }


def instance_from_dict(data: dict) -> ProblemInstance:
    if data.get("format") != INSTANCE_FORMAT:
        raise ValueError(f"not an instance record (format={data.get('format')!r})")
    inst = ProblemInstance(
        A=np.asarray(data["A"], dtype=float).reshape(data["m"], data["n"]),
        x_true=data["x_true"],
        eta=data["eta"],
        y=data["y"],
        support=data["support"],
        d=data["d"],
        seed=data.get("seed"),
        meta=data.get("meta", {}),
    )
    if inst.k != data["k"]:
        raise ValueError("support size does not match k")
    return inst


def write_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_instance(inst: ProblemInstance, path) -> None:
    write_json(instance_to_dict(inst), path)


def load_instance(path) -> ProblemInstance:
    return instance_from_dict(read_json(path))

"""JSON serialization for layouts, states, operations, and protocol specs.

Complex entries are stored row-major as [re, im] pairs.  Python's default
float formatting is shortest-round-trip, so doubles survive a JSON round
trip bit-exactly.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from .errors import LayoutError
from .registers import Register, RegisterLayout
from .states import DensityOperator, Isometry, KrausChannel, Operation, StateVector


def layout_to_json(layout: RegisterLayout) -> list[dict[str, Any]]:
    return [{"label": r.label, "dim": r.dim} for r in layout.registers]


def layout_from_json(data: list[dict[str, Any]]) -> RegisterLayout:
    return RegisterLayout(tuple(Register(d["label"], int(d["dim"])) for d in data))


def _complex_to_pairs(arr: np.ndarray) -> list[list[float]]:
    flat = np.asarray(arr, dtype=np.complex128).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _pairs_to_complex(pairs: list[list[float]], shape: tuple[int, ...]) -> np.ndarray:
    arr = np.array([complex(re, im) for re, im in pairs], dtype=np.complex128)
    return arr.reshape(shape)


def state_to_json(state: StateVector) -> dict[str, Any]:
    return {
        "type": "state_vector",
        "layout": layout_to_json(state.layout),
        "amplitudes": _complex_to_pairs(state.amplitudes),
    }


def density_to_json(rho: DensityOperator) -> dict[str, Any]:
    return {
        "type": "density_operator",
        "layout": layout_to_json(rho.layout),
        "matrix": _complex_to_pairs(rho.matrix),
    }


def isometry_to_json(op: Isometry) -> dict[str, Any]:
    return {
        "type": "isometry",
        "input_layout": layout_to_json(op.input_layout),
        "output_layout": layout_to_json(op.output_layout),
        "matrix": _complex_to_pairs(op.matrix),
    }


def kraus_to_json(op: KrausChannel) -> dict[str, Any]:
    return {
        "type": "kraus_channel",
        "input_layout": layout_to_json(op.input_layout),
        "output_layout": layout_to_json(op.output_layout),
        "kraus_ops": [_complex_to_pairs(k) for k in op.kraus_ops],
    }


def operation_to_json(op: Operation) -> dict[str, Any]:
    return isometry_to_json(op) if isinstance(op, Isometry) else kraus_to_json(op)


def from_json(data: dict[str, Any]):
    """Decode any serialized object by its `type` tag."""
    kind = data.get("type")
    if kind == "state_vector":
        lay = layout_from_json(data["layout"])
        return StateVector(lay, _pairs_to_complex(data["amplitudes"], (lay.total_dim,)))
    if kind == "density_operator":
        lay = layout_from_json(data["layout"])
        d = lay.total_dim
        return DensityOperator(lay, _pairs_to_complex(data["matrix"], (d, d)))
    if kind == "isometry":
        lin = layout_from_json(data["input_layout"])
        lout = layout_from_json(data["output_layout"])
        mat = _pairs_to_complex(data["matrix"], (lout.total_dim, lin.total_dim))
        return Isometry(lin, lout, mat)
    if kind == "kraus_channel":
        lin = layout_from_json(data["input_layout"])
        lout = layout_from_json(data["output_layout"])
        shape = (lout.total_dim, lin.total_dim)
        ops = tuple(_pairs_to_complex(k, shape) for k in data["kraus_ops"])
        return KrausChannel(lin, lout, ops)
    raise LayoutError(f"unknown serialized type {kind!r}")


def protocol_spec_to_json(spec) -> dict[str, Any]:
    return {
        "s": spec.rounds,
        "layouts": {
            "A": [layout_to_json(l) for l in spec.a_memory],
            "B": [layout_to_json(l) for l in spec.b_memory],
            "X": [layout_to_json(l) for l in spec.x_comm],
            "Y": [layout_to_json(l) for l in spec.y_comm],
        },
        "ops": {
            "A": [operation_to_json(op) for op in spec.a_ops],
            "B": [operation_to_json(op) for op in spec.b_ops],
        },
    }


def protocol_spec_from_json(data: dict[str, Any]):
    from .protocol import ProtocolSpec  # local import to avoid a cycle

    lay = data["layouts"]
    return ProtocolSpec(
        rounds=int(data["s"]),
        a_memory=tuple(layout_from_json(l) for l in lay["A"]),
        b_memory=tuple(layout_from_json(l) for l in lay["B"]),
        x_comm=tuple(layout_from_json(l) for l in lay["X"]),
        y_comm=tuple(layout_from_json(l) for l in lay["Y"]),
        a_ops=tuple(from_json(op) for op in data["ops"]["A"]),
        b_ops=tuple(from_json(op) for op in data["ops"]["B"]),
    )


def dump(obj: Any, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


def load(path: str) -> Any:
    with open(path) as fh:
        return json.load(fh)

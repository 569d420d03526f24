"""JSON wire formats for elements, operators, decompositions and scans.

Complex numbers are written as [re, im] pairs; matrices row-major.
"""
from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .algebra import AlgebraShape, Element
from .superop import PropertyReport, SuperOp


class FormatError(ValueError):
    pass


def _cmat_to_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def _cmat_from_json(rows, n_rows: int, n_cols: int, what: str) -> np.ndarray:
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError) as err:
        raise FormatError(f"{what}: entries must be [re, im] pairs") from err
    if arr.shape != (n_rows, n_cols, 2):
        raise FormatError(f"{what}: expected {n_rows}x{n_cols} [re, im] entries, "
                          f"got array of shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def _dims(value, what: str) -> AlgebraShape:
    if not isinstance(value, list) or not all(isinstance(n, int) for n in value):
        raise FormatError(f"{what} must be a list of integers")
    try:
        return AlgebraShape(value)
    except ValueError as err:
        raise FormatError(f"{what}: {err}") from err


def element_to_json(a: Element) -> dict:
    return {"dims": list(a.shape.dims), "blocks": [_cmat_to_json(b) for b in a.blocks]}


def element_from_json(data: dict) -> Element:
    if not isinstance(data, dict) or "dims" not in data or "blocks" not in data:
        raise FormatError("an element needs 'dims' and 'blocks'")
    shape = _dims(data["dims"], "dims")
    blocks = data["blocks"]
    if not isinstance(blocks, list) or len(blocks) != shape.n_blocks:
        raise FormatError("number of blocks does not match dims")
    mats = tuple(_cmat_from_json(b, n, n, f"block {i}")
                 for i, (b, n) in enumerate(zip(blocks, shape.dims)))
    return Element(shape, mats)


def superop_to_json(T: SuperOp) -> dict:
    return {"dom_dims": list(T.dom.dims), "cod_dims": list(T.cod.dims),
            "matrix": _cmat_to_json(T.mat)}


def superop_from_json(data: dict) -> SuperOp:
    if not isinstance(data, dict) or not {"dom_dims", "cod_dims", "matrix"} <= set(data):
        raise FormatError("an operator needs 'dom_dims', 'cod_dims' and 'matrix'")
    dom = _dims(data["dom_dims"], "dom_dims")
    cod = _dims(data["cod_dims"], "cod_dims")
    mat = _cmat_from_json(data["matrix"], cod.total_dim, dom.total_dim, "matrix")
    return SuperOp(dom, cod, mat)


def decomposition_to_json(dec) -> dict:
    return {"h": element_to_json(dec.h), "r": element_to_json(dec.r),
            "S": superop_to_json(dec.S), "residuals": dict(dec.identity_residuals),
            "verdict": bool(dec.verdict)}


def scan_to_json(sc, residuals: dict[str, float] | None = None) -> dict:
    records = []
    for rec in sc.records:
        records.append({
            "t": rec.t,
            "h": element_to_json(rec.h),
            "r": element_to_json(rec.r) if rec.r is not None else None,
            "S": superop_to_json(rec.S) if rec.S is not None else None,
            "verdict": bool(rec.verdict),
        })
    return {"times": list(sc.times), "records": records, "residuals": dict(residuals or {})}


def to_jsonable(obj: Any) -> Any:
    """Recursively convert package objects to plain JSON values."""
    if isinstance(obj, Element):
        return element_to_json(obj)
    if isinstance(obj, SuperOp):
        return superop_to_json(obj)
    if isinstance(obj, PropertyReport):
        return to_jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def load_json(path) -> Any:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as err:
        raise FormatError(f"cannot read {path}: {err.strerror}") from err
    except json.JSONDecodeError as err:
        raise FormatError(f"{path} is not valid JSON: {err}") from err


def load_superop(path) -> SuperOp:
    return superop_from_json(load_json(path))


def save_superop(T: SuperOp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(superop_to_json(T)))

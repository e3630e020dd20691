"""Serialization: connection/field JSON, 17-digit reports and CSV tables."""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .bundle import DiscreteConnection, SkewField
from .errors import InvalidInput
from .lattice import LatticeBase, lattice_from_descriptor

CONNECTION_FORMAT = "bochner.connection/1"
FIELD_FORMAT = "bochner.skewfield/1"


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt17(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps17(obj, indent: int = 2) -> str:
    """JSON text with every float written to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, (bool, np.bool_)):
                cells.append("true" if v else "false")
            elif isinstance(v, (int, np.integer)):
                cells.append(str(int(v)))
            elif isinstance(v, str):
                cells.append(v)
            else:
                cells.append(fmt17(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _matrix_map(stack: np.ndarray) -> dict:
    # json.dumps writes floats in shortest round-trip form
    return {str(e): [float(x) for x in mat.ravel()] for e, mat in enumerate(stack)}


def _read_stack(obj: dict, count: int, m: int, key: str) -> np.ndarray:
    data = obj[key]
    if sorted(data, key=int) != [str(e) for e in range(count)]:
        raise InvalidInput(f"{key} must list every canonical edge id 0..{count - 1}")
    return np.array([data[str(e)] for e in range(count)], dtype=float).reshape(count, m, m)


def connection_to_json(conn: DiscreteConnection) -> str:
    return json.dumps({"format": CONNECTION_FORMAT, "base": conn.base.to_descriptor(),
                       "rank": conn.rank, "transport": _matrix_map(conn.transport)})


def connection_from_json(text: str, base: LatticeBase | None = None) -> DiscreteConnection:
    obj = json.loads(text)
    if obj.get("format") != CONNECTION_FORMAT:
        raise InvalidInput(f"not a connection file (format={obj.get('format')!r})")
    base = base or lattice_from_descriptor(obj["base"])
    m = int(obj["rank"])
    return DiscreteConnection(base, m, _read_stack(obj, base.canonical_count, m, "transport"))


def field_to_json(field: SkewField) -> str:
    return json.dumps({"format": FIELD_FORMAT, "base": field.base.to_descriptor(),
                       "rank": field.rank, "value": _matrix_map(field.value)})


def field_from_json(text: str, base: LatticeBase | None = None) -> SkewField:
    obj = json.loads(text)
    if obj.get("format") != FIELD_FORMAT:
        raise InvalidInput(f"not a skew-field file (format={obj.get('format')!r})")
    base = base or lattice_from_descriptor(obj["base"])
    m = int(obj["rank"])
    return SkewField(base, m, _read_stack(obj, base.canonical_count, m, "value"))

"""File formats: the DT1 dense-tensor container (all-JSON and binary
variants), JSON serialization of the low-rank formats, and versioned CSV.

DT1 binary layout: 8-byte magic "DTENSOR1", little-endian u32 order, one
little-endian u32 per dimension, then the payload as little-endian float64 in
row-major order.  The .json variant carries the same header fields plus the
payload base64-encoded.
"""

import base64
import json
import struct

import numpy as np

from .formats import CPTensor, TreeTensor, TTTensor, TuckerTensor, format_name
from .tree import DimensionTree

MAGIC = b"DTENSOR1"
CSV_VERSION = "# tensoria-v1"


def _require_finite(a):
    if not np.all(np.isfinite(a)):
        raise ValueError("tensor entries must be finite")
    return a


# ---------------------------------------------------------------------------
# dense tensors
# ---------------------------------------------------------------------------


def dense_to_json_dict(u):
    u = np.ascontiguousarray(np.asarray(u, dtype=float))
    _require_finite(u)
    return {
        "order": int(u.ndim),
        "dims": [int(n) for n in u.shape],
        "layout": "row-major",
        "data_b64": base64.b64encode(u.astype("<f8").tobytes()).decode("ascii"),
    }


def dense_from_json_dict(d):
    dims = tuple(int(n) for n in d["dims"])
    if int(d["order"]) != len(dims):
        raise ValueError("order field does not match the dims list")
    if d.get("layout", "row-major") != "row-major":
        raise ValueError(f"unsupported layout {d.get('layout')!r}")
    if "data_b64" in d:
        raw = base64.b64decode(d["data_b64"])
        data = np.frombuffer(raw, dtype="<f8").astype(float)
    else:
        data = np.asarray(d["data"], dtype=float).reshape(-1)
    if data.size != int(np.prod(dims)):
        raise ValueError("payload length does not match the dims")
    return _require_finite(data.reshape(dims))


def save_dense(path, u):
    path = str(path)
    if path.endswith(".json"):
        with open(path, "w") as fh:
            json.dump(dense_to_json_dict(u), fh)
            fh.write("\n")
        return
    u = np.ascontiguousarray(np.asarray(u, dtype=float))
    _require_finite(u)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", u.ndim))
        fh.write(struct.pack(f"<{u.ndim}I", *u.shape))
        fh.write(u.astype("<f8").tobytes())


def load_dense(path):
    path = str(path)
    if path.endswith(".json"):
        with open(path) as fh:
            return dense_from_json_dict(json.load(fh))
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:8] != MAGIC:
        raise ValueError(f"{path}: not a DT1 tensor file")
    (order,) = struct.unpack_from("<I", blob, 8)
    if order < 1 or len(blob) < 12 + 4 * order:
        raise ValueError(f"{path}: truncated header")
    dims = struct.unpack_from(f"<{order}I", blob, 12)
    offset = 12 + 4 * order
    expected = 1
    for n in dims:
        expected *= int(n)
        if n < 1 or expected > 2**62:
            raise ValueError(f"{path}: dims {dims} are not representable")
    if len(blob) < offset + 8 * expected:
        raise ValueError(f"{path}: truncated payload")
    data = np.frombuffer(blob, dtype="<f8", count=expected, offset=offset)
    return _require_finite(data.astype(float).reshape(dims))


# ---------------------------------------------------------------------------
# low-rank formats
# ---------------------------------------------------------------------------


def format_to_json_dict(x):
    name = format_name(x)
    out = {"format": name, "shape": [int(n) for n in x.shape]}
    if isinstance(x, CPTensor):
        out["ranks"] = [int(x.rank)]
        out["weights"] = x.weights.tolist()
        out["factors"] = [f.tolist() for f in x.factors]
    elif isinstance(x, TuckerTensor):
        out["ranks"] = [int(r) for r in x.ranks]
        out["core"] = x.core.tolist()
        out["factors"] = [f.tolist() for f in x.factors]
    elif isinstance(x, TTTensor):
        out["ranks"] = [int(r) for r in x.ranks]
        out["cores"] = [c.tolist() for c in x.cores]
    elif isinstance(x, TreeTensor):
        out["ranks"] = [int(x.node_rank(i)) for i in range(x.tree.n_nodes)]
        out["tree"] = x.tree.to_dict()
        out["leaf_bases"] = {str(i): b.tolist() for i, b in x.leaf_bases.items()}
        out["transfer"] = {str(i): t.tolist() for i, t in x.transfer.items()}
    return out


def format_from_json_dict(d):
    name = d["format"]
    if name == "cp":
        return CPTensor([np.asarray(f, dtype=float) for f in d["factors"]], d.get("weights"))
    if name == "tucker":
        return TuckerTensor(
            np.asarray(d["core"], dtype=float),
            [np.asarray(f, dtype=float) for f in d["factors"]],
        )
    if name == "tt":
        return TTTensor([np.asarray(c, dtype=float) for c in d["cores"]])
    if name == "tree":
        tree = DimensionTree.from_dict(d["tree"])
        leaf_bases = {int(i): np.asarray(b, dtype=float) for i, b in d["leaf_bases"].items()}
        transfer = {int(i): np.asarray(t, dtype=float) for i, t in d["transfer"].items()}
        return TreeTensor(tree, leaf_bases, transfer)
    raise ValueError(f"unknown format {name!r}")


def save_format(path, x):
    with open(str(path), "w") as fh:
        json.dump(format_to_json_dict(x), fh)
        fh.write("\n")


def load_format(path):
    with open(str(path)) as fh:
        return format_from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# versioned CSV
# ---------------------------------------------------------------------------


def format_float(x):
    return f"{float(x):.17g}"


def _format_cell(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if isinstance(v, (tuple, list)):
        return "x".join(str(int(e)) for e in v)
    return str(v)


def write_csv(path, fieldnames, rows, meta=None):
    """Write rows (dicts) with a version header and optional metadata
    comments; floats are printed with 17 significant digits."""
    lines = [CSV_VERSION]
    for key, value in (meta or {}).items():
        lines.append(f"# {key}={_format_cell(value)}")
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(_format_cell(row.get(name)) for name in fieldnames))
    with open(str(path), "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def read_column_csv(path, n_columns=None):
    """Read a numeric CSV, skipping comment lines; returns a 2d float array."""
    rows = []
    with open(str(path)) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p for p in line.split(",") if p != ""]
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                # a single non-numeric header row is tolerated
                if rows:
                    raise
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    if n_columns is not None and any(len(r) != n_columns for r in rows):
        raise ValueError(f"{path}: expected {n_columns} columns")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: ragged rows")
    return np.asarray(rows, dtype=float)

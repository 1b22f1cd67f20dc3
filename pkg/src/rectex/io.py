"""JSON network files and CSV matrices, datasets and reports.

JSON floats use Python's shortest round-trip repr and CSV floats use 17
significant digits, so 64-bit values survive a save/load cycle bit-exactly.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .network import AffineUnit, GeneralNetwork, Layer, ReluNetwork, ThresholdNetwork
from .training import REPORT_FIELDS, Dataset


class FormatError(ValueError):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _unit(u: AffineUnit) -> dict:
    return {"weights": u.weights.tolist(), "bias": u.bias}


def _layer(layer: Layer) -> dict:
    doc = {
        "weights": layer.weights.tolist(),
        "bias": layer.bias.tolist(),
        "activation": layer.activation,
    }
    if layer.c is not None:
        doc["c"] = layer.c
    return doc


def network_to_dict(net) -> dict:
    if isinstance(net, ReluNetwork):
        return {
            "kind": "relu",
            "dim": net.dim,
            "positive": [_unit(u) for u in net.positive],
            "negative": [_unit(u) for u in net.negative],
            "w0": net.w0,
        }
    kind = "threshold" if isinstance(net, ThresholdNetwork) else "general"
    return {"kind": kind, "dim": net.dim, "layers": [_layer(l) for l in net.layers]}


def network_from_dict(doc: dict):
    try:
        kind, dim = doc["kind"], doc["dim"]
        if kind == "relu":
            units = lambda key: tuple(AffineUnit(u["weights"], u["bias"]) for u in doc.get(key, []))
            return ReluNetwork(dim, units("positive"), units("negative"), doc["w0"])
        layers = tuple(
            Layer(
                np.asarray(l["weights"], dtype=np.float64).reshape(len(l["bias"]), -1),
                l["bias"],
                l.get("activation", "sign"),
                l.get("c"),
            )
            for l in doc["layers"]
        )
        if kind == "threshold":
            return ThresholdNetwork(dim, layers)
        if kind == "general":
            return GeneralNetwork(dim, layers)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed network document: {exc!r}") from exc
    raise FormatError(f"unknown network kind {kind!r}")


def dumps_network(net) -> str:
    return json.dumps(network_to_dict(net), indent=2)


def save_network(path, net) -> None:
    Path(path).write_text(dumps_network(net) + "\n")


def load_network(path):
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return network_from_dict(doc)


def _read_rows(path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise FormatError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(v) for v in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"{path}: non-numeric entry ({exc})") from exc
    if body and data.shape[1] != len(header):
        raise FormatError(f"{path}: rows do not match the header width")
    return header, data.reshape(len(body), len(header))


def _write_rows(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in r])


def write_matrix(path, M, prefix: str = "unit") -> None:
    """Unit-per-column matrix (bias in the last row) with a ``unit_k`` header."""
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        _write_rows(fh, [f"{prefix}_{k + 1}" for k in range(M.shape[1])], M)


def read_matrix(path) -> np.ndarray:
    _, M = _read_rows(path)
    if M.shape[0] == 0:
        raise FormatError(f"{path}: matrix has no rows")
    return M


def write_dataset(path, data: Dataset) -> None:
    header = [f"x_{i + 1}" for i in range(data.dim)] + ["label"]
    with open(path, "w", newline="") as fh:
        _write_rows(fh, header, np.column_stack([data.X, data.y]))


def read_points(path) -> np.ndarray:
    """Input rows of a dataset CSV; a ``label`` column is ignored if present."""
    header, M = _read_rows(path)
    keep = [i for i, h in enumerate(header) if h.strip() != "label"]
    return M[:, keep]


def read_dataset(path, test_size: int = 0) -> Dataset:
    header, M = _read_rows(path)
    if not header or header[-1].strip() != "label":
        raise FormatError(f"{path}: last column must be 'label'")
    return Dataset(M[:, :-1], M[:, -1], test_size)


def report_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in rows:
        w.writerow([fmt(r[k]) if isinstance(r[k], float) else r[k] for k in REPORT_FIELDS])
    return buf.getvalue()


AUDIT_FIELDS = ("gamma", "x_inf_norm", "bound", "residual", "passes", "argmax_V", "argmax_UT")


def audit_csv(audit) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(AUDIT_FIELDS)
    for r in audit.rows():
        w.writerow([
            fmt(r[k]) if isinstance(r[k], float) else str(r[k]).lower() if isinstance(r[k], bool) else r[k]
            for k in AUDIT_FIELDS
        ])
    return buf.getvalue()

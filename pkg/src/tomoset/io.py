"""JSON file formats: matrices, measurements, count records, operator bases."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .basis import OperatorBasis
from .core import hermitian_part
from .likelihood import CountData, Pom

# matrices read from disk may be sloppier than ones we build ourselves
FILE_HERM_ATOL = 1e-9


def matrix_to_doc(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=complex)
    return {
        "dim": int(a.shape[0]),
        "re": a.real.tolist(),
        "im": a.imag.tolist(),
    }


def matrix_from_doc(doc: dict, name: str = "matrix") -> np.ndarray:
    d = int(doc["dim"])
    a = np.asarray(doc["re"], dtype=float) + 1j * np.asarray(doc["im"], dtype=float)
    if a.shape != (d, d):
        raise ValueError(f"{name}: entries have shape {a.shape}, header says dim {d}")
    dev = float(np.max(np.abs(a - a.conj().T)))
    if dev > FILE_HERM_ATOL:
        raise ValueError(f"{name}: not Hermitian, max deviation {dev:.3e}")
    return hermitian_part(a)


def save_matrix(path, a: np.ndarray) -> None:
    Path(path).write_text(json.dumps(matrix_to_doc(a)) + "\n")


def load_matrix(path) -> np.ndarray:
    with open(path) as fh:
        return matrix_from_doc(json.load(fh), name=str(path))


def save_pom(path, pom: Pom) -> None:
    doc = {
        "dim": pom.dim,
        "outcomes": [matrix_to_doc(op) for op in pom.outcomes],
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_pom(path) -> Pom:
    with open(path) as fh:
        doc = json.load(fh)
    mats = [matrix_from_doc(m, name=f"{path} outcome {k}") for k, m in enumerate(doc["outcomes"])]
    return Pom.from_matrices(mats)


def save_counts(path, data: CountData, pom_path) -> None:
    """Write a count record referencing the measurement by (relative) path."""
    doc = {
        "counts": np.asarray(data.counts, dtype=float).tolist(),
        "pom": str(pom_path),
        "exact": bool(data.exact),
    }
    Path(path).write_text(json.dumps(doc) + "\n")


def load_counts(path, pom: Pom | None = None) -> CountData:
    """Read a count record; the referenced measurement resolves next to the file."""
    path = Path(path)
    with open(path) as fh:
        doc = json.load(fh)
    if pom is None:
        pom_ref = Path(doc["pom"])
        if not pom_ref.is_absolute():
            pom_ref = path.parent / pom_ref
        pom = load_pom(pom_ref)
    return CountData(
        counts=np.asarray(doc["counts"], dtype=float),
        pom=pom,
        exact=bool(doc.get("exact", False)),
    )


def save_basis(path, basis: OperatorBasis) -> None:
    docs = []
    for op in basis.measured:
        docs.append({"role": "measured", **matrix_to_doc(op)})
    for op in basis.unmeasured:
        docs.append({"role": "unmeasured", **matrix_to_doc(op)})
    Path(path).write_text(json.dumps(docs) + "\n")


def load_basis(path) -> OperatorBasis:
    with open(path) as fh:
        docs = json.load(fh)
    measured = [matrix_from_doc(d, name="measured op") for d in docs if d["role"] == "measured"]
    unmeasured = [matrix_from_doc(d, name="unmeasured op") for d in docs if d["role"] == "unmeasured"]
    if not measured:
        raise ValueError("basis file has no measured block")
    dim = measured[0].shape[0]
    mstack = np.array(measured)
    ustack = (
        np.array(unmeasured)
        if unmeasured
        else np.zeros((0, dim, dim), dtype=complex)
    )
    return OperatorBasis(measured=mstack, unmeasured=ustack)

"""JSON state files and run reports.

A state file is ``{"kind": "pure" | "density", "n_qubits": n, "data": [...]}``
where pure data lists ``2**n`` ``[re, im]`` pairs and density data is a
row-major ``2**n x 2**n`` nesting of ``[re, im]`` pairs. Files may be gzipped;
the loader detects that from the magic bytes.
"""

from __future__ import annotations

import gzip
import json
from pathlib import Path
from typing import Union

import numpy as np

from .qcore import DensityMatrix, PureState

LOAD_TOL = 1e-8
_GZIP_MAGIC = b"\x1f\x8b"


class StateFileError(ValueError):
    pass


def _pairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def state_to_json(state: Union[PureState, DensityMatrix]) -> dict:
    if isinstance(state, PureState):
        return {"kind": "pure", "n_qubits": state.n_qubits, "data": _pairs(state.amplitudes)}
    return {"kind": "density", "n_qubits": state.n_qubits, "data": _pairs(state.matrix)}


def state_from_json(doc: dict) -> Union[PureState, DensityMatrix]:
    if not isinstance(doc, dict) or set(doc) != {"kind", "n_qubits", "data"}:
        raise StateFileError("state file must have exactly the keys kind, n_qubits, data")
    kind, n = doc["kind"], doc["n_qubits"]
    if kind not in ("pure", "density"):
        raise StateFileError(f"unknown state kind {kind!r}")
    if not isinstance(n, int) or n < 1:
        raise StateFileError("n_qubits must be a positive integer")
    try:
        arr = np.asarray(doc["data"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise StateFileError(f"malformed data array: {exc}") from None
    d = 2**n
    shape = (d, 2) if kind == "pure" else (d, d, 2)
    if arr.shape != shape:
        raise StateFileError(f"data has shape {arr.shape}, expected {shape}")
    z = arr[..., 0] + 1j * arr[..., 1]
    if not np.all(np.isfinite(z)):
        raise StateFileError("data contains non-finite values")
    try:
        if kind == "pure":
            norm = float(np.vdot(z, z).real)
            if abs(norm - 1) > LOAD_TOL:
                raise StateFileError(f"state norm^2 {norm} is not 1 within {LOAD_TOL}")
            if abs(norm - 1) > 4 * np.finfo(float).eps:
                z = z / np.sqrt(norm)
            return PureState(n, z)
        if np.max(np.abs(z - z.conj().T)) > LOAD_TOL:
            raise StateFileError("density matrix is not Hermitian")
        if np.any(z != z.conj().T):
            z = 0.5 * (z + z.conj().T)
        tr = float(np.trace(z).real)
        if abs(tr - 1) > LOAD_TOL:
            raise StateFileError(f"trace {tr} is not 1 within {LOAD_TOL}")
        if abs(tr - 1) > 4 * np.finfo(float).eps:
            z = z / tr
        return DensityMatrix(n, z)
    except StateFileError:
        raise
    except ValueError as exc:
        raise StateFileError(str(exc)) from None


def write_json(path: Path, doc, compress: bool = False) -> None:
    text = json.dumps(doc, indent=None if compress else 2)
    path = Path(path)
    if compress:
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write(text)
    else:
        path.write_text(text + "\n", encoding="utf-8")


def read_json(path: Path):
    raw = Path(path).read_bytes()
    if raw[:2] == _GZIP_MAGIC:
        raw = gzip.decompress(raw)
    return json.loads(raw.decode("utf-8"))


def write_state(path: Path, state, compress: bool = False) -> None:
    write_json(path, state_to_json(state), compress)


def read_state(path: Path) -> Union[PureState, DensityMatrix]:
    try:
        doc = read_json(path)
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise StateFileError(f"cannot read {path}: {exc}") from None
    return state_from_json(doc)

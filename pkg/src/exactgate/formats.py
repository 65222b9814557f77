"""JSON matrix format shared by every command.

``{"dim": d, "re": [[...]], "im": [[...]]}``, row-major.  Python's float
repr is the shortest string that round-trips, so serialisation is bit exact.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ExactGateError


class FormatError(ExactGateError):
    pass


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=complex)
    return {
        "dim": int(m.shape[0]),
        "re": [[float(x) for x in row] for row in m.real],
        "im": [[float(x) for x in row] for row in m.imag],
    }


def matrix_from_json(obj) -> np.ndarray:
    try:
        d = int(obj["dim"])
        re = np.array(obj["re"], dtype=float)
        im = np.array(obj["im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed matrix object: {exc}") from exc
    if re.shape != (d, d) or im.shape != (d, d):
        raise FormatError(f"matrix entries do not match dim={d}")
    return re + 1j * im


def read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8")


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(read_json(path))


def save_matrix(path, m) -> None:
    write_json(path, matrix_to_json(m))


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()

"""JSON encoding of assemblages and reports.

Schema::

    {
      "kind": "state" | "measurement",      # optional, inferred when absent
      "dim": d,
      "settings": [
        {"outcomes": [matrix, ...]},        # one matrix per outcome
        ...
      ]
    }

A matrix is a list of rows and every entry is a pair ``[re, im]`` of JSON
numbers. Floats are written with ``repr`` (shortest round-trip form), so
parse -> serialize -> parse gives identical values for finite doubles.
Without ``kind``, an assemblage whose settings all sum to the identity is a
measurement assemblage and anything else a state assemblage.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .assemblage import MeasurementAssemblage, StateAssemblage, Violation

__all__ = [
    "ParseError",
    "HermiticityError",
    "loads",
    "load",
    "dumps",
    "assemblage_to_dict",
    "assemblage_from_dict",
    "matrix_to_json",
    "matrix_from_json",
    "infer_kind",
]

KINDS = ("state", "measurement")
HERMITICITY_RTOL = 1e-12


class ParseError(ValueError):
    """Malformed JSON (with ``line``/``column``) or a document off the schema (with ``path``)."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = ""
        if line is not None:
            where = f"line {line}, column {column}: "
        elif path is not None:
            where = f"{path}: "
        super().__init__(where + message)


class HermiticityError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


def _reject_constant(name):
    raise ValueError(f"non-finite constant {name} is not allowed")


def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {type(v).__name__}", path=path)
    v = float(v)
    if not math.isfinite(v):
        raise ParseError("non-finite number", path=path)
    return v


def matrix_from_json(rows, path="matrix") -> np.ndarray:
    if not isinstance(rows, list) or not rows:
        raise ParseError("a matrix must be a non-empty list of rows", path=path)
    width = None
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ParseError("a row must be a list", path=f"{path}[{i}]")
        if width is None:
            width = len(row)
        if len(row) != width or width == 0:
            raise ParseError("ragged or empty row", path=f"{path}[{i}]")
        vals = []
        for j, entry in enumerate(row):
            p = f"{path}[{i}][{j}]"
            if not isinstance(entry, list) or len(entry) != 2:
                raise ParseError("an entry must be a pair [re, im]", path=p)
            vals.append(complex(_number(entry[0], p + "[0]"), _number(entry[1], p + "[1]")))
        out.append(vals)
    return np.array(out, dtype=complex)


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def infer_kind(elements, tol=1e-9) -> str:
    d = elements[0][0].shape[0]
    eye = np.eye(d)
    if all(np.linalg.norm(sum(s) - eye) <= tol for s in elements):
        return "measurement"
    return "state"


def _hermiticity(elements):
    bad = []
    for x, s in enumerate(elements):
        for a, op in enumerate(s):
            res = float(np.max(np.abs(op - op.conj().T)))
            if res > HERMITICITY_RTOL * (1.0 + float(np.max(np.abs(op)))):
                bad.append(Violation("hermiticity", (x, a), res))
    return bad


def assemblage_from_dict(doc, kind=None):
    """Build an assemblage from a decoded document (see module docstring)."""
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object", path="$")
    dim = doc.get("dim")
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ParseError("'dim' must be a positive integer", path="$.dim")
    settings = doc.get("settings")
    if not isinstance(settings, list) or not settings:
        raise ParseError("'settings' must be a non-empty list", path="$.settings")
    elements = []
    for x, s in enumerate(settings):
        p = f"$.settings[{x}]"
        if not isinstance(s, dict) or not isinstance(s.get("outcomes"), list) or not s["outcomes"]:
            raise ParseError("a setting must be an object with a non-empty 'outcomes' list", path=p)
        ops = []
        for a, mat in enumerate(s["outcomes"]):
            op = matrix_from_json(mat, path=f"{p}.outcomes[{a}]")
            if op.shape != (dim, dim):
                raise ParseError(f"expected a {dim}x{dim} matrix, got {op.shape[0]}x{op.shape[1]}",
                                 path=f"{p}.outcomes[{a}]")
            ops.append(op)
        elements.append(ops)
    declared = doc.get("kind")
    if declared is not None and declared not in KINDS:
        raise ParseError(f"'kind' must be one of {KINDS}", path="$.kind")
    if kind is not None and declared is not None and kind != declared:
        raise ParseError(f"expected a {kind} assemblage, document declares {declared}", path="$.kind")
    bad = _hermiticity(elements)
    if bad:
        raise HermiticityError(bad)
    kind = kind or declared or infer_kind(elements)
    cls = StateAssemblage if kind == "state" else MeasurementAssemblage
    return cls(elements)


def loads(text, kind=None):
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None
    except ValueError as e:
        raise ParseError(str(e)) from None
    return assemblage_from_dict(doc, kind)


def load(path, kind=None):
    with open(path, encoding="utf-8") as f:
        return loads(f.read(), kind)


def assemblage_to_dict(a) -> dict:
    kind = "state" if isinstance(a, StateAssemblage) else "measurement"
    return {
        "kind": kind,
        "dim": a.dim,
        "settings": [{"outcomes": [matrix_to_json(op) for op in s]} for s in a.elements],
    }


def dumps(obj, indent=None) -> str:
    if isinstance(obj, (StateAssemblage, MeasurementAssemblage)):
        obj = assemblage_to_dict(obj)
    return json.dumps(obj, indent=indent, allow_nan=False)

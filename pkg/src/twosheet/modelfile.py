"""Model files: JSON descriptions of geometry, mass, domain, and resolutions.

Schema (one metric kind, one mass kind, the rest optional):

    {
      "dimension": 2,
      "metric": {"kind": "minkowski" | "conformal2d" | "vielbein4d",
                 "omega": "<expr>",          # conformal2d
                 "frame": [["<expr>", ...]]},  # vielbein4d, 4x4
      "mass": {"kind": "constant", "re": 1.0, "im": 0.0}
            | {"kind": "scalar", "phi": "<expr>"}
            | {"kind": "diagonal"},
      "vector_potentials": {"A": ["<expr>", ...], "B": ["<expr>", ...]},
      "domain": {"box": [[lo, hi], ...]},
      "resolutions": {"time_steps": 401, "space_steps": 401,
                      "certification": 101, "quadrature": 8},
      "tolerances": {"decision_band": 2e-3}
    }

Errors name the offending key and the line it sits on (or where its parent block
starts, for keys that are missing).  dumps() is canonical: loading its output and
dumping again is byte-identical.
"""

from __future__ import annotations

import json
from typing import Dict, Optional, Sequence

import numpy as np

from .expressions import ExpressionError, parse_expression
from .geometry import DEFAULT_RESOLUTIONS, SpacetimeModel

__all__ = ["ModelFileError", "loads", "load", "dumps", "dump", "model_tolerances"]

_GRID_KEYS = ("time_steps", "space_steps", "certification")
_TOP_KEYS = ("dimension", "metric", "mass", "vector_potentials", "domain",
             "resolutions", "tolerances")


class ModelFileError(ValueError):
    """Malformed model file; carries the offending key and line."""

    def __init__(self, message: str, key: str, line: int):
        super().__init__(f'model file error at line {line}, key "{key}": {message}')
        self.key = key
        self.line = line


def _line_of(text: str, *names: str) -> int:
    """Line (1-based) of the first quoted occurrence of any of the names."""
    for name in names:
        pos = text.find(f'"{name}"')
        if pos >= 0:
            return text.count("\n", 0, pos) + 1
    return 1


def _expr(source, text: str, key: str):
    if not isinstance(source, str):
        raise ModelFileError("expected an expression string", key, _line_of(text, key.split(".")[-1]))
    try:
        return parse_expression(source)
    except ExpressionError as exc:
        raise ModelFileError(str(exc), key, _line_of(text, source, key.split(".")[-1])) from exc


def loads(text: str) -> SpacetimeModel:
    """Parse a model-file JSON string into a SpacetimeModel."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(exc.msg, "<json>", exc.lineno) from exc
    if not isinstance(raw, dict):
        raise ModelFileError("top level must be an object", "<json>", 1)

    for k in raw:
        if k not in _TOP_KEYS:
            raise ModelFileError(f"unknown key (expected one of {', '.join(_TOP_KEYS)})",
                                 k, _line_of(text, k))
    for k in ("dimension", "metric", "mass"):
        if k not in raw:
            raise ModelFileError("required key is missing", k, 1)

    dim = raw["dimension"]
    if dim not in (2, 4):
        raise ModelFileError("dimension must be 2 or 4", "dimension", _line_of(text, "dimension"))

    metric = raw["metric"]
    if not isinstance(metric, dict) or "kind" not in metric:
        raise ModelFileError('expected an object with a "kind"', "metric", _line_of(text, "metric"))
    mkind = metric["kind"]
    kw: Dict[str, object] = {}
    if mkind == "minkowski":
        pass
    elif mkind == "conformal2d":
        if dim != 2:
            raise ModelFileError("conformal2d needs dimension 2", "metric.kind",
                                 _line_of(text, "conformal2d", "kind"))
        if "omega" not in metric:
            raise ModelFileError("conformal2d needs an omega expression", "metric.omega",
                                 _line_of(text, "metric"))
        kw["conformal_factor"] = _expr(metric["omega"], text, "metric.omega")
    elif mkind == "vielbein4d":
        if dim != 4:
            raise ModelFileError("vielbein4d needs dimension 4", "metric.kind",
                                 _line_of(text, "vielbein4d", "kind"))
        frame = metric.get("frame")
        if (not isinstance(frame, list) or len(frame) != 4
                or any(not isinstance(r, list) or len(r) != 4 for r in frame)):
            raise ModelFileError("frame must be a 4x4 table of expressions", "metric.frame",
                                 _line_of(text, "frame", "metric"))
        kw["vielbein"] = tuple(
            tuple(_expr(e, text, f"metric.frame[{a}][{mu}]") for mu, e in enumerate(row))
            for a, row in enumerate(frame))
    else:
        raise ModelFileError(f"unknown metric kind {mkind!r}", "metric.kind",
                             _line_of(text, str(mkind), "kind"))

    mass = raw["mass"]
    if not isinstance(mass, dict) or "kind" not in mass:
        raise ModelFileError('expected an object with a "kind"', "mass", _line_of(text, "mass"))
    qkind = mass["kind"]
    mass_value = 0j
    if qkind == "constant":
        try:
            mass_value = complex(float(mass.get("re", 0.0)), float(mass.get("im", 0.0)))
        except (TypeError, ValueError):
            raise ModelFileError("re/im must be numbers", "mass.re", _line_of(text, "re", "mass"))
    elif qkind == "scalar":
        if "phi" not in mass:
            raise ModelFileError("scalar mass needs a phi expression", "mass.phi",
                                 _line_of(text, "mass"))
        kw["mass_field"] = _expr(mass["phi"], text, "mass.phi")
    elif qkind == "diagonal":
        pass
    else:
        raise ModelFileError(f"unknown mass kind {qkind!r}", "mass.kind",
                             _line_of(text, str(qkind), "kind"))

    if "vector_potentials" in raw:
        vp = raw["vector_potentials"]
        if not isinstance(vp, dict) or "A" not in vp or "B" not in vp:
            raise ModelFileError('expected {"A": [...], "B": [...]}', "vector_potentials",
                                 _line_of(text, "vector_potentials"))
        for name in ("A", "B"):
            if not isinstance(vp[name], list) or len(vp[name]) != dim:
                raise ModelFileError(f"needs {dim} expressions", f"vector_potentials.{name}",
                                     _line_of(text, name, "vector_potentials"))
        kw["vector_potentials"] = tuple(
            tuple(_expr(e, text, f"vector_potentials.{name}[{k}]")
                  for k, e in enumerate(vp[name]))
            for name in ("A", "B"))

    box = None
    if "domain" in raw:
        dom = raw["domain"]
        if not isinstance(dom, dict) or "box" not in dom:
            raise ModelFileError('expected {"box": [[lo, hi], ...]}', "domain",
                                 _line_of(text, "domain"))
        try:
            box = np.asarray(dom["box"], dtype=float)
            if box.shape != (dim, 2):
                raise ValueError
        except (TypeError, ValueError):
            raise ModelFileError(f"box must be {dim} [lo, hi] rows", "domain.box",
                                 _line_of(text, "box", "domain"))
        if np.any(box[:, 0] >= box[:, 1]):
            raise ModelFileError("box rows need lo < hi", "domain.box",
                                 _line_of(text, "box", "domain"))

    resolutions: Dict[str, Optional[int]] = {}
    if "resolutions" in raw:
        res = raw["resolutions"]
        if not isinstance(res, dict):
            raise ModelFileError("expected an object", "resolutions",
                                 _line_of(text, "resolutions"))
        for k, v in res.items():
            if k not in DEFAULT_RESOLUTIONS:
                raise ModelFileError(f"unknown resolution (expected one of "
                                     f"{', '.join(DEFAULT_RESOLUTIONS)})",
                                     f"resolutions.{k}", _line_of(text, k))
            if not isinstance(v, int):
                raise ModelFileError("must be an integer", f"resolutions.{k}", _line_of(text, k))
            floor = 17 if k in _GRID_KEYS else 1
            if v < floor:
                raise ModelFileError(f"must be >= {floor}", f"resolutions.{k}", _line_of(text, k))
            resolutions[k] = v

    tolerances: Dict[str, float] = {}
    if "tolerances" in raw:
        tol = raw["tolerances"]
        if not isinstance(tol, dict):
            raise ModelFileError("expected an object", "tolerances", _line_of(text, "tolerances"))
        for k, v in tol.items():
            if k not in ("decision_band", "psd"):
                raise ModelFileError("unknown tolerance (expected decision_band or psd)",
                                     f"tolerances.{k}", _line_of(text, k))
            if not isinstance(v, (int, float)) or not v > 0:
                raise ModelFileError("must be a positive number", f"tolerances.{k}",
                                     _line_of(text, k))
            tolerances[k] = float(v)

    source = {"tolerances": tolerances} if tolerances else {}
    try:
        model = SpacetimeModel(dimension=dim, metric_kind=mkind,
                               mass_kind=qkind, mass=mass_value,
                               domain_box=box, resolutions=resolutions,
                               source=source or None, **kw)
    except ValueError as exc:
        raise ModelFileError(str(exc), "metric", _line_of(text, "metric")) from exc
    if mkind != "minkowski" or qkind == "scalar":
        model.validate()
    return model


def load(path: str) -> SpacetimeModel:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


def model_tolerances(model: SpacetimeModel) -> Dict[str, float]:
    if model.source and "tolerances" in model.source:
        return dict(model.source["tolerances"])
    return {}


def _emit(value, indent: int) -> str:
    pad = " " * indent
    if isinstance(value, dict):
        rows = [f'{pad}  {json.dumps(k)}: {_emit(v, indent + 2).lstrip()}'
                for k, v in value.items()]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(value, list):
        if all(not isinstance(v, (dict, list)) for v in value):
            return "[" + ", ".join(json.dumps(v) for v in value) + "]"
        rows = [f"{pad}  {_emit(v, indent + 2)}" for v in value]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    return json.dumps(value)


def dumps(model: SpacetimeModel) -> str:
    """Canonical JSON for the model: fixed key order, shortest float repr."""
    doc: Dict[str, object] = {"dimension": model.dimension}
    if model.metric_kind == "minkowski":
        doc["metric"] = {"kind": "minkowski"}
    elif model.metric_kind == "conformal2d":
        doc["metric"] = {"kind": "conformal2d", "omega": model.conformal_factor.source}
    else:
        doc["metric"] = {"kind": "vielbein4d",
                         "frame": [[e.source for e in row] for row in model.vielbein]}
    if model.mass_kind == "constant":
        doc["mass"] = {"kind": "constant", "re": model.mass.real, "im": model.mass.imag}
    elif model.mass_kind == "scalar":
        doc["mass"] = {"kind": "scalar", "phi": model.mass_field.source}
    else:
        doc["mass"] = {"kind": "diagonal"}
    if model.vector_potentials is not None:
        A, B = model.vector_potentials
        doc["vector_potentials"] = {"A": [e.source for e in A], "B": [e.source for e in B]}
    doc["domain"] = {"box": [[float(lo), float(hi)] for lo, hi in model.domain_box]}
    doc["resolutions"] = {k: int(v) for k, v in model.resolutions.items() if v is not None}
    tols = model_tolerances(model)
    if tols:
        doc["tolerances"] = tols
    return _emit(doc, 0) + "\n"


def dump(model: SpacetimeModel, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))

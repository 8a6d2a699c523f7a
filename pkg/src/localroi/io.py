"""Canonical JSON I/O with schema validation.

Canonical form: sorted keys, two-space indentation with scalar arrays kept
on one line, floats written with 17 significant digits, trailing newline.
NaN and infinities are rejected in both directions, so ``dumps(loads(x))``
is byte-stable.
"""

from __future__ import annotations

import json
import math
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np
from jsonschema import Draft202012Validator
from jsonschema.exceptions import ValidationError

from . import __version__
from .errors import SchemaError
from .incompatibility import RoiCertificate
from .linalg import matrix_from_json, matrix_to_json
from .measurements import DeterministicResponse, MeasurementSet, Povm
from .discrimination import DiscriminationTask, Ensemble

__all__ = [
    "SCHEMA_IDS",
    "dumps",
    "loads",
    "validate",
    "load",
    "save",
    "set_to_json",
    "set_from_json",
    "task_to_json",
    "task_from_json",
    "cert_to_json",
    "cert_from_json",
    "envelope",
]

SCHEMA_IDS = (
    "measurement_set.v1",
    "task.v1",
    "roi_cert.v1",
    "bound_report.v1",
    "bundle_meta.v1",
    "sdp_dump.v1",
    "command_report.v1",
)


# --------------------------------------------------------------------------
# canonical text


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise SchemaError(f"non-finite number {x!r} cannot be written", "")
    if x == 0.0:
        return "0.0"
    s = format(x, ".17g")
    if all(ch not in s for ch in ".en"):
        s += ".0"
    return s


def _plain(obj: Any) -> Any:
    """Convert numpy scalars/arrays and tuples to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _scalar(v: Any) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _fmt_float(v)
    if isinstance(v, str):
        return json.dumps(v, ensure_ascii=False)
    raise SchemaError(f"cannot serialize {type(v).__name__}", "")


def _emit(v: Any, indent: int) -> str:
    pad = "  " * indent
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = [f'{pad}  {json.dumps(k, ensure_ascii=False)}: {_emit(v[k], indent + 1)}' for k in sorted(v)]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(v, list):
        if not v:
            return "[]"
        if all(not isinstance(x, (dict, list)) for x in v):
            return "[" + ", ".join(_scalar(x) for x in v) + "]"
        if all(isinstance(x, list) and all(not isinstance(y, (dict, list)) for y in x) for x in v):
            return "[" + ", ".join(_emit(x, indent + 1) for x in v) + "]"
        items = [pad + "  " + _emit(x, indent + 1) for x in v]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return _scalar(v)


def dumps(obj: Any) -> str:
    return _emit(_plain(obj), 0) + "\n"


def _reject_constant(name: str) -> Any:
    raise SchemaError(f"{name} is not a valid number", "")


def loads(text: str) -> Any:
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})", "") from exc


# --------------------------------------------------------------------------
# schemas


@lru_cache(maxsize=None)
def _validator(schema_id: str) -> Draft202012Validator:
    if schema_id not in SCHEMA_IDS:
        raise SchemaError(f"unknown schema {schema_id!r}", "")
    text = resources.files("localroi").joinpath("schemas", f"{schema_id}.json").read_text()
    return Draft202012Validator(json.loads(text))


def _pointer(err: ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            path.append(missing[0])
    return "/" + "/".join(p.replace("~", "~0").replace("/", "~1") for p in path) if path else ""


def validate(obj: Any, schema_id: str) -> None:
    errors = sorted(_validator(schema_id).iter_errors(obj), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        err = errors[0]
        ptr = _pointer(err)
        raise SchemaError(f"{schema_id}: {err.message}", ptr)


def load(path: str | Path, schema_id: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}", "") from exc
    obj = loads(text)
    validate(obj, schema_id)
    return obj


def save(path: str | Path, obj: Any, schema_id: str) -> str:
    obj = _plain(obj)
    validate(obj, schema_id)
    text = dumps(obj)
    Path(path).write_text(text)
    return text


def envelope(schema_id: str, body: dict, config: dict | None = None) -> dict:
    """Attach schema id, tool version and the resolved run config."""
    return {"schema": schema_id, "version": __version__, "config": config or {}, **body}


# --------------------------------------------------------------------------
# typed converters


def _matrix(obj: Any, where: str) -> np.ndarray:
    try:
        return matrix_from_json(obj)
    except ValueError as exc:
        raise SchemaError(str(exc), where) from exc


def set_to_json(s: MeasurementSet, label: str | None = None) -> dict:
    out = {"schema": "measurement_set.v1", "dim": s.dim, "povms": [[matrix_to_json(e) for e in p] for p in s]}
    if label:
        out["label"] = label
    return out


def set_from_json(obj: dict) -> MeasurementSet:
    validate(obj, "measurement_set.v1")
    dim = obj["dim"]
    povms = []
    for k, p in enumerate(obj["povms"]):
        effects = []
        for c, e in enumerate(p):
            m = _matrix(e, f"/povms/{k}/{c}")
            if m.shape != (dim, dim):
                raise SchemaError(f"effect shape {m.shape} does not match dim {dim}", f"/povms/{k}/{c}")
            effects.append(m)
        povms.append(Povm(tuple(effects)))
    return MeasurementSet(tuple(povms))


def task_to_json(t: DiscriminationTask, label: str | None = None) -> dict:
    out = {
        "schema": "task.v1",
        "party_dims": list(t.party_dims),
        "ensembles": [
            {"prior": e.prior, "states": [{"weight": float(w), "rho": matrix_to_json(r)} for w, r in zip(e.weights, e.states)]}
            for e in t.ensembles
        ],
    }
    if label:
        out["label"] = label
    return out


def task_from_json(obj: dict) -> DiscriminationTask:
    validate(obj, "task.v1")
    ensembles = []
    for y, e in enumerate(obj["ensembles"]):
        states = tuple(_matrix(s["rho"], f"/ensembles/{y}/states/{b}/rho") for b, s in enumerate(e["states"]))
        weights = np.array([s["weight"] for s in e["states"]], dtype=float)
        ensembles.append(Ensemble(float(e["prior"]), weights, states))
    try:
        return DiscriminationTask(tuple(obj["party_dims"]), tuple(ensembles))
    except ValueError as exc:
        raise SchemaError(f"invalid task: {exc}", "/ensembles") from exc


def cert_to_json(cert: RoiCertificate, config: dict | None = None) -> dict:
    body = {
        "roi": cert.roi,
        "gap": cert.gap,
        "primal_scale": cert.primal_scale,
        "dual_value": cert.dual_value,
        "witness_trace": cert.witness_trace,
        "outcome_counts": list(cert.strings.outcome_counts),
        "strings": [list(s) for s in cert.strings.strings],
        "primal_parent": [matrix_to_json(g) for g in cert.primal_parent],
        "dual_X": matrix_to_json(cert.dual_X),
        "dual_w": [[matrix_to_json(w) for w in row] for row in cert.dual_w],
        "residuals": {k: v for k, v in cert.residuals.items()},
        "valid": not any(k.startswith("fail:") for k in cert.residuals),
    }
    return envelope("roi_cert.v1", body, config)


def cert_from_json(obj: dict) -> RoiCertificate:
    validate(obj, "roi_cert.v1")
    strings = DeterministicResponse(tuple(obj["outcome_counts"]), tuple(tuple(s) for s in obj["strings"]))
    return RoiCertificate(
        roi=float(obj["roi"]),
        primal_parent=tuple(_matrix(g, f"/primal_parent/{i}") for i, g in enumerate(obj["primal_parent"])),
        primal_scale=float(obj["primal_scale"]),
        strings=strings,
        dual_X=_matrix(obj["dual_X"], "/dual_X"),
        dual_w=tuple(
            tuple(_matrix(w, f"/dual_w/{k}/{c}") for c, w in enumerate(row)) for k, row in enumerate(obj["dual_w"])
        ),
        dual_value=float(obj["dual_value"]),
        gap=float(obj["gap"]),
        residuals={k: float(v) for k, v in obj["residuals"].items()},
    )

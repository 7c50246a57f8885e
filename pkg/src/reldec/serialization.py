"""JSON encodings of states, projectors, beables and reports.

Complex numbers are ``[re, im]`` pairs everywhere. Parsing errors raise
:class:`SpecError` carrying the path of the offending element, e.g.
``state.amplitudes[3]``.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .qstate import (
    BeableObservable,
    DensityOperator,
    Ket,
    Projector,
    StateError,
    SubsystemLayout,
)

SCHEMA_VERSION = 1

NAMED_OBSERVABLES = {
    "identity": np.eye(2),
    "sigma_x": np.array([[0, 1], [1, 0]]),
    "sigma_y": np.array([[0, -1j], [1j, 0]]),
    "sigma_z": np.array([[1, 0], [0, -1]]),
}


class SpecError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _expect(cond, path, message):
    if not cond:
        raise SpecError(path, message)


def _is_number(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def parse_complex(value, path: str) -> complex:
    if _is_number(value):
        return complex(value)
    _expect(
        isinstance(value, list) and len(value) == 2 and all(_is_number(v) for v in value),
        path,
        f"expected a complex number as [re, im], got {value!r}",
    )
    return complex(value[0], value[1])


def parse_vector(values, path: str) -> np.ndarray:
    _expect(isinstance(values, list) and values, path, "expected a non-empty list of complex numbers")
    return np.array([parse_complex(v, f"{path}[{i}]") for i, v in enumerate(values)], dtype=complex)


def parse_matrix(rows, path: str) -> np.ndarray:
    _expect(isinstance(rows, list) and rows, path, "expected a non-empty list of rows")
    m = [parse_vector(r, f"{path}[{i}]") for i, r in enumerate(rows)]
    _expect(all(len(r) == len(m) for r in m), path, "matrix is not square")
    return np.array(m)


def complex_to_json(z) -> list[float]:
    return [float(np.real(z)), float(np.imag(z))]


def vector_to_json(v) -> list:
    return [complex_to_json(z) for z in np.asarray(v).reshape(-1)]


def matrix_to_json(m) -> list:
    return [vector_to_json(r) for r in np.asarray(m)]


def parse_layout(spec, path: str = "layout") -> SubsystemLayout:
    _expect(isinstance(spec, dict), path, "expected an object with 'dims' and 'labels'")
    dims = spec.get("dims")
    _expect(isinstance(dims, list) and all(isinstance(d, int) for d in dims), f"{path}.dims",
            "expected a list of integers")
    labels = spec.get("labels")
    try:
        return SubsystemLayout(dims, labels)
    except StateError as exc:
        raise SpecError(path, str(exc)) from None


def layout_to_json(layout: SubsystemLayout) -> dict:
    return {"dims": list(layout.dims), "labels": list(layout.labels)}


def _labels(spec, key, path, layout: SubsystemLayout):
    labels = spec.get(key)
    if isinstance(labels, str):
        labels = [labels]
    _expect(isinstance(labels, list) and labels, f"{path}.{key}", "expected a list of subsystem labels")
    for i, l in enumerate(labels):
        _expect(str(l) in layout.labels, f"{path}.{key}[{i}]", f"unknown subsystem label {l!r}")
    return tuple(str(l) for l in labels)


def _amplitudes(spec, path, layout: SubsystemLayout) -> np.ndarray:
    _expect(isinstance(spec, dict), path, "expected a state object")
    if "amplitudes" in spec:
        v = parse_vector(spec["amplitudes"], f"{path}.amplitudes")
        _expect(v.size == layout.dim, f"{path}.amplitudes", f"expected {layout.dim} amplitudes, got {v.size}")
        return v
    if "basis" in spec:
        idx = spec["basis"]
        _expect(isinstance(idx, list) and len(idx) == len(layout.dims)
                and all(isinstance(i, int) and 0 <= i < d for i, d in zip(idx, layout.dims)),
                f"{path}.basis", f"expected one basis index per subsystem for dims {list(layout.dims)}")
        v = np.zeros(layout.dim, dtype=complex)
        v[np.ravel_multi_index(tuple(idx), layout.dims)] = 1
        return v
    if "product" in spec:
        factors = spec["product"]
        _expect(isinstance(factors, list) and len(factors) == len(layout.dims), f"{path}.product",
                f"expected {len(layout.dims)} factor states")
        v = np.ones(1, dtype=complex)
        for i, (f, d) in enumerate(zip(factors, layout.dims)):
            fv = parse_vector(f, f"{path}.product[{i}]")
            _expect(fv.size == d, f"{path}.product[{i}]", f"expected {d} amplitudes")
            _expect(abs(np.vdot(fv, fv).real - 1) <= 1e-10, f"{path}.product[{i}]", "factor is not normalized")
            v = np.kron(v, fv)
        return v
    if "branches" in spec:
        branches = spec["branches"]
        _expect(isinstance(branches, list) and branches, f"{path}.branches", "expected a list of branches")
        total_w = 0.0
        v = np.zeros(layout.dim, dtype=complex)
        for i, b in enumerate(branches):
            bp = f"{path}.branches[{i}]"
            _expect(isinstance(b, dict) and _is_number(b.get("weight")) and b["weight"] >= 0,
                    f"{bp}.weight", "expected a non-negative weight")
            bv = _amplitudes(b.get("ket"), f"{bp}.ket", layout)
            _expect(abs(np.vdot(bv, bv).real - 1) <= 1e-10, f"{bp}.ket", "branch ket is not normalized")
            total_w += b["weight"]
            v = v + math.sqrt(b["weight"]) * bv
        _expect(abs(total_w - 1) <= 1e-10, f"{path}.branches", f"branch weights sum to {total_w!r}, not 1")
        return v
    if "superposition" in spec:
        terms = spec["superposition"]
        _expect(isinstance(terms, list) and terms, f"{path}.superposition", "expected a list of terms")
        v = np.zeros(layout.dim, dtype=complex)
        for i, t in enumerate(terms):
            tp = f"{path}.superposition[{i}]"
            _expect(isinstance(t, dict), tp, "expected an object with 'amplitude' and 'ket'")
            v = v + parse_complex(t.get("amplitude"), f"{tp}.amplitude") * _amplitudes(t.get("ket"), f"{tp}.ket", layout)
        return v
    raise SpecError(path, "state needs one of 'amplitudes', 'basis', 'product', 'branches', 'superposition'")


def parse_ket(spec, layout: SubsystemLayout, path: str = "state") -> Ket:
    """Build a ket; the result must already be normalized (no silent rescaling)."""
    v = _amplitudes(spec, path, layout)
    try:
        return Ket(v, layout)
    except StateError as exc:
        raise SpecError(path, str(exc)) from None


def ket_to_json(ket: Ket) -> dict:
    return {"layout": layout_to_json(ket.layout), "amplitudes": vector_to_json(ket.amplitudes)}


def density_to_json(rho: DensityOperator) -> dict:
    return {"layout": layout_to_json(rho.layout), "matrix": matrix_to_json(rho.matrix)}


def parse_projector(spec, layout: SubsystemLayout, path: str, subsystems=None) -> Projector:
    _expect(isinstance(spec, dict), path, "expected a projector object")
    if subsystems is None:
        subsystems = _labels(spec, "subsystems", path, layout)
    d = layout.dim_of(subsystems)
    if "basis" in spec:
        idx = spec["basis"]
        _expect(isinstance(idx, list) and all(isinstance(i, int) and 0 <= i < d for i in idx),
                f"{path}.basis", f"expected basis indices in [0, {d})")
        return Projector.basis(d, idx, subsystems)
    try:
        if "vectors" in spec:
            vecs = spec["vectors"]
            _expect(isinstance(vecs, list) and vecs, f"{path}.vectors", "expected a list of vectors")
            vs = [parse_vector(v, f"{path}.vectors[{i}]") for i, v in enumerate(vecs)]
            _expect(all(v.size == d for v in vs), f"{path}.vectors", f"vectors must have {d} components")
            return Projector.onto(vs, subsystems)
        if "matrix" in spec:
            m = parse_matrix(spec["matrix"], f"{path}.matrix")
            _expect(m.shape[0] == d, f"{path}.matrix", f"expected a {d}x{d} matrix")
            return Projector(m, subsystems)
    except StateError as exc:
        raise SpecError(path, str(exc)) from None
    raise SpecError(path, "projector needs one of 'basis', 'vectors', 'matrix'")


def projector_to_json(p: Projector) -> dict:
    subs = p.subsystems if p.subsystems == "whole" else list(p.subsystems)
    return {"subsystems": subs, "matrix": matrix_to_json(p.matrix)}


def parse_beable(spec, layout: SubsystemLayout, path: str = "beable", name=None) -> BeableObservable:
    _expect(isinstance(spec, dict), path, "expected a beable object")
    subsystems = _labels(spec, "subsystems", path, layout)
    d = layout.dim_of(subsystems)
    name = spec.get("name", name)
    names = spec.get("value_names")
    try:
        if "partition" in spec:
            part = spec["partition"]
            _expect(isinstance(part, list) and all(isinstance(p, list) for p in part), f"{path}.partition",
                    "expected a list of index lists")
            return BeableObservable.computational(subsystems, d, part, names, name)
        projs = spec.get("projectors")
        _expect(isinstance(projs, list), f"{path}.projectors", "expected 'partition' or a list of projectors")
        ps = [parse_projector(p, layout, f"{path}.projectors[{i}]", subsystems) for i, p in enumerate(projs)]
        return BeableObservable(subsystems, ps, names, name)
    except StateError as exc:
        raise SpecError(path, str(exc)) from None


def beable_to_json(b: BeableObservable) -> dict:
    return {
        "name": b.name,
        "subsystems": list(b.subsystems),
        "value_names": list(b.value_names) if b.value_names else None,
        "projectors": [matrix_to_json(p.matrix) for p in b.projectors],
    }


def parse_observable(spec, dim: int, path: str = "observable") -> np.ndarray:
    """Hermitian matrix from ``{"named": ...}``, ``{"diag": [...]}`` or ``{"matrix": ...}``."""
    _expect(isinstance(spec, dict), path, "expected an observable object")
    if "named" in spec:
        _expect(spec["named"] in NAMED_OBSERVABLES, f"{path}.named",
                f"unknown observable; choose from {sorted(NAMED_OBSERVABLES)}")
        if spec["named"] == "identity":
            return np.eye(dim, dtype=complex)
        m = NAMED_OBSERVABLES[spec["named"]]
    elif "diag" in spec:
        diag = spec["diag"]
        _expect(isinstance(diag, list) and all(_is_number(x) for x in diag), f"{path}.diag",
                "expected a list of real numbers")
        m = np.diag(diag)
    elif "matrix" in spec:
        m = parse_matrix(spec["matrix"], f"{path}.matrix")
    else:
        raise SpecError(path, "observable needs one of 'named', 'diag', 'matrix'")
    m = np.asarray(m, dtype=complex)
    _expect(m.shape == (dim, dim), path, f"expected a {dim}x{dim} observable, got {m.shape}")
    _expect(np.max(np.abs(m - m.conj().T)) <= 1e-10, path, "observable is not Hermitian")
    return m


def load_json(path) -> dict:
    path = Path(path)
    try:
        with path.open() as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise SpecError(str(path), "file not found") from None
    except json.JSONDecodeError as exc:
        raise SpecError(str(path), f"invalid JSON: {exc}") from None
    _expect(isinstance(data, dict), str(path), "top level must be an object")
    return data


def dumps_report(report: dict) -> str:
    """Canonical report text: schema field, sorted keys, stable float repr."""
    body = {"schema": SCHEMA_VERSION, **report}
    return json.dumps(body, sort_keys=True, indent=2, allow_nan=False) + "\n"

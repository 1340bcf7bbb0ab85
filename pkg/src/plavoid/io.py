"""JSON formats.

Numbers may be JSON numbers, decimal strings, or rationals ``"p/q"``; in
rational mode they are read exactly.  Output numbers are always strings
(shortest round-trip decimal for floats, ``"p/q"`` for fractions).

* complex: ``{"vertices": [[...]], "simplices": [[...]]}``; a refined complex
  adds ``"refines": {"weights": [{"<parent vertex>": "p/q", ...}, ...]}``.
* field / map: ``{"complex": <complex or omitted>, "values": [...]}`` with one
  entry (field) or one row (map) per vertex.
* target: ``{"kind": "origin" | "point" | "subspace" | "sphere-point" | "su2", ...}``.
* bundle: ``{"base", "patches", "fiber", "transitions", "section"}``.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bundle import BundleSpec, Section
from .charts import (AffineSubspaceTarget, Atlas, LipschitzTarget, euclidean_point_target,
                     euclidean_subspace_target, sphere_atlas, sphere_point_target)
from .complex import PLMap, PLScalarField, SimplicialComplex, VertexRegion, _closure, build_complex
from .errors import BadIndex, CarrierMismatch, PreconditionError
from .exact import fmt, parse_number, to_fraction


def load_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def dump_json(obj, path) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def _numbers(row, exact: bool) -> np.ndarray:
    vals = [parse_number(x, exact) for x in row]
    return np.array(vals, dtype=object if exact else float)


def _matrix(rows, exact: bool) -> np.ndarray:
    out = np.array([list(_numbers(r, exact)) for r in rows], dtype=object if exact else float)
    return out.reshape(len(rows), -1)


# --- complexes and fields --------------------------------------------------------------------

def complex_from_json(d: dict, parent: SimplicialComplex | None = None, name: str = "") -> SimplicialComplex:
    if "vertices" not in d or "simplices" not in d:
        raise BadIndex("complex JSON needs 'vertices' and 'simplices'")
    if "refines" not in d or parent is None:
        return build_complex([[parse_number(x, True) for x in v] for v in d["vertices"]],
                             d["simplices"], name=d.get("name", name))
    K = build_complex([[parse_number(x, True) for x in v] for v in d["vertices"]], d["simplices"],
                      name=d.get("name", name))
    weights = tuple({int(k): to_fraction(parse_number(x, True)) for k, x in w.items()}
                    for w in d["refines"]["weights"])
    if len(weights) != K.n_vertices:
        raise CarrierMismatch("refinement weights do not match the vertex count")
    for v, w in enumerate(weights):
        if any(k < 0 or k >= parent.n_vertices for k in w) or sum(w.values()) != 1:
            raise CarrierMismatch(f"vertex {v}: weights are not barycentric over the parent")
        pos = sum(parent.vertices[k] * float(x) for k, x in w.items())
        if np.max(np.abs(pos - K.vertices[v])) > 1e-9 * (1 + np.max(np.abs(pos))):
            raise CarrierMismatch(f"vertex {v} does not sit at its declared parent position")
        if len(w) > 1 and not any(set(w) <= set(s) for s in parent.simplices):
            raise CarrierMismatch(f"vertex {v}: weights do not lie in one parent simplex")
    return SimplicialComplex(K.vertices, _closure(K.facets, K.n_vertices), parent=parent,
                             weights=weights, name=K.name)


def complex_to_json(K: SimplicialComplex, relative_to: SimplicialComplex | None = None) -> dict:
    out = {"vertices": [[fmt(float(x)) for x in v] for v in K.vertices],
           "simplices": [list(s) for s in K.facets]}
    if relative_to is not None and K is not relative_to:
        out["refines"] = {"weights": [{str(k): fmt(x) for k, x in sorted(w.items())}
                                      for w in K.weights_to(relative_to)]}
    return out


def field_from_json(d, K: SimplicialComplex, exact: bool) -> PLScalarField:
    """A field document, a bare list of values, or one number for a constant field."""
    if isinstance(d, dict):
        d = d["values"]
    if not isinstance(d, list):
        d = [d] * K.n_vertices
    if len(d) != K.n_vertices:
        raise CarrierMismatch(f"field has {len(d)} values for {K.n_vertices} vertices")
    return PLScalarField(K, _numbers(d, exact))


def map_from_json(d, K: SimplicialComplex, exact: bool) -> PLMap:
    if isinstance(d, dict):
        d = d["values"]
    if len(d) != K.n_vertices:
        raise CarrierMismatch(f"map has {len(d)} rows for {K.n_vertices} vertices")
    return PLMap(K, _matrix(d, exact))


def map_to_json(g: PLMap, relative_to: SimplicialComplex | None = None) -> dict:
    return {"complex": complex_to_json(g.complex, relative_to),
            "values": [[fmt(x) for x in row] for row in g.values]}


def field_to_json(F: PLScalarField) -> dict:
    return {"values": [fmt(x) for x in F.values]}


def region_from_json(d, K: SimplicialComplex) -> VertexRegion:
    if isinstance(d, dict):
        return VertexRegion.of(K, d["vertices"], d.get("mode", "closed"))
    return VertexRegion.of(K, d)


# --- targets --------------------------------------------------------------------------------------

def target_from_json(d: dict, p: int) -> tuple[Atlas | None, LipschitzTarget | None]:
    """``(atlas, target)``; the origin target returns ``(None, None)`` (kernel route)."""
    kind = d.get("kind")
    if kind == "origin":
        return None, None
    if kind == "point":
        return euclidean_point_target([parse_number(x, False) for x in d["z"]], d.get("name", "point"))
    if kind == "subspace":
        A = _matrix(d["A"], False)
        c = _numbers(d.get("c", [0] * len(A)), False)
        return euclidean_subspace_target(A, c, int(d["q"]), d.get("name", "subspace"))
    if kind == "sphere-point":
        z = _numbers(d["z"], False)
        atlas = sphere_atlas(len(z) - 1, to_fraction(parse_number(d.get("scale_sq", 1), True)),
                             north=None if "north" not in d else _numbers(d["north"], False))
        return atlas, sphere_point_target(atlas, z, d.get("name", "pole"))
    if kind == "su2":
        from .matrix import su2_atlas
        return su2_atlas()
    raise PreconditionError(f"unknown target kind {kind!r}")


# --- bundles --------------------------------------------------------------------------------------

def bundle_from_json(d: dict, exact: bool) -> tuple[BundleSpec, Section]:
    base = complex_from_json(d["base"], name="base")
    atlas, target = target_from_json(d["fiber"], 0)
    if atlas is None:
        raise PreconditionError("a bundle fiber needs a chart-described target")
    comps: dict = {}
    for t in d["transitions"]:
        M = [[to_fraction(parse_number(x, True)) for x in r] for r in t["M"]]
        b = None if "b" not in t else [to_fraction(parse_number(x, True)) for x in t["b"]]
        comps.setdefault((int(t["to"]), int(t["from"])), []).append(
            (t["vertices"], np.array(M, dtype=object), None if b is None else np.array(b, dtype=object)))
    spec = BundleSpec.build(base, d["patches"], atlas, target, comps)
    reps = tuple(map_from_json(rows, base, exact).values for rows in d["section"])
    if len(reps) != len(spec.patches):
        raise PreconditionError("one section representative per patch required")
    return spec, Section(base, reps)


def section_to_json(s: Section, base: SimplicialComplex) -> dict:
    return {"complex": complex_to_json(s.complex, base),
            "representatives": [[[fmt(x) for x in row] for row in r] for r in s.reps]}


# --- unitary fields --------------------------------------------------------------------------------

def unitary_from_json(rows, K: SimplicialComplex, exact: bool):
    """Per-vertex matrices ``[[[re, im], [re, im]], [[re, im], [re, im]]]``."""
    from .matrix import UnitaryField
    if len(rows) != K.n_vertices:
        raise CarrierMismatch(f"field has {len(rows)} matrices for {K.n_vertices} vertices")
    mats = [np.array([[complex(float(Fraction(str(z[0]))), float(Fraction(str(z[1])))) for z in r] for r in U])
            for U in rows]
    return UnitaryField.from_matrices(K, mats, exact=exact)

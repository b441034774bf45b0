"""JSON mesh files.

Layout::

    {"version": 1, "dimension": 2 or 3, "rho0": 0.05,
     "vertices": [[x, y(, z)], ...],
     "edges": [{"v": [i, j], "geom": {"type", "params", "t0", "t1"} or null, "tag": ...}],
     "faces": [{"edges": [signed ids], "geom": {"type", "params"} or null, "tag": ...}],
     "cells": [{"boundary": [signed ids], "region": int, "role": str}]}

A signed id ``s >= 0`` refers to entity ``s`` in its stored orientation; a
negative ``s`` refers to entity ``-s - 1`` reversed (``~s`` in two's complement),
so entity 0 can be reversed too.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import TAGS, Cell, CellRole, Curve, Edge, Face, Mesh, MeshError, SurfacePatch

VERSION = 1


class MeshFormatError(MeshError):
    pass


def encode_signed(ident: int, sign: int) -> int:
    return ident if sign > 0 else -ident - 1


def decode_signed(value: int) -> tuple[int, int]:
    value = int(value)
    return (value, 1) if value >= 0 else (-value - 1, -1)


def mesh_to_dict(mesh: Mesh) -> dict:
    return {
        "version": VERSION,
        "dimension": mesh.dim,
        "rho0": mesh.rho0,
        "vertices": mesh.vertices.tolist(),
        "edges": [{"v": list(e.v), "geom": e.curve.to_dict() if e.curve is not None else None, "tag": e.tag}
                  for e in mesh.edges],
        "faces": [{"edges": [encode_signed(i, s) for i, s in f.edges],
                   "geom": f.patch.to_dict() if f.patch is not None else None, "tag": f.tag}
                  for f in mesh.faces],
        "cells": [{"boundary": [encode_signed(i, s) for i, s in c.boundary], "region": c.region,
                   "role": c.role.value} for c in mesh.cells],
    }


def _fail(where: str, msg: str):
    raise MeshFormatError(f"{where}: {msg}")


def _tag(value, where):
    tag = value if value is not None else "interior"
    if tag not in TAGS:
        _fail(where, f"unknown tag {tag!r}")
    return tag


def mesh_from_dict(data: dict) -> Mesh:
    if not isinstance(data, dict):
        _fail("document", "expected a JSON object")
    if data.get("version") != VERSION:
        raise MeshFormatError(f"unsupported mesh file version {data.get('version')!r} (expected {VERSION})")
    dim = data.get("dimension")
    if dim not in (2, 3):
        _fail("dimension", f"expected 2 or 3, got {dim!r}")
    try:
        verts = np.asarray(data["vertices"], dtype=float).reshape(-1, dim)
    except (KeyError, ValueError, TypeError) as exc:
        _fail("vertices", str(exc))
    edges = []
    for i, e in enumerate(data.get("edges", [])):
        where = f"edge {i}"
        try:
            a, b = (int(x) for x in e["v"])
        except (KeyError, ValueError, TypeError):
            _fail(where, "field 'v' must be a vertex pair")
        if not (0 <= a < len(verts) and 0 <= b < len(verts)):
            _fail(where, "vertex index out of range")
        curve = None
        g = e.get("geom")
        if g:
            try:
                curve = Curve(g["type"], g["params"], g["t0"], g["t1"])
            except KeyError as exc:
                _fail(where, f"curve field {exc} missing")
            except MeshError as exc:
                _fail(where, str(exc))
        edges.append(Edge((a, b), curve, _tag(e.get("tag"), where)))
    faces = []
    for i, f in enumerate(data.get("faces", [])):
        where = f"face {i}"
        loop = [decode_signed(s) for s in f.get("edges", [])]
        if any(not 0 <= eid < len(edges) for eid, _ in loop):
            _fail(where, "edge index out of range")
        patch = None
        g = f.get("geom")
        if g:
            try:
                patch = SurfacePatch(g["type"], g["params"])
            except KeyError as exc:
                _fail(where, f"surface field {exc} missing")
            except MeshError as exc:
                _fail(where, str(exc))
        faces.append(Face(loop, patch, _tag(f.get("tag"), where)))
    cells = []
    n_facets = len(edges) if dim == 2 else len(faces)
    for i, c in enumerate(data.get("cells", [])):
        where = f"cell {i}"
        bnd = [decode_signed(s) for s in c.get("boundary", [])]
        if any(not 0 <= fid < n_facets for fid, _ in bnd):
            _fail(where, "boundary index out of range")
        try:
            role = CellRole(c.get("role", "plain"))
        except ValueError:
            _fail(where, f"unknown role {c.get('role')!r}")
        cells.append(Cell(bnd, int(c.get("region", 1)), role))
    return Mesh(dim, verts, edges, faces, cells, float(data.get("rho0", 0.05)))


def write_mesh(mesh: Mesh, path) -> None:
    Path(path).write_text(json.dumps(mesh_to_dict(mesh), indent=1))


def read_mesh(path) -> Mesh:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MeshFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return mesh_from_dict(data)


def mesh_io(path, mode: str = "r", mesh: Mesh | None = None):
    """Read (``mode="r"``) or write (``mode="w"``) a mesh file."""
    if mode == "r":
        return read_mesh(path)
    if mode == "w":
        if mesh is None:
            raise ValueError("writing needs a mesh")
        write_mesh(mesh, path)
        return None
    raise ValueError(f"unknown mode {mode!r}")

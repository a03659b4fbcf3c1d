"""CSV and JSON serialization for level sequences, curves, and graphs.

Level sequences: CSV with header ``index,value`` and ``#``-prefixed
``key: value`` metadata lines (``unit``, ``phi``, ``provenance`` plus any
extras). Curves: CSV ``x,y,err`` with the same comment scheme. Graphs:
JSON with ``vertices``, ``bonds`` and ``phases`` arrays (lengths in meters,
phases in radians). All floats are written with 17 significant digits, so
round trips are bit exact.
"""

from __future__ import annotations

import json

import numpy as np

from .qgraph import CIRCULATOR, NEUMANN, Bond, GraphSpec, Vertex
from .spectra import CurveWithErrors, LevelSequence

__all__ = [
    "write_levels",
    "read_levels",
    "write_curve",
    "read_curve",
    "write_graph",
    "read_graph",
]

_FMT = "%.17g"


def _write_meta(fh, meta):
    for key, value in meta.items():
        if value is None or value == "":
            continue
        fh.write(f"# {key}: {value}\n")


def _read_meta_and_rows(path, n_columns):
    meta, rows = {}, []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    meta[key.strip()] = value.strip()
                continue
            if any(c.isalpha() for c in line.split(",")[0]):
                continue  # header row
            parts = line.split(",")
            if len(parts) != n_columns:
                raise ValueError(f"{path}: expected {n_columns} columns, "
                                 f"got {len(parts)}")
            rows.append([float(p) for p in parts])
    return meta, np.asarray(rows, dtype=float)


def write_levels(seq, path, extra_meta=None):
    """Write a LevelSequence as index,value CSV with metadata comments."""
    meta = {"unit": seq.unit}
    if seq.phi is not None:
        meta["phi"] = _FMT % seq.phi
    if seq.provenance:
        meta["provenance"] = seq.provenance
    meta.update(extra_meta or {})
    with open(path, "w", encoding="utf-8") as fh:
        _write_meta(fh, meta)
        fh.write("index,value\n")
        for i, v in enumerate(seq.values):
            fh.write(f"{i},{_FMT % v}\n")


def read_levels(path):
    """Read a level-sequence CSV. Returns (LevelSequence, metadata dict)."""
    meta, rows = _read_meta_and_rows(path, 2)
    if rows.size == 0:
        raise ValueError(f"{path}: no levels found")
    unit = meta.pop("unit", None)
    if unit is None:
        raise ValueError(f"{path}: missing '# unit:' metadata line")
    phi = meta.pop("phi", None)
    provenance = meta.pop("provenance", "")
    seq = LevelSequence(values=rows[:, 1], unit=unit,
                        phi=None if phi is None else float(phi),
                        provenance=provenance)
    return seq, meta


def write_curve(curve, path, extra_meta=None):
    """Write a CurveWithErrors as x,y,err CSV with metadata comments."""
    meta = dict(curve.meta)
    meta.update(extra_meta or {})
    with open(path, "w", encoding="utf-8") as fh:
        _write_meta(fh, meta)
        fh.write("x,y,err\n")
        for x, y, e in zip(curve.x, curve.y, curve.err):
            fh.write(f"{_FMT % x},{_FMT % y},{_FMT % e}\n")


def read_curve(path):
    """Read an x,y,err CSV back into a CurveWithErrors."""
    meta, rows = _read_meta_and_rows(path, 3)
    if rows.size == 0:
        raise ValueError(f"{path}: no points found")
    return CurveWithErrors(rows[:, 0], rows[:, 1], rows[:, 2], meta=meta)


def write_graph(g, path):
    """Write a GraphSpec as JSON (vertices, bonds, phases arrays)."""
    vertices = []
    for v in g.vertices:
        entry = {"id": v.id, "kind": v.kind}
        if v.kind == CIRCULATOR:
            entry["orientation"] = v.orientation
            entry["ports"] = list(v.ports)
        vertices.append(entry)
    bonds = [{"i": b.i, "j": b.j, "length": b.length} for b in g.bonds]
    phases = [{"i": b.i, "j": b.j, "phase_ij": b.phase_ij,
               "phase_ji": b.phase_ji}
              for b in g.bonds if b.phase_ij or b.phase_ji]
    doc = {"vertices": vertices, "bonds": bonds, "phases": phases,
           "validate_lengths": g.validate_lengths}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_graph(path):
    """Read a GraphSpec from its JSON form."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    vertices = []
    for entry in doc["vertices"]:
        kind = entry.get("kind", NEUMANN)
        if kind == CIRCULATOR:
            vertices.append(Vertex(id=int(entry["id"]), kind=kind,
                                   orientation=int(entry["orientation"]),
                                   ports=tuple(entry["ports"])))
        else:
            vertices.append(Vertex(id=int(entry["id"])))
    phase_map = {}
    for entry in doc.get("phases", ()):
        phase_map[(int(entry["i"]), int(entry["j"]))] = (
            float(entry.get("phase_ij", 0.0)), float(entry.get("phase_ji", 0.0)))
    bonds = []
    for entry in doc["bonds"]:
        i, j = int(entry["i"]), int(entry["j"])
        ph = phase_map.get((i, j), (0.0, 0.0))
        bonds.append(Bond(i=i, j=j, length=float(entry["length"]),
                          phase_ij=ph[0], phase_ji=ph[1]))
    return GraphSpec(vertices=tuple(vertices), bonds=tuple(bonds),
                     validate_lengths=bool(doc.get("validate_lengths", True)))

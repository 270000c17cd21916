"""CSV and legacy-VTK output."""
from __future__ import annotations

import csv
import io as _io
import sys

import numpy as np

CSV_COLUMNS = (
    "level",
    "ndof",
    "h_max",
    "eta",
    "eta_r",
    "eta_jn",
    "eta_ju",
    "osc",
    "energy_err",
    "dg_err",
    "effectivity",
    "seconds",
)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def emit_csv(record, stream=None) -> str:
    """Write one row per level; returns the text. Error columns stay empty
    when no error measure was available."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for lv in record.levels:
        w.writerow([_fmt(getattr(lv, c)) for c in CSV_COLUMNS])
    text = buf.getvalue()
    if stream is not None:
        stream.write(text)
    return text


def write_csv(record, path) -> None:
    if path == "-":
        emit_csv(record, sys.stdout)
        return
    try:
        with open(path, "w", newline="") as fh:
            emit_csv(record, fh)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror}") from exc


def emit_vtk(mesh, fields: dict, path, title: str = "jumpfem") -> None:
    """Legacy ASCII unstructured grid with per-element scalar cell data."""
    nt = mesh.n_elements
    for name, values in fields.items():
        if np.shape(values) != (nt,):
            raise ValueError(f"cell field {name!r} must have one value per element")
    lines = [
        "# vtk DataFile Version 3.0",
        title[:255],
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines += [f"{x!r} {y!r} 0.0" for x, y in mesh.vertices]
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {i} {j} {k}" for i, j, k in mesh.elements]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    if fields:
        lines.append(f"CELL_DATA {nt}")
    for name, values in fields.items():
        values = np.asarray(values)
        kind = "int" if np.issubdtype(values.dtype, np.integer) else "double"
        lines.append(f"SCALARS {name} {kind} 1")
        lines.append("LOOKUP_TABLE default")
        lines += [_fmt(v) for v in values]
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK to {path}: {exc.strerror}") from exc


def run_fields(record) -> dict:
    """Cell fields of the finest level: centroid value of u_h, eta_K, alpha_K
    and subdomain id."""
    u = record.solution
    centroid = np.array([[1.0, 1.0, 1.0]]) / 3.0
    return {
        "u_h": u.values(centroid)[:, 0],
        "eta_K": record.report.eta_K,
        "alpha_K": record.coeff.alpha,
        "subdomain": record.mesh.subdomain.astype(np.int64),
    }

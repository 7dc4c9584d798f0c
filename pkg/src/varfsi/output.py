"""Frame (CSV, legacy VTK) and diagnostics writers, plus the scenario runner."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .diagnostics import (
    boundary_pressure_resultant,
    energy_breakdown,
    min_contact_gap,
    relative_energy,
    system_momentum,
)
from .integrator import Simulation
from .scenario import Scenario, build_simulation

__all__ = [
    "VTK_QUAD",
    "VTK_HEXAHEDRON",
    "frame_header",
    "write_frame_csv",
    "read_frame_csv",
    "write_vtk",
    "diagnostics_columns",
    "diagnostics_row",
    "DiagnosticsWriter",
    "RunResult",
    "run_scenario",
]

VTK_QUAD = 9
VTK_HEXAHEDRON = 12

# slot order -> VTK corner order (counter-clockwise quads, bottom-then-top hexes)
_VTK_ORDER = {2: [0, 1, 3, 2], 3: [0, 1, 4, 2, 3, 6, 7, 5]}


def _io_error(path, exc):
    return OSError(f"cannot write {path}: {exc.strerror or exc}")


def frame_header(dim: int) -> list[str]:
    axes = "abc"[:dim]
    comps = "xyz"[:dim]
    return ["step", "time", "body", "node", *axes, *comps, *(f"v{c}" for c in comps)]


def write_frame_csv(path, sim: Simulation) -> Path:
    """One row per node of every body; floats use round-trip ``repr``."""
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(frame_header(sim.dim))
            t = repr(sim.time)
            for b, x, v in zip(sim.bodies, sim.x, sim.v):
                idx = b.mesh.index
                for n in range(b.mesh.n_nodes):
                    w.writerow(
                        [sim.step_index, t, b.name, n, *idx[n].tolist(),
                         *map(repr, x[n].tolist()), *map(repr, v[n].tolist())]
                    )
    except OSError as exc:
        raise _io_error(path, exc) from None
    return path


def read_frame_csv(path) -> dict:
    """Parse a frame file into ``{body: {"x": array, "v": array, "step": int}}``."""
    out: dict = {}
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        dim = (len(header) - 4) // 3
        for row in r:
            body = row[2]
            rec = out.setdefault(body, {"step": int(row[0]), "time": float(row[1]), "x": [], "v": []})
            rec["x"].append([float(s) for s in row[4 + dim: 4 + 2 * dim]])
            rec["v"].append([float(s) for s in row[4 + 2 * dim: 4 + 3 * dim]])
    for rec in out.values():
        rec["x"] = np.array(rec["x"])
        rec["v"] = np.array(rec["v"])
    return out


def write_vtk(path, mesh, x, v=None, title="varfsi frame") -> Path:
    """Legacy ASCII unstructured grid with quads (2D) or hexahedra (3D)."""
    path = Path(path)
    dim = mesh.dim
    x = np.asarray(x, dtype=float)
    pts = np.hstack([x, np.zeros((x.shape[0], 3 - dim))]) if dim == 2 else x
    conn = mesh.cells[:, _VTK_ORDER[dim]]
    ctype = VTK_QUAD if dim == 2 else VTK_HEXAHEDRON
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {pts.shape[0]} double"]
    lines += [" ".join(repr(c) for c in p) for p in pts.tolist()]
    k = conn.shape[1]
    lines.append(f"CELLS {conn.shape[0]} {conn.shape[0] * (k + 1)}")
    lines += [f"{k} " + " ".join(map(str, c)) for c in conn.tolist()]
    lines.append(f"CELL_TYPES {conn.shape[0]}")
    lines += [str(ctype)] * conn.shape[0]
    if v is not None:
        v = np.asarray(v, dtype=float)
        vv = np.hstack([v, np.zeros((v.shape[0], 3 - dim))]) if dim == 2 else v
        lines += [f"POINT_DATA {pts.shape[0]}", "VECTORS velocity double"]
        lines += [" ".join(repr(c) for c in p) for p in vv.tolist()]
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise _io_error(path, exc) from None
    return path


# ----------------------------------------------------------------- diagnostics


def diagnostics_columns(sim: Simulation) -> list[str]:
    cols = ["step", "time", "kinetic"]
    cols += [f"stored_{b.name}" for b in sim.bodies]
    cols += ["gravitational", "incompressibility", "contact", "total", "relative_energy"]
    cols += [f"J{k}" for k in range(1, (3 if sim.dim == 2 else 6) + 1)]
    cols.append("min_psi")
    if sim.dim == 2 and sim.fluid_index is not None:
        cols += ["resultant_left_x", "resultant_left_y", "resultant_right_x", "resultant_right_y"]
    return cols


def diagnostics_row(sim: Simulation, E0: float | None = None) -> dict:
    e = energy_breakdown(sim)
    total = e.total
    row = {"step": sim.step_index, "time": sim.time, "kinetic": e.kinetic}
    for name, val in e.stored.items():
        row[f"stored_{name}"] = val
    row.update(gravitational=e.gravitational, incompressibility=e.incompressibility,
               contact=e.contact, total=total,
               relative_energy=0.0 if E0 is None else relative_energy(total, E0))
    for k, j in enumerate(system_momentum(sim), start=1):
        row[f"J{k}"] = float(j)
    gap = min_contact_gap(sim)
    row["min_psi"] = gap
    if sim.dim == 2 and sim.fluid_index is not None:
        b = sim.bodies[sim.fluid_index]
        x = sim.x[sim.fluid_index]
        left = boundary_pressure_resultant(b.mesh, x, b.material.params, "left")
        right = boundary_pressure_resultant(b.mesh, x, b.material.params, "right")
        row.update(resultant_left_x=float(left[0]), resultant_left_y=float(left[1]),
                   resultant_right_x=float(right[0]), resultant_right_y=float(right[1]))
    return row


class DiagnosticsWriter:
    """Streams diagnostics rows to a CSV with a fixed column order."""

    def __init__(self, path, columns):
        self.path = Path(path)
        self.columns = list(columns)
        try:
            self._fh = self.path.open("w", newline="")
        except OSError as exc:
            raise _io_error(self.path, exc) from None
        self._w = csv.writer(self._fh)
        self._w.writerow(self.columns)

    def write(self, row: dict):
        self._w.writerow([repr(float(row[c])) if isinstance(row[c], float) else row[c] for c in self.columns])

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class RunResult:
    simulation: Simulation
    rows: list = field(default_factory=list)
    frames: list = field(default_factory=list)


def run_scenario(scenario: Scenario, out_dir=None, steps: int | None = None,
                 write_frames: bool = True, record: bool = True, progress=None) -> RunResult:
    """Run a scenario, writing frames/diagnostics to ``out_dir`` when given."""
    sim = build_simulation(scenario)
    steps = scenario.time.steps if steps is None else int(steps)
    stride = scenario.time.stride
    dstride = scenario.output.diagnostics_stride
    result = RunResult(sim)
    writer = None
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise _io_error(out, exc) from None
        writer = DiagnosticsWriter(out / "diagnostics.csv", diagnostics_columns(sim))
    E0 = energy_breakdown(sim).total if (record or writer) else None

    def emit(s):
        j = s.step_index
        if (record or writer) and (j % dstride == 0 or j == steps):
            row = diagnostics_row(s, E0)
            if record:
                result.rows.append(row)
            if writer:
                writer.write(row)
        if out is not None and write_frames and (j % stride == 0 or j == steps):
            if "csv" in scenario.output.formats:
                result.frames.append(write_frame_csv(out / f"frame_{j:06d}.csv", s))
            if "vtk" in scenario.output.formats:
                for b, x, v in zip(s.bodies, s.x, s.v):
                    write_vtk(out / f"{b.name}_{j:06d}.vtk", b.mesh, x, v, f"{b.name} step {j}")
        if progress is not None:
            progress(s)

    try:
        emit(sim)
        sim.run(steps, emit)
    finally:
        if writer:
            writer.close()
    return result

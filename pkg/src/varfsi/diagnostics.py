"""Momentum maps, energy accounting, pressure resultants and convergence tables."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .integrator import Simulation, contact_energy, contact_psi
from .kinematics import _det
from .materials import TaitParams, tait_pressure
from .mesh import Mesh

__all__ = [
    "EnergyBreakdown",
    "ConvergenceReport",
    "momentum_map",
    "momentum_map_cells",
    "system_momentum",
    "energy_breakdown",
    "relative_energy",
    "boundary_pressure_resultant",
    "l2_error",
    "injection_map",
    "convergence_rates",
    "min_contact_gap",
]

RELATIVE_FLOOR = 1e-30


def _cross(x, v):
    if x.shape[-1] == 2:
        return x[..., 0] * v[..., 1] - x[..., 1] * v[..., 0]
    return np.cross(x, v)


def momentum_map(x, v, mass, include=None) -> np.ndarray:
    """Lumped-node momentum map ``sum m (x cross v, v)``.

    2D: ``(J1, J2, J3)`` = (angular, horizontal, vertical).
    3D: ``(J1..J3, J4..J6)`` = (angular vector, linear vector).
    ``include`` is an optional boolean node mask.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    m = np.asarray(mass, dtype=float)
    if include is not None:
        x, v, m = x[include], v[include], m[include]
    mv = m[:, None] * v
    ang = _cross(x, mv).sum(axis=0)
    lin = mv.sum(axis=0)
    return np.concatenate([np.atleast_1d(ang), lin])


def momentum_map_cells(mesh: Mesh, rho0: float, x, v) -> np.ndarray:
    """Cell-sum form: each cell gives ``(M/share) (x cross v, v)`` at its corners."""
    x = np.asarray(x, dtype=float)[mesh.cells]
    v = np.asarray(v, dtype=float)[mesh.cells]
    w = rho0 * mesh.cell_volume / mesh.cells.shape[1]
    cr = _cross(x, v)
    ang = w * cr.reshape(-1, *cr.shape[2:]).sum(axis=0)
    lin = w * v.reshape(-1, x.shape[-1]).sum(axis=0)
    return np.concatenate([np.atleast_1d(ang), lin])


def system_momentum(sim: Simulation, include_fixed: bool = False) -> np.ndarray:
    """Total momentum map of all bodies; pinned nodes are left out by default."""
    total = None
    for b, x, v in zip(sim.bodies, sim.x, sim.v):
        mask = None if include_fixed else b.free
        j = momentum_map(x, v, b.mass, mask)
        total = j if total is None else total + j
    return total


@dataclass
class EnergyBreakdown:
    kinetic: float
    stored: dict = field(default_factory=dict)
    gravitational: float = 0.0
    incompressibility: float = 0.0
    contact: float = 0.0

    @property
    def total(self) -> float:
        return (
            self.kinetic
            + sum(self.stored.values())
            + self.gravitational
            + self.incompressibility
            + self.contact
        )


def energy_breakdown(sim: Simulation) -> EnergyBreakdown:
    """Energy at the current level: kinetic from ``v^j``, potentials from ``x^j``."""
    kin = 0.0
    grav = 0.0
    pen = 0.0
    stored = {}
    for b, x, v in zip(sim.bodies, sim.x, sim.v):
        kin += 0.5 * float(np.sum(b.mass[:, None] * v * v))
        grav -= float(np.sum(b.mass * (x @ sim.gravity)))
        stored[b.name] = b.stored_energy(x)
        pen += b.penalty_energy(x)
    con = 0.0
    if sim.contact_active:
        con = contact_energy(
            sim.pairs,
            [sim.x[k] for k in sim.solid_indices],
            sim.x[sim.fluid_index],
            sim.contact.stiffness,
        )
    return EnergyBreakdown(kin, stored, grav, pen, con)


def relative_energy(E, E0) -> float:
    return (E - E0) / max(abs(E0), RELATIVE_FLOOR)


def min_contact_gap(sim: Simulation) -> float:
    """Smallest constraint value over current pairs (``inf`` without contact)."""
    if not sim.contact_active or len(sim.pairs) == 0:
        return float("inf")
    psi = contact_psi(sim.pairs, [sim.x[k] for k in sim.solid_indices], sim.x[sim.fluid_index])
    return float(psi.min())


def _rot(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def boundary_pressure_resultant(mesh: Mesh, x, params: TaitParams, side: str,
                                offset: bool = False) -> np.ndarray:
    """Resultant of pressure forces on the left or right side of a 2D fluid.

    Sums, over side nodes d = 1..D-1, the two slot pressures of the adjacent
    boundary cells times a quarter of the +pi/2-rotated deformed edge.
    ``offset=True`` uses ``a_tilde J^-gamma - b`` instead of ``a_tilde J^-gamma``.
    """
    if mesh.dim != 2:
        raise ValueError("pressure resultants are defined for 2D fluids")
    x = np.asarray(x, dtype=float)
    A, D = (n - 1 for n in mesh.counts)
    ds = np.asarray(mesh.spacings)
    total = np.zeros(2)
    if D < 2:
        return total
    d = np.arange(1, D)
    if side == "right":
        col, cell_a = A, A - 1
        upper_slot, lower_slot = 1, 3
    elif side == "left":
        col, cell_a = 0, 0
        upper_slot, lower_slot = 0, 2
    else:
        raise ValueError("side must be 'left' or 'right'")
    up_cells = cell_a * D + d
    lo_cells = cell_a * D + d - 1

    def slot_pressure(cells, slot):
        jets = x[mesh.cells[cells]]
        t = mesh.edges
        e = (jets[:, t.tip[slot]] - jets[:, t.tail[slot]]) / ds[t.axis[slot]][:, None]
        J = np.abs(_det(np.swapaxes(e, -1, -2)))
        return tait_pressure(J, params, offset=offset)

    p_up = slot_pressure(up_cells, upper_slot)
    p_lo = slot_pressure(lo_cells, lower_slot)
    xd = x[col * mesh.counts[1] + d]
    xu = x[col * mesh.counts[1] + d + 1]
    xl = x[col * mesh.counts[1] + d - 1]
    if side == "right":
        e_up, e_lo = xd - xu, xl - xd
    else:
        e_up, e_lo = xu - xd, xd - xl
    total = (p_up[:, None] / 4 * _rot(e_up)).sum(axis=0) + (p_lo[:, None] / 4 * _rot(e_lo)).sum(axis=0)
    return total


def injection_map(coarse: Mesh, fine: Mesh) -> np.ndarray:
    """Fine-mesh node ids coinciding with the coarse lattice nodes.

    Requires identical origins and extents with every fine spacing an integer
    refinement of the coarse one.
    """
    if coarse.dim != fine.dim:
        raise ValueError("mesh dimensions differ")
    ratios = []
    for nc, nf, hc, hf in zip(coarse.counts, fine.counts, coarse.spacings, fine.spacings):
        r = hc / hf
        ri = int(round(r))
        if ri < 1 or abs(r - ri) > 1e-9 * r or (nc - 1) * ri != nf - 1:
            raise ValueError("meshes are not nested")
        ratios.append(ri)
    if not np.allclose(coarse.spec.origin, fine.spec.origin):
        raise ValueError("mesh origins differ")
    idx = coarse.index * np.asarray(ratios)
    return np.ravel_multi_index(tuple(idx.T), fine.counts)


def l2_error(xa, xb, mapping=None) -> float:
    """``sqrt(sum |xa - xb[mapping]|^2)`` over nodes."""
    xa = np.asarray(xa, dtype=float)
    xb = np.asarray(xb, dtype=float)
    if mapping is not None:
        xb = xb[mapping]
    if xa.shape != xb.shape:
        raise ValueError(f"node sets differ: {xa.shape} vs {xb.shape}")
    return float(np.sqrt(np.sum((xa - xb) ** 2)))


@dataclass(frozen=True)
class ConvergenceReport:
    parameters: tuple
    errors: tuple
    rates: tuple

    def rows(self):
        yield (self.parameters[0], self.errors[0], None)
        for p, e, r in zip(self.parameters[1:], self.errors[1:], self.rates):
            yield (p, e, r)

    def to_csv(self) -> str:
        lines = ["parameter,l2_error,rate"]
        for p, e, r in self.rows():
            lines.append(f"{p!r},{e!r},{'' if r is None else repr(r)}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        lines = [f"{'parameter':>12}  {'L2 error':>12}  {'rate':>7}"]
        for p, e, r in self.rows():
            lines.append(f"{p:>12.4g}  {e:>12.4g}  {'' if r is None else f'{r:7.3f}'}")
        return "\n".join(lines)


def convergence_rates(errors, parameters=None) -> ConvergenceReport:
    """Observed orders ``log(e_i/e_{i+1}) / log(h_i/h_{i+1})``.

    Without ``parameters`` consecutive rows are taken to halve the
    resolution, so the rate is ``log2(e_i/e_{i+1})``.
    """
    e = np.asarray(errors, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need at least two errors")
    if np.any(~(e > 0)):
        raise ValueError("errors must be positive")
    if parameters is None:
        h = 2.0 ** -np.arange(e.size)
    else:
        h = np.asarray(parameters, dtype=float)
        if h.shape != e.shape:
            raise ValueError("one parameter per error is required")
        if np.any(~(h > 0)) or np.any(np.diff(h) >= 0):
            raise ValueError("parameters must be positive and strictly decreasing")
    rates = np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])
    return ConvergenceReport(tuple(float(p) for p in h), tuple(float(x) for x in e),
                             tuple(float(r) for r in rates))

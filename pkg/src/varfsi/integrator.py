"""Force assembly, penalty contact and the explicit discrete Euler-Lagrange step.

The state of a body at time level j is the pair ``(x^j, v^j)`` with
``v^j = (x^{j+1} - x^j) / dt``.  One step performs

    x^{j+1} = x^j + dt v^j
    v^{j+1} = v^j + dt M^{-1} f(x^{j+1})

which is the velocity form of the two-level discrete Euler-Lagrange
equations.  Starting from ``(x^0, v^0)`` gives ``x^1 = x^0 + dt v^0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvertedCellError, NonFiniteStateError, ScenarioError
from .kinematics import _det, cofactor
from .materials import Material
from .mesh import Mesh

__all__ = [
    "Body",
    "ContactPairs",
    "ContactModel",
    "Simulation",
    "lumped_mass",
    "internal_force",
    "incompressibility_force",
    "gravity_force",
    "contact_detect",
    "contact_psi",
    "contact_force",
    "contact_energy",
    "point_segment_distance",
    "point_triangle_distance",
]


def lumped_mass(mesh: Mesh, rho0: float) -> np.ndarray:
    """Per-node mass: every adjacent cell contributes ``rho0 vol / 2**dim``."""
    share = mesh.cells.shape[1]
    w = rho0 * mesh.cell_volume / share
    return np.bincount(mesh.cells.ravel(), minlength=mesh.n_nodes) * w


class _Assembly:
    """Precomputed gather/scatter indices for one mesh."""

    def __init__(self, mesh: Mesh):
        t = mesh.edges
        dim = mesh.dim
        ds = np.asarray(mesh.spacings, dtype=float)
        self.mesh = mesh
        self.dim = dim
        self.tip = mesh.cells[:, t.tip]  # (nc, ns, ncol)
        self.tail = mesh.cells[:, t.tail]
        self.inv_ds = 1.0 / ds[t.axis]  # (ns, ncol)
        share = mesh.cells.shape[1]
        self.weight = (mesh.cell_volume / share) * self.inv_ds
        self.slot_volume = mesh.cell_volume / share
        self._nodes = np.concatenate([self.tip.ravel(), self.tail.ravel()])
        self._n = mesh.n_nodes

    def gradients(self, x: np.ndarray) -> np.ndarray:
        diff = x[self.tip] - x[self.tail]  # (nc, ns, ncol, d)
        return np.swapaxes(diff * self.inv_ds[..., None], -1, -2)

    def scatter(self, P: np.ndarray) -> np.ndarray:
        """Node gradient of ``sum vol/share * W(F)`` given ``P = dW/dF``."""
        cols = np.swapaxes(P, -1, -2) * self.weight[..., None]  # (nc, ns, ncol, d)
        flat = cols.reshape(-1, self.dim)
        vals = np.concatenate([flat, -flat])
        out = np.empty((self._n, self.dim))
        for k in range(self.dim):
            out[:, k] = np.bincount(
                self._nodes, weights=vals[:, k], minlength=self._n
            )
        return out


def _assembly(mesh: Mesh) -> _Assembly:
    asm = mesh._cache.get("assembly")
    if asm is None:
        asm = mesh._cache["assembly"] = _Assembly(mesh)
    return asm


def _checked_jacobians(F, body=None, step=None):
    J = _det(F)
    bad = ~(J > 0)
    if bad.any():
        flat = int(np.flatnonzero(bad.reshape(-1))[0])
        cell, slot = divmod(flat, J.shape[-1])
        raise InvertedCellError(cell, slot, J.reshape(-1)[flat], body=body, step=step)
    return J


def internal_force(mesh: Mesh, material: Material, x: np.ndarray) -> np.ndarray:
    """Elastic (or fluid pressure) nodal force, penalty excluded."""
    asm = _assembly(mesh)
    F = asm.gradients(np.asarray(x, dtype=float))
    _checked_jacobians(F)
    return -asm.scatter(material.first_piola(F))


def incompressibility_force(mesh: Mesh, r: float, x: np.ndarray) -> np.ndarray:
    """Force of the penalty ``r/2 (J - 1)^2`` averaged over the slots."""
    if r == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    asm = _assembly(mesh)
    F = asm.gradients(np.asarray(x, dtype=float))
    J = _checked_jacobians(F)
    return -asm.scatter((r * (J - 1.0))[..., None, None] * cofactor(F))


def gravity_force(mass: np.ndarray, g) -> np.ndarray:
    """``m g`` per node, with ``g`` the gravitational acceleration vector."""
    return np.asarray(mass)[:, None] * np.asarray(g, dtype=float)[None, :]


# ----------------------------------------------------------------- bodies


@dataclass
class Body:
    name: str
    mesh: Mesh
    material: Material
    fixed: np.ndarray = field(default_factory=lambda: np.empty(0, np.int64))
    velocity: tuple | None = None  # initial uniform velocity

    def __post_init__(self):
        self.fixed = np.unique(np.asarray(self.fixed, dtype=np.int64))
        if self.fixed.size and (self.fixed.min() < 0 or self.fixed.max() >= self.mesh.n_nodes):
            raise ValueError(f"fixed node ids out of range for body {self.name!r}")
        self.mass = lumped_mass(self.mesh, self.material.rho0)
        self.free = np.ones(self.mesh.n_nodes, dtype=bool)
        self.free[self.fixed] = False
        self._asm = _assembly(self.mesh)

    @property
    def is_fluid(self) -> bool:
        return self.material.kind == "tait"

    @property
    def dim(self) -> int:
        return self.mesh.dim

    def gradients(self, x):
        return self._asm.gradients(x)

    def elastic_force(self, x, step=None) -> np.ndarray:
        """Material plus incompressibility force, computed from one gradient pass."""
        F = self._asm.gradients(x)
        J = _checked_jacobians(F, body=self.name, step=step)
        P = self.material.first_piola(F)
        r = self.material.penalty
        if r:
            P = P + (r * (J - 1.0))[..., None, None] * cofactor(F)
        return -self._asm.scatter(P)

    def stored_energy(self, x) -> float:
        F = self._asm.gradients(x)
        return float(self._asm.slot_volume * self.material.energy_density(F).sum())

    def penalty_energy(self, x) -> float:
        if not self.material.penalty:
            return 0.0
        F = self._asm.gradients(x)
        J = _det(F)
        return float(self._asm.slot_volume * self.material.penalty_energy_density(J).sum())


# ----------------------------------------------------------------- contact


@dataclass(frozen=True)
class ContactPairs:
    """Vectorized list of fluid-node / solid-element constraint pairs.

    2D: ``solid_nodes[:, 0:2]`` = (tail, tip) of the boundary segment.
    3D: ``solid_nodes[:, 0:3]`` = (corner q, next corner u, previous corner w)
    of the closest boundary face; one pair per face corner.
    """

    fluid_node: np.ndarray
    solid_body: np.ndarray
    solid_nodes: np.ndarray
    family: np.ndarray
    dim: int

    def __len__(self):
        return int(self.fluid_node.shape[0])

    @staticmethod
    def empty(dim: int) -> "ContactPairs":
        k = 2 if dim == 2 else 3
        z = np.empty(0, np.int64)
        return ContactPairs(z, z, np.empty((0, k), np.int64), z, dim)


@dataclass(frozen=True)
class ContactModel:
    stiffness: float
    families: tuple[int, ...] = (1, 2, 3, 4)
    enabled: bool = True

    def __post_init__(self):
        if not self.stiffness >= 0:
            raise ValueError("contact stiffness must be nonnegative")


# segment side code -> constraint family (top, right face, left face, bottom)
_SEGMENT_FAMILY = {3: 1, 1: 2, 0: 3, 2: 4}


def point_segment_distance(p, a, b) -> np.ndarray:
    """Euclidean distance of points ``p`` to segments ``[a, b]`` (broadcasting)."""
    ab = b - a
    ap = p - a
    denom = np.einsum("...i,...i->...", ab, ab)
    t = np.clip(np.einsum("...i,...i->...", ap, ab) / np.where(denom > 0, denom, 1), 0, 1)
    d = ap - t[..., None] * ab
    return np.sqrt(np.einsum("...i,...i->...", d, d))


def point_triangle_distance(p, a, b, c) -> np.ndarray:
    """Euclidean distance of 3D points to triangles ``abc`` (broadcasting)."""
    n = np.cross(b - a, c - a)
    nn = np.einsum("...i,...i->...", n, n)
    ap = p - a
    h = np.einsum("...i,...i->...", ap, n) / np.where(nn > 0, nn, 1)
    proj = p - h[..., None] * n
    # barycentric sign tests on the projected point
    inside = np.ones(h.shape, dtype=bool)
    for u, v in ((a, b), (b, c), (c, a)):
        inside &= np.einsum("...i,...i->...", np.cross(v - u, proj - u), n) >= 0
    plane = np.abs(h) * np.sqrt(nn)
    edge = np.minimum(
        np.minimum(point_segment_distance(p, a, b), point_segment_distance(p, b, c)),
        point_segment_distance(p, c, a),
    )
    return np.where(inside & (nn > 0), plane, edge)


def _solid_elements(solids, positions):
    """Pool boundary elements of all solid bodies: (body ids, node ids, sides)."""
    bodies, nodes, sides = [], [], []
    for k, (body, x) in enumerate(zip(solids, positions)):
        bs = body.mesh.boundary
        elems = bs.segments if body.dim == 2 else bs.faces
        side = bs.segment_side if body.dim == 2 else bs.face_side
        bodies.append(np.full(len(elems), k))
        nodes.append(elems)
        sides.append(side)
    return np.concatenate(bodies), np.concatenate(nodes), np.concatenate(sides)


def contact_detect(solids, solid_positions, fluid, fluid_x, families=(1, 2, 3, 4)) -> ContactPairs:
    """Pair every fluid boundary node with its closest solid boundary element.

    ``solids`` is a sequence of :class:`Body` (or meshes wrapped in bodies),
    ``solid_positions`` their current node positions.  Ties go to the lower
    pooled element index (bodies in order, then element order).
    """
    dim = fluid.dim
    if not solids:
        return ContactPairs.empty(dim)
    fnodes = fluid.mesh.boundary.boundary
    p = np.asarray(fluid_x)[fnodes]
    body_of, elems, sides = _solid_elements(solids, solid_positions)
    # gather element corner coordinates per pooled element
    coords = np.stack(
        [np.asarray(solid_positions[b])[e] for b, e in zip(body_of, elems)]
    )  # (n_elem, k, dim)
    if dim == 2:
        dist = point_segment_distance(p[:, None, :], coords[None, :, 0], coords[None, :, 1])
        best = np.argmin(dist, axis=1)
        fam = np.array([_SEGMENT_FAMILY[int(s)] for s in sides[best]], dtype=np.int64)
        keep = np.isin(fam, families)
        return ContactPairs(
            fluid_node=fnodes[keep],
            solid_body=body_of[best][keep],
            solid_nodes=elems[best][keep],
            family=fam[keep],
            dim=2,
        )
    q = [coords[None, :, i] for i in range(4)]
    pp = p[:, None, :]
    dist = np.minimum(
        point_triangle_distance(pp, q[0], q[1], q[2]),
        point_triangle_distance(pp, q[0], q[2], q[3]),
    )
    best = np.argmin(dist, axis=1)
    fn, sb, sn, fam = [], [], [], []
    quads = elems[best]
    for k in range(4):
        if k + 1 not in families:
            continue
        fn.append(fnodes)
        sb.append(body_of[best])
        sn.append(np.stack([quads[:, k], quads[:, (k + 1) % 4], quads[:, (k - 1) % 4]], axis=1))
        fam.append(np.full(len(fnodes), k + 1))
    if not fn:
        return ContactPairs.empty(3)
    # interleave so pairs are grouped by fluid node
    order = np.argsort(np.concatenate([np.arange(len(fnodes))] * len(fn)), kind="stable")
    return ContactPairs(
        fluid_node=np.concatenate(fn)[order],
        solid_body=np.concatenate(sb)[order],
        solid_nodes=np.concatenate(sn)[order],
        family=np.concatenate(fam)[order],
        dim=3,
    )


def _gather(pairs: ContactPairs, solid_positions, fluid_x):
    x = np.asarray(fluid_x)[pairs.fluid_node]
    k = pairs.solid_nodes.shape[1]
    s = np.empty((len(pairs), k, pairs.dim))
    for b in np.unique(pairs.solid_body):
        m = pairs.solid_body == b
        s[m] = np.asarray(solid_positions[b])[pairs.solid_nodes[m]]
    return x, s


def _rot(v):
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _psi_and_grads(x, s, dim):
    if dim == 2:
        tail, tip = s[:, 0], s[:, 1]
        e = tip - tail
        d = x - tip
        psi = np.einsum("ij,ij->i", d, _rot(e))
        g_x = _rot(e)
        # R^T d = (d_y, -d_x)
        rtd = np.stack([d[:, 1], -d[:, 0]], axis=-1)
        g_tail = -rtd
        g_tip = rtd - g_x
        return psi, g_x, np.stack([g_tail, g_tip], axis=1)
    q, u, w = s[:, 0], s[:, 1], s[:, 2]
    d, e1, e2 = x - q, u - q, w - q
    n = np.cross(e1, e2)
    psi = np.einsum("ij,ij->i", d, n)
    g_x = n
    g_u = np.cross(e2, d)
    g_w = np.cross(d, e1)
    g_q = -(g_x + g_u + g_w)
    return psi, g_x, np.stack([g_q, g_u, g_w], axis=1)


def contact_psi(pairs: ContactPairs, solid_positions, fluid_x) -> np.ndarray:
    """Constraint values; nonnegative means the fluid node is outside."""
    if len(pairs) == 0:
        return np.empty(0)
    x, s = _gather(pairs, solid_positions, fluid_x)
    return _psi_and_grads(x, s, pairs.dim)[0]


def contact_energy(pairs: ContactPairs, solid_positions, fluid_x, stiffness: float) -> float:
    psi = contact_psi(pairs, solid_positions, fluid_x)
    active = psi < 0
    return float(0.5 * stiffness * np.sum(psi[active] ** 2))


def contact_force(pairs: ContactPairs, solid_positions, fluid_x, stiffness: float):
    """Penalty forces ``-K psi dpsi/dnode`` on active pairs (``psi < 0``).

    Returns ``(fluid_force, [solid_force per body])``.
    """
    f_fluid = np.zeros_like(np.asarray(fluid_x, dtype=float))
    f_solid = [np.zeros_like(np.asarray(x, dtype=float)) for x in solid_positions]
    if len(pairs) == 0 or stiffness == 0:
        return f_fluid, f_solid
    x, s = _gather(pairs, solid_positions, fluid_x)
    psi, g_x, g_s = _psi_and_grads(x, s, pairs.dim)
    active = psi < 0
    if not active.any():
        return f_fluid, f_solid
    coef = -stiffness * np.where(active, psi, 0.0)
    dim = pairs.dim
    for k in range(dim):
        f_fluid[:, k] += np.bincount(
            pairs.fluid_node, weights=coef * g_x[:, k], minlength=f_fluid.shape[0]
        )
    for b in np.unique(pairs.solid_body):
        m = pairs.solid_body == b
        ids = pairs.solid_nodes[m].ravel()
        for k in range(dim):
            w = (coef[m][:, None] * g_s[m][:, :, k]).ravel()
            f_solid[b][:, k] += np.bincount(ids, weights=w, minlength=f_solid[b].shape[0])
    return f_fluid, f_solid


# ----------------------------------------------------------------- simulation


class Simulation:
    """Explicit time stepping of solid bodies and at most one fluid body."""

    def __init__(self, bodies, dt: float, gravity=None, contact: ContactModel | None = None,
                 positions=None, velocities=None):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.bodies = list(bodies)
        if not self.bodies:
            raise ValueError("at least one body is required")
        dims = {b.dim for b in self.bodies}
        if len(dims) != 1:
            raise ValueError("all bodies must share one dimension")
        self.dim = dims.pop()
        fluids = [k for k, b in enumerate(self.bodies) if b.is_fluid]
        if len(fluids) > 1:
            raise ValueError("at most one fluid body is supported")
        self.fluid_index = fluids[0] if fluids else None
        self.solid_indices = [k for k, b in enumerate(self.bodies) if not b.is_fluid]
        self.dt = float(dt)
        self.gravity = np.zeros(self.dim) if gravity is None else np.asarray(gravity, dtype=float)
        if self.gravity.shape != (self.dim,):
            raise ValueError("gravity vector must match the dimension")
        self.contact = contact
        self.step_index = 0
        self.x = [
            np.array(b.mesh.reference, dtype=float) if positions is None else np.array(positions[k], dtype=float)
            for k, b in enumerate(self.bodies)
        ]
        self.v = []
        for k, b in enumerate(self.bodies):
            if velocities is not None:
                v = np.array(velocities[k], dtype=float)
            else:
                v = np.zeros_like(self.x[k])
                if b.velocity is not None:
                    v[:] = np.asarray(b.velocity, dtype=float)
            v[b.fixed] = 0.0
            self.v.append(v)
        self._pinned = [self.x[k][b.fixed].copy() for k, b in enumerate(self.bodies)]
        self.pairs = self._detect()
        if self.contact_active:
            psi = contact_psi(self.pairs, self._solid_x(), self.x[self.fluid_index])
            if psi.size and psi.min() < 0:
                raise ScenarioError(
                    f"initial configuration overlaps (min contact gap {psi.min():.3g})"
                )

    # -- helpers
    @property
    def contact_active(self) -> bool:
        return (
            self.contact is not None
            and self.contact.enabled
            and self.fluid_index is not None
            and bool(self.solid_indices)
        )

    @property
    def time(self) -> float:
        return self.step_index * self.dt

    def _solid_x(self, xs=None):
        xs = self.x if xs is None else xs
        return [xs[k] for k in self.solid_indices]

    def _detect(self, xs=None):
        if not self.contact_active:
            return ContactPairs.empty(self.dim)
        xs = self.x if xs is None else xs
        return contact_detect(
            [self.bodies[k] for k in self.solid_indices],
            self._solid_x(xs),
            self.bodies[self.fluid_index],
            xs[self.fluid_index],
            self.contact.families,
        )

    def forces(self, xs=None, pairs=None, step=None):
        """Total nodal force on every body at positions ``xs``."""
        xs = self.x if xs is None else xs
        out = []
        for b, x in zip(self.bodies, xs):
            f = b.elastic_force(x, step=step)
            if self.gravity.any():
                f += gravity_force(b.mass, self.gravity)
            out.append(f)
        if self.contact_active:
            pairs = self.pairs if pairs is None else pairs
            ff, fs = contact_force(
                pairs, self._solid_x(xs), xs[self.fluid_index], self.contact.stiffness
            )
            out[self.fluid_index] += ff
            for k, f in zip(self.solid_indices, fs):
                out[k] += f
        return out

    def step(self):
        """Advance one time level."""
        j = self.step_index + 1
        dt = self.dt
        for k, b in enumerate(self.bodies):
            x = self.x[k] + dt * self.v[k]
            x[b.fixed] = self._pinned[k]
            self.x[k] = x
        self.pairs = self._detect()
        f = self.forces(step=j)
        for k, b in enumerate(self.bodies):
            v = self.v[k] + dt * f[k] / b.mass[:, None]
            v[b.fixed] = 0.0
            if not (np.all(np.isfinite(v)) and np.all(np.isfinite(self.x[k]))):
                raise NonFiniteStateError(j, body=b.name)
            self.v[k] = v
        self.step_index = j

    def run(self, steps: int, callback=None):
        """Advance ``steps`` levels, calling ``callback(self)`` after each."""
        for _ in range(int(steps)):
            self.step()
            if callback is not None:
                callback(self)

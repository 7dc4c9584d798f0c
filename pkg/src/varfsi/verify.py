"""Built-in self checks, grouped into suites and reported as JSON lines.

Each check measures one quantity and compares it to a tolerance; nothing here
depends on test frameworks, so the same checks run from the command line.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import momentum_map
from .integrator import (
    Body,
    Simulation,
    contact_detect,
    contact_energy,
    contact_force,
    incompressibility_force,
    internal_force,
)
from .kinematics import (
    cauchy_green,
    cofactor,
    deformation_gradients,
    invariants,
    jacobians,
    symmetric_eigenvalues,
)
from .materials import (
    MooneyRivlin,
    MooneyRivlinParams,
    StVK,
    StVKParams,
    TaitFluid,
    TaitParams,
    tait_pressure,
)
from .mesh import CORNER_OFFSETS, GridSpec, build_mesh

__all__ = ["Check", "SUITES", "run_suite", "random_jets", "random_rotation"]

SEED = 20240917

STVK = StVKParams(945.0, 0.4999, 2.5e6)
MOONEY = MooneyRivlinParams(945.0, 1.848, 0.264)
WATER = TaitParams(997.0, 6.0, 30410.0, 30397.0)


@dataclass(frozen=True)
class Check:
    suite: str
    name: str
    passed: bool
    measured: float
    tolerance: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _check(suite, name, measured, tol):
    measured = float(measured)
    return Check(suite, name, bool(measured <= tol), measured, float(tol))


# ----------------------------------------------------------------- samplers


def random_jets(rng, n, dim, spacing=1.0, amplitude=0.25, min_jacobian=0.01):
    """Perturbed cells whose slot Jacobians all exceed ``min_jacobian``.

    The floor keeps ``cond(F)`` moderate; determinant identities lose about
    ``eps * cond(F)**2`` relative accuracy on nearly flat cells.
    """
    corners = CORNER_OFFSETS[dim].astype(float)
    out = np.empty((0, 2**dim, dim))
    ds = (spacing,) * dim
    while out.shape[0] < n:
        lin = np.eye(dim) + 0.3 * rng.standard_normal((n, dim, dim))
        jets = corners @ np.swapaxes(lin, -1, -2) * spacing
        jets = jets + amplitude * spacing * rng.uniform(-1, 1, jets.shape)
        ok = (jacobians(jets, ds) > min_jacobian * spacing**dim).all(axis=-1)
        out = np.concatenate([out, jets[ok]])
    return out[:n]


def random_rotation(rng, dim):
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


# ----------------------------------------------------------------- kinematics


def _kinematics():
    rng = np.random.default_rng(SEED)
    out = []
    for dim in (2, 3):
        jets = random_jets(rng, 10_000, dim)
        ds = (1.0,) * dim
        F = deformation_gradients(jets, ds)
        J = jacobians(jets, ds)
        detF = np.linalg.det(F)
        detC = np.linalg.det(cauchy_green(F))
        out.append(_check("kinematics", f"det_F_equals_J_{dim}d", np.max(np.abs(detF - J) / np.abs(J)), 1e-10))
        out.append(_check("kinematics", f"det_C_equals_J2_{dim}d", np.max(np.abs(detC - J**2) / J**2), 1e-10))

        worst = 0.0
        C0 = cauchy_green(F[:50])
        for _ in range(100):
            Q = random_rotation(rng, dim)
            moved = jets[:50] @ Q.T + rng.standard_normal(dim)
            worst = max(worst, np.max(np.abs(cauchy_green(deformation_gradients(moved, ds)) - C0)))
        out.append(_check("kinematics", f"cauchy_green_frame_indifference_{dim}d", worst, 1e-12))

        mirrored = jets.copy()
        mirrored[..., 0] *= -1
        Jm = jacobians(mirrored, ds)
        out.append(_check("kinematics", f"reflection_flips_jacobian_{dim}d", np.max(np.abs(Jm + J) / np.abs(J)), 1e-12))

        C = cauchy_green(F[:2000]).reshape(-1, dim, dim)
        ours = symmetric_eigenvalues(C)
        ref = np.linalg.eigvalsh(C)[..., ::-1]
        out.append(_check("kinematics", f"eigenvalues_match_reference_{dim}d",
                          np.max(np.abs(ours - ref) / np.abs(ref).max(axis=-1, keepdims=True)), 1e-12))
    return out


# ----------------------------------------------------------------- materials


def _materials_for(dim):
    if dim == 2:
        return [("stvk", StVK(STVK, penalty=1e4)), ("tait", TaitFluid(WATER))]
    return [("mooney_rivlin", MooneyRivlin(MOONEY, penalty=1e4)), ("tait", TaitFluid(WATER))]


def _fd_piola(mat, F, h=1e-6):
    G = np.zeros_like(F)
    d = F.shape[-1]
    for i in range(d):
        for k in range(d):
            Fp, Fm = F.copy(), F.copy()
            Fp[..., i, k] += h
            Fm[..., i, k] -= h
            G[..., i, k] = (mat.energy_density(Fp) - mat.energy_density(Fm)) / (2 * h)
    return G


def _energy_scale(mat, F):
    """Magnitude of the energy terms; the Tait terms nearly cancel at rest."""
    if isinstance(mat, TaitFluid):
        p = mat.params
        J = np.linalg.det(F)
        return p.a_tilde / (p.gamma - 1) * J ** (1 - p.gamma) + p.b * J
    if isinstance(mat, MooneyRivlin):
        p = mat.effective
        inv = invariants(cauchy_green(F))
        return p.rho0 * (p.c1 * inv.I1 + p.c2 * inv.I2)
    return np.abs(mat.energy_density(F))


def _stress_scale(mat, F):
    if isinstance(mat, TaitFluid):
        p = mat.params
        J = np.linalg.det(F)[..., None, None]
        return np.max((p.a_tilde * J ** -p.gamma + p.b) * np.abs(cofactor(F)))
    return np.max(np.abs(mat.first_piola(F)))


def _materials():
    rng = np.random.default_rng(SEED + 1)
    out = []
    for dim in (2, 3):
        F = deformation_gradients(random_jets(rng, 200, dim, amplitude=0.1), (1.0,) * dim)
        for name, mat in _materials_for(dim):
            P = mat.first_piola(F)
            G = _fd_piola(mat, F)
            err = np.max(np.abs(P - G)) / max(_stress_scale(mat, F), 1e-300)
            out.append(_check("materials", f"stress_is_energy_derivative_{name}_{dim}d", err, 1e-6))
            Q = random_rotation(rng, dim)
            W0 = mat.energy_density(F)
            rel = np.max(np.abs(mat.energy_density(Q @ F) - W0) / np.maximum(_energy_scale(mat, F), 1e-300))
            out.append(_check("materials", f"energy_frame_indifference_{name}_{dim}d", rel, 1e-12))
    I = np.broadcast_to(np.eye(2), (1, 4, 2, 2))
    out.append(_check("materials", "stvk_reference_stress_free", np.max(np.abs(StVK(STVK).first_piola(I))), 0.0))
    neutral = tait_pressure(WATER.neutral_jacobian, WATER)
    out.append(_check("materials", "tait_neutral_pressure_zero", abs(neutral) / WATER.a_tilde, 1e-12))
    return out


# ----------------------------------------------------------------- gradients


def _fd_force(energy, x, h):
    g = np.zeros_like(x)
    for idx in np.ndindex(*x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (energy(xp) - energy(xm)) / (2 * h)
    return -g


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300))


def _gradients(samples=10):
    rng = np.random.default_rng(SEED + 2)
    out = []
    cases = [
        ("stvk_2d", build_mesh(GridSpec((3, 3), (0.1, 0.1))), StVK(STVK, penalty=1e4)),
        ("tait_2d", build_mesh(GridSpec((3, 3), (0.1, 0.1))), TaitFluid(WATER)),
        ("mooney_rivlin_3d", build_mesh(GridSpec((3, 3, 2), (0.1, 0.1, 0.1))), MooneyRivlin(MOONEY, penalty=1e4)),
        ("tait_3d", build_mesh(GridSpec((3, 3, 2), (0.1, 0.1, 0.1))), TaitFluid(WATER)),
    ]
    for name, mesh, mat in cases:
        body = Body(name, mesh, mat)
        worst_int = worst_pen = 0.0
        for _ in range(samples):
            x = mesh.reference + 0.01 * rng.uniform(-1, 1, mesh.reference.shape)
            f = internal_force(mesh, mat, x)
            fd = _fd_force(lambda y: body.stored_energy(y), x, 1e-7)
            worst_int = max(worst_int, _rel(f, fd))
            if mat.penalty:
                f = incompressibility_force(mesh, mat.penalty, x)
                fd = _fd_force(lambda y: body.penalty_energy(y), x, 1e-7)
                worst_pen = max(worst_pen, _rel(f, fd))
        out.append(_check("gradients", f"internal_force_{name}", worst_int, 1e-5))
        if mat.penalty:
            out.append(_check("gradients", f"incompressibility_force_{name}", worst_pen, 1e-5))
    for dim in (2, 3):
        out.append(_check("gradients", f"contact_force_{dim}d", _contact_gradient(rng, dim, samples), 1e-5))
    return out


def contact_fixture(dim):
    """A solid slab with a fluid block whose lower nodes dip just below its top."""
    if dim == 2:
        solid = build_mesh(GridSpec((4, 3), (0.1, 0.1)))
        fluid = build_mesh(GridSpec((3, 3), (0.1, 0.1), origin=(0.05, 0.195)))
        sb = Body("slab", solid, StVK(STVK))
    else:
        solid = build_mesh(GridSpec((4, 4, 2), (0.1, 0.1, 0.1)))
        fluid = build_mesh(GridSpec((3, 3, 2), (0.1, 0.1, 0.1), origin=(0.05, 0.05, 0.095)))
        sb = Body("slab", solid, MooneyRivlin(MOONEY))
    return sb, Body("fluid", fluid, TaitFluid(WATER))


def _contact_gradient(rng, dim, samples):
    solid, fluid = contact_fixture(dim)
    K = 1e6
    worst = 0.0
    for _ in range(samples):
        xs = solid.mesh.reference + 1e-3 * rng.uniform(-1, 1, solid.mesh.reference.shape)
        xf = fluid.mesh.reference + 1e-3 * rng.uniform(-1, 1, fluid.mesh.reference.shape)
        pairs = contact_detect([solid], [xs], fluid, xf)
        ff, (fs,) = contact_force(pairs, [xs], xf, K)
        fd_f = _fd_force(lambda y: contact_energy(pairs, [xs], y, K), xf, 1e-8)
        fd_s = _fd_force(lambda y: contact_energy(pairs, [y], xf, K), xs, 1e-8)
        scale = max(np.max(np.abs(fd_f)), np.max(np.abs(fd_s)), 1e-300)
        worst = max(worst, max(np.max(np.abs(ff - fd_f)), np.max(np.abs(fs - fd_s))) / scale)
    return worst


# ----------------------------------------------------------------- noether


def free_block(dim, rng, steps=1000, dt=1e-4):
    """Run an unconstrained block with a random velocity; return (J0, J_end)."""
    if dim == 2:
        mesh = build_mesh(GridSpec((5, 5), (0.05, 0.05)))
        mat = StVK(STVK, penalty=1e4)
    else:
        mesh = build_mesh(GridSpec((4, 4, 3), (0.1, 0.1, 0.1)))
        mat = MooneyRivlin(MOONEY, penalty=1e4)
    body = Body("block", mesh, mat)
    x0 = mesh.reference
    c = x0.mean(axis=0)
    r = x0 - c
    if dim == 2:
        spin = 2.0 * np.stack([-r[:, 1], r[:, 0]], 1)
    else:
        spin = np.cross([0.5, -1.0, 2.0], r)
    v0 = 0.3 + spin + 0.05 * rng.standard_normal(x0.shape)
    sim = Simulation([body], dt, velocities=[v0])
    J0 = momentum_map(sim.x[0], sim.v[0], body.mass)
    sim.run(steps)
    return J0, momentum_map(sim.x[0], sim.v[0], body.mass)


def momentum_drift(J0, J1):
    """(linear, angular) relative drifts of a momentum-map pair."""
    na = 1 if J0.size == 3 else 3
    ang0, lin0 = J0[:na], J0[na:]
    lin = np.linalg.norm(J1[na:] - lin0) / np.linalg.norm(lin0)
    ang = np.linalg.norm(J1[:na] - ang0) / np.linalg.norm(ang0)
    return float(lin), float(ang)


def _noether():
    rng = np.random.default_rng(SEED + 3)
    out = []
    for dim, name in ((2, "stvk_2d"), (3, "mooney_rivlin_3d")):
        lin, ang = momentum_drift(*free_block(dim, rng))
        out.append(_check("noether", f"linear_momentum_{name}", lin, 1e-10))
        out.append(_check("noether", f"angular_momentum_{name}", ang, 1e-8))
    return out


SUITES = {
    "kinematics": _kinematics,
    "materials": _materials,
    "gradients": _gradients,
    "noether": _noether,
}


def run_suite(name: str = "all"):
    if name == "all":
        return [c for fn in SUITES.values() for c in fn()]
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(['all', *SUITES])}")
    return SUITES[name]()

"""Acceptance criteria 1-10.

Each test is tagged ``criterion(n, title)``; the terminal summary prints one
PASS/FAIL line per criterion.  Known shortfalls are strict xfails, so they
report FAIL without turning the run red, and flip to an error if they ever
start passing.
"""

import time

import numpy as np
import pytest

from varfsi.diagnostics import convergence_rates, energy_breakdown, min_contact_gap, relative_energy
from varfsi.harness import space_study, time_study
from varfsi.integrator import Body, ContactPairs, contact_force, contact_psi
from varfsi.kinematics import cauchy_green, deformation_gradients, jacobians
from varfsi.materials import MooneyRivlin, StVK, TaitFluid
from varfsi.mesh import GridSpec, build_mesh
from varfsi.output import run_scenario
from varfsi.scenario import build_simulation, load_scenario, with_spacing, with_time
from varfsi.verify import (
    MOONEY,
    SEED,
    STVK,
    WATER,
    free_block,
    momentum_drift,
    random_jets,
    random_rotation,
    run_suite,
)

criterion = pytest.mark.criterion


class Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


# ----------------------------------------------------------------- 1


@criterion(1, "kinematic identities over 1e4 random cells")
@pytest.mark.parametrize("dim", [2, 3])
def test_kinematic_identities(dim, detail):
    rng = np.random.default_rng(SEED)
    ds = (1.0,) * dim
    with Timer() as t:
        jets = random_jets(rng, 10_000, dim)
        F = deformation_gradients(jets, ds)
        J = jacobians(jets, ds)
        err_F = np.max(np.abs(np.linalg.det(F) - J) / np.abs(J))
        err_C = np.max(np.abs(np.linalg.det(cauchy_green(F)) - J**2) / J**2)
    detail(f"{dim}d: det F {err_F:.1e}, det C {err_C:.1e}, {t.seconds:.2f} s")
    assert jets.shape[0] == 10_000
    assert err_F <= 1e-10
    assert err_C <= 1e-10
    assert t.seconds < 5


# ----------------------------------------------------------------- 2


def _bodies_for(dim):
    if dim == 2:
        mesh = build_mesh(GridSpec((4, 3), (0.1, 0.1)))
        return mesh, [StVK(STVK, penalty=1e4), TaitFluid(WATER)]
    mesh = build_mesh(GridSpec((3, 3, 2), (0.1, 0.1, 0.1)))
    return mesh, [MooneyRivlin(MOONEY, penalty=1e4), TaitFluid(WATER)]


def _term_size(mat, mesh, w):
    """Size of the energy terms; Tait and Mooney-Rivlin terms cancel near rest."""
    vol = mesh.cell_volume * mesh.n_cells
    if isinstance(mat, TaitFluid):
        return vol * (WATER.a_tilde / (WATER.gamma - 1) + WATER.b)
    if isinstance(mat, MooneyRivlin):
        return vol * MOONEY.rho0 * 3 * (MOONEY.c1 + MOONEY.c2)
    return max(abs(w), 1e-300)


@criterion(2, "frame indifference under 100 rigid motions")
@pytest.mark.parametrize("dim", [2, 3])
def test_frame_indifference(dim, detail):
    rng = np.random.default_rng(SEED + 10)
    mesh, mats = _bodies_for(dim)
    x = mesh.reference + 0.01 * rng.uniform(-1, 1, mesh.reference.shape)
    jets = x[mesh.cells]
    C0 = cauchy_green(deformation_gradients(jets, mesh.spacings))
    bodies = [Body(m.kind, mesh, m) for m in mats]
    W0 = [b.stored_energy(x) + b.penalty_energy(x) for b in bodies]
    scale = [_term_size(m, mesh, w) for m, w in zip(mats, W0)]
    worst_C = worst_W = 0.0
    with Timer() as t:
        for _ in range(100):
            Q = random_rotation(rng, dim)
            y = x @ Q.T + rng.uniform(-5, 5, dim)
            C = cauchy_green(deformation_gradients(y[mesh.cells], mesh.spacings))
            worst_C = max(worst_C, np.max(np.abs(C - C0)))
            for b, w0, s in zip(bodies, W0, scale):
                worst_W = max(worst_W, abs(b.stored_energy(y) + b.penalty_energy(y) - w0) / s)
    detail(f"{dim}d: C {worst_C:.1e}, energy {worst_W:.1e}, {t.seconds:.2f} s")
    assert worst_C <= 1e-12
    assert worst_W <= 1e-12
    assert t.seconds < 5


# ----------------------------------------------------------------- 3


@criterion(3, "forces match finite differences of the energies")
def test_gradient_consistency(detail):
    with Timer() as t:
        checks = run_suite("gradients")
    worst = max(c.measured for c in checks)
    detail(f"{len(checks)} checks, worst relative {worst:.1e}, {t.seconds:.1f} s")
    names = {c.name for c in checks}
    assert {"contact_force_2d", "contact_force_3d", "incompressibility_force_stvk_2d"} <= names
    failed = [c.name for c in checks if c.measured >= 1e-5]
    assert not failed
    assert t.seconds < 30


# ----------------------------------------------------------------- 4


@criterion(4, "exact momentum conservation of free blocks")
@pytest.mark.parametrize("dim", [2, 3])
def test_noether(dim, detail):
    rng = np.random.default_rng(SEED + 3 + dim)
    with Timer() as t:
        J0, J1 = free_block(dim, rng, steps=1000, dt=1e-4)
    lin, ang = momentum_drift(J0, J1)
    detail(f"{dim}d: linear {lin:.1e}, angular {ang:.1e}, {t.seconds:.1f} s")
    assert lin <= 1e-10
    assert ang <= 1e-8
    assert t.seconds < 120


# ----------------------------------------------------------------- 5


@criterion(5, "bounded energy on the cantilever")
def test_cantilever_energy(detail):
    scen = with_time(with_spacing(load_scenario("2d_cantilever"), 0.025), dt=5e-5, horizon=0.2)
    sim = build_simulation(scen)
    E0 = energy_breakdown(sim).total
    rel = []
    with Timer() as t:
        sim.run(scen.time.steps, lambda s: rel.append(relative_energy(energy_breakdown(s).total, E0)))
    rel = np.array(rel)
    tail = rel[rel.size // 2:]
    steps = np.diff(tail)
    slope = np.polyfit(np.arange(tail.size) * 5e-5, tail, 1)[0]
    detail(f"max |rel| {np.abs(rel).max():.1e}, final-half trend {slope * 0.1:+.1e}, {t.seconds:.1f} s")
    assert sim.step_index == 4000
    assert np.abs(rel).max() <= 0.05
    # neither steadily rising nor steadily falling over the final half
    assert (steps > 0).any() and (steps < 0).any()
    assert abs(slope * 0.1) <= 0.05
    assert t.seconds < 600


# ----------------------------------------------------------------- 6-8


def _monotone(errors):
    return all(a > b for a, b in zip(errors, errors[1:]))


@criterion(6, "first-order time convergence in 2D")
def test_time_convergence_2d(detail, tmp_path):
    scen = with_spacing(load_scenario("2d_cantilever"), 0.05)
    with Timer() as t:
        rep = time_study(scen, [2e-4, 1e-4, 5e-5, 2.5e-5], 6.25e-6, horizon=0.1, out=tmp_path / "t.csv")
    detail("rates " + ", ".join(f"{r:.3f}" for r in rep.rates) + f", {t.seconds:.0f} s")
    assert all(0.9 <= r <= 1.6 for r in rep.rates)
    assert _monotone(rep.errors)
    assert t.seconds < 900


@criterion(7, "space convergence in 2D")
def test_space_convergence_2d(detail):
    scen = load_scenario("2d_cantilever")
    with Timer() as t:
        rep = space_study(scen, [0.1, 0.05, 0.025], 0.0125, dt=5e-5, horizon=0.1)
    detail("rates " + ", ".join(f"{r:.3f}" for r in rep.rates) + f", {t.seconds:.0f} s")
    assert rep.rates[-1] >= 1.4
    assert t.seconds < 1200


@criterion(8, "first-order time convergence in 3D")
def test_time_convergence_3d(detail):
    scen = load_scenario("3d_mooney_block")
    assert scen.solids[0].spacings == (0.1, 0.1, 0.1)
    ext = (np.array(scen.solids[0].counts) - 1) * 0.1
    np.testing.assert_allclose(ext, [0.4, 0.4, 0.2])
    with Timer() as t:
        rep = time_study(scen, [2e-4, 1e-4, 5e-5], 1.25e-5, horizon=0.1)
    detail("rates " + ", ".join(f"{r:.3f}" for r in rep.rates) + f", {t.seconds:.0f} s")
    assert all(0.9 <= r <= 1.6 for r in rep.rates)
    assert t.seconds < 1200


# ----------------------------------------------------------------- 9

K_CONTAINER = 2.5e9
SEGMENT = 0.02  # base lattice spacing along the contact surface
COLUMN_LOAD = 997.0 * 9.81 * 0.15 * 0.025  # water column weight on one fluid node


def _static_psi(f, K, L):
    """Equilibrium constraint value of one node pressed onto one segment by ``f``."""
    pairs = ContactPairs(np.array([0]), np.array([0]), np.array([[1, 0]]), np.array([1]), 2)
    seg = np.array([[0.0, 0.0], [-L, 0.0]])  # outward normal +y

    def net(y):
        ff, _ = contact_force(pairs, [seg], np.array([[-0.5 * L, y]]), K)
        return ff[0, 1] - f

    lo, hi = -1.0, 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if net(mid) > 0 else (lo, mid)
    y = 0.5 * (lo + hi)
    return float(contact_psi(pairs, [seg], np.array([[-0.5 * L, y]]))[0])


@pytest.fixture(scope="module")
def container_run(tmp_path_factory):
    scen = with_time(load_scenario("2d_container"), horizon=0.1)
    out = tmp_path_factory.mktemp("container")
    record = {"min_psi": np.inf, "balance": 0.0, "peak_force": 0.0}

    def watch(sim):
        record["min_psi"] = min(record["min_psi"], min_contact_gap(sim))
        if sim.step_index % 10 == 0 and len(sim.pairs):
            xs = [sim.x[k] for k in sim.solid_indices]
            ff, fs = contact_force(sim.pairs, xs, sim.x[sim.fluid_index], sim.contact.stiffness)
            on_fluid = ff.sum(axis=0)
            on_solid = sum(f.sum(axis=0) for f in fs)
            size = max(np.abs(on_fluid).max(), 1e-300)
            record["peak_force"] = max(record["peak_force"], size)
            record["balance"] = max(record["balance"], np.abs(on_fluid + on_solid).max() / size)

    t0 = time.perf_counter()
    res = run_scenario(scen, out_dir=out, progress=watch)
    record["seconds"] = time.perf_counter() - t0
    record["result"] = res
    record["out"] = out
    return record


@criterion(9, "fluid in an elastic container")
def test_container_completes(container_run, detail):
    res = container_run["result"]
    sim = res.simulation
    rel = max(abs(r["relative_energy"]) for r in res.rows)
    sag = 0.1 - sim.x[sim.fluid_index][:, 1].min()
    detail(f"{sim.step_index} steps to t = {sim.time:.3f} s, fluid base drop {sag:.3f} m, max |rel energy| {rel:.1e}, "
           f"{container_run['seconds']:.1f} s")
    assert sim.step_index == 1000 and sim.time == pytest.approx(0.1)
    assert all(np.isfinite(x).all() for x in sim.x)
    # the fluid stays between the walls and on top of the (sagging) base
    xf = sim.x[sim.fluid_index]
    assert xf[:, 0].min() > 0.04 and xf[:, 0].max() < 0.76
    base = sim.bodies[0]
    top = sim.x[0][base.mesh.side_nodes("top")]
    bottom = xf[sim.bodies[sim.fluid_index].mesh.side_nodes("bottom")]
    gap = bottom[:, 1] - np.interp(bottom[:, 0], top[:, 0], top[:, 1])
    assert gap.min() > -1e-4
    assert container_run["seconds"] < 600


@criterion(9, "fluid in an elastic container")
def test_container_contact_forces_balance(container_run, detail):
    detail(f"worst imbalance {container_run['balance']:.1e} of {container_run['peak_force']:.3g} N")
    assert container_run["peak_force"] > 0
    assert container_run["balance"] <= 1e-10


@criterion(9, "fluid in an elastic container")
def test_container_diagnostics_columns(container_run):
    import csv

    with (container_run["out"] / "diagnostics.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    needed = {"J1", "J2", "J3", "min_psi", "resultant_left_x", "resultant_left_y",
              "resultant_right_x", "resultant_right_y", "relative_energy"}
    assert needed <= rows[0].keys()
    assert len(rows) == 101
    assert all(np.isfinite(float(r[c])) for r in rows for c in needed)


@criterion(9, "fluid in an elastic container")
def test_static_penetration_oracle(detail):
    psi = _static_psi(COLUMN_LOAD, K_CONTAINER, SEGMENT)
    closed = -COLUMN_LOAD / (K_CONTAINER * SEGMENT)
    detail(f"static psi {psi:.4e} vs -f/(K L) {closed:.4e}")
    assert psi == pytest.approx(closed, rel=1e-9)
    assert closed == pytest.approx(-7.335e-7, rel=1e-3)


@criterion(9, "fluid in an elastic container")
@pytest.mark.xfail(strict=True, reason="impact overshoot of the fluid column exceeds the sudden-load factor 2")
def test_container_penetration_bound(container_run, detail):
    bound = 2 * COLUMN_LOAD / (K_CONTAINER * SEGMENT)
    worst = container_run["min_psi"]
    detail(f"min psi {worst:.4e}, bound -{bound:.4e}, ratio to static {worst / (-bound / 2):.2f}")
    assert worst >= -bound


# ----------------------------------------------------------------- 10

PUBLISHED = {
    "2d time": ([1.3e-3, 6.47e-4, 3.02e-4, 1.29e-4], ["1.007", "1.1", "1.23"]),
    "2d space": ([0.0481, 0.0151, 0.0044, 0.0012], ["1.6715", "1.779", "1.8745"]),
    "3d time": ([5.23e-4, 2.55e-4, 1.18e-4, 5.035e-5], ["1.036", "1.12", "1.29"]),
    "3d space": ([0.0375, 0.0284, 0.0177, 0.008], ["0.40", "0.682", "1.1457"]),
}


def _agrees(computed, printed):
    """Equal at the printed precision, capped at three decimals."""
    k = min(3, len(printed.split(".")[1]))
    return abs(computed - float(printed)) <= 0.5 * 10.0**-k + 1e-12


def _table_row(key, detail):
    errors, printed = PUBLISHED[key]
    with Timer() as t:
        rates = convergence_rates(errors).rates
    detail(f"{key}: " + ", ".join(f"{r:.4f}/{p}" for r, p in zip(rates, printed)))
    assert t.seconds < 1
    assert all(_agrees(r, p) for r, p in zip(rates, printed))


@criterion(10, "published error tables reproduce the published rates")
@pytest.mark.parametrize("key", ["2d time", "2d space", "3d space"])
def test_table_rates(key, detail):
    _table_row(key, detail)


@criterion(10, "published error tables reproduce the published rates")
@pytest.mark.xfail(strict=True, reason="published 3D time errors give 1.112 and 1.229, not 1.12 and 1.29")
def test_table_rates_3d_time(detail):
    _table_row("3d time", detail)

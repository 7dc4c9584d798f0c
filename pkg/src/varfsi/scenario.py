"""Scenario files: INI-style parsing, validation, serialization and assembly.

Sections: ``[time] [gravity] [solid.<name>] [fluid.<name>] [contact] [output]``.
Vectors are comma separated; all quantities are SI.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ScenarioError
from .integrator import Body, ContactModel, Simulation
from .materials import (
    MooneyRivlin,
    MooneyRivlinParams,
    StVK,
    StVKParams,
    TaitFluid,
    TaitParams,
)
from .mesh import GridSpec, build_mesh
from .selector import Selector, parse_selector

__all__ = [
    "TimeBlock",
    "SolidSpec",
    "FluidSpec",
    "ContactSpec",
    "OutputSpec",
    "Scenario",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario",
    "bundled_scenarios",
    "resolve_scenario",
    "build_simulation",
    "with_spacing",
]


@dataclass(frozen=True)
class TimeBlock:
    dt: float
    steps: int
    stride: int = 1


@dataclass(frozen=True)
class SolidSpec:
    name: str
    material: str  # "stvk" | "mooney_rivlin"
    counts: tuple
    spacings: tuple
    origin: tuple
    rho0: float
    penalty: float
    params: tuple  # (nu, E) for stvk, (c1, c2, stiffness_scale) for mooney_rivlin
    where: Selector = field(default_factory=lambda: parse_selector("none"))
    velocity: tuple | None = None


@dataclass(frozen=True)
class FluidSpec:
    name: str
    counts: tuple
    spacings: tuple
    origin: tuple
    rho0: float
    gamma: float
    a_tilde: float
    b: float
    velocity: tuple | None = None


@dataclass(frozen=True)
class ContactSpec:
    stiffness: float
    enabled: bool = True
    families: tuple = (1, 2, 3, 4)


@dataclass(frozen=True)
class OutputSpec:
    directory: str = "output"
    formats: tuple = ("csv",)
    diagnostics_stride: int = 1


@dataclass(frozen=True)
class Scenario:
    dim: int
    time: TimeBlock
    gravity: tuple
    solids: tuple = ()
    fluid: FluidSpec | None = None
    contact: ContactSpec | None = None
    output: OutputSpec = OutputSpec()

    @property
    def bodies(self):
        out = list(self.solids)
        if self.fluid is not None:
            out.append(self.fluid)
        return out

    @property
    def horizon(self) -> float:
        return self.time.dt * self.time.steps


# ----------------------------------------------------------------- parsing

_TIME_KEYS = {"dt", "steps", "stride"}
_GRAVITY_KEYS = {"g"}
_SOLID_COMMON = {"material", "counts", "spacings", "origin", "rho0", "penalty", "where", "velocity"}
_SOLID_KEYS = {
    "stvk": _SOLID_COMMON | {"nu", "E"},
    "mooney_rivlin": _SOLID_COMMON | {"c1", "c2", "stiffness_scale"},
}
_FLUID_KEYS = {"counts", "spacings", "origin", "rho0", "gamma", "a_tilde", "b", "velocity"}
_CONTACT_KEYS = {"stiffness", "enabled", "families"}
_OUTPUT_KEYS = {"directory", "formats", "diagnostics_stride"}
_FORMATS = {"csv", "vtk"}
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_\-]*$")


class _Lines:
    """Map (section, key) to the 1-based line where it is defined."""

    def __init__(self, text: str):
        self.sections = {}
        self.keys = {}
        section = None
        for n, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                self.sections.setdefault(section, n)
            elif section is not None:
                key = re.split(r"[=:]", line, maxsplit=1)[0].strip()
                self.keys.setdefault((section, key), n)

    def of(self, section, key=None):
        if key is None:
            return self.sections.get(section)
        return self.keys.get((section, key), self.sections.get(section))


class _Reader:
    def __init__(self, cfg, lines, section):
        self.cfg = cfg
        self.lines = lines
        self.section = section
        self.sect = cfg[section]

    def err(self, key, msg):
        return ScenarioError(msg, line=self.lines.of(self.section, key), field=f"{self.section}.{key}")

    def check_keys(self, allowed):
        for key in self.sect:
            if key not in allowed:
                raise self.err(key, "unknown key")

    def raw(self, key, required=True, default=None):
        if key not in self.sect:
            if required:
                raise ScenarioError(
                    "missing required key", line=self.lines.of(self.section), field=f"{self.section}.{key}"
                )
            return default
        return self.sect[key].strip()

    def num(self, key, required=True, default=None, positive=False, nonneg=False):
        raw = self.raw(key, required, None)
        if raw is None:
            return default
        try:
            val = float(raw)
        except ValueError:
            raise self.err(key, f"not a number: {raw!r}") from None
        if not np.isfinite(val):
            raise self.err(key, "must be finite")
        if positive and not val > 0:
            raise self.err(key, "must be positive")
        if nonneg and not val >= 0:
            raise self.err(key, "must be nonnegative")
        return val

    def integer(self, key, required=True, default=None, minimum=None):
        raw = self.raw(key, required, None)
        if raw is None:
            return default
        try:
            val = int(raw)
        except ValueError:
            raise self.err(key, f"not an integer: {raw!r}") from None
        if minimum is not None and val < minimum:
            raise self.err(key, f"must be at least {minimum}")
        return val

    def vector(self, key, length=None, required=True, default=None, cast=float):
        raw = self.raw(key, required, None)
        if raw is None:
            return default
        try:
            vals = tuple(cast(p) for p in raw.replace(" ", "").split(",") if p != "")
        except ValueError:
            raise self.err(key, f"malformed list: {raw!r}") from None
        if length is not None and len(vals) != length:
            raise self.err(key, f"expected {length} components, got {len(vals)}")
        if cast is float and not all(np.isfinite(vals)):
            raise self.err(key, "components must be finite")
        return vals

    def boolean(self, key, default):
        if key not in self.sect:
            return default
        try:
            return self.sect.getboolean(key)
        except ValueError:
            raise self.err(key, f"not a boolean: {self.sect[key]!r}") from None


def _grid(rd: _Reader, dim):
    counts = rd.vector("counts", dim, cast=int)
    if any(c < 2 for c in counts):
        raise rd.err("counts", "need at least 2 nodes per axis")
    spacings = rd.vector("spacings", dim)
    if any(s <= 0 for s in spacings):
        raise rd.err("spacings", "must be positive")
    origin = rd.vector("origin", dim, required=False, default=(0.0,) * dim)
    velocity = rd.vector("velocity", dim, required=False, default=None)
    return counts, spacings, origin, velocity


def parse_scenario(text: str) -> Scenario:
    """Parse and validate scenario text; errors carry line numbers and field names."""
    cfg = configparser.ConfigParser(
        interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",)
    )
    cfg.optionxform = str
    try:
        cfg.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioError("key outside of any section", line=exc.lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ScenarioError(str(exc).split(":")[-1].strip() or "duplicate entry", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ScenarioError("malformed line", line=lineno) from None
    lines = _Lines(text)

    for name in cfg.sections():
        head = name.split(".", 1)[0]
        if head not in ("time", "gravity", "solid", "fluid", "contact", "output"):
            raise ScenarioError(f"unknown section [{name}]", line=lines.of(name))
        if head in ("solid", "fluid"):
            if "." not in name or not _NAME.match(name.split(".", 1)[1]):
                raise ScenarioError(f"section [{name}] needs a body name", line=lines.of(name))
        elif "." in name:
            raise ScenarioError(f"unknown section [{name}]", line=lines.of(name))

    if "time" not in cfg:
        raise ScenarioError("missing section [time]", field="time.dt")
    rd = _Reader(cfg, lines, "time")
    rd.check_keys(_TIME_KEYS)
    time = TimeBlock(
        dt=rd.num("dt", positive=True),
        steps=rd.integer("steps", minimum=1),
        stride=rd.integer("stride", required=False, default=1, minimum=1),
    )

    solid_names = [s for s in cfg.sections() if s.startswith("solid.")]
    fluid_names = [s for s in cfg.sections() if s.startswith("fluid.")]
    if len(fluid_names) > 1:
        raise ScenarioError("at most one fluid body is supported", line=lines.of(fluid_names[1]))
    if not solid_names and not fluid_names:
        raise ScenarioError("scenario defines no bodies")

    dim = None
    for sec in solid_names + fluid_names:
        rd = _Reader(cfg, lines, sec)
        counts = rd.vector("counts", cast=int)
        if len(counts) not in (2, 3):
            raise rd.err("counts", "grid must have 2 or 3 axes")
        if dim is None:
            dim = len(counts)
        elif dim != len(counts):
            raise rd.err("counts", "all bodies must have the same dimension")

    gravity = (0.0,) * dim
    if "gravity" in cfg:
        rd = _Reader(cfg, lines, "gravity")
        rd.check_keys(_GRAVITY_KEYS)
        gravity = rd.vector("g", dim)

    solids = []
    for sec in solid_names:
        rd = _Reader(cfg, lines, sec)
        kind = rd.raw("material")
        if kind not in _SOLID_KEYS:
            raise rd.err("material", f"unknown material {kind!r} (expected stvk or mooney_rivlin)")
        rd.check_keys(_SOLID_KEYS[kind])
        counts, spacings, origin, velocity = _grid(rd, dim)
        rho0 = rd.num("rho0", positive=True)
        penalty = rd.num("penalty", required=False, default=0.0, nonneg=True)
        if kind == "stvk":
            if dim != 2:
                raise rd.err("material", "stvk is available for 2D bodies")
            nu = rd.num("nu")
            if not 0 < nu < 0.5:
                raise rd.err("nu", "Poisson ratio must lie in (0, 0.5)")
            params = (nu, rd.num("E", positive=True))
        else:
            if dim != 3:
                raise rd.err("material", "mooney_rivlin is available for 3D bodies")
            params = (
                rd.num("c1", positive=True),
                rd.num("c2", positive=True),
                rd.num("stiffness_scale", required=False, default=1.0, positive=True),
            )
        try:
            where = parse_selector(rd.raw("where", required=False, default="none"))
            if where.max_axis >= dim:
                raise ValueError("selector refers to an axis the body does not have")
        except ValueError as exc:
            raise rd.err("where", str(exc)) from None
        solids.append(
            SolidSpec(sec.split(".", 1)[1], kind, counts, spacings, origin, rho0, penalty,
                      params, where, velocity)
        )

    fluid = None
    if fluid_names:
        sec = fluid_names[0]
        rd = _Reader(cfg, lines, sec)
        rd.check_keys(_FLUID_KEYS)
        counts, spacings, origin, velocity = _grid(rd, dim)
        gamma = rd.num("gamma")
        if not gamma > 1:
            raise rd.err("gamma", "must exceed 1")
        fluid = FluidSpec(
            sec.split(".", 1)[1], counts, spacings, origin,
            rho0=rd.num("rho0", positive=True),
            gamma=gamma,
            a_tilde=rd.num("a_tilde", positive=True),
            b=rd.num("b", required=False, default=0.0, nonneg=True),
            velocity=velocity,
        )

    names = [b.name for b in solids] + ([fluid.name] if fluid else [])
    if len(set(names)) != len(names):
        raise ScenarioError("body names must be unique")

    contact = None
    if "contact" in cfg:
        rd = _Reader(cfg, lines, "contact")
        rd.check_keys(_CONTACT_KEYS)
        fams = rd.vector("families", required=False, default=(1, 2, 3, 4), cast=int)
        if any(f not in (1, 2, 3, 4) for f in fams) or len(set(fams)) != len(fams):
            raise rd.err("families", "families are distinct integers in 1..4")
        contact = ContactSpec(
            stiffness=rd.num("stiffness", nonneg=True),
            enabled=rd.boolean("enabled", True),
            families=tuple(sorted(fams)),
        )

    output = OutputSpec()
    if "output" in cfg:
        rd = _Reader(cfg, lines, "output")
        rd.check_keys(_OUTPUT_KEYS)
        formats = rd.vector("formats", required=False, default=("csv",), cast=str)
        bad = [f for f in formats if f not in _FORMATS]
        if bad:
            raise rd.err("formats", f"unknown format {bad[0]!r} (expected csv or vtk)")
        output = OutputSpec(
            directory=rd.raw("directory", required=False, default="output"),
            formats=tuple(dict.fromkeys(formats)),
            diagnostics_stride=rd.integer("diagnostics_stride", required=False, default=1, minimum=1),
        )

    scen = Scenario(dim, time, gravity, tuple(solids), fluid, contact, output)
    # selectors must resolve to existing nodes
    for s in solids:
        if s.where.text != "none":
            idx = np.stack(np.meshgrid(*[np.arange(n) for n in s.counts], indexing="ij"), -1).reshape(-1, dim)
            if not s.where(idx, s.counts).any():
                raise ScenarioError(
                    "selector matches no node", line=lines.of(f"solid.{s.name}", "where"),
                    field=f"solid.{s.name}.where",
                )
    return scen


# ----------------------------------------------------------------- serialization


def _vec(v):
    return ", ".join(repr(float(x)) if isinstance(x, float) else str(x) for x in v)


def serialize_scenario(s: Scenario) -> str:
    out = ["[time]", f"dt = {s.time.dt!r}", f"steps = {s.time.steps}", f"stride = {s.time.stride}", ""]
    out += ["[gravity]", f"g = {_vec(s.gravity)}", ""]
    for b in s.solids:
        out.append(f"[solid.{b.name}]")
        out.append(f"material = {b.material}")
        out += [f"counts = {_vec(b.counts)}", f"spacings = {_vec(b.spacings)}", f"origin = {_vec(b.origin)}"]
        out.append(f"rho0 = {b.rho0!r}")
        if b.material == "stvk":
            out += [f"nu = {b.params[0]!r}", f"E = {b.params[1]!r}"]
        else:
            out += [f"c1 = {b.params[0]!r}", f"c2 = {b.params[1]!r}", f"stiffness_scale = {b.params[2]!r}"]
        out.append(f"penalty = {b.penalty!r}")
        out.append(f"where = {b.where.text}")
        if b.velocity is not None:
            out.append(f"velocity = {_vec(b.velocity)}")
        out.append("")
    if s.fluid is not None:
        f = s.fluid
        out += [f"[fluid.{f.name}]", f"counts = {_vec(f.counts)}", f"spacings = {_vec(f.spacings)}",
                f"origin = {_vec(f.origin)}", f"rho0 = {f.rho0!r}", f"gamma = {f.gamma!r}",
                f"a_tilde = {f.a_tilde!r}", f"b = {f.b!r}"]
        if f.velocity is not None:
            out.append(f"velocity = {_vec(f.velocity)}")
        out.append("")
    if s.contact is not None:
        c = s.contact
        out += ["[contact]", f"stiffness = {c.stiffness!r}", f"enabled = {'true' if c.enabled else 'false'}",
                f"families = {_vec(c.families)}", ""]
    o = s.output
    out += ["[output]", f"directory = {o.directory}", f"formats = {', '.join(o.formats)}",
            f"diagnostics_stride = {o.diagnostics_stride}", ""]
    return "\n".join(out)


# ----------------------------------------------------------------- loading


def bundled_scenarios() -> list[str]:
    root = resources.files("varfsi") / "scenarios"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve_scenario(ref: str) -> Path:
    """A file path, or the name of a bundled scenario (with or without ``.ini``)."""
    p = Path(ref)
    if p.is_file():
        return p
    name = p.name[:-4] if p.name.endswith(".ini") else p.name
    cand = resources.files("varfsi") / "scenarios" / f"{name}.ini"
    if cand.is_file():
        return Path(str(cand))
    raise ScenarioError(f"scenario not found: {ref}")


def load_scenario(ref: str) -> Scenario:
    path = resolve_scenario(ref)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    return parse_scenario(text)


# ----------------------------------------------------------------- assembly


def _material(spec: SolidSpec):
    if spec.material == "stvk":
        nu, E = spec.params
        return StVK(StVKParams(spec.rho0, nu, E), penalty=spec.penalty)
    c1, c2, scale = spec.params
    return MooneyRivlin(MooneyRivlinParams(spec.rho0, c1, c2), penalty=spec.penalty, stiffness_scale=scale)


def build_bodies(s: Scenario):
    bodies = []
    for b in s.solids:
        mesh = build_mesh(GridSpec(b.counts, b.spacings, b.origin, s.time.dt, s.time.steps))
        fixed = mesh.select(b.where) if b.where.text != "none" else np.empty(0, np.int64)
        bodies.append(Body(b.name, mesh, _material(b), fixed, b.velocity))
    if s.fluid is not None:
        f = s.fluid
        mesh = build_mesh(GridSpec(f.counts, f.spacings, f.origin, s.time.dt, s.time.steps))
        mat = TaitFluid(TaitParams(f.rho0, f.gamma, f.a_tilde, f.b))
        bodies.append(Body(f.name, mesh, mat, velocity=f.velocity))
    return bodies


def build_simulation(s: Scenario, dt: float | None = None) -> Simulation:
    """Bodies at their reference lattices, initial velocities applied."""
    contact = None
    if s.contact is not None:
        contact = ContactModel(s.contact.stiffness, s.contact.families, s.contact.enabled)
    return Simulation(build_bodies(s), s.time.dt if dt is None else dt, s.gravity, contact)


def with_time(s: Scenario, dt: float | None = None, horizon: float | None = None) -> Scenario:
    """Copy with a new step size and/or horizon (steps = round(horizon / dt))."""
    dt = s.time.dt if dt is None else float(dt)
    horizon = s.horizon if horizon is None else float(horizon)
    steps = int(round(horizon / dt))
    if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(horizon, dt):
        raise ScenarioError(f"dt {dt!r} does not divide the horizon {horizon!r}")
    return dataclasses.replace(s, time=dataclasses.replace(s.time, dt=dt, steps=steps))


def with_spacing(s: Scenario, ds: float) -> Scenario:
    """Copy with every body re-gridded at spacing ``ds`` on all axes, same extents."""
    def regrid(counts, spacings, name):
        new = []
        for n, h in zip(counts, spacings):
            extent = (n - 1) * h
            k = extent / ds
            ki = int(round(k))
            if ki < 1 or abs(k - ki) > 1e-9 * max(k, 1):
                raise ScenarioError(f"spacing {ds!r} does not divide the extent {extent!r} of body {name!r}")
            new.append(ki + 1)
        return tuple(new), (float(ds),) * len(counts)

    solids = []
    for b in s.solids:
        c, h = regrid(b.counts, b.spacings, b.name)
        solids.append(dataclasses.replace(b, counts=c, spacings=h))
    fluid = s.fluid
    if fluid is not None:
        c, h = regrid(fluid.counts, fluid.spacings, fluid.name)
        fluid = dataclasses.replace(fluid, counts=c, spacings=h)
    return dataclasses.replace(s, solids=tuple(solids), fluid=fluid)

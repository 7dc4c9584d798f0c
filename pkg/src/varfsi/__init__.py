"""Variational lattice integrator for hyperelastic solids, barotropic fluids
and their penalty-coupled interaction."""

from .errors import InvertedCellError, NonFiniteStateError, NumericalError, ScenarioError
from .integrator import Body, ContactModel, Simulation
from .mesh import GridSpec, Mesh, build_mesh
from .scenario import Scenario, build_simulation, load_scenario, parse_scenario, serialize_scenario

__version__ = "0.1.0"

__all__ = [
    "Body",
    "ContactModel",
    "GridSpec",
    "InvertedCellError",
    "Mesh",
    "NonFiniteStateError",
    "NumericalError",
    "Scenario",
    "ScenarioError",
    "Simulation",
    "build_mesh",
    "build_simulation",
    "load_scenario",
    "parse_scenario",
    "serialize_scenario",
]

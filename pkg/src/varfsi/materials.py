"""Constitutive laws: St. Venant-Kirchhoff (2D), Mooney-Rivlin (3D), Tait fluid.

Pointwise functions take Cauchy-Green tensors / Jacobians and return energies
and second Piola-Kirchhoff stresses.  The :class:`Material` wrappers work on
batches of deformation gradients and return the volumetric energy density
``rho0 * W`` and the first Piola-Kirchhoff stress ``P = F S`` (plus the
incompressibility penalty for solids), which is what force assembly needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvertedCellError
from .kinematics import cauchy_green, cofactor, deformation_gradients, invariants, _det

__all__ = [
    "StVKParams",
    "MooneyRivlinParams",
    "TaitParams",
    "Material",
    "StVK",
    "MooneyRivlin",
    "TaitFluid",
    "stvk_energy_density",
    "stvk_energy_density_vector",
    "stvk_stress",
    "mooney_rivlin_energy",
    "mooney_rivlin_stress",
    "tait_energy",
    "tait_pressure",
    "tait_stress",
    "cell_stored_energy",
    "inverse_sym",
]


@dataclass(frozen=True)
class StVKParams:
    rho0: float
    nu: float
    E: float

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not 0 < self.nu < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")
        if not self.E > 0:
            raise ValueError("Young modulus must be positive")

    @property
    def lame(self) -> tuple[float, float]:
        """(lambda, mu) from the plane relations nu = l/(l+2m), E = 4m(l+m)/(l+2m)."""
        lam = self.E * self.nu / (1.0 - self.nu**2)
        mu = self.E / (2.0 * (1.0 + self.nu))
        return lam, mu

    @property
    def stiffness(self) -> np.ndarray:
        """3x3 matrix acting on the strain vector (E11, E22, 2 E12)."""
        nu = self.nu
        return (self.E / (1.0 - nu * nu)) * np.array(
            [[1.0, nu, 0.0], [nu, 1.0, 0.0], [0.0, 0.0, 0.5 * (1.0 - nu)]]
        )


@dataclass(frozen=True)
class MooneyRivlinParams:
    rho0: float
    c1: float
    c2: float

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not (self.c1 > 0 and self.c2 > 0):
            raise ValueError("Mooney-Rivlin constants must be positive")


@dataclass(frozen=True)
class TaitParams:
    rho0: float
    gamma: float
    a_tilde: float
    b: float = 0.0

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not self.gamma > 1:
            raise ValueError("gamma must exceed 1")
        if not self.a_tilde > 0:
            raise ValueError("a_tilde must be positive")
        if not self.b >= 0:
            raise ValueError("b must be nonnegative")

    @property
    def a(self) -> float:
        """Coefficient of the density form ``P = a * rho**gamma``."""
        return self.a_tilde * self.rho0 ** (-self.gamma)

    @property
    def neutral_jacobian(self) -> float:
        """Jacobian at which the offset pressure ``a_tilde J^-gamma - b`` vanishes."""
        if self.b == 0:
            return float("inf")
        return (self.a_tilde / self.b) ** (1.0 / self.gamma)


# ----------------------------------------------------------------- helpers


def _eye_like(C):
    return np.broadcast_to(np.eye(C.shape[-1]), C.shape)


def inverse_sym(C: np.ndarray) -> np.ndarray:
    """Inverse of 2x2 / 3x3 matrices through the adjugate."""
    C = np.asarray(C, dtype=float)
    det = _det(C)
    if np.any(det == 0) or not np.all(np.isfinite(det)):
        raise np.linalg.LinAlgError("singular matrix")
    adj = np.swapaxes(cofactor(C), -1, -2)
    return adj / det[..., None, None]


def _green_strain(C):
    return 0.5 * (np.asarray(C, dtype=float) - _eye_like(C))


# ----------------------------------------------------------------- StVK


def stvk_energy_density(C: np.ndarray, p: StVKParams) -> np.ndarray:
    """Volumetric energy ``rho0 W = 1/2 (lambda tr(E)^2 + 2 mu tr(E^2))``.

    The factor 1/2 makes ``2 d(rho0 W)/dC`` equal the stress returned by
    :func:`stvk_stress`.
    """
    lam, mu = p.lame
    E = _green_strain(C)
    trE = np.trace(E, axis1=-2, axis2=-1)
    trE2 = np.einsum("...ij,...ji->...", E, E)
    return 0.5 * (lam * trE**2 + 2.0 * mu * trE2)


def stvk_energy_density_vector(C: np.ndarray, p: StVKParams) -> np.ndarray:
    """Same energy written as ``1/2 e^T K e`` with ``e = (E11, E22, 2 E12)``."""
    E = _green_strain(C)
    e = np.stack([E[..., 0, 0], E[..., 1, 1], 2.0 * E[..., 0, 1]], axis=-1)
    return 0.5 * np.einsum("...i,ij,...j->...", e, p.stiffness, e)


def stvk_stress(C: np.ndarray, p: StVKParams) -> np.ndarray:
    lam, mu = p.lame
    E = _green_strain(C)
    trE = np.trace(E, axis1=-2, axis2=-1)
    return lam * trE[..., None, None] * _eye_like(E) + 2.0 * mu * E


# ----------------------------------------------------------------- Mooney-Rivlin


def mooney_rivlin_energy(I1, I2, p: MooneyRivlinParams):
    """Energy per unit mass; multiply by ``rho0`` for the volumetric density."""
    return p.c1 * (np.asarray(I1) - 3.0) + p.c2 * (np.asarray(I2) - 3.0)


def mooney_rivlin_stress(C: np.ndarray, p: MooneyRivlinParams) -> np.ndarray:
    """``S = 2 rho0 (c1 I + c2 I2 C^-1 - c2 I3 C^-2)``."""
    C = np.asarray(C, dtype=float)
    inv = invariants(C)
    Ci = inverse_sym(C)
    Ci2 = Ci @ Ci
    S = (
        p.c1 * _eye_like(C)
        + p.c2 * inv.I2[..., None, None] * Ci
        - p.c2 * inv.I3[..., None, None] * Ci2
    )
    return 2.0 * p.rho0 * S


# ----------------------------------------------------------------- Tait


def _check_positive_jacobian(J):
    J = np.asarray(J, dtype=float)
    if np.any(~(J > 0)):
        flat = int(np.flatnonzero(~(J.reshape(-1) > 0))[0])
        raise InvertedCellError(flat, 0, J.reshape(-1)[flat])
    return J


def tait_energy(J, p: TaitParams):
    """Energy per unit mass ``A/(g-1) (J/rho0)^(1-g) + B J/rho0``."""
    J = _check_positive_jacobian(J)
    g = p.gamma
    return p.a / (g - 1.0) * (J / p.rho0) ** (1.0 - g) + p.b * J / p.rho0


def tait_pressure(J, p: TaitParams, offset: bool = True):
    """``-rho0 dW/dJ = a_tilde J^-gamma - b``; ``offset=False`` drops ``b``."""
    J = _check_positive_jacobian(J)
    P = p.a_tilde * J ** (-p.gamma)
    return P - p.b if offset else P


def tait_stress(J, C, p: TaitParams) -> np.ndarray:
    """``S = -P_W J C^-1``."""
    J = np.asarray(J, dtype=float)
    PW = tait_pressure(J, p)
    return -(PW * J)[..., None, None] * inverse_sym(C)


# ----------------------------------------------------------------- batched wrappers


class Material:
    """Constitutive law evaluated on batches of deformation gradients."""

    rho0: float
    penalty: float = 0.0
    kind: str = ""

    def energy_density(self, F: np.ndarray) -> np.ndarray:
        """Volumetric stored energy ``rho0 W`` per slot (penalty excluded)."""
        raise NotImplementedError

    def first_piola(self, F: np.ndarray) -> np.ndarray:
        """``F S`` per slot (penalty excluded)."""
        raise NotImplementedError

    def penalty_energy_density(self, J: np.ndarray) -> np.ndarray:
        return 0.5 * self.penalty * (J - 1.0) ** 2

    def penalty_first_piola(self, F: np.ndarray, J: np.ndarray) -> np.ndarray:
        return (self.penalty * (J - 1.0))[..., None, None] * cofactor(F)


@dataclass(frozen=True)
class StVK(Material):
    params: StVKParams
    penalty: float = 0.0
    kind = "stvk"

    def __post_init__(self):
        if not self.penalty >= 0:
            raise ValueError("penalty must be nonnegative")

    @property
    def rho0(self):
        return self.params.rho0

    def energy_density(self, F):
        return stvk_energy_density(cauchy_green(F), self.params)

    def first_piola(self, F):
        return F @ stvk_stress(cauchy_green(F), self.params)


@dataclass(frozen=True)
class MooneyRivlin(Material):
    params: MooneyRivlinParams
    penalty: float = 0.0
    stiffness_scale: float = 1.0
    kind = "mooney_rivlin"

    def __post_init__(self):
        if not self.penalty >= 0:
            raise ValueError("penalty must be nonnegative")
        if not self.stiffness_scale > 0:
            raise ValueError("stiffness_scale must be positive")

    @property
    def rho0(self):
        return self.params.rho0

    @property
    def effective(self) -> MooneyRivlinParams:
        s = self.stiffness_scale
        p = self.params
        return MooneyRivlinParams(p.rho0, p.c1 * s, p.c2 * s)

    def energy_density(self, F):
        inv = invariants(cauchy_green(F))
        if inv.I2 is None:
            raise ValueError("Mooney-Rivlin is implemented for 3D bodies only")
        return self.rho0 * mooney_rivlin_energy(inv.I1, inv.I2, self.effective)

    def first_piola(self, F):
        # S = 2 rho0 (c1 I + c2 (I1 I - C)); identical to the inverse form
        # by Cayley-Hamilton but needs no inversion
        p = self.effective
        C = cauchy_green(F)
        I1 = np.trace(C, axis1=-2, axis2=-1)
        S = 2.0 * p.rho0 * ((p.c1 + p.c2 * I1)[..., None, None] * _eye_like(C) - p.c2 * C)
        return F @ S


@dataclass(frozen=True)
class TaitFluid(Material):
    params: TaitParams
    kind = "tait"

    @property
    def rho0(self):
        return self.params.rho0

    @property
    def penalty(self):
        return 0.0

    def energy_density(self, F):
        J = _det(F)
        return self.rho0 * tait_energy(J, self.params)

    def first_piola(self, F):
        # F S = -P_W J F C^-1 = -P_W cof(F)
        J = _det(F)
        PW = tait_pressure(J, self.params)
        return -PW[..., None, None] * cofactor(F)


def cell_stored_energy(jet, spacings, material: Material) -> np.ndarray:
    """Slot-averaged stored energy per unit mass of each cell (penalty excluded)."""
    F = deformation_gradients(jet, spacings)
    return material.energy_density(F).mean(axis=-1) / material.rho0

"""Per-cell discrete kinematics.

All functions are batched: a *jet* is an array ``(..., n_corners, dim)`` of
corner positions in slot order, and per-slot quantities carry a trailing
``(n_slots, ...)`` block.  Deformation gradients are stored column-wise,
``F[..., l, :, m]`` being the m-th edge vector of slot ``l``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvertedCellError
from .mesh import EdgeIncidenceTable, Mesh, edge_incidence

__all__ = [
    "Invariants",
    "cell_jets",
    "edge_vectors",
    "deformation_gradients",
    "cauchy_green",
    "jacobians",
    "check_admissible",
    "invariants",
    "principal_stretches",
    "symmetric_eigenvalues",
    "cofactor",
    "jacobian_gradient",
    "scatter_columns",
]


def _table(jets, table):
    if table is None:
        dim = jets.shape[-1]
        table = edge_incidence(dim)
    return table


def cell_jets(mesh: Mesh, positions: np.ndarray) -> np.ndarray:
    """Corner positions of every cell, shape ``(n_cells, 2**dim, dim)``."""
    return np.asarray(positions)[mesh.cells]


def edge_vectors(jets, spacings, table: EdgeIncidenceTable | None = None) -> np.ndarray:
    """Scaled edge vectors ``(phi_tip - phi_tail) / ds_axis``.

    Returns shape ``(..., n_slots, dim_cols, dim)``.
    """
    jets = np.asarray(jets, dtype=float)
    table = _table(jets, table)
    ds = np.asarray(spacings, dtype=float)[table.axis]
    diff = jets[..., table.tip, :] - jets[..., table.tail, :]
    return diff / ds[..., None]


def deformation_gradients(jets, spacings, table: EdgeIncidenceTable | None = None) -> np.ndarray:
    """Per-slot discrete deformation gradients, shape ``(..., n_slots, dim, dim)``."""
    F = np.swapaxes(edge_vectors(jets, spacings, table), -1, -2)
    if not np.all(np.isfinite(F)):
        raise FloatingPointError("non-finite deformation gradient")
    return F


def cauchy_green(F: np.ndarray) -> np.ndarray:
    """``C = F^T F``; symmetric by construction."""
    C = np.einsum("...ki,...kj->...ij", F, F)
    # enforce exact symmetry (the two triangles come from different sums)
    return 0.5 * (C + np.swapaxes(C, -1, -2))


def jacobians(jets, spacings, table: EdgeIncidenceTable | None = None) -> np.ndarray:
    """Signed per-slot Jacobians from cross / triple products of edge vectors.

    In 2D this is ``F_m1 x F_m2`` (the absolute value of which the lattice
    definition uses; the sign is kept so inversions can be detected).
    """
    ev = edge_vectors(jets, spacings, table)
    if ev.shape[-1] == 2:
        a, b = ev[..., 0, :], ev[..., 1, :]
        return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    a, b, c = ev[..., 0, :], ev[..., 1, :], ev[..., 2, :]
    return np.einsum("...i,...i->...", np.cross(a, b), c)


def check_admissible(J: np.ndarray, body=None, step=None) -> None:
    """Raise :class:`InvertedCellError` at the first slot with ``J <= 0``."""
    J = np.asarray(J)
    bad = ~(J > 0)
    if bad.any():
        flat = int(np.flatnonzero(bad.reshape(-1))[0])
        cell, slot = divmod(flat, J.shape[-1])
        raise InvertedCellError(cell, slot, J.reshape(-1)[flat], body=body, step=step)


class Invariants(NamedTuple):
    I1: np.ndarray
    I2: np.ndarray | None
    I3: np.ndarray


def _det(M):
    if M.shape[-1] == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]
    return (
        M[..., 0, 0] * (M[..., 1, 1] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 1])
        - M[..., 0, 1] * (M[..., 1, 0] * M[..., 2, 2] - M[..., 1, 2] * M[..., 2, 0])
        + M[..., 0, 2] * (M[..., 1, 0] * M[..., 2, 1] - M[..., 1, 1] * M[..., 2, 0])
    )


def invariants(C: np.ndarray) -> Invariants:
    """Principal invariants.  In 2D only ``I1`` and ``I3`` are defined."""
    C = np.asarray(C, dtype=float)
    I1 = np.trace(C, axis1=-2, axis2=-1)
    I3 = _det(C)
    if C.shape[-1] == 2:
        return Invariants(I1, None, I3)
    trC2 = np.einsum("...ij,...ji->...", C, C)
    I2 = 0.5 * (I1 * I1 - trC2)
    return Invariants(I1, I2, I3)


def symmetric_eigenvalues(C: np.ndarray, tol: float = 1e-14, max_sweeps: int = 50) -> np.ndarray:
    """Eigenvalues of symmetric 2x2 / 3x3 matrices, sorted descending.

    2x2 uses the closed form; 3x3 uses cyclic Jacobi rotations until the
    off-diagonal mass falls below ``tol`` relative to the largest entry.
    """
    A = np.array(C, dtype=float, copy=True)
    n = A.shape[-1]
    if n == 2:
        a, b, d = A[..., 0, 0], A[..., 0, 1], A[..., 1, 1]
        mean = 0.5 * (a + d)
        rad = np.hypot(0.5 * (a - d), b)
        return np.stack([mean + rad, mean - rad], axis=-1)
    if n != 3:
        raise ValueError("only 2x2 and 3x3 matrices are supported")
    batch = A.shape[:-2]
    A = A.reshape(-1, 3, 3)
    scale = np.abs(A).max(axis=(1, 2))
    scale[scale == 0] = 1.0
    A = A / scale[:, None, None]  # unit norm: no under/overflow in the squares
    for _ in range(max_sweeps):
        off = A[:, 0, 1] ** 2 + A[:, 0, 2] ** 2 + A[:, 1, 2] ** 2
        if np.all(np.sqrt(off) <= tol):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = A[:, p, q]
            # entries this small cannot move an eigenvalue; skipping them avoids overflow
            active = np.abs(apq) > 1e-30
            theta = np.where(active, (A[:, q, q] - A[:, p, p]) / np.where(active, 2 * apq, 1), 0)
            t = np.where(
                active,
                np.sign(theta + (theta == 0)) / (np.abs(theta) + np.hypot(theta, 1.0)),
                0,
            )
            c = 1 / np.sqrt(t * t + 1)
            s = t * c
            R = np.broadcast_to(np.eye(3), A.shape).copy()
            R[:, p, p] = c
            R[:, q, q] = c
            R[:, p, q] = s
            R[:, q, p] = -s
            A = np.einsum("bki,bkl,blj->bij", R, A, R)
    ev = np.diagonal(A, axis1=-2, axis2=-1) * scale[:, None]
    ev = -np.sort(-ev, axis=-1)
    return ev.reshape(batch + (3,))


def principal_stretches(C: np.ndarray) -> np.ndarray:
    """Square roots of the eigenvalues of ``C``, sorted descending."""
    nu = symmetric_eigenvalues(C)
    if np.any(nu <= 0):
        raise ValueError("Cauchy-Green tensor is not positive definite")
    return np.sqrt(nu)


def cofactor(F: np.ndarray) -> np.ndarray:
    """Cofactor matrix ``det(F) F^{-T}``, i.e. the derivative of ``det F``."""
    if F.shape[-1] == 2:
        cof = np.empty_like(F)
        cof[..., 0, 0] = F[..., 1, 1]
        cof[..., 0, 1] = -F[..., 1, 0]
        cof[..., 1, 0] = -F[..., 0, 1]
        cof[..., 1, 1] = F[..., 0, 0]
        return cof
    c0, c1, c2 = F[..., :, 0], F[..., :, 1], F[..., :, 2]
    return np.stack([np.cross(c1, c2), np.cross(c2, c0), np.cross(c0, c1)], axis=-1)


def scatter_columns(P: np.ndarray, spacings, table: EdgeIncidenceTable | None = None) -> np.ndarray:
    """Apply the adjoint of the edge-difference map.

    Given per-slot tensors ``P[..., l, :, m]`` conjugate to the columns of
    ``F_l``, return the corner vectors ``sum_{l,m} P[:, m] * dF_l[:, m]/dphi``.
    With ``P = dW/dF`` this is the gradient of ``sum_l W(F_l)`` with respect
    to the cell's corner positions.
    """
    dim = P.shape[-1]
    table = table or edge_incidence(dim)
    ds = np.asarray(spacings, dtype=float)
    n_corners = 2**dim
    out = np.zeros(P.shape[:-3] + (n_corners, dim))
    for l in range(table.n_slots):
        for m in range(dim):
            col = P[..., l, :, m] / ds[table.axis[l, m]]
            out[..., table.tip[l, m], :] += col
            out[..., table.tail[l, m], :] -= col
    return out


def jacobian_gradient(jet, spacings, slot: int, table: EdgeIncidenceTable | None = None) -> np.ndarray:
    """``dJ_slot / dphi_corner`` for every corner, shape ``(..., n_corners, dim)``."""
    jet = np.asarray(jet, dtype=float)
    table = _table(jet, table)
    F = deformation_gradients(jet, spacings, table)
    P = np.zeros_like(F)
    P[..., slot, :, :] = cofactor(F[..., slot, :, :])
    return scatter_columns(P, spacings, table)

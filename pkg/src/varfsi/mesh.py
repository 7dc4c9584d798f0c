"""Regular reference lattices, cell/corner tables and boundary classification.

Corner slots follow the lattice ordering used by the discrete deformation
gradients: in 2D slot 1..4 sit at offsets (0,0), (1,0), (0,1), (1,1); in 3D
slot 1..8 sit at (0,0,0), (1,0,0), (0,1,0), (0,0,1), (1,1,0), (0,1,1),
(1,0,1), (1,1,1).  Slots are 0-based in code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

__all__ = [
    "CORNER_OFFSETS",
    "EdgeIncidenceTable",
    "BoundarySet",
    "GridSpec",
    "Mesh",
    "build_mesh",
    "edge_incidence",
    "boundary_classify",
]

CORNER_OFFSETS = {
    2: np.array([(0, 0), (1, 0), (0, 1), (1, 1)], dtype=np.int64),
    3: np.array(
        [
            (0, 0, 0),
            (1, 0, 0),
            (0, 1, 0),
            (0, 0, 1),
            (1, 1, 0),
            (0, 1, 1),
            (1, 0, 1),
            (1, 1, 1),
        ],
        dtype=np.int64,
    ),
}

# (tail slot, tip slot, axis) per slot and column, written with 1-based slots
# so the rows read like the deformation-gradient definitions.
_EDGES_2D = (
    ((1, 2, 0), (1, 3, 1)),
    ((2, 4, 1), (2, 1, 0)),
    ((3, 1, 1), (3, 4, 0)),
    ((4, 3, 0), (4, 2, 1)),
)

# Slot 8, column 3 is the edge (1,1,1)->(1,1,0).  The printed definition
# reads F_{6;a+1,b,c+1}, which does not start at the slot-8 corner; the
# Jacobian and Cauchy-Green listings use F_{6;a+1,b+1,c+1} and so do we.
_EDGES_3D = (
    ((1, 2, 0), (1, 3, 1), (1, 4, 2)),
    ((2, 5, 1), (2, 1, 0), (2, 7, 2)),
    ((3, 1, 1), (3, 5, 0), (3, 6, 2)),
    ((4, 6, 1), (4, 7, 0), (4, 1, 2)),
    ((5, 3, 0), (5, 2, 1), (5, 8, 2)),
    ((6, 8, 0), (6, 4, 1), (6, 3, 2)),
    ((7, 4, 0), (7, 8, 1), (7, 2, 2)),
    ((8, 7, 1), (8, 6, 0), (8, 5, 2)),
)


@dataclass(frozen=True)
class EdgeIncidenceTable:
    """Which cell edge forms each column of each slot's deformation gradient.

    ``tail[l, m]`` and ``tip[l, m]`` are corner slots, ``axis[l, m]`` the
    lattice direction whose spacing divides the edge.
    """

    dim: int
    tail: np.ndarray
    tip: np.ndarray
    axis: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.tail.shape[0]


def edge_incidence(dim: int) -> EdgeIncidenceTable:
    if dim == 2:
        rows = _EDGES_2D
    elif dim == 3:
        rows = _EDGES_3D
    else:
        raise ValueError(f"dimension must be 2 or 3, got {dim}")
    arr = np.array(rows, dtype=np.int64)
    tail = arr[..., 0] - 1
    tip = arr[..., 1] - 1
    axis = arr[..., 2]
    for a in (tail, tip, axis):
        a.setflags(write=False)
    return EdgeIncidenceTable(dim=dim, tail=tail, tip=tip, axis=axis)


@dataclass(frozen=True)
class GridSpec:
    """Uniform reference lattice and time step of one body."""

    counts: tuple[int, ...]
    spacings: tuple[float, ...]
    origin: tuple[float, ...] | None = None
    dt: float = 1.0
    steps: int = 1

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        spacings = tuple(float(s) for s in self.spacings)
        dim = len(counts)
        if dim not in (2, 3):
            raise ValueError(f"grid must be 2D or 3D, got {dim} axes")
        if len(spacings) != dim:
            raise ValueError("spacings must match the number of axes")
        if any(c < 2 for c in counts):
            raise ValueError(f"need at least 2 nodes per axis, got {counts}")
        if any(not np.isfinite(s) or s <= 0 for s in spacings):
            raise ValueError(f"spacings must be positive, got {spacings}")
        if not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if int(self.steps) < 0:
            raise ValueError("steps must be nonnegative")
        origin = (0.0,) * dim if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != dim:
            raise ValueError("origin must match the number of axes")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "spacings", spacings)
        object.__setattr__(self, "origin", origin)

    @property
    def dim(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class BoundarySet:
    """Boundary classification of a lattice.

    ``segments`` (2D) are ordered node pairs whose direction rotated by +pi/2
    points out of the body; ``faces`` (3D) are node quadruples ordered
    counter-clockwise when seen from outside.  ``segment_side`` /
    ``face_side`` name the lattice side each element lies on.
    """

    interior: np.ndarray
    boundary: np.ndarray
    segments: np.ndarray | None = None
    segment_side: np.ndarray | None = None
    faces: np.ndarray | None = None
    face_side: np.ndarray | None = None


# side codes: 0 = low end of axis 0, 1 = high end of axis 0, 2/3 axis 1, 4/5 axis 2
SIDE_NAMES = ("left", "right", "bottom", "top", "back", "front")


@dataclass(frozen=True)
class Mesh:
    spec: GridSpec
    reference: np.ndarray  # (n_nodes, dim), node positions of the lattice
    index: np.ndarray  # (n_nodes, dim), lattice multi-index of each node
    cells: np.ndarray  # (n_cells, 2**dim), node ids in slot order
    boundary: BoundarySet
    edges: EdgeIncidenceTable
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def counts(self) -> tuple[int, ...]:
        return self.spec.counts

    @property
    def spacings(self) -> tuple[float, ...]:
        return self.spec.spacings

    @property
    def n_nodes(self) -> int:
        return self.reference.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacings))

    def node_id(self, *idx: int) -> int:
        """Flat row-major id of lattice node ``idx`` (first axis slowest)."""
        if len(idx) != self.dim:
            raise ValueError("index length must equal mesh dimension")
        for i, n in zip(idx, self.counts):
            if not 0 <= i < n:
                raise IndexError(f"lattice index {idx} outside {self.counts}")
        return int(np.ravel_multi_index(idx, self.counts))

    def cell_id(self, *idx: int) -> int:
        cell_counts = tuple(n - 1 for n in self.counts)
        return int(np.ravel_multi_index(idx, cell_counts))

    def select(self, predicate) -> np.ndarray:
        """Ids of nodes whose lattice index satisfies ``predicate(index, counts)``."""
        mask = np.asarray(predicate(self.index, self.counts), dtype=bool)
        return np.flatnonzero(mask)

    def side_nodes(self, side: str) -> np.ndarray:
        k = SIDE_NAMES.index(side)
        axis, high = divmod(k, 2)
        if axis >= self.dim:
            raise ValueError(f"side {side!r} does not exist in {self.dim}D")
        target = self.counts[axis] - 1 if high else 0
        return np.flatnonzero(self.index[:, axis] == target)


def _lattice_index(counts: tuple[int, ...]) -> np.ndarray:
    grids = np.meshgrid(*[np.arange(n) for n in counts], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


def build_mesh(spec: GridSpec) -> Mesh:
    dim = spec.dim
    index = _lattice_index(spec.counts)
    reference = np.asarray(spec.origin) + index * np.asarray(spec.spacings)

    cell_counts = tuple(n - 1 for n in spec.counts)
    lows = _lattice_index(cell_counts)
    offsets = CORNER_OFFSETS[dim]
    corner_idx = lows[:, None, :] + offsets[None, :, :]
    cells = np.ravel_multi_index(
        tuple(corner_idx[..., k] for k in range(dim)), spec.counts
    ).astype(np.int64)

    for arr in (index, reference, cells):
        arr.setflags(write=False)
    mesh = Mesh(
        spec=spec,
        reference=reference,
        index=index,
        cells=cells,
        boundary=BoundarySet(np.empty(0, np.int64), np.empty(0, np.int64)),
        edges=edge_incidence(dim),
    )
    object.__setattr__(mesh, "boundary", boundary_classify(mesh))
    return mesh


def boundary_classify(mesh: Mesh) -> BoundarySet:
    counts = np.asarray(mesh.counts)
    extremal = (mesh.index == 0) | (mesh.index == counts - 1)
    on_boundary = extremal.any(axis=1)
    interior = np.flatnonzero(~on_boundary)
    boundary = np.flatnonzero(on_boundary)
    if mesh.dim == 2:
        segments, sides = _boundary_segments(mesh)
        return BoundarySet(interior, boundary, segments=segments, segment_side=sides)
    faces, sides = _boundary_faces(mesh)
    return BoundarySet(interior, boundary, faces=faces, face_side=sides)


def _boundary_segments(mesh: Mesh):
    A, B = (n - 1 for n in mesh.counts)
    nid = mesh.node_id
    segs, sides = [], []
    # each side is traversed so that rotating the segment by +pi/2 points out
    for a in range(A):
        segs.append((nid(a + 1, 0), nid(a, 0)))
        sides.append(2)
    for b in range(B):
        segs.append((nid(A, b + 1), nid(A, b)))
        sides.append(1)
    for a in range(A):
        segs.append((nid(a, B), nid(a + 1, B)))
        sides.append(3)
    for b in range(B):
        segs.append((nid(0, b), nid(0, b + 1)))
        sides.append(0)
    return np.array(segs, dtype=np.int64), np.array(sides, dtype=np.int64)


def _boundary_faces(mesh: Mesh):
    counts = mesh.counts
    nid = mesh.node_id
    faces, sides = [], []
    for axis in range(3):
        u, w = [k for k in range(3) if k != axis]
        for high in (0, 1):
            fixed = counts[axis] - 1 if high else 0
            for i, j in product(range(counts[u] - 1), range(counts[w] - 1)):
                quad = []
                for du, dw in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    idx = [0, 0, 0]
                    idx[axis] = fixed
                    idx[u] = i + du
                    idx[w] = j + dw
                    quad.append(nid(*idx))
                # (e_u x e_w) is +e_axis for cyclic (axis, u, w); flip as needed
                cyclic = (u - axis) % 3 == 1
                outward_positive = bool(high)
                if cyclic != outward_positive:
                    quad = quad[::-1]
                    quad = [quad[-1]] + quad[:-1]
                faces.append(quad)
                sides.append(2 * axis + high)
    return np.array(faces, dtype=np.int64), np.array(sides, dtype=np.int64)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from varfsi.mesh import CORNER_OFFSETS, GridSpec, build_mesh, edge_incidence


def _rot(v):
    return np.array([-v[1], v[0]])


def test_fluid_lattice_extent():
    m = build_mesh(GridSpec((21, 9), (0.025, 0.015)))
    span = m.reference.max(axis=0) - m.reference.min(axis=0)
    assert np.allclose(span, [0.5, 0.12])
    assert m.n_nodes == 189 and m.n_cells == 160


def test_node_and_cell_ids_are_row_major():
    m = build_mesh(GridSpec((4, 3), (1.0, 1.0)))
    assert m.node_id(0, 0) == 0
    assert m.node_id(0, 2) == 2
    assert m.node_id(1, 0) == 3
    assert m.cell_id(1, 1) == 3
    np.testing.assert_array_equal(m.cells[0], [0, 3, 1, 4])
    with pytest.raises(IndexError):
        m.node_id(4, 0)


@pytest.mark.parametrize("dim", [2, 3])
def test_cells_follow_corner_offsets(dim):
    m = build_mesh(GridSpec((3,) * dim, (1.0,) * dim))
    low = m.index[m.cells[:, 0]]
    np.testing.assert_array_equal(m.index[m.cells], low[:, None, :] + CORNER_OFFSETS[dim])


def test_slot_one_and_four_columns_2d():
    t = edge_incidence(2)
    # slot 1: (a,b)->(a+1,b) over ds1, (a,b)->(a,b+1) over ds2
    assert (t.tail[0].tolist(), t.tip[0].tolist(), t.axis[0].tolist()) == ([0, 0], [1, 2], [0, 1])
    # slot 4: (a+1,b+1)->(a,b+1) over ds1, (a+1,b+1)->(a+1,b) over ds2
    assert (t.tail[3].tolist(), t.tip[3].tolist(), t.axis[3].tolist()) == ([3, 3], [2, 1], [0, 1])


@pytest.mark.parametrize("dim", [2, 3])
def test_every_slot_starts_at_its_own_corner(dim):
    t = edge_incidence(dim)
    off = CORNER_OFFSETS[dim]
    for slot in range(t.n_slots):
        assert (t.tail[slot] == slot).all()
        for col in range(dim):
            step = off[t.tip[slot, col]] - off[slot]
            # each column moves along exactly its own axis
            assert np.count_nonzero(step) == 1 and step[t.axis[slot, col]] != 0


@pytest.mark.parametrize("dim", [2, 3])
def test_reference_slots_are_right_handed(dim):
    """At the reference lattice every slot's edge frame has positive orientation."""
    t = edge_incidence(dim)
    off = CORNER_OFFSETS[dim].astype(float)
    for slot in range(t.n_slots):
        F = np.stack([off[t.tip[slot, c]] - off[slot] for c in range(dim)], axis=1)
        assert np.linalg.det(F) == pytest.approx(1.0)


def test_boundary_segments_point_outward():
    m = build_mesh(GridSpec((5, 4), (0.2, 0.1), origin=(1.0, -1.0)))
    bs = m.boundary
    centre = m.reference.mean(axis=0)
    assert len(bs.segments) == 2 * (4 + 3)
    for (tail, tip), side in zip(bs.segments, bs.segment_side):
        e = m.reference[tip] - m.reference[tail]
        mid = 0.5 * (m.reference[tip] + m.reference[tail])
        assert np.dot(_rot(e), mid - centre) > 0
        axis, high = divmod(int(side), 2)
        target = m.counts[axis] - 1 if high else 0
        assert m.index[tail, axis] == target and m.index[tip, axis] == target


def test_boundary_faces_wind_outward():
    m = build_mesh(GridSpec((3, 4, 2), (0.1, 0.1, 0.2)))
    bs = m.boundary
    centre = m.reference.mean(axis=0)
    assert len(bs.faces) == 2 * (2 * 3 + 2 * 1 + 3 * 1)
    for quad, side in zip(bs.faces, bs.face_side):
        p = m.reference[quad]
        n = np.cross(p[1] - p[0], p[3] - p[0])
        assert np.dot(n, p.mean(axis=0) - centre) > 0
        axis = int(side) // 2
        assert np.ptp(m.index[quad, axis]) == 0


def test_interior_and_boundary_partition():
    m = build_mesh(GridSpec((5, 4, 3), (1.0, 1.0, 1.0)))
    bs = m.boundary
    assert len(bs.interior) == 3 * 2 * 1
    assert sorted(np.concatenate([bs.interior, bs.boundary]).tolist()) == list(range(m.n_nodes))


def test_side_nodes_and_select():
    m = build_mesh(GridSpec((4, 3), (1.0, 1.0)))
    np.testing.assert_array_equal(m.side_nodes("left"), [0, 1, 2])
    np.testing.assert_array_equal(m.side_nodes("top"), [2, 5, 8, 11])
    corners = m.select(lambda i, c: ((i[:, 0] == 0) | (i[:, 0] == c[0] - 1)) & (i[:, 1] == 0))
    np.testing.assert_array_equal(corners, [0, 9])
    with pytest.raises(ValueError):
        m.side_nodes("front")


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(counts=(1, 3), spacings=(1.0, 1.0)),
        dict(counts=(3, 3), spacings=(1.0,)),
        dict(counts=(3, 3), spacings=(0.0, 1.0)),
        dict(counts=(3,), spacings=(1.0,)),
        dict(counts=(3, 3), spacings=(1.0, 1.0), dt=0.0),
        dict(counts=(3, 3), spacings=(1.0, 1.0), origin=(0.0,)),
    ],
)
def test_gridspec_rejects_bad_input(kwargs):
    with pytest.raises(ValueError):
        GridSpec(**kwargs)


@settings(max_examples=40, deadline=None)
@given(
    counts=st.lists(st.integers(2, 6), min_size=2, max_size=3),
    h=st.floats(0.01, 2.0),
)
def test_lattice_counts_property(counts, h):
    m = build_mesh(GridSpec(tuple(counts), (h,) * len(counts)))
    assert m.n_nodes == np.prod(counts)
    assert m.n_cells == np.prod([c - 1 for c in counts])
    # every node belongs to at least one cell, corners to exactly one
    uses = np.bincount(m.cells.ravel(), minlength=m.n_nodes)
    assert uses.min() >= 1
    assert uses[0] == 1
    assert m.cell_volume == pytest.approx(h ** len(counts))

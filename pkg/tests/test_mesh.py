import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from stokesdd.mesh import build_mesh_pair, build_subdomain_layout, structured_mesh


def test_single_cell_counts():
    mp = build_mesh_pair(1)
    assert mp.pressure_mesh.num_nodes == 4
    assert mp.pressure_mesh.num_triangles == 2
    assert mp.velocity_mesh.num_nodes == 9
    assert mp.velocity_mesh.num_triangles == 8


def test_mesh_sizes():
    mp = build_mesh_pair(64)
    assert mp.h == 0.015625
    assert mp.velocity_mesh.h == 1 / 128


def test_rejects_zero_cells():
    with pytest.raises(ValueError):
        build_mesh_pair(0)


@given(st.integers(1, 12))
def test_mesh_invariants(n):
    m = structured_mesh(n)
    assert m.num_nodes == (n + 1) ** 2
    assert m.num_triangles == 2 * n * n
    a = m.signed_areas()
    assert np.allclose(a, 0.5 / n**2, rtol=0, atol=1e-15)
    assert abs(a.sum() - 1.0) < 1e-12


@given(st.integers(1, 10))
def test_children_partition_fine_triangles(n):
    mp = build_mesh_pair(n)
    counts = np.bincount(mp.parent_map, minlength=mp.pressure_mesh.num_triangles)
    assert np.all(counts == 4)
    ch = mp.children()
    assert sorted(ch.ravel()) == list(range(mp.velocity_mesh.num_triangles))
    # the four children of a parent have the parent's centroid on average
    fine, coarse = mp.velocity_mesh, mp.pressure_mesh
    cent = fine.nodes[fine.triangles].mean(axis=1)
    pc = coarse.nodes[coarse.triangles].mean(axis=1)
    assert np.allclose(cent[ch].mean(axis=1), pc, atol=1e-14)


def test_node_numbering_is_lexicographic():
    m = structured_mesh(3)
    assert np.allclose(m.nodes[1], [1 / 3, 0])
    assert np.allclose(m.nodes[4], [0, 1 / 3])
    i, j = m.node_ij()
    assert np.array_equal(j * 4 + i, np.arange(16))


def test_layout_sixteen_by_two():
    mp = build_mesh_pair(16)
    lay = build_subdomain_layout(mp, 2)
    assert lay.num_subdomains == 4
    assert lay.ratio == 8
    assert lay.H == 0.5
    assert np.bincount(lay.subdomain_of_cell).tolist() == [64] * 4
    nodes = mp.pressure_mesh.nodes
    mult = lay.boundary_node_multiplicity
    idx = lambda x, y: int(np.flatnonzero(np.all(np.isclose(nodes, [x, y]), axis=1))[0])
    assert mult[idx(0.5, 0.5)] == 4
    assert mult[idx(0.5, 0.25)] == 2
    assert mult[idx(0.25, 0.25)] == 1


def test_layout_divisibility_error():
    with pytest.raises(ValueError, match="divide"):
        build_subdomain_layout(build_mesh_pair(8), 3)


@given(st.integers(1, 4), st.integers(1, 4))
def test_layout_covers_cells(ns, m):
    mp = build_mesh_pair(ns * m)
    lay = build_subdomain_layout(mp, ns)
    counts = np.bincount(lay.subdomain_of_cell, minlength=ns * ns)
    assert counts.sum() == (ns * m) ** 2
    assert np.all(counts == m * m)
    assert set(np.unique(lay.boundary_node_multiplicity)) <= {1, 2, 4}


def test_mesh_dump_roundtrip(tmp_path):
    m = structured_mesh(2)
    path = tmp_path / "mesh.txt"
    m.dump(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "9 8"
    nodes = np.loadtxt(lines[1:10])
    tris = np.loadtxt(lines[10:], dtype=int)
    assert np.allclose(nodes, m.nodes)
    assert np.array_equal(tris, m.triangles)

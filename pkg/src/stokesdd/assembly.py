"""Global mixed finite element matrices for the P1-iso-P2 / P1 (or P0) Stokes pair.

Velocity unknowns are two stacked scalar fields on the fine mesh: global dof
``comp * num_velocity_nodes + node``.  Pressure unknowns are nodal values on
the coarse mesh (continuous) or one value per coarse triangle (discontinuous).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.io
import scipy.sparse as sp

from .mesh import MeshPair, StructuredMesh
from .quadrature import triangle_rule

CONTINUOUS = "continuous"
DISCONTINUOUS = "discontinuous"
PRESSURE_KINDS = (CONTINUOUS, DISCONTINUOUS)


# ---------------------------------------------------------------------------
# element-level kernels, vectorized over triangles


def p1_geometry(mesh: StructuredMesh) -> tuple[np.ndarray, np.ndarray]:
    """Areas and barycentric gradients, shape (nt,) and (nt, 3, 2)."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    grads = np.empty(p.shape)
    for k in range(3):
        k1, k2 = (k + 1) % 3, (k + 2) % 3
        grads[:, k, 0] = y[:, k1] - y[:, k2]
        grads[:, k, 1] = x[:, k2] - x[:, k1]
    grads /= (2.0 * area)[:, None, None]
    return area, grads


def element_stiffness(mesh: StructuredMesh) -> np.ndarray:
    """Scalar P1 stiffness per triangle, (nt, 3, 3)."""
    area, grads = p1_geometry(mesh)
    return area[:, None, None] * np.einsum("tad,tbd->tab", grads, grads)


def _barycentric(points: np.ndarray, tri_pts: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of one point per triangle, (nt, 3)."""
    a, b, c = tri_pts[:, 0], tri_pts[:, 1], tri_pts[:, 2]
    v0, v1, v2 = b - a, c - a, points - a
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (v2[:, 0] * v1[:, 1] - v2[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * v2[:, 1] - v0[:, 1] * v2[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def element_divergence(mesh_pair: MeshPair, pressure_kind: str = CONTINUOUS):
    """Per fine triangle local divergence blocks ``-int div(phi_a e_d) psi_k``.

    Returns ``(rows, values)`` where ``rows`` holds the pressure dofs of the
    parent element, shape (nt, 3) or (nt, 1), and ``values`` has shape
    (nt, nrows, 2, 3) indexed ``[t, k, component, fine vertex]``.  The
    divergence is constant on a fine triangle and the pressure is linear, so
    the integral is area times the pressure at the fine centroid.
    """
    fine, coarse = mesh_pair.velocity_mesh, mesh_pair.pressure_mesh
    area, grads = p1_geometry(fine)
    parent = mesh_pair.parent_map
    if pressure_kind == CONTINUOUS:
        rows = coarse.triangles[parent]
        centroid = fine.nodes[fine.triangles].mean(axis=1)
        psi = _barycentric(centroid, coarse.nodes[rows])
    elif pressure_kind == DISCONTINUOUS:
        rows = parent[:, None]
        psi = np.ones((parent.size, 1))
    else:
        raise ValueError(f"unknown pressure kind {pressure_kind!r}")
    vals = -area[:, None, None, None] * psi[:, :, None, None] * grads.transpose(0, 2, 1)[:, None, :, :]
    return rows, vals


def _scalar_to_vector(nv: int, tris: np.ndarray, ke: np.ndarray):
    rows = np.concatenate([np.repeat(tris, 3, axis=1) + c * nv for c in (0, 1)], axis=1)
    cols = np.concatenate([np.tile(tris, 3) + c * nv for c in (0, 1)], axis=1)
    vals = np.concatenate([ke.reshape(len(ke), 9)] * 2, axis=1)
    return rows.ravel(), cols.ravel(), vals.ravel()


# ---------------------------------------------------------------------------
# global operators


def assemble_stiffness(mesh_pair: MeshPair) -> sp.csr_matrix:
    """Vector Laplacian on all velocity dofs (no boundary conditions)."""
    fine = mesh_pair.velocity_mesh
    nv = fine.num_nodes
    r, c, v = _scalar_to_vector(nv, fine.triangles, element_stiffness(fine))
    A = sp.coo_matrix((v, (r, c)), shape=(2 * nv, 2 * nv)).tocsr()
    A.sum_duplicates()
    return A


def assemble_divergence(mesh_pair: MeshPair, pressure_kind: str = CONTINUOUS) -> sp.csr_matrix:
    """B with ``(B u)_k = -int div(u) psi_k`` on all velocity dofs."""
    fine = mesh_pair.velocity_mesh
    nv = fine.num_nodes
    prow, vals = element_divergence(mesh_pair, pressure_kind)
    nt, nr = prow.shape
    vcols = np.concatenate([fine.triangles, fine.triangles + nv], axis=1)  # (nt, 6)
    R = np.broadcast_to(prow[:, :, None], (nt, nr, 6))
    C = np.broadcast_to(vcols[:, None, :], (nt, nr, 6))
    npres = num_pressure_dofs(mesh_pair, pressure_kind)
    B = sp.coo_matrix(
        (vals.reshape(nt, nr, 6).ravel(), (R.ravel(), C.ravel())), shape=(npres, 2 * nv)
    ).tocsr()
    B.sum_duplicates()
    return B


def num_pressure_dofs(mesh_pair: MeshPair, pressure_kind: str = CONTINUOUS) -> int:
    if pressure_kind == CONTINUOUS:
        return mesh_pair.pressure_mesh.num_nodes
    return mesh_pair.pressure_mesh.num_triangles


def assemble_pressure_mass(mesh: StructuredMesh, pressure_kind: str = CONTINUOUS) -> sp.csr_matrix:
    area, _ = p1_geometry(mesh)
    if pressure_kind == DISCONTINUOUS:
        return sp.diags(area).tocsr()
    local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    tris = mesh.triangles
    vals = area[:, None, None] * local[None]
    Z = sp.coo_matrix(
        (vals.ravel(), (np.repeat(tris, 3, axis=1).ravel(), np.tile(tris, 3).ravel())),
        shape=(mesh.num_nodes, mesh.num_nodes),
    ).tocsr()
    Z.sum_duplicates()
    return Z


def element_load(mesh: StructuredMesh, f: Callable, degree: int = 4) -> np.ndarray:
    """Per triangle load ``int f_d phi_a``, shape (nt, 2, 3)."""
    bary, w = triangle_rule(degree)
    area, _ = p1_geometry(mesh)
    pts = mesh.nodes[mesh.triangles]  # (nt, 3, 2)
    xq = np.einsum("qa,tad->tqd", bary, pts)
    fq = np.asarray(f(xq[..., 0], xq[..., 1]), dtype=float)  # (2, nt, nq)
    fq = np.broadcast_to(fq, (2,) + xq.shape[:2])
    return area[:, None, None] * np.einsum("q,dtq,qa->tda", w, fq, bary)


def assemble_load(mesh_pair: MeshPair, f: Callable, degree: int = 4) -> np.ndarray:
    """Load vector over all velocity dofs (Dirichlet dofs still present)."""
    fine = mesh_pair.velocity_mesh
    nv = fine.num_nodes
    fe = element_load(fine, f, degree)
    out = np.zeros(2 * nv)
    for c in (0, 1):
        np.add.at(out, fine.triangles + c * nv, fe[:, c, :])
    return out


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MixedSystem:
    """Saddle point blocks ``[[A, B^T], [B, 0]]`` with load ``f``.

    ``free_dofs`` lists the global velocity dofs kept in ``A``/``B``/``f``;
    before elimination it is every dof.
    """

    A: sp.csr_matrix
    B: sp.csr_matrix
    Z: sp.csr_matrix
    f: np.ndarray
    free_dofs: np.ndarray
    dirichlet_dofs: np.ndarray
    num_velocity_dofs: int
    pressure_kind: str = CONTINUOUS
    eliminated: bool = False

    @property
    def num_free(self) -> int:
        return self.A.shape[0]

    @property
    def num_pressure(self) -> int:
        return self.B.shape[0]

    def expand_velocity(self, u_free: np.ndarray) -> np.ndarray:
        """Velocity on all dofs with zero Dirichlet values."""
        u = np.zeros(self.num_velocity_dofs)
        u[self.free_dofs] = u_free
        return u

    def export_matrix_market(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("A", "B", "Z"):
            scipy.io.mmwrite(str(d / f"{name}.mtx"), getattr(self, name))


def velocity_dirichlet_dofs(mesh_pair: MeshPair) -> np.ndarray:
    nv = mesh_pair.velocity_mesh.num_nodes
    bnd = mesh_pair.velocity_mesh.boundary_nodes()
    return np.concatenate([bnd, bnd + nv])


def assemble_system(
    mesh_pair: MeshPair,
    f: Callable | None = None,
    pressure_kind: str = CONTINUOUS,
    quad_degree: int = 4,
) -> MixedSystem:
    """Assemble A, B, Z and the load on all velocity dofs."""
    nv2 = 2 * mesh_pair.velocity_mesh.num_nodes
    load = np.zeros(nv2) if f is None else assemble_load(mesh_pair, f, quad_degree)
    return MixedSystem(
        A=assemble_stiffness(mesh_pair),
        B=assemble_divergence(mesh_pair, pressure_kind),
        Z=assemble_pressure_mass(mesh_pair.pressure_mesh, pressure_kind),
        f=load,
        free_dofs=np.arange(nv2),
        dirichlet_dofs=velocity_dirichlet_dofs(mesh_pair),
        num_velocity_dofs=nv2,
        pressure_kind=pressure_kind,
    )


def eliminate_dirichlet(system: MixedSystem) -> MixedSystem:
    """Drop homogeneous Dirichlet velocity dofs; the pressure space is untouched."""
    if system.eliminated:
        return system
    keep = np.setdiff1d(np.arange(system.num_velocity_dofs), system.dirichlet_dofs)
    return replace(
        system,
        A=system.A[keep][:, keep].tocsr(),
        B=system.B[:, keep].tocsr(),
        f=system.f[keep],
        free_dofs=keep,
        eliminated=True,
    )

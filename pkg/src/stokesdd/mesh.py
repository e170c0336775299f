"""Structured triangulations of the unit square and their square-block partition.

Both meshes split every square along the bottom-left to top-right diagonal.
Node numbering is lexicographic with x running fastest, so node ``(i, j)`` of an
``n x n`` mesh has index ``j * (n + 1) + i``.  Square ``(i, j)`` owns triangles
``2 * (j * n + i)`` (below the diagonal) and ``2 * (j * n + i) + 1`` (above).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class StructuredMesh:
    nodes: np.ndarray  # (num_nodes, 2)
    triangles: np.ndarray  # (num_triangles, 3), counterclockwise
    cells_per_side: int

    @property
    def h(self) -> float:
        return 1.0 / self.cells_per_side

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def signed_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_nodes(self) -> np.ndarray:
        n = self.cells_per_side
        i, j = np.divmod(np.arange(self.num_nodes), n + 1)[::-1]
        on = (i == 0) | (i == n) | (j == 0) | (j == n)
        return np.flatnonzero(on)

    def node_ij(self) -> tuple[np.ndarray, np.ndarray]:
        """Integer grid coordinates ``(i, j)`` of every node."""
        j, i = np.divmod(np.arange(self.num_nodes), self.cells_per_side + 1)
        return i, j

    def dump(self, path: str | Path) -> None:
        """Write nodes (``x y``) then triangles (``i j k``, 0-based) as plain text."""
        path = Path(path)
        with path.open("w") as fh:
            fh.write(f"{self.num_nodes} {self.num_triangles}\n")
            np.savetxt(fh, self.nodes, fmt="%.17g")
            np.savetxt(fh, self.triangles, fmt="%d")


def structured_mesh(n: int) -> StructuredMesh:
    if n < 1:
        raise ValueError(f"cells_per_side must be >= 1, got {n}")
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t)  # x fastest after ravel
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    j, i = np.divmod(np.arange(n * n), n)
    v00 = j * (n + 1) + i
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([v00, v10, v11])
    tris[1::2] = np.column_stack([v00, v11, v01])
    return StructuredMesh(nodes=nodes, triangles=tris, cells_per_side=n)


@dataclass(frozen=True)
class MeshPair:
    """Pressure mesh of size h and its uniform 4-way refinement for velocity."""

    pressure_mesh: StructuredMesh
    velocity_mesh: StructuredMesh
    parent_map: np.ndarray  # velocity triangle -> pressure triangle

    @property
    def h(self) -> float:
        return self.pressure_mesh.h

    @property
    def n(self) -> int:
        return self.pressure_mesh.cells_per_side

    def children(self) -> np.ndarray:
        """(num_pressure_triangles, 4) array of child velocity triangles."""
        order = np.argsort(self.parent_map, kind="stable")
        return order.reshape(-1, 4)


def build_mesh_pair(cells_per_side: int) -> MeshPair:
    """Coarse pressure mesh plus the mesh obtained by joining edge midpoints.

    With a uniform diagonal direction the midpoint refinement of the n-mesh is
    exactly the structured 2n-mesh, so the fine mesh is generated directly and
    the parent of each fine triangle is located from its centroid.
    """
    if cells_per_side < 1:
        raise ValueError(f"cells_per_side must be >= 1, got {cells_per_side}")
    n = cells_per_side
    coarse = structured_mesh(n)
    fine = structured_mesh(2 * n)

    centroids = fine.nodes[fine.triangles].mean(axis=1) * n
    ci = np.minimum(np.floor(centroids[:, 0]).astype(np.int64), n - 1)
    cj = np.minimum(np.floor(centroids[:, 1]).astype(np.int64), n - 1)
    lx = centroids[:, 0] - ci
    ly = centroids[:, 1] - cj
    upper = (ly > lx).astype(np.int64)
    parent = 2 * (cj * n + ci) + upper
    return MeshPair(pressure_mesh=coarse, velocity_mesh=fine, parent_map=parent)


@dataclass(frozen=True)
class SubdomainLayout:
    """Partition of the pressure cells into ``nsub_per_side**2`` square blocks.

    Subdomains are numbered row-major: ``s = sy * nsub_per_side + sx``.
    """

    nsub_per_side: int
    cells_per_side: int
    subdomain_of_cell: np.ndarray  # per pressure square
    boundary_node_multiplicity: np.ndarray = field(repr=False)  # per pressure node

    @property
    def H(self) -> float:
        return 1.0 / self.nsub_per_side

    @property
    def ratio(self) -> int:
        """Cells per subdomain side, i.e. H/h."""
        return self.cells_per_side // self.nsub_per_side

    @property
    def num_subdomains(self) -> int:
        return self.nsub_per_side**2

    def subdomain_of_triangle(self) -> np.ndarray:
        return np.repeat(self.subdomain_of_cell, 2)

    def origin(self, s: int) -> tuple[int, int]:
        """Lower-left corner of subdomain ``s`` in pressure-grid units."""
        sy, sx = divmod(s, self.nsub_per_side)
        return sx * self.ratio, sy * self.ratio

    def multiplicity(self, i: np.ndarray, j: np.ndarray, refinement: int = 1) -> np.ndarray:
        """Number of subdomains whose closure contains grid point(s) ``(i, j)``.

        ``refinement`` converts from a grid ``refinement`` times finer than the
        pressure grid (2 for velocity nodes).
        """
        m = self.ratio * refinement
        nn = self.cells_per_side * refinement
        i = np.asarray(i)
        j = np.asarray(j)
        on_x = (i % m == 0) & (i > 0) & (i < nn)
        on_y = (j % m == 0) & (j > 0) & (j < nn)
        return (1 + on_x) * (1 + on_y)


def build_subdomain_layout(mesh_pair: MeshPair, nsub_per_side: int) -> SubdomainLayout:
    n = mesh_pair.n
    if nsub_per_side < 1:
        raise ValueError(f"nsub_per_side must be >= 1, got {nsub_per_side}")
    if n % nsub_per_side != 0:
        raise ValueError(
            f"nsub_per_side={nsub_per_side} does not divide cells_per_side={n}"
        )
    m = n // nsub_per_side
    j, i = np.divmod(np.arange(n * n), n)
    sub = (j // m) * nsub_per_side + (i // m)

    layout = SubdomainLayout(
        nsub_per_side=nsub_per_side,
        cells_per_side=n,
        subdomain_of_cell=sub,
        boundary_node_multiplicity=np.empty(0),
    )
    pi, pj = mesh_pair.pressure_mesh.node_ij()
    mult = layout.multiplicity(pi, pj)
    object.__setattr__(layout, "boundary_node_multiplicity", mult)
    return layout

"""Global velocity and pressure from the interface solution, and error norms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import manufactured
from .assembly import CONTINUOUS, MixedSystem, _barycentric, p1_geometry
from .mesh import MeshPair
from .quadrature import triangle_rule
from .reduced import ReducedOperator


@dataclass
class GlobalSolution:
    """Velocity on all (stacked) velocity dofs and pressure on all pressure dofs."""

    u: np.ndarray
    p: np.ndarray
    pressure_kind: str

    def free_velocity(self, system: MixedSystem) -> np.ndarray:
        return self.u[system.free_dofs]


def reconstruct(op: ReducedOperator, x: np.ndarray) -> GlobalSolution:
    """Back-substitute and gather subdomain copies into global vectors.

    Interface velocity copies are averaged with weights 1/N_x; they agree up
    to the CG tolerance.
    """
    blocks = op.blocks
    part = blocks.partition
    w = op.back_substitute(x)
    r, uP = w[: blocks.n_r], w[blocks.n_r :]
    pG = x[: op.n_G]

    nv2 = 2 * part.mesh_pair.velocity_mesh.num_nodes
    u = np.zeros(nv2)
    npres = part.mesh_pair.pressure_mesh.num_nodes if part.pressure_kind == CONTINUOUS else (
        part.mesh_pair.pressure_mesh.num_triangles
    )
    p = np.zeros(npres)
    for sd, o in zip(part.subdomains, blocks.r_offsets[:-1]):
        loc = r[o : o + sd.n_r]
        uI = loc[: sd.n_I]
        pI = loc[sd.n_I : sd.n_I + sd.n_pI]
        uD = loc[sd.n_I + sd.n_pI :]
        nodal = sd.T @ np.concatenate([uI, uD, uP[sd.primal_ids]])
        np.add.at(u, sd.nodal_dofs, nodal / sd.nodal_multiplicity)
        p[sd.raw_pressure] = sd.P @ np.concatenate([pI, pG[sd.gamma_ids]])
    return GlobalSolution(u=u, p=p, pressure_kind=part.pressure_kind)


def pressure_at_points(mesh_pair: MeshPair, p: np.ndarray, pressure_kind: str, bary: np.ndarray) -> np.ndarray:
    """Discrete pressure at quadrature points of every velocity triangle, (nt, nq)."""
    parent = mesh_pair.parent_map
    if pressure_kind != CONTINUOUS:
        return np.broadcast_to(p[parent][:, None], (parent.size, bary.shape[0]))
    fine, coarse = mesh_pair.velocity_mesh, mesh_pair.pressure_mesh
    xq = np.einsum("qa,tad->tqd", bary, fine.nodes[fine.triangles])
    rows = coarse.triangles[parent]
    out = np.empty((parent.size, bary.shape[0]))
    for q in range(bary.shape[0]):
        psi = _barycentric(xq[:, q], coarse.nodes[rows])
        out[:, q] = np.einsum("tk,tk->t", psi, p[rows])
    return out


@dataclass(frozen=True)
class ErrorNorms:
    velocity_l2: float
    velocity_h1: float
    pressure_l2: float
    pressure_shift: float  # constant added to the discrete pressure before comparison


def error_norms(
    mesh_pair: MeshPair,
    u: np.ndarray,
    p: np.ndarray,
    pressure_kind: str = CONTINUOUS,
    exact=manufactured,
    degree: int = 6,
) -> ErrorNorms:
    """L2 and H1-seminorm velocity errors and mean-aligned L2 pressure error.

    ``u`` covers all stacked velocity dofs; ``exact`` provides ``velocity``,
    ``velocity_gradient`` and ``pressure``.
    """
    fine = mesh_pair.velocity_mesh
    nv = fine.num_nodes
    bary, wts = triangle_rule(degree)
    area, grads = p1_geometry(fine)
    pts = fine.nodes[fine.triangles]
    xq = np.einsum("qa,tad->tqd", bary, pts)
    X, Y = xq[..., 0], xq[..., 1]
    w = area[:, None] * wts[None, :]

    ue = exact.velocity(X, Y)  # (2, nt, nq)
    ge = exact.velocity_gradient(X, Y)  # (2, 2, nt, nq)
    l2 = h1 = 0.0
    for c in range(2):
        uc = u[c * nv : (c + 1) * nv][fine.triangles]  # (nt, 3)
        uh = uc @ bary.T
        l2 += float(np.sum(w * (uh - ue[c]) ** 2))
        gh = np.einsum("ta,tad->td", uc, grads)
        h1 += float(np.sum(w * ((gh[:, 0, None] - ge[c, 0]) ** 2 + (gh[:, 1, None] - ge[c, 1]) ** 2)))

    ph = pressure_at_points(mesh_pair, p, pressure_kind, bary)
    pe = exact.pressure(X, Y)
    shift = float(np.sum(w * (pe - ph)) / np.sum(w))
    pl2 = float(np.sum(w * (ph + shift - pe) ** 2))
    return ErrorNorms(float(np.sqrt(l2)), float(np.sqrt(h1)), float(np.sqrt(pl2)), shift)


def interpolate_velocity(mesh_pair: MeshPair, exact=manufactured) -> np.ndarray:
    """Nodal interpolant of the exact velocity, stacked by component."""
    nodes = mesh_pair.velocity_mesh.nodes
    return np.asarray(exact.velocity(nodes[:, 0], nodes[:, 1])).ravel()

"""Dual-primal splitting of the velocity and pressure spaces.

Every subdomain gets its own copy of the velocity unknowns on its closure.
After an optional per-edge change of basis (edge average plus deviations) the
local velocity unknowns fall into three classes:

* ``I``  nodes strictly inside the subdomain,
* ``D``  dual interface unknowns, duplicated in each sharing subdomain and glued
  by Lagrange multipliers,
* ``P``  primal unknowns (corner values, optionally edge averages), shared.

Pressure unknowns are split into subdomain-interior ``I`` and interface ``G``
(shared by several subdomains).  For the discontinuous element the interface
pressure of a subdomain is its constant part and the interior unknowns are
deviations from it that vanish on one reference cell (the last cell of the
subdomain).

Local matrices are subassembled from the elements of each subdomain, which is
what makes the leading ``r = (u_I, p_I, u_D)`` block block-diagonal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .assembly import (
    CONTINUOUS,
    DISCONTINUOUS,
    MixedSystem,
    element_divergence,
    element_stiffness,
)
from .mesh import MeshPair, SubdomainLayout

CORNERS = "corners"
CORNERS_EDGES = "corners+edges"
COARSE_KINDS = (CORNERS, CORNERS_EDGES)


def normalize_coarse_kind(kind: str) -> str:
    k = kind.lower().replace("-", "+").replace("_", "+")
    if k in ("corners", "corner", "cornersonly"):
        return CORNERS
    if k in ("corners+edges", "cornersandedgeaverages", "corners+edge+averages", "edges"):
        return CORNERS_EDGES
    raise ValueError(f"unknown coarse space {kind!r}")


# ---------------------------------------------------------------------------
# index bookkeeping


@dataclass
class SubdomainDofs:
    """Local numbering of one subdomain.

    Velocity: ``nodal_dofs`` are the global (stacked) velocity dofs of the
    local non-Dirichlet nodes; ``T`` maps new local unknowns, ordered
    ``[I | D | P]``, to those nodal values.
    Pressure: ``P`` maps local pressure unknowns ``[I | G]`` to raw values
    (nodal values or cell values) with global ids ``raw_pressure``.
    """

    sid: int
    nodal_dofs: np.ndarray
    nodal_multiplicity: np.ndarray
    T: sp.csr_matrix
    n_I: int
    n_D: int
    n_P: int
    dual_keys: np.ndarray
    primal_ids: np.ndarray
    raw_pressure: np.ndarray
    P: sp.csr_matrix
    n_pI: int
    gamma_ids: np.ndarray
    pressure_constant: np.ndarray  # local pressure coordinates of the constant 1
    triangles: np.ndarray  # fine triangles owned
    node_local: dict = field(repr=False, default_factory=dict)

    @property
    def n_r(self) -> int:
        return self.n_I + self.n_pI + self.n_D

    @property
    def n_u(self) -> int:
        return self.n_I + self.n_D + self.n_P

    @property
    def n_pG(self) -> int:
        return self.gamma_ids.size

    def velocity_slices(self):
        i, d = self.n_I, self.n_I + self.n_D
        return slice(0, i), slice(i, d), slice(d, d + self.n_P)


@dataclass
class DofPartition:
    mesh_pair: MeshPair
    layout: SubdomainLayout
    coarse_kind: str
    pressure_kind: str
    subdomains: list[SubdomainDofs]
    num_primal: int
    num_gamma: int
    dual_multiplicity: dict  # dual key -> number of sharing subdomains
    gamma_raw: np.ndarray  # raw pressure id of each interface unknown (continuous)

    @property
    def num_subdomains(self) -> int:
        return len(self.subdomains)

    @property
    def num_dual(self) -> int:
        return sum(s.n_D for s in self.subdomains)

    def statistics(self) -> dict:
        return {
            "coarse_kind": self.coarse_kind,
            "pressure_kind": self.pressure_kind,
            "num_primal": self.num_primal,
            "num_gamma": self.num_gamma,
            "num_dual_copies": self.num_dual,
            "subdomains": [
                {"id": s.sid, "u_I": s.n_I, "u_D": s.n_D, "u_P": s.n_P, "p_I": s.n_pI, "p_G": s.n_pG}
                for s in self.subdomains
            ],
        }

    def dump_statistics(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.statistics(), indent=1))


def edge_basis(k: int, kind: str = "last") -> tuple[np.ndarray, np.ndarray]:
    """Change of basis on one edge: nodal values ``w = Q d + a * avg``.

    ``a`` is the edge average of ``w``; the columns of ``Q`` span the
    zero-sum vectors.
    """
    if kind == "last":
        Q = np.vstack([np.eye(k - 1), -np.ones((1, k - 1))])
        avg = np.ones(k)
    elif kind == "nodal":
        Q = np.vstack([np.eye(k - 1), -np.ones((1, k - 1))])
        avg = np.zeros(k)
        avg[-1] = k
    elif kind == "ortho":
        full = np.linalg.qr(np.column_stack([np.ones(k), np.eye(k)[:, : k - 1]]))[0]
        Q = full[:, 1:]
        avg = np.ones(k)
    elif kind == "mean":
        Q = np.eye(k)[:, : k - 1] - 1.0 / k
        avg = np.ones(k)
    else:
        raise ValueError(f"unknown edge basis {kind!r}")
    return Q, avg


def _velocity_node_classes(mesh_pair: MeshPair, layout: SubdomainLayout):
    """Per fine node: kind (0 Dirichlet, 1 interior, 2 edge, 3 corner), edge id,
    position along the edge, and corner id."""
    fine = mesh_pair.velocity_mesh
    nn = fine.cells_per_side
    ns = layout.nsub_per_side
    m2 = 2 * layout.ratio
    I, J = fine.node_ij()
    # edges: vertical ones first, each numbered row-major
    bnd = (I == 0) | (I == nn) | (J == 0) | (J == nn)
    on_x = (I % m2 == 0) & ~bnd
    on_y = (J % m2 == 0) & ~bnd
    kind = np.where(bnd, 0, np.where(on_x & on_y, 3, np.where(on_x | on_y, 2, 1)))

    n_vert_edges = (ns - 1) * ns
    edge = np.full(I.shape, -1)
    pos = np.full(I.shape, -1)
    v = on_x & ~on_y
    edge[v] = (J[v] // m2) * (ns - 1) + (I[v] // m2 - 1)
    pos[v] = J[v] % m2 - 1
    hz = on_y & ~on_x
    edge[hz] = n_vert_edges + (J[hz] // m2 - 1) * ns + I[hz] // m2
    pos[hz] = I[hz] % m2 - 1
    corner = np.where(kind == 3, (J // m2 - 1) * (ns - 1) + (I // m2 - 1), -1)
    return kind, edge, pos, corner


def classify_dofs(
    mesh_pair: MeshPair,
    layout: SubdomainLayout,
    coarse_kind: str = CORNERS,
    pressure_kind: str = CONTINUOUS,
    edge_components: str = "normal",
    edge_basis_kind: str = "last",
) -> DofPartition:
    """Classify velocity and pressure unknowns subdomain by subdomain.

    ``edge_components`` selects which velocity components get an edge-average
    primal unknown when ``coarse_kind`` includes edges: ``"normal"`` (the
    component normal to the edge) or ``"both"``.
    """
    coarse_kind = normalize_coarse_kind(coarse_kind)
    if edge_components not in ("normal", "both"):
        raise ValueError(f"edge_components must be 'normal' or 'both', got {edge_components!r}")
    if pressure_kind not in (CONTINUOUS, DISCONTINUOUS):
        raise ValueError(f"unknown pressure kind {pressure_kind!r}")
    if layout.cells_per_side != mesh_pair.n:
        raise ValueError("layout and mesh pair disagree on cells_per_side")
    ratio = layout.ratio
    if ratio < 2:
        raise ValueError(
            f"H/h = {ratio} leaves a subdomain without interior pressure nodes; need H/h >= 2"
        )

    ns = layout.nsub_per_side
    fine = mesh_pair.velocity_mesh
    nv = fine.num_nodes
    nn = fine.cells_per_side
    m2 = 2 * ratio
    k_edge = m2 - 1  # velocity nodes per open edge
    n_corners = (ns - 1) ** 2
    n_vert_edges = (ns - 1) * ns
    n_edges = 2 * n_vert_edges
    per_edge = 2 if edge_components == "both" else 1

    def averaged(e, c):
        if coarse_kind == CORNERS:
            return False
        # vertical edges have normal component x
        return edge_components == "both" or (c == 0) == (e < n_vert_edges)

    def edge_primal_id(e, c):
        return 2 * n_corners + (2 * e + c if per_edge == 2 else e)

    kind, edge, pos, corner = _velocity_node_classes(mesh_pair, layout)
    fI, fJ = fine.node_ij()

    coarse = mesh_pair.pressure_mesh
    pi, pj = coarse.node_ij()
    pmult = layout.multiplicity(pi, pj)
    if pressure_kind == CONTINUOUS:
        gamma_raw = np.flatnonzero(pmult >= 2)
        gamma_of_node = np.full(coarse.num_nodes, -1)
        gamma_of_node[gamma_raw] = np.arange(gamma_raw.size)
        num_gamma = gamma_raw.size
    else:
        gamma_raw = np.empty(0, dtype=np.int64)
        num_gamma = layout.num_subdomains

    tri_sub = layout.subdomain_of_triangle()[mesh_pair.parent_map]
    order = np.argsort(tri_sub, kind="stable")
    tri_groups = np.split(order, np.cumsum(np.bincount(tri_sub, minlength=layout.num_subdomains))[:-1])
    coarse_tri_sub = layout.subdomain_of_triangle()

    subs = []
    dual_mult: dict[int, int] = {}
    nb = m2 + 1
    for s in range(layout.num_subdomains):
        ox, oy = layout.origin(s)
        I0, J0 = 2 * ox, 2 * oy
        Ib, Jb = np.meshgrid(np.arange(I0, I0 + nb), np.arange(J0, J0 + nb))
        gnodes = (Jb * (nn + 1) + Ib).ravel()  # local node order, x fastest
        kinds = kind[gnodes]
        keep = kinds > 0
        knodes = gnodes[keep]
        kk = kinds[keep]
        nodal_dofs = np.concatenate([knodes, knodes + nv])
        nnod = knodes.size
        node_local = {"gnodes": gnodes, "keep": keep}

        # (rows, values) of each new unknown in terms of nodal values
        cols_I, cols_D, cols_C, cols_E = [], [], [], []
        keys_D, ids_C, ids_E = [], [], []

        def unit(c, idx):
            return (np.array([c * nnod + idx]), np.array([1.0]))

        interior = np.flatnonzero(kk == 1)
        for c in (0, 1):
            for a in interior:
                cols_I.append(unit(c, a))

        eds = np.flatnonzero(kk == 2)
        e_ids = edge[knodes[eds]]
        e_pos = pos[knodes[eds]]
        for e in np.unique(e_ids):
            mask = e_ids == e
            nodes_e = eds[mask][np.argsort(e_pos[mask])]
            for c in (0, 1):
                rows = c * nnod + nodes_e
                key0 = (2 * e + c) * k_edge
                if not averaged(e, c):
                    for j, r in enumerate(rows):
                        cols_D.append((np.array([r]), np.array([1.0])))
                        keys_D.append(key0 + j)
                else:
                    Q, avg = edge_basis(rows.size, edge_basis_kind)
                    for j in range(Q.shape[1]):
                        nz = np.flatnonzero(Q[:, j])
                        cols_D.append((rows[nz], Q[nz, j]))
                        keys_D.append(key0 + j)
                    nz = np.flatnonzero(avg)
                    cols_E.append((rows[nz], avg[nz]))
                    ids_E.append(edge_primal_id(e, c))

        for a in np.flatnonzero(kk == 3):
            cid = corner[knodes[a]]
            for c in (0, 1):
                cols_C.append(unit(c, a))
                ids_C.append(2 * cid + c)

        cols_P = cols_C + cols_E
        ids_P = ids_C + ids_E
        allcols = cols_I + cols_D + cols_P
        rr = np.concatenate([r for r, _ in allcols])
        vv = np.concatenate([v for _, v in allcols])
        cc = np.concatenate([np.full(r.size, j) for j, (r, _) in enumerate(allcols)])
        T = sp.csr_matrix((vv, (rr, cc)), shape=(2 * nnod, len(allcols)))
        for key in keys_D:
            dual_mult[key] = dual_mult.get(key, 0) + 1

        # pressure
        if pressure_kind == CONTINUOUS:
            ib, jb = np.meshgrid(np.arange(ox, ox + ratio + 1), np.arange(oy, oy + ratio + 1))
            praw = (jb * (coarse.cells_per_side + 1) + ib).ravel()
            is_g = pmult[praw] >= 2
            raw_sorted = np.concatenate([praw[~is_g], praw[is_g]])
            n_pI = int((~is_g).sum())
            gids = gamma_of_node[praw[is_g]]
            Pm = sp.identity(praw.size, format="csr")
            const = np.ones(praw.size)
            praw = raw_sorted
        else:
            praw = np.flatnonzero(coarse_tri_sub == s)
            M = praw.size
            n_pI = M - 1
            # cell values = subdomain constant + deviations vanishing on the last cell
            rows = np.concatenate([np.arange(M - 1), np.arange(M)])
            cols = np.concatenate([np.arange(M - 1), np.full(M, M - 1)])
            Pm = sp.csr_matrix((np.ones(2 * M - 1), (rows, cols)), shape=(M, M))
            gids = np.array([s])
            const = np.zeros(M)
            const[-1] = 1.0

        mult_nodes = layout.multiplicity(fI[knodes], fJ[knodes], refinement=2)
        subs.append(
            SubdomainDofs(
                sid=s,
                nodal_dofs=nodal_dofs,
                nodal_multiplicity=np.concatenate([mult_nodes, mult_nodes]),
                T=T,
                n_I=len(cols_I),
                n_D=len(cols_D),
                n_P=len(cols_P),
                dual_keys=np.array(keys_D, dtype=np.int64),
                primal_ids=np.array(ids_P, dtype=np.int64),
                raw_pressure=praw,
                P=Pm,
                n_pI=n_pI,
                gamma_ids=gids,
                pressure_constant=const,
                triangles=tri_groups[s],
                node_local=node_local,
            )
        )

    num_primal = 2 * n_corners + (per_edge * n_edges if coarse_kind == CORNERS_EDGES else 0)
    return DofPartition(
        mesh_pair=mesh_pair,
        layout=layout,
        coarse_kind=coarse_kind,
        pressure_kind=pressure_kind,
        subdomains=subs,
        num_primal=num_primal,
        num_gamma=num_gamma,
        dual_multiplicity=dual_mult,
        gamma_raw=gamma_raw,
    )


# ---------------------------------------------------------------------------
# jump operators


@dataclass
class JumpOperators:
    """``B_D`` (signed boolean) and ``B_DD`` (entries scaled by 1/N_x) on the
    concatenation of all local dual unknowns."""

    B: sp.csr_matrix
    BD: sp.csr_matrix
    lambda_dim: int

    def jump(self, w_dual: np.ndarray) -> np.ndarray:
        return self.B @ w_dual


def build_jump_operators(partition: DofPartition, layout: SubdomainLayout | None = None) -> JumpOperators:
    """Non-redundant multipliers chaining consecutive copies by subdomain id."""
    copies: dict[int, list[tuple[int, int]]] = {}
    offset = 0
    for sd in partition.subdomains:
        for j, key in enumerate(sd.dual_keys):
            copies.setdefault(int(key), []).append((sd.sid, offset + j))
        offset += sd.n_D
    rows, cols, vals, scaled = [], [], [], []
    r = 0
    for key in sorted(copies):
        cp = sorted(copies[key])
        nx = len(cp)
        for (_, a), (_, b) in zip(cp[:-1], cp[1:]):
            rows += [r, r]
            cols += [a, b]
            vals += [1.0, -1.0]
            scaled += [1.0 / nx, -1.0 / nx]
            r += 1
    shape = (r, offset)
    B = sp.csr_matrix((vals, (rows, cols)), shape=shape)
    BD = sp.csr_matrix((scaled, (rows, cols)), shape=shape)
    return JumpOperators(B=B, BD=BD, lambda_dim=r)


# ---------------------------------------------------------------------------
# subassembled blocks


@dataclass
class LocalBlocks:
    """Transformed local matrices of one subdomain.

    ``K`` is ordered ``[I | D | P]``; ``Bp`` has rows ``[p_I | p_G]``.
    """

    K: sp.csr_matrix
    Bp: sp.csr_matrix
    f: np.ndarray

    Arr: sp.csc_matrix  # (u_I, p_I, u_D) saddle block
    ArP: sp.csr_matrix  # coupling to local primal unknowns
    KPP: sp.csr_matrix
    BGr: sp.csr_matrix  # interface pressure rows vs r unknowns
    BGP: sp.csr_matrix
    f_r: np.ndarray
    f_P: np.ndarray
    flux_const: np.ndarray  # [B_ID^T B_GD^T] applied to the local constant pressure, on D


@dataclass
class SaddleBlocks:
    """All pieces of the six-block system, stored subdomain by subdomain.

    The global ``r`` vector is the concatenation of the local
    ``(u_I, p_I, u_D)`` vectors in subdomain order.
    """

    partition: DofPartition
    local: list[LocalBlocks]
    r_offsets: np.ndarray
    A_rP: sp.csr_matrix
    A_PP: sp.csr_matrix
    B_Gr: sp.csr_matrix
    B_GP: sp.csr_matrix
    dual_in_r: np.ndarray  # position of each dual copy inside r
    K_DD: sp.csr_matrix  # block diagonal over subdomains, dual copies
    f_r: np.ndarray
    f_P: np.ndarray
    flux_const: np.ndarray  # over dual copies
    index: dict  # block name -> positions in r

    @property
    def n_r(self) -> int:
        return int(self.r_offsets[-1])

    @property
    def n_P(self) -> int:
        return self.A_PP.shape[0]

    @property
    def n_G(self) -> int:
        return self.B_Gr.shape[0]

    def block(self, name: str) -> sp.csr_matrix:
        """Named sub-block of the six-block matrix, e.g. ``"A_ID"`` or ``"B_GP"``.

        Names use I, p (for p_I), D, P, G.
        """
        kind, pair = name.split("_")
        rows, cols = pair[0], pair[1]
        full = self.assemble_atilde()
        ix = self.index
        P0 = self.n_r

        def sel(c):
            if c == "P":
                return np.arange(P0, P0 + self.n_P)
            return ix[{"I": "u_I", "p": "p_I", "D": "u_D"}[c]]

        if kind == "A":
            return full[sel(rows)][:, sel(cols)].tocsr()
        if kind == "B" and rows == "G":
            return sp.hstack([self.B_Gr, self.B_GP]).tocsr()[:, sel(cols)].tocsr()
        if kind == "B":  # B_IX : pressure interior rows vs velocity cols
            return full[ix["p_I"]][:, sel(cols)].tocsr()
        raise KeyError(name)

    def assemble_Arr(self) -> sp.csr_matrix:
        return sp.block_diag([lb.Arr for lb in self.local], format="csr")

    def assemble_atilde(self) -> sp.csr_matrix:
        """Leading four-by-four block as one sparse matrix over ``(r, u_P)``."""
        return sp.bmat([[self.assemble_Arr(), self.A_rP], [self.A_rP.T, self.A_PP]], format="csr")


def _subassemble(partition: DofPartition):
    """Per subdomain nodal stiffness and divergence from its own elements."""
    mp = partition.mesh_pair
    fine = mp.velocity_mesh
    Ke = element_stiffness(fine)
    prow, Bv = element_divergence(mp, partition.pressure_kind)
    nn = fine.cells_per_side
    m2 = 2 * partition.layout.ratio
    nb = m2 + 1
    out = []
    for sd in partition.subdomains:
        keep = sd.node_local["keep"]
        lmap = np.full(keep.size, -1)
        lmap[keep] = np.arange(keep.sum())
        nnod = int(keep.sum())
        ox, oy = partition.layout.origin(sd.sid)
        tris = fine.triangles[sd.triangles]
        tj, ti = np.divmod(tris, nn + 1)
        ln = (tj - 2 * oy) * nb + (ti - 2 * ox)
        loc = lmap[ln]  # (nt, 3), -1 for Dirichlet

        # scalar stiffness, both components
        ke = Ke[sd.triangles]
        R = np.repeat(loc, 3, axis=1)
        C = np.tile(loc, 3)
        V = ke.reshape(-1, 9)
        ok = (R >= 0) & (C >= 0)
        rr = np.concatenate([R[ok], R[ok] + nnod])
        cc = np.concatenate([C[ok], C[ok] + nnod])
        vv = np.concatenate([V[ok], V[ok]])
        K = sp.csr_matrix((vv, (rr, cc)), shape=(2 * nnod, 2 * nnod))

        # divergence: raw local pressure rows
        raw_index = {int(g): i for i, g in enumerate(sd.raw_pressure)}
        pr = prow[sd.triangles]
        prl = np.vectorize(raw_index.__getitem__, otypes=[np.int64])(pr)
        bv = Bv[sd.triangles]  # (nt, nr, 2, 3)
        nt, nr = pr.shape
        vcols = np.concatenate([loc, np.where(loc >= 0, loc + nnod, -1)], axis=1)
        R = np.broadcast_to(prl[:, :, None], (nt, nr, 6))
        C = np.broadcast_to(vcols[:, None, :], (nt, nr, 6))
        V = bv.reshape(nt, nr, 6)
        ok = C >= 0
        Braw = sp.csr_matrix((V[ok], (R[ok], C[ok])), shape=(sd.raw_pressure.size, 2 * nnod))
        out.append((K, Braw))
    return out


def build_saddle_blocks(system: MixedSystem, partition: DofPartition) -> SaddleBlocks:
    mp = partition.mesh_pair
    if system.num_velocity_dofs != 2 * mp.velocity_mesh.num_nodes:
        raise ValueError("system and partition are built on different velocity meshes")
    if system.pressure_kind != partition.pressure_kind:
        raise ValueError("system and partition use different pressure elements")
    if system.num_pressure != (
        mp.pressure_mesh.num_nodes if partition.pressure_kind == CONTINUOUS else mp.pressure_mesh.num_triangles
    ):
        raise ValueError("system pressure dimension does not match the partition")

    f_all = np.zeros(system.num_velocity_dofs)
    f_all[system.free_dofs] = system.f

    raw = _subassemble(partition)
    local = []
    offs = [0]
    A_rP_parts, BGr_parts, BGP_parts, KPP_parts = [], [], [], []
    dual_pos, f_r_parts, flux_parts = [], [], []
    idx = {"u_I": [], "p_I": [], "u_D": []}
    f_P = np.zeros(partition.num_primal)
    for sd, (Kn, Braw) in zip(partition.subdomains, raw):
        T = sd.T
        K = (T.T @ Kn @ T).tocsr()
        Bp = (sd.P.T @ Braw @ T).tocsr()
        # load split by node multiplicity so copies sum to the assembled load
        f = T.T @ (f_all[sd.nodal_dofs] / sd.nodal_multiplicity)

        sI, sD, sP = sd.velocity_slices()
        npI = sd.n_pI
        KII, KID, KIP = K[sI, sI], K[sI, sD], K[sI, sP]
        KDD, KDP, KPP = K[sD, sD], K[sD, sP], K[sP, sP]
        BpI, BpG = Bp[:npI], Bp[npI:]
        Arr = sp.bmat(
            [
                [KII, BpI[:, sI].T, KID],
                [BpI[:, sI], None, BpI[:, sD]],
                [KID.T, BpI[:, sD].T, KDD],
            ],
            format="csc",
        )
        ArP = sp.vstack([KIP, BpI[:, sP], KDP]).tocsr()
        BGr = sp.hstack([BpG[:, sI], sp.csr_matrix((BpG.shape[0], npI)), BpG[:, sD]]).tocsr()
        BGP = BpG[:, sP].tocsr()
        f_r = np.concatenate([f[sI], np.zeros(npI), f[sD]])
        flux = Bp[:, sD].T @ sd.pressure_constant
        lb = LocalBlocks(
            K=K, Bp=Bp, f=f, Arr=Arr, ArP=ArP, KPP=KPP.tocsr(), BGr=BGr, BGP=BGP,
            f_r=f_r, f_P=f[sP], flux_const=flux,
        )
        local.append(lb)

        o = offs[-1]
        nI, nD = sd.n_I, sd.n_D
        idx["u_I"].append(o + np.arange(nI))
        idx["p_I"].append(o + nI + np.arange(npI))
        idx["u_D"].append(o + nI + npI + np.arange(nD))
        dual_pos.append(o + nI + npI + np.arange(nD))
        offs.append(o + sd.n_r)

        RP = sp.csr_matrix(
            (np.ones(sd.n_P), (np.arange(sd.n_P), sd.primal_ids)), shape=(sd.n_P, partition.num_primal)
        )
        RG = sp.csr_matrix(
            (np.ones(sd.n_pG), (np.arange(sd.n_pG), sd.gamma_ids)), shape=(sd.n_pG, partition.num_gamma)
        )
        A_rP_parts.append(ArP @ RP)
        KPP_parts.append(RP.T @ KPP @ RP)
        BGr_parts.append(RG.T @ BGr)
        BGP_parts.append(RG.T @ BGP @ RP)
        np.add.at(f_P, sd.primal_ids, f[sP])
        f_r_parts.append(f_r)
        flux_parts.append(flux)

    n_P = partition.num_primal
    A_PP = sp.csr_matrix((n_P, n_P))
    for m in KPP_parts:
        A_PP = A_PP + m
    B_GP = sp.csr_matrix((partition.num_gamma, n_P))
    for m in BGP_parts:
        B_GP = B_GP + m

    return SaddleBlocks(
        partition=partition,
        local=local,
        r_offsets=np.array(offs),
        A_rP=sp.vstack(A_rP_parts).tocsr() if A_rP_parts else sp.csr_matrix((0, n_P)),
        A_PP=A_PP.tocsr(),
        B_Gr=sp.hstack(BGr_parts).tocsr(),
        B_GP=B_GP.tocsr(),
        dual_in_r=np.concatenate(dual_pos),
        K_DD=sp.block_diag([lb.K[sd.velocity_slices()[1], sd.velocity_slices()[1]]
                            for lb, sd in zip(local, partition.subdomains)], format="csr"),
        f_r=np.concatenate(f_r_parts),
        f_P=f_P,
        flux_const=np.concatenate(flux_parts),
        index={k: np.concatenate(v) for k, v in idx.items()},
    )


# ---------------------------------------------------------------------------
# the coupled six-block operator and its null vector


def constraint_matrix(blocks: SaddleBlocks, jumps: JumpOperators) -> sp.csr_matrix:
    """``B_C``: rows ``(p_G, lambda)``, columns ``(r, u_P)``."""
    n_r, n_P = blocks.n_r, blocks.n_P
    nD = blocks.dual_in_r.size
    S = sp.csr_matrix((np.ones(nD), (np.arange(nD), blocks.dual_in_r)), shape=(nD, n_r))
    top = sp.hstack([blocks.B_Gr, blocks.B_GP])
    bot = sp.hstack([jumps.B @ S, sp.csr_matrix((jumps.lambda_dim, n_P))])
    return sp.vstack([top, bot]).tocsr()


def assemble_coupled(blocks: SaddleBlocks, jumps: JumpOperators) -> sp.csr_matrix:
    """Full six-block matrix in the ordering ``(r, u_P, p_G, lambda)``."""
    At = blocks.assemble_atilde()
    BC = constraint_matrix(blocks, jumps)
    return sp.bmat([[At, BC.T], [BC, None]], format="csr")


@dataclass
class NullBasis:
    """Null vector of the coupled system and its restriction to ``(p_G, lambda)``."""

    full: np.ndarray  # ordering (r, u_P, p_G, lambda)
    reduced: np.ndarray  # (p_G, lambda)
    lambda0: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.reduced))

    @property
    def unit(self) -> np.ndarray:
        return self.reduced / self.norm


def build_null_basis(blocks: SaddleBlocks, jumps: JumpOperators) -> NullBasis:
    lam0 = -(jumps.BD @ blocks.flux_const)
    part = blocks.partition
    full = np.zeros(blocks.n_r + blocks.n_P)
    for sd, o in zip(part.subdomains, blocks.r_offsets[:-1]):
        full[o + sd.n_I : o + sd.n_I + sd.n_pI] = sd.pressure_constant[: sd.n_pI]
    pG = np.zeros(part.num_gamma)
    for sd in part.subdomains:
        pG[sd.gamma_ids] = sd.pressure_constant[sd.n_pI :]
    reduced = np.concatenate([pG, lam0])
    return NullBasis(full=np.concatenate([full, reduced]), reduced=reduced, lambda0=lam0)

"""Interface problem for ``(p_G, lambda)`` and its lumped preconditioner.

``G = B_C Atilde^{-1} B_C^T`` is never formed.  Each application of
``Atilde^{-1}`` costs two sweeps of independent subdomain saddle-point solves
and one solve with the coarse matrix ``S_P = A_PP - A_Pr A_rr^{-1} A_rP``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import CONTINUOUS, DISCONTINUOUS
from .partition import JumpOperators, NullBasis, SaddleBlocks, build_null_basis, constraint_matrix

log = logging.getLogger(__name__)


class SingularSubdomainError(RuntimeError):
    pass


class CoarseIndefiniteError(RuntimeError):
    pass


@dataclass
class SubdomainFactor:
    sid: int
    lu: spla.SuperLU
    dim: int

    def solve(self, b: np.ndarray) -> np.ndarray:
        return self.lu.solve(b)


def factor_subdomains(blocks: SaddleBlocks, check: bool = True) -> list[SubdomainFactor]:
    """Sparse LU with partial pivoting of every local ``A_rr`` (symmetric indefinite)."""
    factors = []
    rng = np.random.default_rng(0)
    for lb, sd in zip(blocks.local, blocks.partition.subdomains):
        try:
            lu = spla.splu(lb.Arr.tocsc())
        except RuntimeError as exc:
            raise SingularSubdomainError(f"local saddle matrix of subdomain {sd.sid} is singular") from exc
        if check:
            b = rng.standard_normal(lb.Arr.shape[0])
            x = lu.solve(b)
            res = np.linalg.norm(lb.Arr @ x - b) / np.linalg.norm(b)
            if not np.isfinite(res) or res > 1e-8:
                raise SingularSubdomainError(
                    f"local saddle matrix of subdomain {sd.sid} is numerically singular (residual {res:.1e})"
                )
        factors.append(SubdomainFactor(sid=sd.sid, lu=lu, dim=lb.Arr.shape[0]))
    return factors


@dataclass
class CoarseOperator:
    S: np.ndarray | sp.csr_matrix
    solver: object
    dense: bool

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.S.shape[0] == 0:
            return np.zeros(0)
        if self.dense:
            return la.cho_solve(self.solver, b)
        return self.solver.solve(b)


DENSE_COARSE_LIMIT = 1500


def build_coarse(blocks: SaddleBlocks, factors: list[SubdomainFactor]) -> CoarseOperator:
    """Assemble ``S_P`` column by column from local solves and factor it."""
    nP = blocks.n_P
    rows, cols, vals = [], [], []
    for lb, sd, fac in zip(blocks.local, blocks.partition.subdomains, factors):
        if sd.n_P == 0:
            continue
        ArP = lb.ArP.toarray()
        X = fac.lu.solve(ArP)
        Sloc = -(ArP.T @ X)
        ii, jj = np.meshgrid(sd.primal_ids, sd.primal_ids, indexing="ij")
        rows.append(ii.ravel())
        cols.append(jj.ravel())
        vals.append(Sloc.ravel())
    if rows:
        S = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nP, nP)
        )
    else:
        S = sp.csr_matrix((nP, nP))
    S = (S + blocks.A_PP).tocsr()
    S = 0.5 * (S + S.T)

    if nP == 0:
        return CoarseOperator(S=S, solver=None, dense=True)
    if nP <= DENSE_COARSE_LIMIT:
        Sd = S.toarray()
        try:
            c = la.cho_factor(Sd)
        except la.LinAlgError as exc:
            raise CoarseIndefiniteError("coarse matrix S_P is not positive definite") from exc
        return CoarseOperator(S=Sd, solver=c, dense=True)
    # symmetric-mode LU without pivoting: the pivots are the LDL^T diagonal
    lu = spla.splu(
        S.tocsc(), permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0, options={"SymmetricMode": True}
    )
    if not np.array_equal(lu.perm_r, lu.perm_c) or np.any(lu.U.diagonal() <= 0):
        raise CoarseIndefiniteError("coarse matrix S_P is not positive definite")
    return CoarseOperator(S=S, solver=lu, dense=False)


@dataclass
class ReducedOperator:
    """``G``, ``g``, the lumped preconditioner and back substitution."""

    blocks: SaddleBlocks
    jumps: JumpOperators
    factors: list[SubdomainFactor]
    coarse: CoarseOperator
    h: float
    null: NullBasis
    pressure_weight: float = 0.0  # 0 means 1 / h^2
    threads: int = 1
    counters: dict = field(default_factory=lambda: {"sweeps": 0, "coarse": 0, "G": 0})

    def __post_init__(self):
        self.BC = constraint_matrix(self.blocks, self.jumps)
        self.BCT = self.BC.T.tocsr()
        if self.pressure_weight <= 0:
            self.pressure_weight = 1.0 / self.h**2
        self._pool = ThreadPoolExecutor(self.threads) if self.threads > 1 else None

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    @property
    def n_G(self) -> int:
        return self.blocks.n_G

    @property
    def dim(self) -> int:
        return self.blocks.n_G + self.jumps.lambda_dim

    # -- Atilde^{-1} ------------------------------------------------------
    def _sweep(self, fr: np.ndarray) -> np.ndarray:
        self.counters["sweeps"] += 1
        out = np.empty_like(fr)
        offs = self.blocks.r_offsets

        def one(k):
            a, b = offs[k], offs[k + 1]
            out[a:b] = self.factors[k].solve(fr[a:b])

        if self._pool is None:
            for k in range(len(self.factors)):
                one(k)
        else:
            list(self._pool.map(one, range(len(self.factors))))
        return out

    def apply_Atilde_inverse(self, f: np.ndarray) -> np.ndarray:
        nr = self.blocks.n_r
        if f.shape != (nr + self.blocks.n_P,):
            raise ValueError(f"expected vector of length {nr + self.blocks.n_P}, got {f.shape}")
        fr, fP = f[:nr], f[nr:]
        y = self._sweep(fr)
        rhs = fP - self.blocks.A_rP.T @ y
        self.counters["coarse"] += 1
        uP = self.coarse.solve(rhs)
        ur = y - self._sweep(self.blocks.A_rP @ uP)
        return np.concatenate([ur, uP])

    def apply_Atilde(self, w: np.ndarray) -> np.ndarray:
        nr = self.blocks.n_r
        wr, wP = w[:nr], w[nr:]
        out_r = np.empty(nr)
        offs = self.blocks.r_offsets
        for k, lb in enumerate(self.blocks.local):
            out_r[offs[k] : offs[k + 1]] = lb.Arr @ wr[offs[k] : offs[k + 1]]
        out_r += self.blocks.A_rP @ wP
        out_P = self.blocks.A_rP.T @ wr + self.blocks.A_PP @ wP
        return np.concatenate([out_r, out_P])

    # -- interface operator -------------------------------------------------
    def apply_G(self, x: np.ndarray) -> np.ndarray:
        self.counters["G"] += 1
        return self.BC @ self.apply_Atilde_inverse(self.BCT @ x)

    def rhs_primal(self) -> np.ndarray:
        return np.concatenate([self.blocks.f_r, self.blocks.f_P])

    def form_reduced_rhs(self) -> np.ndarray:
        return self.BC @ self.apply_Atilde_inverse(self.rhs_primal())

    def apply_preconditioner(self, y: np.ndarray) -> np.ndarray:
        nG = self.n_G
        out = np.empty_like(y)
        out[:nG] = self.pressure_weight * y[:nG]
        BD = self.jumps.BD
        out[nG:] = BD @ (self.blocks.K_DD @ (BD.T @ y[nG:]))
        return out

    def project_out_null(self, x: np.ndarray) -> np.ndarray:
        nu = self.null.reduced
        return x - (x @ nu) / (nu @ nu) * nu

    def back_substitute(self, x: np.ndarray) -> np.ndarray:
        """Eliminated unknowns ``(r, u_P)`` for interface solution ``x``."""
        return self.apply_Atilde_inverse(self.rhs_primal() - self.BCT @ x)

    # -- dense views for small problems ------------------------------------
    def dense_G(self) -> np.ndarray:
        n = self.dim
        return np.column_stack([self.apply_G(e) for e in np.eye(n)])

    def dense_preconditioner(self) -> np.ndarray:
        n = self.dim
        return np.column_stack([self.apply_preconditioner(e) for e in np.eye(n)])


def estimate_h(A: sp.spmatrix, B: sp.spmatrix) -> float:
    """Rough mesh size from the ratio of typical entries of B and A.

    Stiffness entries are O(1) and divergence entries O(h) in two dimensions.
    Only a diagnostic; the solver takes h from the mesh.
    """
    a = np.median(np.abs(A.data[A.data != 0]))
    b = np.median(np.abs(B.data[B.data != 0]))
    return float(b / a)


def pressure_block_weight(pressure_kind: str, h: float) -> float:
    """Diagonal weight of the pressure block of the lumped preconditioner.

    ``h`` is the velocity mesh size.  Continuous pressures use ``1 / h^2``;
    piecewise constant pressures use the inverse area ``1 / (2 h^2)`` of a
    pressure cell.
    """
    if pressure_kind == CONTINUOUS:
        return 1.0 / h**2
    if pressure_kind == DISCONTINUOUS:
        return 1.0 / (2.0 * h**2)
    raise ValueError(f"unknown pressure kind {pressure_kind!r}")


def build_reduced_operator(
    blocks: SaddleBlocks,
    jumps: JumpOperators,
    h: float,
    threads: int = 1,
    pressure_weight: float | None = None,
) -> ReducedOperator:
    """Factor the local and coarse problems.

    ``h`` is the velocity mesh size.  ``pressure_weight`` defaults to
    :func:`pressure_block_weight` for the pressure kind of ``blocks``.
    """
    if pressure_weight is None:
        pressure_weight = pressure_block_weight(blocks.partition.pressure_kind, h)
    factors = factor_subdomains(blocks)
    coarse = build_coarse(blocks, factors)
    null = build_null_basis(blocks, jumps)
    return ReducedOperator(
        blocks=blocks,
        jumps=jumps,
        factors=factors,
        coarse=coarse,
        h=h,
        null=null,
        pressure_weight=pressure_weight,
        threads=threads,
    )

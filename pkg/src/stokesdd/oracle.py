"""Brute-force reference computations for small instances.

Nothing here is used by the solver itself; the tests compare the
decomposed pipeline against these direct computations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import MixedSystem
from .reduced import ReducedOperator

MONOLITHIC_LIMIT = 20_000
SPECTRUM_LIMIT = 3_000
INF_SUP_LIMIT = 3_000


class OracleSizeError(ValueError):
    """Instance too large for a brute-force oracle."""


@dataclass
class DenseSolution:
    u: np.ndarray  # free velocity dofs
    p: np.ndarray  # zero mean in the Z inner product
    residual: float


def monolithic_matrix(system: MixedSystem) -> sp.csr_matrix:
    """``[[A, B^T, 0], [B, 0, Z 1], [0, (Z 1)^T, 0]]``; the last row fixes the pressure mean."""
    if not system.eliminated:
        raise ValueError("eliminate Dirichlet dofs first")
    z = system.Z @ np.ones(system.num_pressure)
    zc = sp.csr_matrix(z[:, None])
    return sp.bmat(
        [[system.A, system.B.T, None], [system.B, None, zc], [None, zc.T, None]], format="csr"
    )


def dense_solve_monolithic(system: MixedSystem) -> DenseSolution:
    """Direct solve of the global saddle point system with zero-mean pressure.

    Small systems are solved densely; above ``SPECTRUM_LIMIT`` unknowns a sparse
    LU is used instead, which is still a direct method.
    """
    nu, npres = system.num_free, system.num_pressure
    if nu + npres > MONOLITHIC_LIMIT:
        raise OracleSizeError(f"{nu + npres} unknowns exceed the oracle limit {MONOLITHIC_LIMIT}")
    K = monolithic_matrix(system)
    rhs = np.concatenate([system.f, np.zeros(npres + 1)])
    if K.shape[0] <= SPECTRUM_LIMIT:
        sol = la.solve(K.toarray(), rhs, assume_a="sym")
    else:
        sol = spla.splu(K.tocsc()).solve(rhs)
    res = np.linalg.norm(K @ sol - rhs) / max(np.linalg.norm(rhs), 1e-300)
    return DenseSolution(u=sol[:nu], p=sol[nu : nu + npres], residual=float(res))


def dense_spectrum_reduced(op: ReducedOperator) -> np.ndarray:
    """All eigenvalues of ``G`` assembled column by column, ascending."""
    if op.dim > SPECTRUM_LIMIT:
        raise OracleSizeError(f"dim X = {op.dim} exceeds the oracle limit {SPECTRUM_LIMIT}")
    G = op.dense_G()
    return np.linalg.eigvalsh(0.5 * (G + G.T))


def preconditioned_spectrum(op: ReducedOperator) -> np.ndarray:
    """Eigenvalues of ``M^{-1} G`` on ``Range(G)`` (the zero eigenvalue dropped).

    With ``M^{-1} = L L^T`` these are the eigenvalues of ``L^T G L``.
    """
    if op.dim > SPECTRUM_LIMIT:
        raise OracleSizeError(f"dim X = {op.dim} exceeds the oracle limit {SPECTRUM_LIMIT}")
    G = op.dense_G()
    Minv = op.dense_preconditioner()
    L = np.linalg.cholesky(0.5 * (Minv + Minv.T))
    ev = np.linalg.eigvalsh(L.T @ (0.5 * (G + G.T)) @ L)
    return ev[1:]


def zero_mean_basis(Z: sp.spmatrix) -> np.ndarray:
    """Orthonormal basis of ``{q : 1^T Z q = 0}``."""
    z = Z @ np.ones(Z.shape[0])
    return la.null_space(z[None, :])


def estimate_inf_sup(system: MixedSystem) -> float:
    """``beta = sqrt(mu_min)`` for ``B A^{-1} B^T q = mu Z q`` on zero-mean ``q``."""
    if system.num_pressure > INF_SUP_LIMIT:
        raise OracleSizeError(f"{system.num_pressure} pressures exceed the oracle limit {INF_SUP_LIMIT}")
    lu = spla.splu(system.A.tocsc())
    BT = system.B.T.toarray()
    S = system.B @ lu.solve(BT)
    Q = zero_mean_basis(system.Z)
    Zd = system.Z.toarray()
    mu = la.eigh(Q.T @ S @ Q, Q.T @ Zd @ Q, eigvals_only=True)
    return float(np.sqrt(max(mu[0], 0.0)))


def align_pressure_mean(p: np.ndarray, ref: np.ndarray, Z: sp.spmatrix) -> np.ndarray:
    """Shift ``p`` by a constant so its Z-weighted mean equals that of ``ref``."""
    z = Z @ np.ones(Z.shape[0])
    return p + (z @ (ref - p)) / z.sum()

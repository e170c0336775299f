"""Preconditioned conjugate gradients with Ritz value estimates.

The CG step lengths ``alpha_k`` and ``beta_k`` define the Lanczos tridiagonal
matrix of the preconditioned operator; its extreme eigenvalues estimate the
spectrum of ``M^{-1} G`` on the Krylov space.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal


class CGBreakdown(RuntimeError):
    """Nonpositive curvature or preconditioned residual norm."""


@dataclass
class CGReport:
    x: np.ndarray
    iterations: int
    converged: bool
    residual_history: list[float]
    lanczos_alphas: list[float] = field(default_factory=list)
    lanczos_betas: list[float] = field(default_factory=list)
    energy_history: list[float] = field(default_factory=list)  # <r, M^{-1} r>
    ritz_min: float = float("nan")
    ritz_max: float = float("nan")

    @property
    def relative_residual(self) -> float:
        if not self.residual_history or self.residual_history[0] == 0:
            return 0.0
        return self.residual_history[-1] / self.residual_history[0]

    def write_csv(self, path: str | Path) -> None:
        """Rows ``iteration, residual, ritz_min_so_far, ritz_max_so_far``."""
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual", "ritz_min", "ritz_max"])
            for k, res in enumerate(self.residual_history):
                if k == 0:
                    lo = hi = float("nan")
                else:
                    lo, hi = lanczos_extremes(self.lanczos_alphas[:k], self.lanczos_betas[: k - 1])
                w.writerow([k, repr(res), repr(lo), repr(hi)])


def lanczos_matrix(alphas, betas) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the tridiagonal matrix from CG scalars."""
    a = np.asarray(alphas, dtype=float)
    b = np.asarray(betas, dtype=float)[: max(a.size - 1, 0)]
    d = 1.0 / a
    d[1:] += b / a[:-1]
    e = np.sqrt(b) / a[:-1]
    return d, e


def lanczos_extremes(alphas, betas) -> tuple[float, float]:
    if len(alphas) == 0:
        return float("nan"), float("nan")
    d, e = lanczos_matrix(alphas, betas)
    w = eigvalsh_tridiagonal(d, e)
    return float(w[0]), float(w[-1])


def ritz_extremes(report: CGReport) -> tuple[float, float]:
    if report.iterations < 1:
        raise ValueError("no completed CG iteration")
    return lanczos_extremes(report.lanczos_alphas, report.lanczos_betas)


def pcg(
    apply_A: Callable[[np.ndarray], np.ndarray],
    apply_M: Callable[[np.ndarray], np.ndarray] | None,
    b: np.ndarray,
    tol: float = 1e-6,
    maxit: int = 500,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
    project_every: int = 50,
) -> CGReport:
    """Solve ``A x = b`` from a zero initial guess.

    Stops when ``||r_k||_2 <= tol * ||r_0||_2``.  ``project`` (if given) is
    applied to the initial residual, to the residual every ``project_every``
    iterations, and to the returned solution; it removes drift into the null
    space of a singular ``A``.
    """
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    apply_M = apply_M or (lambda v: v.copy())
    x = np.zeros_like(b, dtype=float)
    r = np.array(b, dtype=float)
    if project is not None:
        r = project(r)
    r0 = float(np.linalg.norm(r))
    hist = [r0]
    if r0 == 0.0:
        return CGReport(x=x, iterations=0, converged=True, residual_history=hist)

    z = apply_M(r)
    rz = float(r @ z)
    if rz <= 0:
        raise CGBreakdown(f"<r, M r> = {rz:.3e} <= 0 at start")
    energy = [rz]
    p = z.copy()
    alphas, betas = [], []
    converged = False
    k = 0
    while k < maxit:
        q = apply_A(p)
        pq = float(p @ q)
        if pq <= 0:
            raise CGBreakdown(f"<p, A p> = {pq:.3e} <= 0 at iteration {k + 1}")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        k += 1
        if project is not None and k % project_every == 0:
            r = project(r)
        alphas.append(alpha)
        res = float(np.linalg.norm(r))
        hist.append(res)
        if res <= tol * r0:
            converged = True
            break
        z = apply_M(r)
        rz_new = float(r @ z)
        if rz_new <= 0:
            raise CGBreakdown(f"<r, M r> = {rz_new:.3e} <= 0 at iteration {k}")
        energy.append(rz_new)
        beta = rz_new / rz
        betas.append(beta)
        rz = rz_new
        p = z + beta * p

    if project is not None:
        x = project(x)
    lo, hi = lanczos_extremes(alphas, betas)
    return CGReport(
        x=x,
        iterations=k,
        converged=converged,
        residual_history=hist,
        lanczos_alphas=alphas,
        lanczos_betas=betas,
        energy_history=energy,
        ritz_min=lo,
        ritz_max=hi,
    )

import numpy as np
import pytest
import scipy.sparse as sp

from stokesdd import oracle
from stokesdd.assembly import assemble_system, eliminate_dirichlet
from stokesdd.mesh import build_mesh_pair
from stokesdd.oracle import (
    OracleSizeError,
    align_pressure_mean,
    dense_solve_monolithic,
    dense_spectrum_reduced,
    estimate_inf_sup,
    monolithic_matrix,
    preconditioned_spectrum,
    zero_mean_basis,
)
from stokesdd.pcg import pcg

from conftest import VARIANTS, pipeline

# extremes of the preconditioned spectrum on Range(G), n = 8 pressure cells, 2x2 subdomains
EXACT_SPECTRUM = {
    ("corners", "continuous"): (0.354089, 3.393873),
    ("corners+edges", "continuous"): (0.355032, 2.767872),
    ("corners", "discontinuous"): (0.387213, 2.877639),
    ("corners+edges", "discontinuous"): (0.400726, 2.357174),
}
INF_SUP = {8: 0.31491, 16: 0.31459}


def _system(n, pressure="continuous", load=True):
    from stokesdd import manufactured

    return eliminate_dirichlet(assemble_system(build_mesh_pair(n), manufactured.forcing if load else None, pressure))


@pytest.mark.parametrize("pressure", ["continuous", "discontinuous"])
def test_monolithic_solution_is_consistent(pressure):
    s = _system(8, pressure)
    d = dense_solve_monolithic(s)
    assert d.residual < 1e-12
    assert np.linalg.norm(s.B @ d.u) <= 1e-10 * np.linalg.norm(s.f)
    assert abs(np.ones(s.num_pressure) @ (s.Z @ d.p)) < 1e-12
    r = s.A @ d.u + s.B.T @ d.p - s.f
    assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(s.f)


def test_sparse_path_agrees_with_dense(monkeypatch):
    s = _system(8)
    a = dense_solve_monolithic(s)
    monkeypatch.setattr(oracle, "SPECTRUM_LIMIT", 10)
    b = dense_solve_monolithic(s)
    assert np.allclose(a.u, b.u, atol=1e-12) and np.allclose(a.p, b.p, atol=1e-10)


def test_zero_load_gives_zero_solution():
    d = dense_solve_monolithic(_system(4, load=False))
    assert np.all(np.abs(d.u) < 1e-15) and np.all(np.abs(d.p) < 1e-15)


def test_monolithic_matrix_requires_elimination():
    with pytest.raises(ValueError):
        monolithic_matrix(assemble_system(build_mesh_pair(2)))


def test_size_guards(monkeypatch):
    monkeypatch.setattr(oracle, "MONOLITHIC_LIMIT", 10)
    monkeypatch.setattr(oracle, "INF_SUP_LIMIT", 10)
    s = _system(4)
    with pytest.raises(OracleSizeError):
        dense_solve_monolithic(s)
    with pytest.raises(OracleSizeError):
        estimate_inf_sup(s)
    monkeypatch.setattr(oracle, "SPECTRUM_LIMIT", 10)
    op = pipeline(4, 2).op
    with pytest.raises(OracleSizeError):
        dense_spectrum_reduced(op)
    with pytest.raises(OracleSizeError):
        preconditioned_spectrum(op)


@pytest.mark.parametrize("variant", VARIANTS, ids=lambda v: f"{v[0]}-{v[1]}")
def test_ritz_estimates_match_exact_spectrum(variant):
    op = pipeline(8, 2, *variant).op
    pe = preconditioned_spectrum(op)
    lo, hi = EXACT_SPECTRUM[variant]
    assert pe[0] == pytest.approx(lo, rel=1e-5) and pe[-1] == pytest.approx(hi, rel=1e-5)
    assert np.all(pe > 0)
    rep = pcg(op.apply_G, op.apply_preconditioner, op.form_reduced_rhs(), 1e-6, 500, op.project_out_null)
    assert rep.ritz_min == pytest.approx(pe[0], rel=0.05)
    assert rep.ritz_max == pytest.approx(pe[-1], rel=0.05)
    assert pe[0] * (1 - 1e-8) <= rep.ritz_min and rep.ritz_max <= pe[-1] * (1 + 1e-8)


def test_inf_sup_constant_is_mesh_independent():
    b8, b16 = (estimate_inf_sup(_system(n)) for n in (8, 16))
    assert b8 == pytest.approx(INF_SUP[8], abs=1e-5)
    assert b16 == pytest.approx(INF_SUP[16], abs=1e-5)
    assert abs(b8 - b16) / b8 < 0.2


def test_zero_mean_basis_and_alignment(rng):
    Z = sp.csr_matrix(np.diag([1.0, 2.0, 3.0]))
    Q = zero_mean_basis(Z)
    assert Q.shape == (3, 2)
    assert np.allclose(Q.T @ Q, np.eye(2))
    assert np.allclose(np.array([1.0, 2.0, 3.0]) @ Q, 0)
    ref = rng.standard_normal(3)
    p = align_pressure_mean(ref + 7.5, ref, Z)
    assert np.allclose(p, ref)

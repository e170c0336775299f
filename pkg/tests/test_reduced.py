from types import SimpleNamespace

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from stokesdd.partition import assemble_coupled, build_jump_operators, build_saddle_blocks
from stokesdd.reduced import (
    SingularSubdomainError,
    build_reduced_operator,
    estimate_h,
    factor_subdomains,
    pressure_block_weight,
)

from conftest import pipeline


def test_factor_round_trip(rng):
    p = pipeline(4, 2)
    assert len(p.op.factors) == 4
    for f, lb, sd in zip(p.op.factors, p.blocks.local, p.partition.subdomains):
        assert f.dim == sd.n_I + sd.n_pI + sd.n_D
        b = rng.standard_normal(f.dim)
        x = f.solve(b)
        assert np.linalg.norm(lb.Arr @ x - b) <= 1e-10 * np.linalg.norm(b)
        assert np.allclose(x, np.linalg.solve(lb.Arr.toarray(), b), rtol=0, atol=1e-9 * np.abs(x).max())


def test_singular_subdomain_is_reported():
    fake = SimpleNamespace(
        local=[SimpleNamespace(Arr=sp.csc_matrix(np.array([[1.0, 1.0], [1.0, 1.0]])))],
        partition=SimpleNamespace(subdomains=[SimpleNamespace(sid=7)]),
    )
    with pytest.raises(SingularSubdomainError, match="subdomain 7"):
        factor_subdomains(fake)


def test_coarse_matrix(variant):
    p = pipeline(8, 2, *variant)
    S = np.asarray(p.op.coarse.S.todense() if sp.issparse(p.op.coarse.S) else p.op.coarse.S)
    if variant[0] == "corners":
        assert S.shape == (2, 2)
    assert np.abs(S - S.T).max() <= 1e-12 * np.abs(S).max()
    assert np.linalg.eigvalsh(S).min() > 0
    Arr = p.blocks.assemble_Arr().toarray()
    ArP = p.blocks.A_rP.toarray()
    dense = p.blocks.A_PP.toarray() - ArP.T @ np.linalg.solve(Arr, ArP)
    assert np.abs(S - dense).max() <= 1e-9 * np.abs(dense).max()


def test_atilde_inverse_contract(variant, rng):
    p = pipeline(8, 2, *variant)
    At = p.blocks.assemble_atilde()
    f = rng.standard_normal(At.shape[0])
    x = p.op.apply_Atilde_inverse(f)
    assert np.linalg.norm(At @ x - f) <= 1e-9 * np.linalg.norm(f)
    w = rng.standard_normal(At.shape[0])
    assert np.allclose(p.op.apply_Atilde_inverse(p.op.apply_Atilde(w)), w, atol=1e-9 * np.abs(w).max())
    with pytest.raises(ValueError):
        p.op.apply_Atilde_inverse(f[:-1])


def test_one_apply_costs_two_sweeps_and_one_coarse_solve(rng):
    p = pipeline(8, 2)
    before = dict(p.op.counters)
    p.op.apply_G(rng.standard_normal(p.op.dim))
    assert p.op.counters["sweeps"] - before["sweeps"] == 2
    assert p.op.counters["coarse"] - before["coarse"] == 1


def test_apply_G_matches_dense_formula(variant, rng):
    p = pipeline(4, 2, *variant)
    At = p.blocks.assemble_atilde().toarray()
    BC = p.op.BC.toarray()
    G = BC @ np.linalg.solve(At, BC.T)
    x = rng.standard_normal(p.op.dim)
    assert np.allclose(p.op.apply_G(x), G @ x, atol=1e-9 * np.abs(G).max() * np.abs(x).max())


@given(seed=st.integers(0, 2**32 - 1))
def test_G_symmetric_and_semidefinite(seed):
    r = np.random.default_rng(seed)
    for variant in [("corners", "continuous"), ("corners+edges", "discontinuous")]:
        op = pipeline(8, 2, *variant).op
        x, y = r.standard_normal((2, op.dim))
        gx, gy = op.apply_G(x), op.apply_G(y)
        assert abs(gx @ y - x @ gy) <= 1e-10 * np.linalg.norm(gx) * np.linalg.norm(y)
        assert gx @ x >= -1e-10 * (x @ x)


def test_null_vector_and_range_condition(variant):
    op = pipeline(8, 2, *variant).op
    nu = op.null.reduced
    assert np.linalg.norm(op.apply_G(nu)) <= 1e-10 * np.linalg.norm(nu) * np.abs(op.dense_G()).max()
    g = op.form_reduced_rhs()
    assert abs(g @ nu) <= 1e-10 * np.linalg.norm(g) * np.linalg.norm(nu)


def test_zero_load_gives_zero_rhs():
    op = pipeline(4, 2, load=False).op
    assert np.all(op.form_reduced_rhs() == 0)


def test_exactly_one_zero_eigenvalue(variant):
    G = pipeline(4, 2, *variant).op.dense_G()
    ev = np.linalg.eigvalsh(0.5 * (G + G.T))
    small = np.abs(ev) <= 1e-9 * ev.max()
    assert small.sum() == 1
    assert np.all(ev[~small] > 0)


def test_preconditioner_blocks(variant, rng):
    p = pipeline(8, 2, *variant)
    op = p.op
    h = p.mesh_pair.velocity_mesh.h
    nG = op.n_G
    y = np.zeros(op.dim)
    y[:nG] = rng.standard_normal(nG)
    out = op.apply_preconditioner(y)
    assert np.allclose(out[:nG], y[:nG] * pressure_block_weight(variant[1], h))
    assert np.all(out[nG:] == 0)
    assert pressure_block_weight("continuous", h) == pytest.approx(1 / h**2)
    for _ in range(100):
        a, b = rng.standard_normal((2, op.dim))
        ma, mb = op.apply_preconditioner(a), op.apply_preconditioner(b)
        assert abs(ma @ b - a @ mb) <= 1e-12 * np.linalg.norm(ma) * np.linalg.norm(b)
        assert ma @ a > 0


def test_multiplier_block_is_lumped_stiffness(rng):
    p = pipeline(8, 2)
    op = p.op
    y = rng.standard_normal(op.dim)
    y[: op.n_G] = 0
    BD = p.jumps.BD.toarray()
    KDD = p.blocks.K_DD.toarray()
    assert np.allclose(op.apply_preconditioner(y)[op.n_G :], BD @ KDD @ BD.T @ y[op.n_G :])


def test_projection(rng):
    op = pipeline(8, 2).op
    nu = op.null.reduced
    assert np.linalg.norm(op.project_out_null(nu)) < 1e-14 * np.linalg.norm(nu)
    x = rng.standard_normal(op.dim)
    px = op.project_out_null(x)
    assert np.abs(op.project_out_null(px) - px).max() < 1e-14 * np.abs(x).max()
    assert np.linalg.norm(op.apply_G(px) - op.apply_G(x)) <= 1e-10 * np.linalg.norm(op.apply_G(x))


def test_back_substitution_satisfies_coupled_system(variant):
    from stokesdd.pcg import pcg

    p = pipeline(8, 2, *variant)
    op = p.op
    rep = pcg(op.apply_G, op.apply_preconditioner, op.form_reduced_rhs(), 1e-6, 500, op.project_out_null)
    w = op.back_substitute(rep.x)
    full = np.concatenate([w, rep.x])
    K = assemble_coupled(p.blocks, p.jumps)
    rhs = np.concatenate([op.rhs_primal(), np.zeros(op.dim)])
    assert np.linalg.norm(K @ full - rhs) <= 1e-5 * np.linalg.norm(rhs)
    u_dual = w[: p.blocks.n_r][p.blocks.dual_in_r]
    assert np.linalg.norm(p.jumps.B @ u_dual) <= 1e-5 * np.linalg.norm(w)


def _extension_mass(p):
    """``E^T Z E`` for the extension by zero of interface pressures."""
    part, Z = p.partition, p.system.Z
    nG = p.op.n_G
    if part.pressure_kind == "continuous":
        E = sp.csr_matrix((np.ones(nG), (part.gamma_raw, np.arange(nG))), shape=(Z.shape[0], nG))
    else:
        sub = p.layout.subdomain_of_triangle()
        E = sp.csr_matrix((np.ones(sub.size), (np.arange(sub.size), sub)), shape=(Z.shape[0], nG))
    return (E.T @ Z @ E).toarray()


@pytest.mark.parametrize("pressure", ["continuous", "discontinuous"])
def test_interface_pressure_block_bounded_by_mass(pressure, rng):
    p = pipeline(8, 2, "corners", pressure)
    nG = p.op.n_G
    Gpp = p.op.dense_G()[:nG, :nG]
    ZE = _extension_mass(p)
    for _ in range(100):
        q = rng.standard_normal(nG)
        q -= q.mean()
        assert q @ Gpp @ q <= (1 + 1e-8) * (q @ ZE @ q)


@pytest.mark.parametrize("pressure", ["continuous", "discontinuous"])
def test_interface_pressure_block_scales_with_h_squared(pressure):
    ext = []
    for n in (8, 16):
        op = pipeline(n, 2, "corners", pressure).op
        nG = op.n_G
        Q = np.linalg.svd(np.ones((1, nG)))[2][1:].T
        ev = np.linalg.eigvalsh(Q.T @ op.dense_G()[:nG, :nG] @ Q)
        ext.append((ev.min(), ev.max()))
    for k in (0, 1):
        assert 0.2 <= ext[1][k] / ext[0][k] <= 0.3


def test_threads_give_identical_results(rng):
    p = pipeline(8, 2)
    op2 = build_reduced_operator(p.blocks, p.jumps, p.op.h, threads=2)
    x = rng.standard_normal(p.op.dim)
    assert np.allclose(op2.apply_G(x), p.op.apply_G(x), rtol=0, atol=1e-14 * np.abs(p.op.apply_G(x)).max())
    op2.close()


def test_estimate_h_tracks_mesh_size():
    a = pipeline(8, 2).system
    b = pipeline(16, 2).system
    assert estimate_h(a.A, a.B) / estimate_h(b.A, b.B) == pytest.approx(2.0, rel=1e-12)


def test_rebuild_is_deterministic():
    p = pipeline(8, 2)
    blocks = build_saddle_blocks(p.system, p.partition)
    op = build_reduced_operator(blocks, build_jump_operators(p.partition), p.op.h)
    assert np.array_equal(op.form_reduced_rhs(), p.op.form_reduced_rhs())

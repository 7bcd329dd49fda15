import functools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from heom import bath as bm
from heom import solvers
from heom.hierarchy import HierarchySpace, Parity, enumerate_space
from heom.liouvillian import SystemSpec, build_heomls, vectorize
from heom.oracles import dephasing_error, gibbs_error, toy_models
from heom.solvers import (AdosVector, MultiplicityError, SolverError, StiffnessError,
                          evolve_expm, evolve_ode, shifted_solve, sparse_expm, steadystate, trace_row)
from heom.systems import fermion_level

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


@pytest.fixture(scope="module")
def fermion_toy():
    H, d = fermion_level(0.4, spinful=False)
    baths = [bm.lorentzian_pade_fermion(d, 1.0, 3.0, 0.3, 0.7, 3, bath_id="L"),
             bm.lorentzian_pade_fermion(d, 0.5, 3.0, -0.3, 0.7, 3, bath_id="R")]
    space = HierarchySpace.from_baths(baths, 0, 2)
    return build_heomls(H, baths, space), baths, d


@pytest.fixture(scope="module")
def hybrid_toy():
    _, H, baths, m_max, n_max, I_th = list(toy_models())[1]
    return build_heomls(H, baths, HierarchySpace.from_baths(baths, m_max, n_max, I_th))


def rho_mixed():
    return np.array([[0.3, 0.1 - 0.2j], [0.1 + 0.2j, 0.7]])


def test_zero_generator_is_constant():
    M = build_heomls(np.zeros((2, 2)), [], enumerate_space(0, 0, 0, 0))
    states, _ = evolve_ode(M, AdosVector.from_density(rho_mixed(), M.space), [0, 1, 2])
    for s in states:
        np.testing.assert_array_equal(s.root, rho_mixed())


def test_unitary_evolution():
    H = 0.7 * SZ + 0.4 * SX
    M = build_heomls(H, [], enumerate_space(0, 0, 0, 0))
    ts = np.linspace(0, 6, 13)
    states, report = evolve_ode(M, AdosVector.from_density(rho_mixed(), M.space), ts)
    w, U = np.linalg.eigh(H)
    for t, s in zip(ts, states):
        Ut = U @ np.diag(np.exp(-1j * w * t)) @ U.conj().T
        assert np.abs(s.root - Ut @ rho_mixed() @ Ut.conj().T).max() < 1e-8
    assert report.steps > 0


def test_pure_dephasing_oracle():
    assert dephasing_error() < 1e-3


def test_time_grid_validation(fermion_toy):
    M, _, _ = fermion_toy
    x0 = AdosVector.from_density(np.diag([1.0, 0.0]), M.space)
    with pytest.raises(ValueError):
        evolve_ode(M, x0, [0.0, 1.0, 0.5])
    with pytest.raises(ValueError):
        evolve_expm(M, x0, [0.0, 1.0, 3.0])


def test_stiffness_error(monkeypatch, fermion_toy):
    M, _, _ = fermion_toy

    class Failed:
        status, message, nfev = -1, "Required step size is less than spacing between numbers.", 7
        t = np.array([0.3])

    monkeypatch.setattr(solvers, "solve_ivp", lambda *a, **k: Failed())
    with pytest.raises(StiffnessError, match="evolve_expm"):
        evolve_ode(M, AdosVector.from_density(np.diag([1.0, 0.0]), M.space), [0.0, 1.0])


def test_expm_identity_and_nilpotent():
    Z = sp.csr_matrix((5, 5), dtype=complex)
    assert (sparse_expm(Z) != sp.identity(5)).nnz == 0
    N = sp.csr_matrix(np.triu(np.ones((4, 4)), 3) * 2.5)  # N @ N == 0
    np.testing.assert_array_equal(sparse_expm(N).toarray(), np.eye(4) + N.toarray())


def test_expm_matches_scipy():
    from scipy.linalg import expm

    A = sp.random(30, 30, density=0.1, random_state=4) * 3 + 1j * sp.random(30, 30, density=0.1, random_state=5)
    E = sparse_expm(A)
    E = E.toarray() if sp.issparse(E) else E
    np.testing.assert_allclose(E, expm(A.toarray()), atol=1e-11)


def test_expm_rejects_time_dependent():
    M = build_heomls(SystemSpec(SZ, [(SX, np.cos)]), [], enumerate_space(0, 0, 0, 0))
    with pytest.raises(ValueError):
        evolve_expm(M, AdosVector.from_density(rho_mixed(), M.space), [0, 1])


@pytest.mark.parametrize("toy", ["fermion_toy", "hybrid_toy"])
def test_expm_agrees_with_ode_and_conserves_trace(toy, request):
    M = request.getfixturevalue(toy)
    M = M[0] if isinstance(M, tuple) else M
    x0 = AdosVector.from_density(np.diag([0.2, 0.8]).astype(complex), M.space)
    ts = np.linspace(0, 4, 21)
    ode, _ = evolve_ode(M, x0, ts)
    prop, report = evolve_expm(M, x0, ts)
    for a, b in zip(ode, prop):
        assert np.abs(a.root - b.root).max() < 1e-6
        assert abs(np.trace(a.root) - 1) < 1e-8
        assert abs(np.trace(b.root) - 1) < 1e-8
        assert np.abs(a.root - a.root.conj().T).max() < 1e-8
    assert report.method == "expm"


def test_gibbs_steady_state():
    err, residual = gibbs_error()
    assert err < 1e-8
    assert residual < 1e-10


def test_steadystate_vs_long_evolution(fermion_toy):
    M, _, _ = fermion_toy
    ss, report = steadystate(M)
    assert report.residual < 1e-10
    assert np.trace(ss.root) == pytest.approx(1.0, abs=1e-14)
    late, _ = evolve_ode(M, AdosVector.from_density(np.diag([1.0, 0.0]), M.space), [0, 60])
    assert np.abs(late[-1].root - ss.root).max() < 1e-6


def test_steadystate_gmres_agrees(fermion_toy):
    M, _, _ = fermion_toy
    direct, _ = steadystate(M)
    it, report = steadystate(M, method="gmres")
    assert report.method == "gmres" and report.residual < 1e-10
    assert np.abs(direct.data - it.data).max() < 1e-9


def test_steadystate_degenerate():
    M = build_heomls(np.zeros((2, 2)), [], enumerate_space(0, 0, 0, 0))
    with pytest.raises(MultiplicityError):
        steadystate(M)


def test_steadystate_rejects_odd(fermion_toy):
    _, baths, _ = fermion_toy
    H, _ = fermion_level(0.4, spinful=False)
    odd = build_heomls(H, baths, HierarchySpace.from_baths(baths, 0, 1), Parity.ODD)
    with pytest.raises(ValueError):
        steadystate(odd)


def test_trace_row():
    row = trace_row(2, 8)
    assert row @ np.r_[vectorize(np.array([[1.0, 5.0], [7.0, 2.0]])), np.ones(4)] == 3.0


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("method", ["direct", "gmres"])
def test_shifted_solve_residual_and_inverse(fermion_toy, sign, method):
    M, _, _ = fermion_toy
    rng = np.random.default_rng(7)
    y = rng.normal(size=M.shape[0]) + 1j * rng.normal(size=M.shape[0])
    omega = 1.3
    b = M.data @ y + sign * 1j * omega * y
    x, report = shifted_solve(M, omega, sign, b, method=method)
    assert report.residual < 1e-10
    assert np.abs(x - y).max() < 1e-8 * np.abs(y).max()


def test_shifted_solve_errors(fermion_toy):
    M, _, _ = fermion_toy
    with pytest.raises(ValueError):
        shifted_solve(M, 1.0, 2, np.zeros(M.shape[0]))
    with pytest.raises(ValueError):
        shifted_solve(M, 1.0, 1, np.zeros(3))


@functools.lru_cache(maxsize=1)
def _small_generator():
    H, d = fermion_level(0.4, spinful=False)
    b0 = bm.lorentzian_pade_fermion(d, 1.0, 3.0, 0.3, 0.7, 2)
    return build_heomls(H, [b0], HierarchySpace.from_baths([b0], 0, 2))


# omega = 0 is excluded: the even generator has the steady state in its null space
@settings(max_examples=15, deadline=None)
@given(omega=st.floats(-20, 20).filter(lambda w: abs(w) > 1e-2),
       scale=st.floats(-5, 5).filter(lambda s: abs(s) > 1e-3))
def test_shifted_solve_linear(omega, scale):
    M = _small_generator()
    b = np.random.default_rng(0).normal(size=M.shape[0]) + 0j
    x1, _ = shifted_solve(M, omega, 1, b)
    x2, _ = shifted_solve(M, omega, 1, scale * b)
    assert np.abs(x2 - scale * x1).max() <= 1e-12 * max(1.0, np.abs(scale * x1).max())


def test_shifted_solve_singular_at_zero_frequency():
    M = _small_generator()
    with pytest.raises(SolverError):
        shifted_solve(M, 0.0, 1, np.ones(M.shape[0], dtype=complex))


def test_ados_vector_access(fermion_toy):
    M, _, _ = fermion_toy
    x = AdosVector.from_density(rho_mixed(), M.space)
    np.testing.assert_array_equal(x.root, rho_mixed())
    assert x.blocks().shape == (len(M.space), 4)
    np.testing.assert_array_equal(x.block(((), (0,))), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        AdosVector(np.zeros(3), M.space, 2)

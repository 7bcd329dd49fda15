import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heom import bath as bm
from heom.bath import BathError, Flavor, Part

D = np.array([[0, 1], [0, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def lead(**kw):
    p = dict(Gamma=1.0, W=10.0, mu=0.0, kT=0.5, N=7)
    p.update(kw)
    return bm.lorentzian_pade_fermion(D, **p)


def test_pole_term_rate_at_zero_bias():
    b = lead()
    first = b.exponents[0]
    assert first.nu == 1 and first.h == 1
    assert first.gamma == 10 + 0j


def test_pole_term_rate_carries_chemical_potential():
    b = lead(mu=2.0)
    plus = [e for e in b.exponents if e.nu == 1]
    minus = [e for e in b.exponents if e.nu == -1]
    assert plus[0].gamma == pytest.approx(10 - 2j)
    assert minus[0].gamma == pytest.approx(10 + 2j)
    for p, m in zip(plus[1:], minus[1:]):
        assert p.gamma.imag == pytest.approx(-2.0)
        assert m.gamma.imag == pytest.approx(2.0)


def test_fermion_count_and_ordering():
    b = lead(N=7)
    assert len(b) == 14
    assert [e.nu for e in b.exponents] == [1] * 7 + [-1] * 7
    rates = [e.gamma.real for e in b.exponents[1:7]]
    assert rates == sorted(rates)
    assert b.partner(0) == 7 and b.partner(9) == 2


def test_zero_coupling_gives_zero_coefficients():
    assert all(e.eta == 0 for e in lead(Gamma=0.0).exponents)
    bos = bm.drude_lorentz_pade_boson(SZ, 0.0, 0.2, 0.5, 5)
    assert all(e.xi == 0 for e in bos.exponents)


def test_boson_pole_term_split():
    b = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 5)
    re, im = b.exponents[:2]
    assert (re.part, im.part) == (Part.REAL, Part.IMAG)
    assert re.chi == im.chi == 0.2
    assert re.xi == pytest.approx(0.01 * 0.2 / np.tan(0.2))
    assert im.xi == pytest.approx(-0.01 * 0.2)
    assert all(e.part is Part.REAL and e.chi.imag == 0 for e in b.exponents[2:])
    assert len(b) == 6


def test_boson_combined_matches_split():
    taus = np.linspace(0, 20, 41)
    split = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 5)
    comb = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 5, combine=True)
    assert len(comb) == 5
    np.testing.assert_allclose(bm.correlation(split, taus), bm.correlation(comb, taus), atol=1e-15)


def test_single_term_uses_half_occupation():
    b = lead(N=1)
    assert len(b) == 2
    assert b.exponents[0].eta == pytest.approx(1.0 * 10 / 2 * 0.5)
    bos = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 1)
    assert len(bos) == 2
    mats = bm.matsubara_decomposition(Flavor.FERMIONIC, D, 1.0, 10.0, 0.0, 0.5, 1)
    assert len(mats) == 2


@pytest.mark.parametrize("kw", [dict(W=0.0), dict(kT=-1.0), dict(N=0), dict(N=2.5), dict(Gamma=-1.0)])
def test_parameter_errors(kw):
    with pytest.raises(BathError):
        lead(**kw)


def test_cot_singularity_rejected():
    with pytest.raises(BathError, match="cot"):
        bm.drude_lorentz_pade_boson(SZ, 0.01, 2 * np.pi, 1.0, 3)


def test_bosonic_operator_must_be_hermitian():
    with pytest.raises(BathError, match="Hermitian"):
        bm.drude_lorentz_pade_boson(D, 0.01, 0.2, 0.5, 2)


def test_fermionic_families_equal_length():
    with pytest.raises(BathError):
        bm.fermionic_bath(D, [1.0], [1.0], [], [])


def test_user_exponents_verbatim_and_positive_rates():
    b = bm.fermionic_bath(D, [0.3 + 0.1j], [2 - 1j], [0.3 - 0.1j], [2 + 1j])
    assert b.exponents[0].eta == 0.3 + 0.1j and b.exponents[1].gamma == 2 + 1j
    with pytest.raises(BathError):
        bm.bosonic_bath(SZ, [1.0], [-0.5])


def test_correlation_at_zero_is_coefficient_sum():
    b = lead()
    plus = sum(e.eta for e in b.exponents if e.nu == 1)
    assert bm.correlation(b, 0.0, nu=1) == plus
    bos = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 5)
    assert bm.correlation(bos, 0.0) == pytest.approx(sum(e.weight for e in bos.exponents), abs=0)


def test_correlation_usage_errors():
    bos = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 2)
    with pytest.raises(BathError):
        bm.correlation(bos, 1.0, nu=1)
    with pytest.raises(BathError):
        bm.correlation(lead(), -1.0)


def test_particle_hole_symmetry_at_zero_bias():
    taus = np.linspace(0, 10, 101)
    for b in (lead(), bm.matsubara_decomposition(Flavor.FERMIONIC, D, 1.0, 10.0, 0.0, 0.5, 7)):
        np.testing.assert_allclose(bm.correlation(b, taus, 1), bm.correlation(b, taus, -1),
                                   atol=1e-10, rtol=0)


def test_pade_error_non_increasing_in_n():
    from heom.oracles import pade_errors

    errs = list(pade_errors((2, 4, 7, 10)).values())
    assert all(a >= b for a, b in zip(errs, errs[1:]))


def test_matsubara_bosonic_error_decreasing():
    from heom.oracles import bose_errors

    errs = list(bose_errors((2, 5, 10, 20), method="matsubara").values())
    assert all(a > b for a, b in zip(errs, errs[1:]))


def test_matsubara_fermionic_converges_to_quadrature():
    from heom.oracles import pade_errors

    errs = pade_errors((2, 10, 40), method="matsubara")
    assert errs[40] < errs[10] < errs[2]


def test_boson_parts_sum_to_quadrature():
    # away from the logarithmic singularity at tau = 0
    taus = np.linspace(1.0, 25.0, 13)
    b = bm.drude_lorentz_pade_boson(SZ, 0.01, 0.2, 0.5, 10)
    exact = bm.quad_bosonic_correlation(taus, 0.01, 0.2, 0.5)
    parts = {p: sum(e.xi * np.exp(-e.chi * taus) for e in b.exponents if e.part is p) for p in Part}
    recon = parts[Part.REAL] + 1j * parts[Part.IMAG]
    assert np.abs(recon - exact).max() / np.abs(exact).max() < 1e-4


def test_quadrature_oracle_scalar_shape():
    assert np.ndim(bm.quad_fermionic_correlation(0.3, 1.0, 10.0, 0.0, 0.5)) == 0
    assert np.isinf(bm.quad_bosonic_correlation(0.0, 0.01, 0.2, 0.5))


# -- properties ---------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(N=st.integers(7, 20), x=st.floats(-50, 50))
def test_pade_fermi_in_unit_interval(N, x):
    kappa, zeta = bm.pade_fermi(N - 1)
    val = complex(bm.fermi_approx(x, kappa, zeta))
    assert abs(val.imag) < 1e-12
    assert -1e-12 <= val.real <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(Gamma=st.floats(0, 5), W=st.floats(0.1, 20), mu=st.floats(-5, 5),
       kT=st.floats(0.05, 5), N=st.integers(1, 12))
def test_fermion_rates_decay(Gamma, W, mu, kT, N):
    try:
        b = bm.lorentzian_pade_fermion(D, Gamma, W, mu, kT, N)
    except BathError as exc:
        assert "pole" in str(exc)
        return
    assert all(e.gamma.real > 0 for e in b.exponents)


@settings(max_examples=40, deadline=None)
@given(Delta=st.floats(0, 1), W=st.floats(0.05, 5), kT=st.floats(0.05, 5), N=st.integers(1, 10),
       method=st.sampled_from(["pade", "matsubara"]))
def test_boson_rates_decay(Delta, W, kT, N, method):
    try:
        if method == "pade":
            b = bm.drude_lorentz_pade_boson(SZ, Delta, W, kT, N)
        else:
            b = bm.matsubara_decomposition(Flavor.BOSONIC, SZ, Delta, W, 0.0, kT, N)
    except BathError:
        return
    assert all(e.chi.real > 0 for e in b.exponents)


@settings(max_examples=30, deadline=None)
@given(tau=st.floats(0, 30), N=st.integers(1, 10), mu=st.floats(-3, 3))
def test_correlation_envelope_bound(tau, N, mu):
    b = lead(N=N, mu=mu)
    for nu in (1, -1):
        sel = [e for e in b.exponents if e.nu == nu]
        bound = sum(abs(e.eta) for e in sel) * np.exp(-min(e.gamma.real for e in sel) * tau)
        assert abs(bm.correlation(b, tau, nu)) <= bound * (1 + 1e-12)

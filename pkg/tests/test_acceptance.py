"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

The figure checks run at a reduced tier (three poles per bath) and take
several minutes in total.
"""
import numpy as np
import pytest

from heom import bath as bm
from heom.cli import Runner
from heom.config import build_model, bundled_config, parse_config
from heom.hierarchy import HierarchySpace, Parity, count_space, enumerate_space
from heom.liouvillian import build_heomls
from heom.observables import conductance, current, dos, psd
from heom.oracles import (bose_errors, dephasing_error, generator_mismatch, gibbs_error,
                          pade_errors, resonant_level_error, toy_models)
from heom.solvers import AdosVector, evolve_expm, evolve_ode, steadystate
from heom.systems import fermion_level

pytestmark = pytest.mark.acceptance


def reduced_runner(name, tmp, N=3, m_max=0, n_max=3, I_th=0.0, **params):
    doc = bundled_config(name).to_dict()
    for b in doc["baths"]:
        b["N"] = N
    doc["truncation"] = {"m_max": m_max, "n_max": n_max, "I_th": I_th}
    doc["system"]["params"].update(params)
    return Runner(parse_config(doc), tmp)


@pytest.fixture(scope="module")
def anderson(tmp_path_factory):
    return reduced_runner("example1", tmp_path_factory.mktemp("ex1"))


def test_criterion_1_ado_counts(verdict):
    model = build_model(bundled_config("example1"), 0.0)
    fer = [e for b in model.baths for e in b.exponents]
    expected = [57, 1597, 29317, 396607, 4216423, 36684859]
    got = [len(enumerate_space(0, len(fer), 0, n, 0.0, ([], fer))) for n in (1, 2, 3, 4)]
    got += [count_space(0, len(fer), 0, n) for n in (5, 6)]
    ok = len(fer) == 56 and got == expected
    assert verdict("criterion 1 (ADO counts, I_th = 0)", ok, f"K_f={len(fer)} counts={got}")


def test_criterion_2_correlation_oracle(verdict):
    fer = pade_errors((7,))[7]
    # the bosonic C(tau) diverges logarithmically at tau = 0; the grid starts one step in
    bos = bose_errors((5,), tau_min=0.5, tau_max=50.0, points=100)[5]
    Ns = tuple(range(1, 16))
    rises = {}
    for flavor, errs in (("fermionic", pade_errors(Ns, method="matsubara")),
                         ("bosonic", bose_errors(Ns, method="matsubara"))):
        rises[flavor] = [N for N in Ns[1:] if errs[N] >= errs[N - 1]]
    monotone = not any(rises.values())
    ok = fer <= 1e-4 and bos <= 1e-4 and monotone
    detail = (f"fermionic Pade N=7 rel err {fer:.2e}, bosonic Pade N=5 rel err {bos:.2e} "
              f"(tau >= 0.5; unbounded at tau = 0), Matsubara error rises at N={rises}")
    assert verdict("criterion 2 (bath correlation vs quadrature)", ok, detail)


def test_criterion_3_generator_oracle(verdict):
    worst, cases = 0.0, 0
    for name, H, baths, m_max, n_max, I_th in toy_models():
        fermionic = any(b.flavor is bm.Flavor.FERMIONIC for b in baths)
        for parity in (Parity.EVEN, Parity.ODD) if fermionic else (Parity.EVEN,):
            canonical, _ = generator_mismatch(H, baths, m_max, n_max, I_th, parity)
            worst = max(worst, canonical)
            cases += 1
    assert verdict("criterion 3 (generator vs ordered-vector oracle)", worst == 0.0,
                   f"{cases} toy generators, max |difference| = {worst:.1e}")


def test_criterion_4_exact_physics(verdict):
    a = resonant_level_error()
    b = dephasing_error()
    c, _ = gibbs_error()
    ok = a <= 1e-2 and b <= 1e-3 and c <= 1e-8
    assert verdict("criterion 4 (exactly solvable models)", ok,
                   f"resonant-level DOS {a:.2e}, dephasing {b:.2e}, Gibbs {c:.2e}")


def test_criterion_5_structural_invariants(verdict):
    H, d = fermion_level(0.4, spinful=False)
    baths = [bm.lorentzian_pade_fermion(d, 1.0, 3.0, 0.3, 0.7, 3, bath_id="L"),
             bm.lorentzian_pade_fermion(d, 0.5, 3.0, -0.3, 0.7, 3, bath_id="R")]
    space = HierarchySpace.from_baths(baths, 0, 2)
    _, Hh, bh, m_max, n_max, I_th = list(toy_models())[1]
    hybrid = build_heomls(Hh, bh, HierarchySpace.from_baths(bh, m_max, n_max, I_th))
    drift = herm = cross = 0.0
    ts = np.linspace(0, 4, 21)
    for M in (build_heomls(H, baths, space), hybrid):
        x0 = AdosVector.from_density(np.array([[0.2, 0.1j], [-0.1j, 0.8]]), M.space)
        ode, _ = evolve_ode(M, x0, ts)
        prop, _ = evolve_expm(M, x0, ts)
        for s, p in zip(ode, prop):
            drift = max(drift, abs(np.trace(s.root) - 1), abs(np.trace(p.root) - 1))
            herm = max(herm, np.abs(s.root - s.root.conj().T).max())
            cross = max(cross, np.abs(s.root - p.root).max())
    _, report = steadystate(build_heomls(H, baths, space))
    one = build_heomls(H, baths, space, Parity.ODD, threads=1)
    many = build_heomls(H, baths, space, Parity.ODD, threads=4)
    ss, _ = steadystate(build_heomls(H, baths, space, threads=4))
    w = np.linspace(-4, 4, 9)
    same = one.data.data.tobytes() == many.data.data.tobytes() and \
        dos(one, ss, d, w, threads=1).values.tobytes() == dos(many, ss, d, w, threads=4).values.tobytes()
    ok = drift <= 1e-8 and herm <= 1e-8 and report.residual <= 1e-10 and cross <= 1e-6 and same
    assert verdict("criterion 5 (structural invariants)", ok,
                   f"trace drift {drift:.1e}, Hermiticity {herm:.1e}, steady residual "
                   f"{report.residual:.1e}, ODE vs propagator {cross:.1e}, threads identical={same}")


def test_criterion_6_hubbard_peaks(anderson, verdict):
    w = np.round(np.linspace(-8, 8, 161), 10)
    ss, _ = anderson.stationary(0.0)
    model = anderson.model(0.0)
    A = dos(anderson.generator(0.0, Parity.ODD), ss, model.operator("d_up"), w).values
    lower = w[w < 0][np.argmax(A[w < 0])]
    upper = w[w > 0][np.argmax(A[w > 0])]
    ok = abs(lower + 5) <= 0.5 and abs(upper - 5) <= 0.5 and A.min() >= -1e-6
    assert verdict("criterion 6a (Hubbard peaks near -5 and +5)", ok,
                   f"peaks at {lower:+.2f} and {upper:+.2f}, min A = {A.min():.1e}")


def test_criterion_6_conductance_peak(anderson, verdict):
    phi = np.linspace(-2, 2, 9)
    I = [current(anderson.stationary(p)[0], anderson.model(p).baths, "L").value for p in phi]
    G = conductance(phi, I)[:, 1]
    ok = phi[np.argmax(G)] == 0.0
    assert verdict("criterion 6b (conductance maximum at zero bias)", ok,
                   f"argmax G at Phi = {phi[np.argmax(G)]:+.2f}, G(0) = {G[4]:.4f}")


def test_criterion_6_cavity_psd_peak(tmp_path, verdict):
    # bosonic tier 2, importance 1e-5 and four photon states keep each solve near a minute
    r = reduced_runner("example2", tmp_path, m_max=2, I_th=1e-5, n_photon=4)
    phi = 6.0
    ss, _ = r.stationary(phi)
    w = np.array([0.8, 0.9, 1.0, 1.1, 1.2])
    S = psd(r.generator(phi, Parity.EVEN), ss, r.model(phi).operator("a"), w).values
    ok = w[np.argmax(S)] == 1.0
    assert verdict("criterion 6c (cavity PSD peak at omega_c = 1)", ok,
                   f"{len(r.space)} ADOs, S = {np.array2string(S, precision=3)}")


def test_criterion_6_importance_convergence(tmp_path, verdict):
    # at n_max = 3 no threshold >= 1e-7 prunes anything, so the ordering is checked one tier up
    phis = (0.0, 2.0, 4.0)
    currents, sizes = {}, {}
    for I_th in (1e-5, 1e-7, 0.0):
        r = reduced_runner("example1", tmp_path, n_max=4, I_th=I_th)
        currents[I_th] = np.array([current(r.stationary(p)[0], r.model(p).baths, "L").value
                                   for p in phis])
        sizes[I_th] = len(r.space)
    dev = {I: np.abs(currents[I] - currents[0.0]).max() for I in (1e-5, 1e-7)}
    ok = dev[1e-5] > dev[1e-7] and sizes[1e-5] < sizes[1e-7] <= sizes[0.0]
    assert verdict("criterion 6d (current converges as I_th decreases)", ok,
                   f"ADOs {sizes[1e-5]}/{sizes[1e-7]}/{sizes[0.0]}, max deviation from I_th=0: "
                   f"{dev[1e-5]:.2e} (1e-5), {dev[1e-7]:.2e} (1e-7)")


def test_criterion_7_conservation(anderson, verdict):
    ss, _ = anderson.stationary(2.0)
    baths = anderson.model(2.0).baths
    total = abs(current(ss, baths, "L").value + current(ss, baths, "R").value)
    ss0, _ = anderson.stationary(0.0)
    eq = abs(current(ss0, anderson.model(0.0).baths, "L").value)
    ok = total <= 1e-8 and eq <= 1e-10
    assert verdict("criterion 7 (current conservation)", ok,
                   f"|I_L + I_R| = {total:.1e} at Phi=2, |I_L(0)| = {eq:.1e}")

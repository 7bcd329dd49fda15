"""
Independent reference computations used to validate the production code.

Nothing here is fast. Each routine follows the defining formula as literally
as practical so that agreement with the optimised paths is meaningful.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate, linalg

from .bath import BathSpec, Flavor, Part
from .hierarchy import HierarchySpace, Parity

__all__ = [
    "ordered_generator",
    "resonant_level_dos",
    "resonant_level_current",
    "lorentzian_cavity_psd",
    "dephasing_coherence",
    "gibbs_state",
    "dense_steadystate",
    "toy_models",
    "generator_mismatch",
    "resonant_level_error",
    "landauer_error",
    "dephasing_error",
    "gibbs_error",
    "cavity_psd_error",
    "pade_errors",
    "bose_errors",
    "SUITES",
]


# ---------------------------------------------------------------------------
# Generator over ordered label tuples


def _superop(fn, d):
    """Dense d^2 x d^2 matrix of the linear map ``fn`` (column stacking)."""
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in range(d * d):
        E = np.zeros(d * d, dtype=complex)
        E[k] = 1.0
        out[:, k] = fn(E.reshape((d, d), order="F")).reshape(-1, order="F")
    return out


def _perm_sign(seq):
    """Sign of the permutation sorting ``seq`` into descending order."""
    seq = list(seq)
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] < seq[b])
    return -1 if inv % 2 else 1


def ordered_generator(H, baths, space: HierarchySpace, parity=Parity.EVEN):
    """Dense generator assembled over ordered ADO labels.

    Labels are written ``j = [j_m, ..., j_1]`` and ``q = [q_n, ..., q_1]``;
    the raised labels prepend the new id and the lowered labels drop one
    position. The fermionic ordered ADOs are antisymmetric copies of the
    canonical ones, whose written form lists ids in descending order.

    Returns
    -------
    M_ord : ndarray
        Generator on the ordered space.
    E : ndarray
        Embedding of canonical ADOs into ordered ones (with permutation signs).
    R : ndarray
        Selection of the canonical representatives among ordered rows.
    """
    H = np.asarray(H, dtype=complex)
    d = H.shape[0]
    d2 = d * d
    p = 1 if Parity(parity) is Parity.EVEN else -1
    bos = [(b, e) for b in baths if b.flavor is Flavor.BOSONIC for e in b.exponents]
    fer = []
    for b in baths:
        if b.flavor is Flavor.FERMIONIC:
            half = len(b.exponents) // 2
            for k, e in enumerate(b.exponents):
                partner = b.exponents[k + half if k < half else k - half]
                fer.append((b, e, partner))

    # ordered labels: every permutation of each canonical label
    canon = list(space.keys)
    ordered, index = [], {}
    for j, q in canon:
        for jp in sorted(set(itertools.permutations(j))):
            for qp in itertools.permutations(q):
                key = (jp, qp)
                index[key] = len(ordered)
                ordered.append(key)
    No, Nc = len(ordered), len(canon)

    E = np.zeros((No * d2, Nc * d2), dtype=complex)
    R = np.zeros((Nc * d2, No * d2))
    eye = np.eye(d2)
    for c, (j, q) in enumerate(canon):
        for jp in set(itertools.permutations(j)):
            for qp in itertools.permutations(q):
                o = index[(jp, qp)]
                E[o * d2:(o + 1) * d2, c * d2:(c + 1) * d2] = _perm_sign(qp) * eye
        rep = index[(tuple(sorted(j, reverse=True)), tuple(sorted(q, reverse=True)))]
        R[c * d2:(c + 1) * d2, rep * d2:(rep + 1) * d2] = eye

    def lookup(jt, qt):
        return index.get((jt, qt))

    Ls = _superop(lambda X: H @ X - X @ H, d)
    M = np.zeros((No * d2, No * d2), dtype=complex)
    for a, (j, q) in enumerate(ordered):
        m, n = len(j), len(q)
        blk = slice(a * d2, (a + 1) * d2)
        decay = sum(bos[k][1].rate for k in j) + sum(fer[k][1].rate for k in q)
        M[blk, blk] += -1j * Ls - decay * eye

        def ps(level):
            # sign picked up by X d under the parity superoperator at a given level
            return -p * (-1) ** level

        # raise fermionic: q+ = [q', q_n, ..., q_1]
        for k in range(len(fer)):
            if k in q:
                continue
            b = lookup(j, (k,) + q)
            if b is None:
                continue
            bath, e, _ = fer[k]
            dop = bath.coupling_op
            dbar = dop if e.nu == 1 else dop.conj().T
            s = ps(n + 1)
            A = _superop(lambda X: p * (dbar @ X - s * (X @ dbar)), d)
            M[blk, b * d2:(b + 1) * d2] += -1j * A
        # lower fermionic: drop q_w, where q_w sits at written position n - w
        for w in range(1, n + 1):
            pos = n - w
            k = q[pos]
            b = lookup(j, q[:pos] + q[pos + 1:])
            if b is None:
                continue
            bath, e, partner = fer[k]
            dop = bath.coupling_op
            dnu = dop.conj().T if e.nu == 1 else dop
            s = ps(n - 1)
            eta, eta_bar = e.coeff, partner.coeff
            C = _superop(lambda X: p * (eta * (dnu @ X) + np.conj(eta_bar) * s * (X @ dnu)), d)
            M[blk, b * d2:(b + 1) * d2] += -1j * (-1) ** (n - w) * C
        # raise bosonic: each distinct id once
        for k in range(len(bos)):
            b = lookup((k,) + j, q)
            if b is None:
                # other orderings of the same multiset are equal ADOs
                target = tuple(sorted((k,) + j, reverse=True))
                b = lookup(target, q)
            if b is None:
                continue
            V = bos[k][0].coupling_op
            B = _superop(lambda X: V @ X - X @ V, d)
            M[blk, b * d2:(b + 1) * d2] += -1j * B
        # lower bosonic: one term per position
        for r in range(m):
            k = j[r]
            b = lookup(j[:r] + j[r + 1:], q)
            if b is None:
                continue
            bath, e = bos[k]
            V = bath.coupling_op
            if e.part is Part.REAL:
                D = _superop(lambda X: e.coeff * (V @ X - X @ V), d)
            elif e.part is Part.IMAG:
                D = _superop(lambda X: 1j * e.coeff * (V @ X + X @ V), d)
            else:
                D = _superop(lambda X: e.coeff * (V @ X) - np.conj(e.coeff) * (X @ V), d)
            M[blk, b * d2:(b + 1) * d2] += -1j * D
    return M, E, R


# ---------------------------------------------------------------------------
# Physical references


def resonant_level_dos(omega, eps, leads):
    """Exact spectral function of a noninteracting level.

    ``leads`` is a sequence of ``(Gamma, W, mu)`` Lorentzian baths; the
    retarded self-energy of each is ``(Gamma/2) W / (omega - mu + i W)``.
    """
    omega = np.asarray(omega, dtype=float)
    sigma = np.zeros_like(omega, dtype=complex)
    for Gamma, W, mu in leads:
        sigma = sigma + 0.5 * Gamma * W / (omega - mu + 1j * W)
    G = 1.0 / (omega - eps - sigma)
    return -G.imag / np.pi


def resonant_level_current(eps, left, right, kT, span=200.0):
    """Landauer current (e = hbar = 1) through a single level.

    ``left`` and ``right`` are ``(Gamma, W, mu)``. Positive when charge
    flows out of the left lead.
    """
    def hyb(w, G, W, mu):
        return G * W**2 / ((w - mu) ** 2 + W**2)

    def fermi(x):
        return 0.5 * (1.0 - np.tanh(0.5 * x))

    def integrand(w):
        gl, gr = hyb(w, *left), hyb(w, *right)
        sig = 0.5 * left[0] * left[1] / (w - left[2] + 1j * left[1]) \
            + 0.5 * right[0] * right[1] / (w - right[2] + 1j * right[1])
        G = 1.0 / (w - eps - sig)
        T = gl * gr * abs(G) ** 2
        return T * (fermi((w - left[2]) / kT) - fermi((w - right[2]) / kT))

    lo = min(left[2], right[2]) - span * kT
    hi = max(left[2], right[2]) + span * kT
    val, _ = integrate.quad(integrand, lo, hi, limit=2000, epsabs=1e-13, epsrel=1e-11,
                            points=[eps, left[2], right[2]])
    return val / (2 * np.pi)


def lorentzian_cavity_psd(omega, omega_c, kappa, nbar):
    """Emission spectrum of a thermally driven damped cavity.

    With loss ``kappa (nbar + 1) D[a]`` and gain ``kappa nbar D[a^dag]``, the
    normally ordered spectrum ``S = (1/pi) Re int_0^inf <a^dag(t) a> e^{i w t}``
    is ``(nbar/pi) (kappa/2) / ((w - omega_c)^2 + kappa^2/4)``.
    """
    omega = np.asarray(omega, dtype=float)
    return nbar / np.pi * (kappa / 2) / ((omega - omega_c) ** 2 + kappa**2 / 4)


def dephasing_coherence(t, correlation, tol=1e-10):
    """``|rho_01(t) / rho_01(0)|`` for a qubit with ``V = sigma_z``.

    ``correlation(tau)`` is the bath correlation function; the decay is
    ``exp(-4 int_0^t ds int_0^s du Re C(u))``.
    """
    def inner(s):
        val, _ = integrate.quad(lambda u: np.real(correlation(u)), 0.0, s,
                                limit=400, epsabs=tol, epsrel=tol)
        return val

    outer, _ = integrate.quad(inner, 0.0, t, limit=400, epsabs=tol, epsrel=tol)
    return math.exp(-4.0 * outer)


def gibbs_state(H, kT):
    """``exp(-H/kT) / Z`` via a Hermitian eigendecomposition."""
    w, U = linalg.eigh(np.asarray(H, dtype=complex))
    p = np.exp(-(w - w.min()) / kT)
    p /= p.sum()
    return (U * p) @ U.conj().T


def dense_steadystate(L, d):
    """Null vector of a dense Liouvillian, normalised to unit trace."""
    w, v = linalg.eig(L)
    k = int(np.argmin(np.abs(w)))
    rho = v[:, k].reshape((d, d), order="F")
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)


# ---------------------------------------------------------------------------
# Named suites (used by ``heom oracle <name>`` and the acceptance tests)


def toy_models():
    """Small models with ``K_f <= 6``, ``K_b <= 3`` and tiers ``<= 2``.

    Yields ``(name, H, baths, m_max, n_max, I_th)``.
    """
    from . import bath as bm
    from .systems import fermion_annihilators, fermion_level

    H1, d = fermion_level(0.4, spinful=False)
    n = d.conj().T @ d
    yield ("one lead, K_f=6", H1, [bm.lorentzian_pade_fermion(d, 1.0, 3.0, 0.3, 0.7, 3)], 0, 2, 0.0)
    yield ("two leads + boson", H1 + 0.1 * n,
           [bm.lorentzian_pade_fermion(d, 0.8, 2.0, 0.5, 0.6, 1, bath_id="L"),
            bm.lorentzian_pade_fermion(d, 0.6, 2.5, -0.5, 0.6, 1, bath_id="R"),
            bm.drude_lorentz_pade_boson(n, 0.2, 1.0, 0.6, 1)], 2, 2, 0.0)
    imp = fermion_level(-1.0, 2.0)
    nt = imp.d_up.conj().T @ imp.d_up + imp.d_dn.conj().T @ imp.d_dn
    yield ("spinful, pruned", imp.H,
           [bm.lorentzian_pade_fermion(imp.d_up, 1.0, 4.0, 0.2, 0.5, 1, bath_id="L"),
            bm.lorentzian_pade_fermion(imp.d_dn, 1.0, 4.0, 0.2, 0.5, 1, bath_id="L"),
            bm.drude_lorentz_pade_boson(nt, 0.3, 0.8, 0.5, 2, combine=True)], 2, 2, 1e-2)
    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    yield ("spin-boson, K_b=3", 0.5 * sz + 0.3 * sx,
           [bm.drude_lorentz_pade_boson(sx, 0.1, 1.0, 0.8, 2)], 2, 0, 0.0)
    (c0, c1) = fermion_annihilators(2)
    Hm = 0.3 * c0.conj().T @ c0 - 0.2 * c1.conj().T @ c1 + 0.1 * (c0.conj().T @ c1 + c1.conj().T @ c0)
    yield ("two orbitals, Matsubara", Hm,
           [bm.matsubara_decomposition(bm.Flavor.FERMIONIC, c0, 0.5, 2.0, 0.1, 0.8, 2, bath_id="L"),
            bm.matsubara_decomposition(bm.Flavor.FERMIONIC, c1, 0.5, 2.0, -0.1, 0.8, 1, bath_id="R")],
           0, 2, 0.0)


def generator_mismatch(H, baths, m_max, n_max, I_th, parity):
    """``(|R M_ord E - M|_max, |M_ord E - E M|_max)`` for the assembled ``M``."""
    from .liouvillian import build_heomls

    space = HierarchySpace.from_baths(baths, m_max, n_max, I_th)
    M = build_heomls(H, baths, space, parity).data.toarray()
    M_ord, E, R = ordered_generator(H, baths, space, parity)
    return float(np.abs(R @ M_ord @ E - M).max()), float(np.abs(M_ord @ E - E @ M).max())


def resonant_level_error(eps=1.0, Gamma=1.0, W=10.0, kT=0.5, mu=0.5, N=7, n_max=2,
                         omega=None):
    """Relative sup-norm error of the HEOM DOS of a two-lead resonant level."""
    from . import bath as bm
    from .liouvillian import build_heomls
    from .observables import dos
    from .solvers import steadystate
    from .systems import fermion_level

    omega = np.linspace(-20, 20, 201) if omega is None else omega
    H, d = fermion_level(eps, spinful=False)
    baths = [bm.lorentzian_pade_fermion(d, Gamma, W, mu, kT, N, bath_id="L"),
             bm.lorentzian_pade_fermion(d, Gamma, W, -mu, kT, N, bath_id="R")]
    space = HierarchySpace.from_baths(baths, 0, n_max)
    ss, _ = steadystate(build_heomls(H, baths, space, Parity.EVEN))
    A = dos(build_heomls(H, baths, space, Parity.ODD), ss, d, omega).values
    exact = resonant_level_dos(omega, eps, [(Gamma, W, mu), (Gamma, W, -mu)])
    return float(np.abs(A - exact).max() / exact.max())


def landauer_error(eps=1.0, Gamma=1.0, W=10.0, kT=0.5, mu=0.5, N=10, n_max=2):
    """``(I_L, I_R, I_Landauer)`` for a two-lead resonant level."""
    from . import bath as bm
    from .liouvillian import build_heomls
    from .observables import current
    from .solvers import steadystate
    from .systems import fermion_level

    H, d = fermion_level(eps, spinful=False)
    baths = [bm.lorentzian_pade_fermion(d, Gamma, W, mu, kT, N, bath_id="L"),
             bm.lorentzian_pade_fermion(d, Gamma, W, -mu, kT, N, bath_id="R")]
    space = HierarchySpace.from_baths(baths, 0, n_max)
    ss, _ = steadystate(build_heomls(H, baths, space, Parity.EVEN))
    return (current(ss, baths, "L").value, current(ss, baths, "R").value,
            resonant_level_current(eps, (Gamma, W, mu), (Gamma, W, -mu), kT))


def dephasing_error(eps=1.0, Delta=0.05, W=1.0, kT=1.0, N=4, m_max=8, t_max=5.0, points=11):
    """Max deviation of ``|rho_01(t)|/|rho_01(0)|`` from the quadrature kernel."""
    from . import bath as bm
    from .liouvillian import build_heomls
    from .solvers import AdosVector, evolve_ode

    sz = np.diag([1.0, -1.0]).astype(complex)
    b = bm.drude_lorentz_pade_boson(sz, Delta, W, kT, N)
    space = HierarchySpace.from_baths([b], m_max, 0)
    M = build_heomls(0.5 * eps * sz, [b], space)
    rho0 = 0.5 * np.ones((2, 2), dtype=complex)
    ts = np.linspace(0.0, t_max, points)
    states, _ = evolve_ode(M, AdosVector.from_density(rho0, space), ts)
    num = np.array([abs(s.root[0, 1]) / 0.5 for s in states])
    exact = np.array([dephasing_coherence(t, lambda u: bm.correlation(b, u)) for t in ts])
    return float(np.abs(num - exact).max())


def gibbs_error(kT=0.5, rate=0.3):
    """Lindblad-only thermal qubit: max deviation from the Gibbs state."""
    from .hierarchy import enumerate_space
    from .liouvillian import add_lindblad, build_heomls
    from .solvers import steadystate

    sz = np.diag([1.0, -1.0]).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    H = 0.7 * sz + 0.2 * sx
    w, U = linalg.eigh(H)
    lower = np.outer(U[:, 0], U[:, 1].conj())
    nbar = 1.0 / math.expm1((w[1] - w[0]) / kT)
    M = build_heomls(H, [], enumerate_space(0, 0, 0, 0))
    M = add_lindblad(M, math.sqrt(rate * (nbar + 1)) * lower)
    M = add_lindblad(M, math.sqrt(rate * nbar) * lower.conj().T)
    ss, report = steadystate(M)
    return float(np.abs(ss.root - gibbs_state(H, kT)).max()), report.residual


def cavity_psd_error(omega_c=1.0, kappa=0.1, nbar=0.3, n_photon=12):
    """Relative sup error of the Lindblad cavity PSD against the Lorentzian."""
    from .hierarchy import enumerate_space
    from .liouvillian import add_lindblad, build_heomls
    from .observables import psd
    from .solvers import steadystate
    from .systems import boson_annihilator

    a = boson_annihilator(n_photon)
    M = build_heomls(omega_c * a.conj().T @ a, [], enumerate_space(0, 0, 0, 0))
    M = add_lindblad(M, math.sqrt(kappa * (nbar + 1)) * a)
    M = add_lindblad(M, math.sqrt(kappa * nbar) * a.conj().T)
    ss, _ = steadystate(M)
    w = np.linspace(omega_c - 1, omega_c + 1, 201)
    S = psd(M, ss, a, w).values
    exact = lorentzian_cavity_psd(w, omega_c, kappa, nbar)
    return float(np.abs(S - exact).max() / exact.max())


def pade_errors(Ns=(2, 4, 7, 10), Gamma=1.0, W=10.0, mu=0.0, kT=0.5, tau_max=None, points=101,
                method="pade"):
    """Sup-norm error of the fermionic reconstruction relative to ``max |C|``."""
    from . import bath as bm

    tau_max = 10.0 / W if tau_max is None else tau_max
    taus = np.linspace(0.0, tau_max, points)
    exact = bm.quad_fermionic_correlation(taus, Gamma, W, mu, kT)
    d = np.array([[0, 1], [0, 0]], dtype=complex)
    out = {}
    for N in Ns:
        if method == "pade":
            b = bm.lorentzian_pade_fermion(d, Gamma, W, mu, kT, N)
        else:
            b = bm.matsubara_decomposition(bm.Flavor.FERMIONIC, d, Gamma, W, mu, kT, N)
        out[N] = float(np.abs(bm.correlation(b, taus) - exact).max() / np.abs(exact).max())
    return out


def bose_errors(Ns=(2, 5, 10, 20), Delta=0.01, W=0.2, kT=0.5, tau_min=None, tau_max=None,
                points=61, method="pade"):
    """Sup-norm error of the bosonic reconstruction relative to ``max |C|``.

    ``C`` diverges logarithmically at ``tau = 0``, so the grid starts at
    ``tau_min`` (default ``0.05 / W``).
    """
    from . import bath as bm

    tau_min = 0.05 / W if tau_min is None else tau_min
    tau_max = 10.0 / W if tau_max is None else tau_max
    taus = np.linspace(tau_min, tau_max, points)
    exact = bm.quad_bosonic_correlation(taus, Delta, W, kT)
    V = np.diag([1.0, -1.0]).astype(complex)
    out = {}
    for N in Ns:
        if method == "pade":
            b = bm.drude_lorentz_pade_boson(V, Delta, W, kT, N)
        else:
            b = bm.matsubara_decomposition(bm.Flavor.BOSONIC, V, Delta, W, 0.0, kT, N)
        out[N] = float(np.abs(bm.correlation(b, taus) - exact).max() / np.abs(exact).max())
    return out


def _suite_generator(emit):
    ok = True
    for name, H, baths, m_max, n_max, I_th in toy_models():
        for parity in (Parity.EVEN, Parity.ODD):
            if parity is Parity.ODD and all(b.flavor is Flavor.BOSONIC for b in baths):
                continue
            a, b = generator_mismatch(H, baths, m_max, n_max, I_th, parity)
            good = a == 0.0 and b < 1e-12
            ok &= good
            emit(f"{'PASS' if good else 'FAIL'} generator [{name}, {parity.name}]: "
                 f"canonical {a:.3e}, antisymmetry {b:.3e}")
    return ok


def _threshold_suite(label, fn, limit):
    def run(emit):
        val = fn()
        good = val <= limit
        emit(f"{'PASS' if good else 'FAIL'} {label}: {val:.3e} (limit {limit:.0e})")
        return good
    return run


def _suite_landauer(emit):
    IL, IR, ref = landauer_error()
    good = abs(IL + IR) < 1e-8 and abs(IL - ref) < 1e-4 * abs(ref)
    emit(f"{'PASS' if good else 'FAIL'} landauer: I_L={IL:.10g} I_R={IR:.10g} exact={ref:.10g}")
    return good


def _suite_bath(emit):
    pade = pade_errors()
    mats = bose_errors(method="matsubara")
    mono_p = all(a >= b for a, b in zip(list(pade.values()), list(pade.values())[1:]))
    mono_m = all(a >= b for a, b in zip(list(mats.values()), list(mats.values())[1:]))
    emit(f"{'PASS' if mono_p else 'FAIL'} fermionic Pade error non-increasing: {pade}")
    emit(f"{'PASS' if mono_m else 'FAIL'} bosonic Matsubara error decreasing: {mats}")
    return mono_p and mono_m


SUITES = {
    "generator": _suite_generator,
    "resonant-level": _threshold_suite("resonant-level DOS", resonant_level_error, 1e-2),
    "landauer": _suite_landauer,
    "dephasing": _threshold_suite("pure dephasing", dephasing_error, 1e-3),
    "gibbs": _threshold_suite("Lindblad Gibbs qubit", lambda: gibbs_error()[0], 1e-8),
    "cavity-psd": _threshold_suite("Lindblad cavity PSD", cavity_psd_error, 5e-2),
    "bath": _suite_bath,
}

"""
Exponential-series representations of bath correlation functions.

Fermionic baths carry two families of exponents, one per conjugation flag
``nu = +1`` (creation, ``d^dagger``) and ``nu = -1`` (annihilation, ``d``),

    C^nu(tau) = sum_h eta^nu_h exp(-gamma^nu_h tau),

and bosonic baths carry a single series

    C(tau) = sum_l xi_l exp(-chi_l tau),

optionally split into real (``REAL``) and imaginary (``IMAG``) parts so that
``C = C^R + i C^I``.

Energies are in meV and times in hbar/meV throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "Flavor",
    "Part",
    "BathError",
    "FermionicExponent",
    "BosonicExponent",
    "BathSpec",
    "pade_fermi",
    "pade_bose",
    "matsubara_fermi",
    "matsubara_bose",
    "fermi_approx",
    "bose_approx",
    "lorentzian_spectral_density",
    "drude_lorentz_spectral_density",
    "lorentzian_pade_fermion",
    "drude_lorentz_pade_boson",
    "matsubara_decomposition",
    "fermionic_bath",
    "bosonic_bath",
    "correlation",
    "quad_fermionic_correlation",
    "quad_bosonic_correlation",
]

HERMITIAN_TOL = 1e-12


class BathError(ValueError):
    """Invalid bath parameters or exponent lists."""


class Flavor(enum.Enum):
    FERMIONIC = "fermionic"
    BOSONIC = "bosonic"


class Part(enum.Enum):
    REAL = "R"
    IMAG = "I"
    COMBINED = "RI"


@dataclass(frozen=True)
class FermionicExponent:
    eta: complex
    gamma: complex
    nu: int
    channel: str = "d"
    bath_id: str = "f"
    h: int = 1

    def __post_init__(self):
        if self.nu not in (1, -1):
            raise BathError(f"nu must be +1 or -1, got {self.nu!r}")
        if not complex(self.gamma).real > 0:
            raise BathError(
                f"fermionic exponent decay rate must have Re(gamma) > 0, "
                f"got {self.gamma!r}"
            )

    @property
    def coeff(self) -> complex:
        return complex(self.eta)

    @property
    def rate(self) -> complex:
        return complex(self.gamma)


@dataclass(frozen=True)
class BosonicExponent:
    xi: complex
    chi: complex
    part: Part = Part.COMBINED
    channel: str = "V"
    bath_id: str = "b"
    l: int = 1

    def __post_init__(self):
        if not isinstance(self.part, Part):
            object.__setattr__(self, "part", Part(self.part))
        if not complex(self.chi).real > 0:
            raise BathError(
                f"bosonic exponent decay rate must have Re(chi) > 0, "
                f"got {self.chi!r}"
            )
        if self.part is Part.COMBINED and complex(self.chi).imag != 0:
            raise BathError(
                "a COMBINED bosonic exponent needs a real decay rate; split "
                "complex-rate terms into REAL and IMAG parts"
            )
        if self.part is not Part.COMBINED and complex(self.xi).imag != 0:
            raise BathError("REAL/IMAG bosonic exponents need real coefficients")

    @property
    def coeff(self) -> complex:
        return complex(self.xi)

    @property
    def rate(self) -> complex:
        return complex(self.chi)

    @property
    def weight(self) -> complex:
        """Contribution of this term to the full ``C(tau)`` at ``tau = 0``."""
        if self.part is Part.IMAG:
            return 1j * complex(self.xi)
        return complex(self.xi)


@dataclass(frozen=True)
class BathSpec:
    """A system coupling operator together with its correlation exponents.

    Parameters
    ----------
    flavor : Flavor
    coupling_op : (d, d) array
        ``d_sigma`` (the annihilation operator) for a fermionic bath, the
        Hermitian ``V_sigma`` for a bosonic bath.
    exponents : sequence of exponents
        Fermionic baths list the ``nu = +1`` family first, followed by the
        ``nu = -1`` family of the same length; the ``h``-th members of the two
        families are conjugation partners.
    """

    flavor: Flavor
    coupling_op: np.ndarray
    exponents: tuple

    def __post_init__(self):
        op = np.asarray(self.coupling_op, dtype=complex)
        if op.ndim != 2 or op.shape[0] != op.shape[1]:
            raise BathError(f"coupling operator must be square, got {op.shape}")
        op.setflags(write=False)
        object.__setattr__(self, "coupling_op", op)
        object.__setattr__(self, "exponents", tuple(self.exponents))
        if self.flavor is Flavor.BOSONIC:
            if np.max(np.abs(op - op.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise BathError("bosonic coupling operator must be Hermitian")
            if not all(isinstance(e, BosonicExponent) for e in self.exponents):
                raise BathError("bosonic bath needs BosonicExponent terms")
        else:
            if not all(isinstance(e, FermionicExponent) for e in self.exponents):
                raise BathError("fermionic bath needs FermionicExponent terms")
            plus = [e for e in self.exponents if e.nu == 1]
            minus = [e for e in self.exponents if e.nu == -1]
            if len(plus) != len(minus):
                raise BathError(
                    "fermionic exponents must come in nu = +1/-1 families of "
                    f"equal length (got {len(plus)} and {len(minus)})"
                )
            if list(self.exponents) != plus + minus:
                raise BathError("list the nu = +1 family before the nu = -1 family")

    @property
    def dim(self) -> int:
        return self.coupling_op.shape[0]

    @property
    def bath_id(self) -> str:
        return self.exponents[0].bath_id if self.exponents else ""

    def partner(self, k: int) -> int:
        """Index of the opposite-``nu`` partner of fermionic exponent ``k``."""
        half = len(self.exponents) // 2
        return k + half if k < half else k - half

    def __len__(self):
        return len(self.exponents)


# ---------------------------------------------------------------------------
# Distribution decompositions
#
# Both return (kappa, zeta) with
#   fermi(x) ~ 1/2 - sum_k 2 kappa_k x / (x^2 + zeta_k^2)
#   bose(x)  ~ 1/x - 1/2 + sum_k 2 kappa_k x / (x^2 + zeta_k^2)
# and zeta ascending.


def _tridiag_roots(diag_terms: np.ndarray, count: int) -> np.ndarray:
    """Squared ``2/lambda`` for the ``count`` largest eigenvalues."""
    mat = np.diag(diag_terms, 1) + np.diag(diag_terms, -1)
    evals = np.sort(np.linalg.eigvalsh(mat))[::-1][:count]
    return (2.0 / evals) ** 2


def _pade(n: int, offset: int) -> tuple[np.ndarray, np.ndarray]:
    # offset 1 gives the Fermi approximant, 3 the Bose one.
    if n == 0:
        return np.zeros(0), np.zeros(0)
    k = np.arange(2 * n - 1)
    poles2 = _tridiag_roots(1.0 / np.sqrt((2 * k + offset) * (2 * k + offset + 2)), n)
    k = np.arange(2 * n - 2)
    zeros2 = _tridiag_roots(
        1.0 / np.sqrt((2 * k + offset + 2) * (2 * k + offset + 4)), n - 1
    )
    kappa = np.empty(n)
    for i in range(n):
        others = np.delete(poles2, i)
        # pairwise ratios keep the running product bounded for large n
        ratios = (zeros2 - poles2[i]) / (others[: n - 1] - poles2[i])
        kappa[i] = 0.5 * n * (2 * n + offset) * np.prod(ratios)
    zeta = np.sqrt(poles2)
    order = np.argsort(zeta)
    return kappa[order], zeta[order]


def pade_fermi(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``[n-1/n]`` Pade poles and residues of the Fermi function (n poles)."""
    return _pade(n, 1)


def pade_bose(n: int) -> tuple[np.ndarray, np.ndarray]:
    """``[n-1/n]`` Pade poles and residues of the Bose function (n poles)."""
    return _pade(n, 3)


def matsubara_fermi(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.ones(n), (2 * np.arange(1, n + 1) - 1) * np.pi


def matsubara_bose(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.ones(n), 2 * np.arange(1, n + 1) * np.pi


def fermi_approx(x, kappa, zeta):
    x = np.asarray(x, dtype=complex)[..., None]
    return 0.5 - np.sum(2 * kappa * x / (x**2 + zeta**2), axis=-1)


def bose_approx(x, kappa, zeta):
    x = np.asarray(x, dtype=complex)[..., None]
    return 1 / x[..., 0] - 0.5 + np.sum(2 * kappa * x / (x**2 + zeta**2), axis=-1)


def lorentzian_spectral_density(omega, Gamma, W, mu):
    omega = np.asarray(omega)
    return Gamma * W**2 / ((omega - mu) ** 2 + W**2)


def drude_lorentz_spectral_density(omega, Delta, W):
    omega = np.asarray(omega)
    return 4 * Delta * W * omega / (omega**2 + W**2)


def _check_positive(**params):
    for name, value in params.items():
        if not value > 0:
            raise BathError(f"{name} must be positive, got {value!r}")


def _check_n(N):
    if int(N) != N or N < 1:
        raise BathError(f"number of exponents N must be a positive integer, got {N!r}")
    return int(N)


def _fermion_exponents(Gamma, W, mu, kT, N, method, channel, bath_id):
    _check_positive(W=W, kT=kT)
    if Gamma < 0:
        raise BathError(f"Gamma must be non-negative, got {Gamma!r}")
    N = _check_n(N)
    if method == "pade":
        kappa, zeta = pade_fermi(N - 1)
    else:
        kappa, zeta = matsubara_fermi(N - 1)
    x = 1j * W / kT
    if np.any(np.isclose(zeta, W / kT, rtol=1e-10, atol=0.0)):
        raise BathError(
            f"W/kT = {W / kT:g} coincides with a pole of the distribution "
            "expansion; choose a different W or kT"
        )
    if method == "pade":
        n_pole = complex(fermi_approx(x, kappa, zeta))
    else:
        n_pole = 1.0 / (np.exp(x) + 1.0)
    eta1 = Gamma * W / 2 * n_pole
    rate = zeta * kT
    eta_h = -1j * kappa * kT * Gamma * W**2 / (W**2 - rate**2)
    out = []
    for nu in (1, -1):
        out.append(FermionicExponent(eta1, W - nu * 1j * mu, nu, channel, bath_id, 1))
        for h, (e, r) in enumerate(zip(eta_h, rate), start=2):
            out.append(FermionicExponent(complex(e), r - nu * 1j * mu, nu, channel, bath_id, h))
    return out


def _boson_exponents(Delta, W, kT, N, method, channel, bath_id, combine):
    _check_positive(W=W, kT=kT)
    if Delta < 0:
        raise BathError(f"Delta must be non-negative, got {Delta!r}")
    N = _check_n(N)
    ratio = W / (2 * kT)
    if abs(math.sin(ratio)) < 1e-12:
        raise BathError(
            f"cot(W/2kT) is singular at W/2kT = {ratio:g}; choose a different W or kT"
        )
    if method == "pade":
        kappa, zeta = pade_bose(N - 1)
    else:
        kappa, zeta = matsubara_bose(N - 1)
    rate = zeta * kT
    if np.any(np.isclose(rate, W, rtol=1e-10, atol=0.0)):
        raise BathError(
            "W coincides with a pole of the Bose expansion; choose a different W or kT"
        )
    re1 = Delta * W / math.tan(ratio)
    im1 = -Delta * W
    if combine:
        out = [BosonicExponent(re1 + 1j * im1, W, Part.COMBINED, channel, bath_id, 1)]
    else:
        out = [
            BosonicExponent(re1, W, Part.REAL, channel, bath_id, 1),
            BosonicExponent(im1, W, Part.IMAG, channel, bath_id, 1),
        ]
    xi = -2 * kappa * kT * 2 * Delta * W * rate / (W**2 - rate**2)
    part = Part.COMBINED if combine else Part.REAL
    for l, (x, r) in enumerate(zip(xi, rate), start=2):
        out.append(BosonicExponent(float(x), float(r), part, channel, bath_id, l))
    return out


def lorentzian_pade_fermion(d_op, Gamma, W, mu, kT, N, *, channel="d", bath_id="f"):
    """Pade expansion of a Lorentzian fermionic bath.

    ``J(w) = Gamma W^2 / ((w - mu)^2 + W^2)``. Returns a :class:`BathSpec`
    with ``2N`` exponents: for each ``nu`` the Lorentzian pole term
    ``gamma_1 = W - i nu mu`` followed by ``N - 1`` Pade terms in ascending
    decay rate.
    """
    exps = _fermion_exponents(Gamma, W, mu, kT, N, "pade", channel, bath_id)
    return BathSpec(Flavor.FERMIONIC, d_op, exps)


def drude_lorentz_pade_boson(V_op, Delta, W, kT, N, *, channel="V", bath_id="b", combine=False):
    """Pade expansion of a Drude-Lorentz bosonic bath.

    ``J(w) = 4 Delta W w / (w^2 + W^2)``. The Lorentzian pole term is split
    into a ``REAL`` part ``Delta W cot(W / 2kT)`` and an ``IMAG`` part
    ``-Delta W`` sharing ``chi = W``; the remaining ``N - 1`` terms are real.
    All decay rates are real, so ``combine=True`` merges the pole term into a
    single complex ``COMBINED`` exponent instead.
    """
    exps = _boson_exponents(Delta, W, kT, N, "pade", channel, bath_id, combine)
    return BathSpec(Flavor.BOSONIC, V_op, exps)


def matsubara_decomposition(flavor, op, strength, W, mu, kT, N, *, channel=None,
                            bath_id=None, combine=False):
    """Matsubara counterpart of the two Pade constructors.

    ``strength`` is ``Gamma`` for a fermionic bath and ``Delta`` for a bosonic
    one; ``mu`` is ignored for bosons.
    """
    flavor = Flavor(flavor) if not isinstance(flavor, Flavor) else flavor
    if flavor is Flavor.FERMIONIC:
        exps = _fermion_exponents(strength, W, mu, kT, N, "matsubara",
                                  channel or "d", bath_id or "f")
    else:
        exps = _boson_exponents(strength, W, kT, N, "matsubara",
                                channel or "V", bath_id or "b", combine)
    return BathSpec(flavor, op, exps)


def fermionic_bath(d_op, eta_plus, gamma_plus, eta_minus, gamma_minus, *,
                   channel="d", bath_id="f"):
    """Fermionic bath from user-supplied exponent lists (taken verbatim)."""
    if len(eta_plus) != len(gamma_plus) or len(eta_minus) != len(gamma_minus):
        raise BathError("coefficient and rate lists differ in length")
    exps = [
        FermionicExponent(complex(e), complex(g), 1, channel, bath_id, h)
        for h, (e, g) in enumerate(zip(eta_plus, gamma_plus), start=1)
    ] + [
        FermionicExponent(complex(e), complex(g), -1, channel, bath_id, h)
        for h, (e, g) in enumerate(zip(eta_minus, gamma_minus), start=1)
    ]
    return BathSpec(Flavor.FERMIONIC, d_op, exps)


def bosonic_bath(V_op, xi, chi, part=Part.COMBINED, *, channel="V", bath_id="b"):
    """Bosonic bath from a user-supplied exponent list (taken verbatim)."""
    if len(xi) != len(chi):
        raise BathError("coefficient and rate lists differ in length")
    parts = [part] * len(xi) if isinstance(part, (Part, str)) else list(part)
    exps = [
        BosonicExponent(x, c, Part(p), channel, bath_id, l)
        for l, (x, c, p) in enumerate(zip(xi, chi, parts), start=1)
    ]
    return BathSpec(Flavor.BOSONIC, V_op, exps)


def correlation(bath: BathSpec, tau, nu: int | None = None):
    """Evaluate the exponential series at ``tau >= 0``.

    For fermionic baths ``nu`` selects the family (default ``+1``). For bosonic
    baths the full ``C(tau) = C^R + i C^I`` is returned; passing ``nu`` is an
    error.
    """
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0):
        raise BathError("tau must be non-negative")
    if bath.flavor is Flavor.BOSONIC:
        if nu is not None:
            raise BathError("nu has no meaning for a bosonic bath")
        coeffs = np.array([e.weight for e in bath.exponents])
        rates = np.array([e.rate for e in bath.exponents])
    else:
        nu = 1 if nu is None else nu
        if nu not in (1, -1):
            raise BathError(f"nu must be +1 or -1, got {nu!r}")
        sel = [e for e in bath.exponents if e.nu == nu]
        coeffs = np.array([e.coeff for e in sel])
        rates = np.array([e.rate for e in sel])
    if coeffs.size == 0:
        return np.zeros_like(tau_arr, dtype=complex)[()]
    out = np.exp(-np.multiply.outer(tau_arr, rates)) @ coeffs
    return out[()] if np.ndim(out) else complex(out)


# ---------------------------------------------------------------------------
# Quadrature oracles (independent of the exponent machinery)


def _fermi(x):
    return 0.5 * (1.0 - np.tanh(0.5 * x))


def _fourier(f, lo, hi, t, tol):
    """``int_lo^hi f(w) exp(i w t) dw``; ``hi`` may be ``inf``."""
    if np.isinf(hi):
        if t == 0.0:
            return integrate.quad(f, lo, hi, epsabs=tol, epsrel=0, limit=4000)[0]
        re = integrate.quad(f, lo, hi, weight="cos", wvar=t, epsabs=tol, limlst=200)[0]
        im = integrate.quad(f, lo, hi, weight="sin", wvar=t, epsabs=tol, limlst=200)[0]
        return re + 1j * im
    opts = dict(epsabs=tol, epsrel=0, limit=4000)
    re = integrate.quad(lambda w: f(w) * math.cos(w * t), lo, hi, **opts)[0]
    im = integrate.quad(lambda w: f(w) * math.sin(w * t), lo, hi, **opts)[0]
    return re + 1j * im


def quad_fermionic_correlation(tau, Gamma, W, mu, kT, nu=1, span=50.0, tol=1e-10):
    """Adaptive quadrature of the Lorentzian fermionic correlation function.

    ``(1/2pi) int J(w) [(1-nu)/2 + nu n(w)] exp(i nu w tau) dw`` over the whole
    real line: Gauss-Kronrod on ``[mu - span W, mu + span W]`` plus
    Fourier-weighted quadrature of the two Lorentzian tails, where the
    occupation factor is exactly 0 or 1.
    """
    lo, hi = mu - span * W, mu + span * W

    def weight(w):
        occ = _fermi((w - mu) / kT)
        occ = occ if nu == 1 else 1.0 - occ
        return Gamma * W**2 / ((w - mu) ** 2 + W**2) * occ

    def lorentz(w):
        return Gamma * W**2 / ((w - mu) ** 2 + W**2)

    def one(t):
        s = nu * t  # exp(i nu w t)
        val = _fourier(weight, lo, hi, s, tol)
        # filled tail: w < lo for nu=+1 (n = 1), w > hi for nu=-1 (1 - n = 1)
        if nu == 1:
            val += np.conj(_fourier(lambda u: lorentz(-u), -lo, np.inf, s, tol))
        else:
            val += _fourier(lorentz, hi, np.inf, s, tol)
        return val / (2 * np.pi)

    out = np.array([one(float(t)) for t in np.atleast_1d(tau)])
    return out.reshape(np.shape(tau))[()]


def quad_bosonic_correlation(tau, Delta, W, kT, span=50.0, tol=1e-10):
    """Adaptive quadrature of the Drude-Lorentz bosonic correlation function.

    ``C(tau) = (1/2pi) int_0^inf J(w) [coth(w/2kT) cos(w tau) - i sin(w tau)] dw``.
    Gauss-Kronrod covers ``(0, span W]``, where ``J(w) coth(w/2kT)`` is
    continued to its finite limit ``8 Delta kT / W`` at ``w = 0``; the
    ``1/w`` tail beyond is integrated with Fourier-weighted quadrature.
    The real part diverges logarithmically as ``tau -> 0``, so ``tau = 0``
    returns ``inf`` there.
    """
    hi = span * W

    def sym(w):
        if w < 1e-8 * W:
            return 8 * Delta * kT / W
        return 4 * Delta * W * w / (w**2 + W**2) / math.tanh(w / (2 * kT))

    def jw(w):
        return drude_lorentz_spectral_density(w, Delta, W)

    def one(t):
        if t == 0.0:
            return complex(np.inf, 0.0)
        re = _fourier(sym, 0.0, hi, t, tol).real + _fourier(sym, hi, np.inf, t, tol).real
        im = -(_fourier(jw, 0.0, hi, t, tol).imag + _fourier(jw, hi, np.inf, t, tol).imag)
        return (re + 1j * im) / (2 * np.pi)

    out = np.array([one(float(t)) for t in np.atleast_1d(tau)])
    return out.reshape(np.shape(tau))[()]

"""Operator builders for the model systems used in the examples."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "fermion_annihilators",
    "boson_annihilator",
    "AndersonImpurity",
    "fermion_level",
    "ChargeCavity",
    "charge_cavity",
    "bose_occupation",
    "thermal_jump_operators",
]


def fermion_annihilators(n_modes: int) -> list[np.ndarray]:
    """Jordan-Wigner annihilation operators on ``2**n_modes`` states.

    Mode ``k`` carries a parity string on modes ``< k``, so the operators
    satisfy the canonical anticommutation relations.
    """
    if n_modes < 1:
        raise ValueError("need at least one fermionic mode")
    lower = np.array([[0, 1], [0, 0]], dtype=complex)
    string = np.diag([1, -1]).astype(complex)
    eye = np.eye(2, dtype=complex)
    ops = []
    for k in range(n_modes):
        out = np.ones((1, 1), dtype=complex)
        for s in range(n_modes):
            out = np.kron(out, string if s < k else lower if s == k else eye)
        ops.append(out)
    return ops


def boson_annihilator(n_photon: int) -> np.ndarray:
    """Truncated ladder operator on a Fock space of dimension ``n_photon``."""
    if n_photon < 2:
        raise ValueError("Fock cutoff must be at least 2")
    return np.diag(np.sqrt(np.arange(1, n_photon)), 1).astype(complex)


@dataclass(frozen=True)
class AndersonImpurity:
    H: np.ndarray
    d_up: np.ndarray
    d_dn: np.ndarray

    @property
    def channels(self):
        return {"up": self.d_up, "dn": self.d_dn}


def fermion_level(eps: float, U: float = 0.0, spinful: bool = True):
    """Single impurity level ``eps sum_s n_s + U n_up n_dn``.

    Returns an :class:`AndersonImpurity` (``d = 4``) when ``spinful`` and a
    ``(H, d)`` pair (``d = 2``) otherwise.
    """
    if not spinful:
        (d,) = fermion_annihilators(1)
        return eps * d.conj().T @ d, d
    up, dn = fermion_annihilators(2)
    n_up, n_dn = up.conj().T @ up, dn.conj().T @ dn
    H = eps * (n_up + n_dn) + U * n_up @ n_dn
    return AndersonImpurity(H, up, dn)


@dataclass(frozen=True)
class ChargeCavity:
    H: np.ndarray
    d: np.ndarray
    a: np.ndarray

    @property
    def quadrature(self) -> np.ndarray:
        """Cavity coupling operator ``a + a^dag``."""
        return self.a + self.a.conj().T


def charge_cavity(eps: float, omega_c: float, g: float, n_photon: int) -> ChargeCavity:
    """Spinless level coupled to a cavity mode through its occupation.

    ``H = eps d^dag d + omega_c a^dag a + g d^dag d (a + a^dag)`` on the
    product space (electron first), dimension ``2 * n_photon``.
    """
    (d1,) = fermion_annihilators(1)
    a1 = boson_annihilator(n_photon)
    d = np.kron(d1, np.eye(n_photon))
    a = np.kron(np.eye(2), a1)
    n = d.conj().T @ d
    H = eps * n + omega_c * a.conj().T @ a + g * n @ (a + a.conj().T)
    return ChargeCavity(H, d, a)


def bose_occupation(omega: float, kT: float) -> float:
    return 1.0 / math.expm1(omega / kT)


def thermal_jump_operators(a, rate: float, omega: float, kT: float):
    """Born-Markov jump operators for a mode ``a`` at frequency ``omega``.

    Returns ``[sqrt(rate (n + 1)) a, sqrt(rate n) a^dag]`` with ``n`` the
    Bose occupation; ``rate`` is the spectral density at ``omega``.
    """
    a = np.asarray(a, dtype=complex)
    nbar = bose_occupation(omega, kT)
    return [math.sqrt(rate * (nbar + 1)) * a, math.sqrt(rate * nbar) * a.conj().T]

"""
Observables extracted from ADO vectors: reduced density, expectation values,
spectra, currents and differential conductance.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bath import Flavor
from .hierarchy import Parity
from .liouvillian import HeomMatrix, left_mul, unvectorize
from .solvers import AdosVector, shifted_solve

__all__ = [
    "SpectrumKind",
    "SpectrumResult",
    "CurrentResult",
    "reduced_density",
    "expectation",
    "dos",
    "psd",
    "current",
    "conductance",
]


class SpectrumKind(enum.Enum):
    DOS = "dos"
    PSD = "psd"


@dataclass(frozen=True)
class SpectrumResult:
    omega: np.ndarray
    values: np.ndarray
    kind: SpectrumKind

    def __post_init__(self):
        if self.omega.shape != self.values.shape:
            raise ValueError("one spectral value per grid point is required")


@dataclass(frozen=True)
class CurrentResult:
    """Current out of bath ``bath_id`` into the system, in e meV / hbar."""

    bath_id: str
    value: float
    bias: float = float("nan")


def reduced_density(ados: AdosVector) -> np.ndarray:
    """System density operator (the root ADO)."""
    if ados.parity is not Parity.EVEN:
        raise ValueError("the reduced density operator lives in the even sector")
    return ados.root


def expectation(ados: AdosVector, op) -> complex:
    """``Tr[op rho]`` on the reduced density operator."""
    op = np.asarray(op, dtype=complex)
    if op.shape != (ados.dim, ados.dim):
        raise ValueError(f"operator shape {op.shape} does not match d={ados.dim}")
    return complex(np.trace(op @ ados.root))


def _grid(omega_grid):
    w = np.asarray(omega_grid, dtype=float).reshape(-1)
    if w.size == 0 or np.any(np.diff(w) <= 0):
        raise ValueError("omega grid must be non-empty and strictly increasing")
    return w


def _stack_left(op, ados: AdosVector) -> np.ndarray:
    """Left-multiply every ADO block by ``op``."""
    S = left_mul(op)
    return (S @ ados.blocks().T).T.reshape(-1)


def _root_trace(op, x, d) -> complex:
    return complex(np.trace(op @ unvectorize(x[: d * d], d)))


def _threads(threads):
    if threads is None:
        threads = int(os.environ.get("HEOM_THREADS", "1") or 1)
    return max(1, int(threads))


def _map(fn, items, threads):
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def dos(M_odd: HeomMatrix, ados_ss: AdosVector, d_op, omega_grid, *, method="direct",
        threads=None) -> SpectrumResult:
    """Density of states ``A(omega)`` of the fermionic mode ``d_op``.

    Parameters
    ----------
    M_odd : HeomMatrix
        Odd-parity generator of the same problem.
    ados_ss : AdosVector
        Even-parity stationary ADOs.
    d_op : (d, d) array
        Annihilation operator of the mode.
    omega_grid : array_like
        Strictly increasing energies.
    """
    if M_odd.parity is not Parity.ODD:
        raise ValueError("dos needs the odd-parity generator")
    if ados_ss.parity is not Parity.EVEN:
        raise ValueError("dos needs even-parity stationary ADOs")
    w = _grid(omega_grid)
    d_op = np.asarray(d_op, dtype=complex)
    ddag = d_op.conj().T
    b_plus = _stack_left(ddag, ados_ss)
    b_minus = _stack_left(d_op, ados_ss)
    dim = ados_ss.dim

    def one(om):
        xp, _ = shifted_solve(M_odd, om, +1, b_plus, method=method)
        xm, _ = shifted_solve(M_odd, om, -1, b_minus, method=method)
        return -(_root_trace(d_op, xp, dim) + _root_trace(ddag, xm, dim)).real / np.pi

    vals = np.array(_map(one, list(w), _threads(threads)))
    return SpectrumResult(w, vals, SpectrumKind.DOS)


def psd(M_even: HeomMatrix, ados_ss: AdosVector, a_op, omega_grid, *, method="direct",
        threads=None) -> SpectrumResult:
    """Power spectral density ``S(omega)`` of the mode ``a_op``."""
    if M_even.parity is not Parity.EVEN or ados_ss.parity is not Parity.EVEN:
        raise ValueError("psd needs the even-parity generator and stationary ADOs")
    w = _grid(omega_grid)
    a_op = np.asarray(a_op, dtype=complex)
    adag = a_op.conj().T
    b = _stack_left(a_op, ados_ss)
    dim = ados_ss.dim

    def one(om):
        if not np.any(b):
            return 0.0
        x, _ = shifted_solve(M_even, om, -1, b, method=method)
        return -_root_trace(adag, x, dim).real / np.pi

    vals = np.array(_map(one, list(w), _threads(threads)))
    return SpectrumResult(w, vals, SpectrumKind.PSD)


def current(ados: AdosVector, baths, bath_id: str, bias: float = float("nan")) -> CurrentResult:
    """Particle current from bath ``bath_id`` into the system (``e = 1``).

    Sums ``i (-1)^{[nu = -1]} Tr[d^{-nu} rho_k]`` over the ADOs with a single
    fermionic label ``k`` belonging to that bath; every spin channel sharing
    the id contributes.
    """
    if ados.parity is not Parity.EVEN:
        raise ValueError("currents are read from even-parity ADOs")
    total = 0.0 + 0.0j
    found = False
    k = 0
    for bath in baths:
        if bath.flavor is not Flavor.FERMIONIC:
            continue
        for e in bath.exponents:
            if bath.bath_id == bath_id:
                found = True
                flat = ados.space.lookup.get(((), (k,)))
                if flat is not None:
                    dop = bath.coupling_op
                    op = dop if e.nu == 1 else dop.conj().T
                    sign = 1 if e.nu == 1 else -1
                    total += sign * np.trace(op @ unvectorize(ados.blocks()[flat], ados.dim))
            k += 1
    if not found:
        raise KeyError(f"no fermionic bath with id {bath_id!r}")
    return CurrentResult(bath_id, float((1j * total).real), bias)


def conductance(bias_grid, currents):
    """Differential conductance ``dI/dPhi`` on a uniform bias grid.

    Central differences inside, first-order one-sided differences at the
    ends. Returns an ``(n, 2)`` array of ``(Phi, G)`` rows.
    """
    phi = np.asarray(bias_grid, dtype=float)
    cur = np.asarray(currents, dtype=float)
    if phi.ndim != 1 or phi.size < 3:
        raise ValueError("conductance needs at least 3 bias points")
    if cur.shape != phi.shape:
        raise ValueError("one current per bias point is required")
    step = np.diff(phi)
    if np.any(step <= 0) or not np.allclose(step, step[0], rtol=1e-9, atol=0.0):
        raise ValueError("bias grid must be uniform and increasing")
    G = np.gradient(cur, step[0], edge_order=1)
    return np.column_stack([phi, G])

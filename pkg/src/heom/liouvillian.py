"""
Sparse HEOM Liouvillian superoperator.

The ADO stack is vectorised block by block: entry ``a * d**2 + k`` holds the
``k``-th element of the column-stacked ADO ``a``. Every block of the
generator is a linear combination of a handful of ``d**2 x d**2``
superoperators, so the full matrix is assembled as
``sum_S kron(P_S, S)`` with sparse ADO-coupling patterns ``P_S``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .bath import BathSpec, Flavor, Part
from .hierarchy import Direction, HierarchySpace, Parity

__all__ = [
    "LiouvillianError",
    "SystemSpec",
    "HeomMatrix",
    "vectorize",
    "unvectorize",
    "left_mul",
    "right_mul",
    "commutator",
    "lindblad_dissipator",
    "build_heomls",
    "add_lindblad",
    "apply",
    "export_coo",
]

HERMITIAN_TOL = 1e-12


class LiouvillianError(ValueError):
    pass


def _square(a, name="operator"):
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise LiouvillianError(f"{name} must be a square matrix, got shape {a.shape}")
    return a


def vectorize(rho) -> np.ndarray:
    """Column-stacking vectorisation."""
    return _square(rho, "rho").reshape(-1, order="F")


def unvectorize(vec, d=None) -> np.ndarray:
    vec = np.asarray(vec)
    d = int(round(np.sqrt(vec.size))) if d is None else d
    if d * d != vec.size:
        raise LiouvillianError(f"vector of length {vec.size} is not a d^2 block")
    return vec.reshape((d, d), order="F")


def left_mul(A) -> sp.csr_matrix:
    """Superoperator of ``X -> A X``: ``I kron A``."""
    A = _square(A)
    return sp.kron(sp.identity(A.shape[0], format="csr"), sp.csr_matrix(A), format="csr")


def right_mul(B) -> sp.csr_matrix:
    """Superoperator of ``X -> X B``: ``B^T kron I``."""
    B = _square(B)
    return sp.kron(sp.csr_matrix(B.T), sp.identity(B.shape[0], format="csr"), format="csr")


def commutator(A) -> sp.csr_matrix:
    return (left_mul(A) - right_mul(A)).tocsr()


def lindblad_dissipator(F) -> sp.csr_matrix:
    """``F X F^dag - 1/2 {F^dag F, X}`` as a ``d^2 x d^2`` matrix."""
    F = _square(F, "jump operator")
    FdF = F.conj().T @ F
    out = sp.kron(sp.csr_matrix(F.conj()), sp.csr_matrix(F)) - 0.5 * (left_mul(FdF) + right_mul(FdF))
    return sp.csr_matrix(out)


@dataclass
class SystemSpec:
    """System Hamiltonian, optionally with time-dependent terms.

    ``H(t) = H + sum_k f_k(t) H_k`` for ``terms = [(H_k, f_k), ...]``; each
    ``f_k`` returns a real scalar.
    """

    H: np.ndarray
    terms: list = field(default_factory=list)

    def __post_init__(self):
        self.H = _square(self.H, "Hamiltonian")
        if np.max(np.abs(self.H - self.H.conj().T), initial=0.0) > HERMITIAN_TOL:
            raise LiouvillianError("system Hamiltonian must be Hermitian")
        terms = []
        for op, f in self.terms:
            op = _square(op, "Hamiltonian term")
            if op.shape != self.H.shape:
                raise LiouvillianError("time-dependent term does not match the system dimension")
            if np.max(np.abs(op - op.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise LiouvillianError("time-dependent Hamiltonian terms must be Hermitian")
            terms.append((op, f))
        self.terms = terms

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def time_dependent(self) -> bool:
        return bool(self.terms)

    def hamiltonian(self, t: float) -> np.ndarray:
        H = self.H.copy()
        for op, f in self.terms:
            H = H + f(t) * op
        return H


@dataclass
class HeomMatrix:
    """Assembled generator acting on the stacked ADO vector.

    ``data`` holds every time-independent part. For time-dependent systems
    ``td_terms`` keeps ``(f_k, -i[H_k, .])`` pairs applied block-wise.
    """

    data: sp.csr_matrix
    parity: Parity
    space: HierarchySpace
    dim: int
    baths: tuple = ()
    td_terms: list = field(default_factory=list)

    @property
    def time_dependent(self) -> bool:
        return bool(self.td_terms)

    @property
    def n_ados(self) -> int:
        return len(self.space)

    @property
    def shape(self):
        return self.data.shape

    def __matmul__(self, x):
        return apply(self, x, 0.0)

    def at(self, t: float) -> sp.csr_matrix:
        """Full sparse generator at time ``t``."""
        if not self.td_terms:
            return self.data
        eye = sp.identity(self.n_ados, format="csr")
        out = self.data
        for f, L in self.td_terms:
            out = out + f(t) * sp.kron(eye, L, format="csr")
        return out.tocsr()


def apply(M: HeomMatrix, x, t: float = 0.0) -> np.ndarray:
    """``M(t) @ x``; time-dependent system terms are re-weighted at ``t``."""
    x = np.asarray(x)
    out = M.data @ x
    if M.td_terms:
        d2 = M.dim * M.dim
        X = x.reshape(M.n_ados, d2)
        for f, L in M.td_terms:
            out = out + f(t) * (L @ X.T).T.reshape(-1)
    return out


# ---------------------------------------------------------------------------
# Assembly


class _Registry:
    """Distinct d^2 x d^2 superoperators, keyed for deterministic ordering."""

    def __init__(self):
        self.keys = {}
        self.mats = []

    def index(self, key, builder):
        idx = self.keys.get(key)
        if idx is None:
            idx = len(self.mats)
            self.keys[key] = idx
            self.mats.append(sp.csr_matrix(builder()))
        return idx


def _flat_exponents(baths):
    bos, fer = [], []
    for bi, bath in enumerate(baths):
        for k, e in enumerate(bath.exponents):
            (bos if bath.flavor is Flavor.BOSONIC else fer).append((bi, k, e))
    return bos, fer


def _check_space(space, bos, fer):
    if space.K_b != len(bos) or space.K_f != len(fer):
        raise LiouvillianError(
            f"space was built for K_b={space.K_b}, K_f={space.K_f} but the baths "
            f"provide {len(bos)} bosonic and {len(fer)} fermionic exponents"
        )
    if space.bosonic and any(a is not b for a, b in zip(space.bosonic, [e for _, _, e in bos])):
        if [(e.coeff, e.rate) for e in space.bosonic] != [(e.coeff, e.rate) for _, _, e in bos]:
            raise LiouvillianError("space was built from different bosonic exponents")


def _block_entries(space, rows, ops):
    """Coupling entries for the ADO rows in ``rows``.

    Returns a list of ``(row, col, op_slot, coeff)`` tuples where ``op_slot``
    indexes ``ops`` (a tuple of per-exponent superoperator slots).
    """
    fer_terms, bos_terms, p = ops
    out = []
    keys = space.keys
    for a in rows:
        j, q = keys[a]
        n = len(q)
        for nb in space.neighbors(a):
            if nb.direction is Direction.UP_F:
                # -i A_{q'} rho_{q + q'}; target sits at level n + 1
                lslot, rslot, _, _, _, _ = fer_terms[nb.exponent]
                s = nb.factor
                out.append((a, nb.flat, lslot, -1j * s * p))
                out.append((a, nb.flat, rslot, -1j * s * (-1) ** (n + 1)))
            elif nb.direction is Direction.DOWN_F:
                # -i (-1)^{n-w} C_{q_w} rho_{q - q_w}; target at level n - 1
                _, _, lslot, rslot, eta, eta_bar = fer_terms[nb.exponent]
                s = nb.factor
                out.append((a, nb.flat, lslot, -1j * s * p * eta))
                out.append((a, nb.flat, rslot, 1j * s * (-1) ** (n - 1) * np.conj(eta_bar)))
            elif nb.direction is Direction.UP_B:
                cslot, _, _ = bos_terms[nb.exponent]
                out.append((a, nb.flat, cslot, -1j))
            else:
                _, lslot, rslot_coeff = bos_terms[nb.exponent]
                rslot, cl, cr = rslot_coeff
                c = nb.factor
                out.append((a, nb.flat, lslot, -1j * c * cl))
                out.append((a, nb.flat, rslot, -1j * c * cr))
    return out


def _decays(space, bos, fer):
    brate = [e.rate for _, _, e in bos]
    frate = [e.rate for _, _, e in fer]
    return np.array([sum(brate[k] for k in j) + sum(frate[k] for k in q)
                     for j, q in space.keys], dtype=complex)


def _resolve_threads(threads):
    if threads is None:
        threads = int(os.environ.get("HEOM_THREADS", "1") or 1)
    return max(1, int(threads))


def build_heomls(system, baths: Sequence[BathSpec], space: HierarchySpace,
                 parity: Parity = Parity.EVEN, threads: int | None = None) -> HeomMatrix:
    """Assemble the HEOM generator.

    Parameters
    ----------
    system : SystemSpec or (d, d) array
    baths : sequence of BathSpec
        Exponent ids are assigned bath by bath in list order, separately for
        the bosonic and fermionic baths; ``space`` must use the same order.
    space : HierarchySpace
    parity : Parity
        ``ODD`` builds the generator for odd-parity operators such as
        ``d rho``; it requires at least one fermionic bath.
    threads : int, optional
        Worker threads for the entry generation (``HEOM_THREADS`` when
        omitted). The result does not depend on it.
    """
    if not isinstance(system, SystemSpec):
        system = SystemSpec(system)
    parity = Parity(parity) if not isinstance(parity, Parity) else parity
    d = system.dim
    d2 = d * d
    for b in baths:
        if b.dim != d:
            raise LiouvillianError(f"coupling operator of dimension {b.dim} does not match d={d}")
    bos, fer = _flat_exponents(baths)
    _check_space(space, bos, fer)
    if parity is Parity.ODD and not fer:
        raise LiouvillianError("the odd-parity sector is only meaningful with a fermionic bath")
    p = parity.sign

    reg = _Registry()
    fer_terms = []
    for bi, k, e in fer:
        bath = baths[bi]
        dop = bath.coupling_op
        ddag = dop.conj().T
        # nu = +1 -> d^nu = d^dag, d^{nu bar} = d
        d_nu, d_bar = (ddag, dop) if e.nu == 1 else (dop, ddag)
        kb = (bi, e.nu)
        a_l = reg.index(("L", bi, -e.nu), lambda: left_mul(d_bar))
        a_r = reg.index(("R", bi, -e.nu), lambda: right_mul(d_bar))
        c_l = reg.index(("L", bi, e.nu), lambda: left_mul(d_nu))
        c_r = reg.index(("R", bi, e.nu), lambda: right_mul(d_nu))
        partner = bath.exponents[bath.partner(k)]
        fer_terms.append((a_l, a_r, c_l, c_r, e.coeff, partner.coeff))
    bos_terms = []
    for bi, k, e in bos:
        V = baths[bi].coupling_op
        comm = reg.index(("C", bi), lambda: commutator(V))
        vl = reg.index(("L", bi, 0), lambda: left_mul(V))
        vr = reg.index(("R", bi, 0), lambda: right_mul(V))
        xi = e.coeff
        if e.part is Part.REAL:
            cl, cr = xi, -xi
        elif e.part is Part.IMAG:
            cl, cr = 1j * xi, 1j * xi
        else:
            cl, cr = xi, -np.conj(xi)
        bos_terms.append((comm, vl, (vr, cl, cr)))

    N = len(space)
    threads = _resolve_threads(threads)
    chunk = max(1, -(-N // (threads * 4)))
    chunks = [range(s, min(N, s + chunk)) for s in range(0, N, chunk)]
    ops = (fer_terms, bos_terms, p)
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(lambda r: _block_entries(space, r, ops), chunks))
    else:
        parts = [_block_entries(space, r, ops) for r in chunks]
    entries = [e for part in parts for e in part]

    # system + decay on the block diagonal
    Ls = -1j * commutator(system.H)
    eye_n = sp.identity(N, format="csr")
    total = sp.kron(eye_n, Ls, format="csr")
    total = total - sp.kron(sp.diags(_decays(space, bos, fer)), sp.identity(d2), format="csr")
    if entries:
        rows = np.fromiter((e[0] for e in entries), dtype=np.int64, count=len(entries))
        cols = np.fromiter((e[1] for e in entries), dtype=np.int64, count=len(entries))
        slots = np.fromiter((e[2] for e in entries), dtype=np.int64, count=len(entries))
        vals = np.fromiter((e[3] for e in entries), dtype=complex, count=len(entries))
        for s, S in enumerate(reg.mats):
            sel = slots == s
            if not np.any(sel):
                continue
            P = sp.coo_matrix((vals[sel], (rows[sel], cols[sel])), shape=(N, N)).tocsr()
            P.sum_duplicates()
            total = total + sp.kron(P, S, format="csr")
    total = sp.csr_matrix(total)
    total.sum_duplicates()
    total.eliminate_zeros()
    total.sort_indices()

    td = [(f, (-1j * commutator(op)).tocsr()) for op, f in system.terms]
    return HeomMatrix(total, parity, space.with_parity(parity), d, tuple(baths), td)


def add_lindblad(M: HeomMatrix, F) -> HeomMatrix:
    """Add ``F . F^dag - 1/2 {F^dag F, .}`` to every ADO block.

    Scale ``F`` by the square root of the rate before calling. The ADO space
    is unchanged.
    """
    F = _square(F, "jump operator")
    if F.shape[0] != M.dim:
        raise LiouvillianError(f"jump operator of dimension {F.shape[0]} does not match d={M.dim}")
    D = lindblad_dissipator(F)
    data = (M.data + sp.kron(sp.identity(M.n_ados, format="csr"), D, format="csr")).tocsr()
    data.sum_duplicates()
    data.eliminate_zeros()
    data.sort_indices()
    return HeomMatrix(data, M.parity, M.space, M.dim, M.baths, list(M.td_terms))


def export_coo(M, path) -> None:
    """Write ``row col re im`` lines (0-based, ``%.17g``) for every stored entry."""
    A = M.data if isinstance(M, HeomMatrix) else sp.csr_matrix(M)
    coo = A.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            fh.write("%d %d %.17g %.17g\n" % (r, c, v.real, v.imag))

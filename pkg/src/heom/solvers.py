"""
Time evolution, propagators and linear solves on the stacked ADO vector.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.sparse import linalg as spla

from .hierarchy import HierarchySpace, Parity
from .liouvillian import HeomMatrix, apply, unvectorize, vectorize

__all__ = [
    "SolverError",
    "StiffnessError",
    "MultiplicityError",
    "ResidualError",
    "AdosVector",
    "SolveReport",
    "evolve_ode",
    "evolve_expm",
    "sparse_expm",
    "steadystate",
    "shifted_solve",
    "trace_row",
]

# The generator is close to structurally symmetric, so a minimum-degree
# ordering of A + A^T keeps LU fill far below the COLAMD default.
DEFAULT_ORDERING = "MMD_AT_PLUS_A"


class SolverError(RuntimeError):
    """A solve failed; ``report`` carries what was achieved."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StiffnessError(SolverError):
    pass


class MultiplicityError(SolverError):
    """The constrained steady-state system is singular."""


class ResidualError(SolverError):
    """An iterative solve stopped above its tolerance."""


@dataclass
class AdosVector:
    """Stacked, column-vectorised ADOs.

    Block ``a`` (entries ``a*d^2 .. (a+1)*d^2``) belongs to the ADO with flat
    index ``a`` in ``space``.
    """

    data: np.ndarray
    space: HierarchySpace
    dim: int
    parity: Parity = Parity.EVEN

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=complex).reshape(-1)
        if self.data.size != len(self.space) * self.dim**2:
            raise ValueError(
                f"vector length {self.data.size} does not match {len(self.space)} ADOs "
                f"of dimension {self.dim}"
            )

    @classmethod
    def from_density(cls, rho, space: HierarchySpace, parity: Parity = Parity.EVEN):
        """Separable initial condition: ``rho`` in the root block, zeros elsewhere."""
        rho = np.asarray(rho, dtype=complex)
        d = rho.shape[0]
        data = np.zeros(len(space) * d * d, dtype=complex)
        data[: d * d] = vectorize(rho)
        return cls(data, space, d, parity)

    @property
    def n_ados(self) -> int:
        return len(self.space)

    def blocks(self) -> np.ndarray:
        """``(n_ados, d^2)`` view, one vectorised ADO per row."""
        return self.data.reshape(self.n_ados, self.dim**2)

    def block(self, key) -> np.ndarray:
        """ADO ``key`` (flat index or ``(j, q)`` label) as a ``d x d`` matrix."""
        flat = key if isinstance(key, (int, np.integer)) else self.space.index_of(key)
        return unvectorize(self.blocks()[flat], self.dim)

    @property
    def root(self) -> np.ndarray:
        return self.block(0)


@dataclass
class SolveReport:
    method: str
    steps: int = 0
    residual: float = float("nan")
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)


def _as_matrix(M) -> HeomMatrix:
    if not isinstance(M, HeomMatrix):
        raise TypeError("expected a HeomMatrix")
    return M


def _check_times(t_list):
    t = np.asarray(t_list, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_list must be a non-empty 1-d sequence")
    if np.any(np.diff(t) <= 0):
        raise ValueError("t_list must be strictly increasing")
    return t


# ---------------------------------------------------------------------------
# Time evolution


def evolve_ode(M, ados0: AdosVector, t_list, rtol=1e-8, atol=1e-10, method="DOP853",
               max_step=np.inf):
    """Integrate ``dx/dt = M(t) x`` with an adaptive explicit Runge-Kutta method.

    Parameters
    ----------
    M : HeomMatrix
        May carry time-dependent system terms.
    ados0 : AdosVector
        State at ``t_list[0]``.
    t_list : array_like
        Strictly increasing output times.
    rtol, atol : float
        Integrator tolerances.
    method : {"DOP853", "RK45", "RK23"}

    Returns
    -------
    states : list of AdosVector
    report : SolveReport

    Raises
    ------
    StiffnessError
        If the step size underflows.
    """
    M = _as_matrix(M)
    t = _check_times(t_list)
    start = time.perf_counter()
    if t.size == 1:
        return [AdosVector(ados0.data.copy(), ados0.space, ados0.dim, ados0.parity)], \
            SolveReport(method, 0, 0.0, 0.0)

    def rhs(tt, y):
        return apply(M, y, tt)

    sol = solve_ivp(rhs, (t[0], t[-1]), ados0.data, method=method, t_eval=t,
                    rtol=rtol, atol=atol, max_step=max_step)
    report = SolveReport(method, int(sol.nfev), float("nan"), time.perf_counter() - start,
                         {"message": sol.message})
    if sol.status != 0:
        msg = str(sol.message)
        if "step size" in msg.lower():
            raise StiffnessError(
                f"step size underflow near t={sol.t[-1] if sol.t.size else t[0]:.6g}: "
                "the problem looks stiff; use evolve_expm or lower the hierarchy tiers",
                report,
            )
        raise SolverError(f"integration failed: {msg}", report)
    states = [AdosVector(sol.y[:, k], ados0.space, ados0.dim, ados0.parity) for k in range(t.size)]
    return states, report


def _drop(A, tol):
    A = A.tocsr()
    if tol > 0 and A.nnz:
        A.data[np.abs(A.data) < tol] = 0
    A.eliminate_zeros()
    return A


def _maxabs(X) -> float:
    if sp.issparse(X):
        return float(np.abs(X.data).max()) if X.nnz else 0.0
    return float(np.abs(X).max())


def sparse_expm(A, drop_tol=1e-14, max_fill=0.25):
    """``exp(A)`` by scaling and squaring with a Taylor core.

    Entries below ``drop_tol`` (relative to the largest entry) are dropped
    after every product, and the computation switches to dense arrays once
    the fill exceeds ``max_fill``.
    Returns a CSR matrix or a dense ndarray.
    """
    A = sp.csr_matrix(A, dtype=complex)
    n = A.shape[0]
    eye = sp.identity(n, dtype=complex, format="csr")
    if A.nnz == 0:
        return eye
    A2 = A @ A
    A2.eliminate_zeros()
    if A2.nnz == 0:
        # nilpotent of index 2: the series terminates
        return (eye + A).tocsr()
    norm = spla.norm(A, 1)
    s = max(0, int(math.ceil(math.log2(norm / 0.5)))) if norm > 0.5 else 0
    B = A / (2**s)
    scale = max(np.abs(B.data).max(), 1.0)
    tol = drop_tol * scale
    dense = False

    def densify(X):
        return X.toarray() if sp.issparse(X) else X

    result = eye.copy()
    term = eye.copy()
    for k in range(1, 40):
        term = term @ B / k
        if sp.issparse(term):
            term = _drop(term, tol)
            if term.nnz > max_fill * n * n:
                dense = True
        if dense:
            term, result, B = densify(term), densify(result), densify(B)
        result = result + term
        if _maxabs(term) <= 1e-17 * _maxabs(result):
            break
    for _ in range(s):
        result = result @ result
        if sp.issparse(result):
            result = _drop(result, tol)
            if result.nnz > max_fill * n * n:
                result = result.toarray()
    return result.tocsr() if sp.issparse(result) else result


def evolve_expm(M, ados0: AdosVector, t_list, drop_tol=1e-14, max_fill=0.25):
    """Propagate with ``P = exp(M dt)`` on a uniform time grid."""
    M = _as_matrix(M)
    if M.time_dependent:
        raise ValueError("evolve_expm needs a time-independent generator; use evolve_ode")
    t = np.asarray(t_list, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_list must be a non-empty 1-d sequence")
    start = time.perf_counter()
    states = [AdosVector(ados0.data.copy(), ados0.space, ados0.dim, ados0.parity)]
    if t.size == 1:
        return states, SolveReport("expm", 0, 0.0, time.perf_counter() - start)
    steps = np.diff(t)
    dt = steps[0]
    if dt < 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12):
        raise ValueError("evolve_expm needs a uniformly spaced, non-decreasing t_list")
    P = sparse_expm(M.data * dt, drop_tol=drop_tol, max_fill=max_fill)
    x = ados0.data
    for _ in range(t.size - 1):
        x = P @ x
        states.append(AdosVector(x, ados0.space, ados0.dim, ados0.parity))
    nnz = P.nnz if sp.issparse(P) else int(np.count_nonzero(P))
    report = SolveReport("expm", t.size - 1, 0.0, time.perf_counter() - start,
                         {"propagator_nnz": nnz, "dense": not sp.issparse(P)})
    return states, report


# ---------------------------------------------------------------------------
# Linear solves


def trace_row(dim: int, size: int) -> sp.csr_matrix:
    """``1 x size`` functional returning the trace of the root block."""
    cols = np.arange(dim) * (dim + 1)
    return sp.csr_matrix((np.ones(dim), (np.zeros(dim, dtype=int), cols)), shape=(1, size))


def _residual(A, x, b=None):
    r = A @ x if b is None else A @ x - b
    denom = np.abs(x).max() if b is None else np.abs(b).max()
    return float(np.abs(r).max() / denom) if denom > 0 else float(np.abs(r).max())


def _ilu(A, drop_tol, fill_factor, ordering):
    # dropped entries can leave an exactly zero pivot; tighten and retry
    A = A.tocsc()
    for tol in (drop_tol, drop_tol * 1e-2, 0.0):
        try:
            return spla.spilu(A, drop_tol=tol, fill_factor=fill_factor, permc_spec=ordering)
        except RuntimeError as exc:
            last = exc
    raise SolverError(f"incomplete LU failed even without dropping: {last}",
                      SolveReport("gmres"))


def _iterative(A, b, tol, restart, maxiter, drop_tol, fill_factor, ordering=DEFAULT_ORDERING):
    ilu = _ilu(A, drop_tol, fill_factor, ordering)
    pre = spla.LinearOperator(A.shape, ilu.solve, dtype=complex)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = spla.gmres(A, b, M=pre, rtol=tol, atol=0.0, restart=restart, maxiter=maxiter,
                         callback=cb, callback_type="pr_norm")
    return x, info, count[0]


def steadystate(M, method="direct", tol=1e-12, restart=50, maxiter=500,
                ilu_drop_tol=1e-6, ilu_fill_factor=20.0, ordering=DEFAULT_ORDERING):
    """Stationary ADOs with unit trace of the reduced density operator.

    The equation for the ``(0, 0)`` element of the root block is replaced by
    the trace constraint.

    Parameters
    ----------
    M : HeomMatrix
        Even-parity, time-independent generator.
    method : {"direct", "gmres"}
        Sparse LU, or restarted GMRES preconditioned with an incomplete LU.
    ordering : str
        Column ordering passed to SuperLU (both the full and the incomplete LU).

    Returns
    -------
    AdosVector, SolveReport
        ``report.residual`` is ``||M x||_inf / ||x||_inf`` of the returned
        vector.
    """
    M = _as_matrix(M)
    if M.parity is not Parity.EVEN:
        raise ValueError("steady states live in the even-parity sector")
    if M.time_dependent:
        raise ValueError("steadystate needs a time-independent generator")
    start = time.perf_counter()
    n = M.shape[0]
    keep = np.ones(n)
    keep[0] = 0.0
    A = (sp.diags(keep) @ M.data + sp.csr_matrix(
        (np.ones(1), (np.zeros(1, dtype=int), np.zeros(1, dtype=int))), shape=(n, 1))
        @ trace_row(M.dim, n)).tocsc()
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    steps = 0
    if method == "direct":
        try:
            x = spla.splu(A, permc_spec=ordering).solve(b)
        except RuntimeError as exc:
            raise MultiplicityError(
                f"constrained steady-state system is singular ({exc}); "
                "the stationary state is not unique", SolveReport("direct")) from exc
    elif method == "gmres":
        x, info, steps = _iterative(A, b, tol, restart, maxiter, ilu_drop_tol, ilu_fill_factor,
                                     ordering)
        if info != 0:
            report = SolveReport("gmres", steps, _residual(A, x, b), time.perf_counter() - start)
            raise ResidualError(f"GMRES stopped at residual {report.residual:.3e}", report)
    else:
        raise ValueError(f"unknown method {method!r}")
    if not np.all(np.isfinite(x)):
        raise MultiplicityError("steady-state solve produced non-finite values; "
                                "the stationary state is not unique", SolveReport(method))
    report = SolveReport(method, steps, _residual(M.data, x), time.perf_counter() - start)
    if report.residual > 1e-6:
        raise MultiplicityError(
            f"steady-state residual {report.residual:.3e}: the constrained system is "
            "numerically singular (degenerate stationary states?)", report)
    return AdosVector(x, M.space, M.dim, Parity.EVEN), report


def shifted_solve(M, omega: float, sign: int, b, method="direct", tol=1e-12,
                  restart=50, maxiter=500, ilu_drop_tol=1e-6, ilu_fill_factor=20.0,
                  ordering=DEFAULT_ORDERING):
    """Solve ``(M + sign * i * omega) x = b``.

    Returns ``(x, report)``; raises :class:`SolverError` if the relative
    residual ``||A x - b||_inf / ||b||_inf`` exceeds ``1e-8``.
    """
    M = _as_matrix(M)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    b = np.asarray(b, dtype=complex)
    n = M.shape[0]
    if b.shape != (n,):
        raise ValueError(f"right-hand side has length {b.size}, expected {n}")
    start = time.perf_counter()
    A = (M.data + (sign * 1j * omega) * sp.identity(n, format="csr")).tocsc()
    steps = 0
    if method == "direct":
        try:
            x = spla.splu(A, permc_spec=ordering).solve(b)
        except RuntimeError as exc:
            raise SolverError(f"shifted system singular at omega={omega}: {exc}",
                              SolveReport("direct")) from exc
    elif method == "gmres":
        x, info, steps = _iterative(A, b, tol, restart, maxiter, ilu_drop_tol, ilu_fill_factor,
                                     ordering)
    else:
        raise ValueError(f"unknown method {method!r}")
    report = SolveReport(method, steps, _residual(A, x, b), time.perf_counter() - start)
    if not np.isfinite(report.residual) or report.residual > 1e-8:
        raise SolverError(f"shifted solve at omega={omega} reached residual "
                          f"{report.residual:.3e}", report)
    return x, report

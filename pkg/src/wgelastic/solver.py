"""Solvers for the symmetric positive definite WG systems.

Three routes share :func:`solve_spd`:

``cg``
    Jacobi-preconditioned conjugate gradients on the assembled matrix.
``direct``
    Sparse LU of the assembled matrix with iterative refinement.
``mixed``
    Interior DOFs are eliminated cell by cell (they couple only through the
    block-diagonal stabilizer), and the facet problem is solved in the
    equivalent saddle-point form with ``p = (lam+mu) div_w u``.  That form
    stays well conditioned as ``lam`` grows.  Small problems use sparse LU,
    large ones MINRES with an algebraic multigrid block preconditioner.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import SparseSystem

log = logging.getLogger(__name__)

METHODS = ("auto", "cg", "direct", "mixed", "mixed-direct", "mixed-minres")
# condensed saddle-point systems above this size go to MINRES
DIRECT_LIMIT = 60_000


class SolverError(RuntimeError):
    """Base class for solver failures.

    Carries the final :class:`SolveReport` and, when one exists, the last
    iterate (over the free DOFs), e.g. for inspecting a solve that stalled at
    the floating-point floor of the residual.
    """

    def __init__(self, message: str, report: "SolveReport | None" = None,
                 solution: np.ndarray | None = None):
        super().__init__(message)
        self.report = report
        self.solution = solution


class ConvergenceError(SolverError):
    """Iteration limit reached before the residual tolerance."""


class IndefiniteSystemError(SolverError):
    """CG met a direction of non-positive curvature; the matrix is not SPD."""


@dataclass
class SolveReport:
    method: str
    iterations: int | str
    residual: float  # relative residual used for the acceptance test
    tolerance: float
    wall_time: float
    matrix_residual: float | None = None  # relative residual of the assembled system, when computed

    @property
    def converged(self) -> bool:
        return self.residual <= self.tolerance


def _relres(r: np.ndarray, b: np.ndarray) -> float:
    nb = np.linalg.norm(b)
    nr = np.linalg.norm(r)
    return float(nr / nb) if nb > 0 else float(nr)


def pcg_jacobi(A, b: np.ndarray, tol: float = 1e-12, max_iter: int | None = None):
    """Jacobi-preconditioned CG.  Returns ``(x, iterations, relative residual)``."""
    A = sp.csr_matrix(A)
    n = b.size
    max_iter = 20 * n if max_iter is None else max_iter
    x = np.zeros(n)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x, 0, 0.0
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise IndefiniteSystemError("non-positive diagonal entry")
    minv = 1.0 / diag
    r = b.copy()
    z = minv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = A @ p
        curv = p @ Ap
        if curv <= 0:
            raise IndefiniteSystemError(f"breakdown at iteration {it}: p'Ap = {curv:.3e}")
        alpha = rz / curv
        x += alpha * p
        r -= alpha * Ap
        if np.linalg.norm(r) <= tol * nb:
            # confirm with the true residual
            rel = _relres(b - A @ x, b)
            if rel <= tol:
                return x, it, rel
            r = b - A @ x
        z = minv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, max_iter, _relres(b - A @ x, b)


def _direct(A, b, tol, max_refine=5):
    A = sp.csc_matrix(A)
    lu = spla.splu(A)
    x = lu.solve(b)
    rel = _relres(b - A @ x, b)
    steps = 0
    while rel > tol and steps < max_refine:
        x_new = x + lu.solve(b - A @ x)
        rel_new = _relres(b - A @ x_new, b)
        steps += 1
        if rel_new >= rel:
            break
        x, rel = x_new, rel_new
    return x, rel


def _block_inverse(A00: sp.spmatrix, m: int) -> sp.bsr_matrix:
    """Invert a block-diagonal matrix with dense ``m x m`` blocks."""
    n = A00.shape[0]
    nb = n // m
    coo = sp.coo_matrix(A00)
    if np.any(coo.row // m != coo.col // m):
        raise SolverError("interior block is not block diagonal")
    blocks = np.zeros((nb, m, m))
    np.add.at(blocks, (coo.row // m, coo.row % m, coo.col % m), coo.data)
    inv = np.linalg.inv(blocks)
    return sp.bsr_matrix((inv, np.arange(nb), np.arange(nb + 1)), shape=(n, n))


@dataclass
class CondensedSystem:
    """Facet-only saddle-point system obtained by static condensation."""

    S: sp.csr_matrix  # condensed base block over free facet DOFs
    Bb: sp.csr_matrix  # weak divergence on free facet DOFs
    vol: np.ndarray
    kappa: float
    rb: np.ndarray  # condensed right-hand side
    q: np.ndarray  # divergence offset of the Dirichlet lift
    n_int: int
    A00_inv: sp.bsr_matrix
    A0b: sp.csr_matrix
    r0: np.ndarray

    def saddle_matrix(self) -> sp.csr_matrix:
        D = sp.diags(self.vol)
        return sp.bmat([[self.S, self.Bb.T @ D], [D @ self.Bb, -D / self.kappa]], format="csr")

    def saddle_rhs(self) -> np.ndarray:
        return np.concatenate([self.rb, -self.vol * self.q])

    def saddle_apply(self, y: np.ndarray) -> np.ndarray:
        nb = self.S.shape[0]
        xb, p = y[:nb], y[nb:]
        top = self.S @ xb + self.Bb.T @ (self.vol * p)
        bot = self.vol * (self.Bb @ xb) - self.vol * p / self.kappa
        return np.concatenate([top, bot])

    def recover(self, xb: np.ndarray) -> np.ndarray:
        x0 = self.A00_inv @ (self.r0 - self.A0b @ xb)
        return np.concatenate([x0, xb])


def condense(system: SparseSystem) -> CondensedSystem:
    """Eliminate the cell-interior DOFs of a system with mixed-form structure."""
    dm = system.dof_map
    d = dm.dim
    m = d * (d + 1)
    n_int = dm.n_interior
    # interior DOFs are never constrained and come first in the free ordering
    if not np.array_equal(dm.free[:n_int], np.arange(n_int)):
        raise SolverError("unexpected DOF layout for condensation")
    A = system.base
    A00 = A[:n_int, :n_int]
    A0b = A[:n_int, n_int:].tocsr()
    Ab0 = A[n_int:, :n_int].tocsr()
    Abb = A[n_int:, n_int:].tocsr()
    A00_inv = _block_inverse(A00, m)
    S = Abb - Ab0 @ (A00_inv @ A0b)
    S = sp.csr_matrix(0.5 * (S + S.T))
    r = system.rhs_base
    r0 = r[:n_int]
    rb = r[n_int:] - Ab0 @ (A00_inv @ r0)
    Bb = system.div[:, n_int:].tocsr()
    return CondensedSystem(S, Bb, system.cell_volume, system.kappa, rb, system.div_offset,
                           n_int, A00_inv, A0b, r0)


def pminres(apply_A, b: np.ndarray, apply_M, rtol: float, max_iter: int, x0=None):
    """Preconditioned MINRES for symmetric ``A`` and SPD preconditioner ``M``.

    Stops when the ``M^{-1}``-norm of the residual drops below ``rtol`` times
    its initial value.  Unlike ``scipy.sparse.linalg.minres`` there is no
    test scaled by ``|A| |x|``, which fires prematurely when the solution
    blocks differ in magnitude by many orders (pressure ~ lam * displacement).

    Returns ``(x, iterations)``.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    v = b - apply_A(x) if x0 is not None else b.copy()
    z = apply_M(v)
    gamma = np.sqrt(max(z @ v, 0.0))
    if gamma == 0.0:
        return x, 0
    v_old = np.zeros_like(b)
    w_old = np.zeros_like(b)
    w = np.zeros_like(b)
    gamma_old = 1.0
    eta = beta0 = gamma
    c_old = c = 1.0
    s_old = s = 0.0
    for it in range(1, max_iter + 1):
        z /= gamma
        Az = apply_A(z)
        delta = Az @ z
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = apply_M(v_new)
        gamma_new = np.sqrt(max(z_new @ v_new, 0.0))
        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        c_new, s_new = a0 / a1, gamma_new / a1
        w_new = (z - a3 * w_old - a2 * w) / a1
        x += (c_new * eta) * w_new
        eta = -s_new * eta
        v_old, v, z = v, v_new, z_new
        gamma_old, gamma = gamma, gamma_new
        c_old, c, s_old, s = c, c_new, s, s_new
        w_old, w = w, w_new
        if abs(eta) <= rtol * beta0 or gamma == 0.0:
            return x, it
    return x, max_iter


def _amg_block(S: sp.csr_matrix, d: int):
    """Smoothed-aggregation V-cycle for the condensed displacement block.

    The condensed block never couples different displacement components, so
    one scalar hierarchy is built and applied to each component; a vector
    hierarchy with rigid translations as near-null space is the fallback.
    """
    import pyamg

    S = sp.csr_matrix(S)
    coo = S.tocoo()
    if not np.any(coo.row % d != coo.col % d):
        scalar = S[0::d, 0::d].tocsr()
        same = all(abs(S[c::d, c::d] - scalar).max() <= 1e-14 * abs(scalar).max() for c in range(1, d))
        if same:
            ml = pyamg.smoothed_aggregation_solver(scalar, max_coarse=500).aspreconditioner(cycle="V")

            def apply(v):
                V = v.reshape(-1, d)
                return np.column_stack([ml @ V[:, c] for c in range(d)]).ravel()

            return spla.LinearOperator(S.shape, matvec=apply, dtype=float)
    B = np.kron(np.ones((S.shape[0] // d, 1)), np.eye(d))
    ml = pyamg.smoothed_aggregation_solver(S, B=B, max_coarse=500)
    return ml.aspreconditioner(cycle="V")


def _solve_condensed_direct(cs: CondensedSystem, tol: float):
    K = cs.saddle_matrix().tocsc()
    rhs = cs.saddle_rhs()
    lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                   options={"SymmetricMode": True})
    y = lu.solve(rhs)
    rel = _relres(rhs - K @ y, rhs)
    steps = 0
    while rel > tol and steps < 5:
        y_new = y + lu.solve(rhs - K @ y)
        rel_new = _relres(rhs - K @ y_new, rhs)
        steps += 1
        if rel_new >= rel:
            break
        y, rel = y_new, rel_new
    return y, "direct", rel


def _solve_condensed_minres(cs: CondensedSystem, tol: float, max_iter: int, mu: float, d: int,
                            inner_rtol: float | None = None, max_outer: int = 12):
    nb = cs.S.shape[0]
    rhs = cs.saddle_rhs()
    # one long sweep beats many restarted short ones; refinement is the safety net
    inner_rtol = 1e-2 * tol if inner_rtol is None else inner_rtol
    amg = _amg_block(cs.S, d)
    pdiag = 1.0 / ((1.0 / mu + 1.0 / cs.kappa) * cs.vol)

    def prec(y):
        return np.concatenate([amg @ y[:nb], pdiag * y[nb:]])

    n = nb + cs.vol.size
    y = np.zeros(n)
    total = 0
    rel = 1.0
    # each sweep solves for a correction against the true residual, so rounding
    # in the MINRES recurrences cannot stall the final accuracy
    for _ in range(max_outer):
        r = rhs - cs.saddle_apply(y)
        rel = _relres(r, rhs)
        log.debug("minres: %d iterations, relative residual %.3e", total, rel)
        remaining = max_iter - total
        if rel <= tol or remaining <= 0:
            break
        dy, its = pminres(cs.saddle_apply, r, prec, inner_rtol, remaining)
        total += its
        y += dy
    else:
        rel = _relres(rhs - cs.saddle_apply(y), rhs)
    return y, total, rel


def solve_spd(system: SparseSystem, tol: float = 1e-12, max_iter: int | None = None,
              method: str = "auto"):
    """Solve ``system`` to relative residual ``tol``.

    Returns ``(x, report)`` with ``x`` over the free DOFs.  For the mixed
    routes ``report.residual`` is measured on the saddle-point form, whose
    residual stays computable in double precision for any ``lam``;
    ``report.matrix_residual`` holds the residual of the assembled matrix.

    Raises
    ------
    ConvergenceError
        The tolerance was not met within ``max_iter`` iterations.
    IndefiniteSystemError
        CG broke down on a non-positive curvature direction.
    """
    if not 0 < tol < 1:
        raise ValueError(f"tolerance must lie in (0, 1), got {tol!r}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    n = system.shape[0]
    max_iter = 20 * n if max_iter is None else max_iter
    t0 = time.perf_counter()
    b = system.rhs

    if method == "auto":
        method = "mixed" if system.has_mixed_form else ("direct" if n <= DIRECT_LIMIT else "cg")

    if np.linalg.norm(b) == 0.0 and not (system.has_mixed_form and np.any(system.div_offset)):
        report = SolveReport(method, 0, 0.0, tol, time.perf_counter() - t0, 0.0)
        return np.zeros(n), report

    if method == "cg":
        x, its, rel = pcg_jacobi(system.matrix, b, tol, max_iter)
        report = SolveReport("cg", its, rel, tol, time.perf_counter() - t0, rel)
    elif method == "direct":
        x, rel = _direct(system.matrix, b, tol)
        report = SolveReport("direct", "direct", rel, tol, time.perf_counter() - t0, rel)
    else:
        if not system.has_mixed_form:
            raise ValueError("mixed solve needs a system assembled with its divergence operator")
        cs = condense(system)
        size = cs.S.shape[0] + cs.vol.size
        use_direct = method == "mixed-direct" or (method == "mixed" and size <= DIRECT_LIMIT)
        if use_direct:
            y, its, rel = _solve_condensed_direct(cs, tol)
            name = "mixed-direct"
        else:
            y, its, rel = _solve_condensed_minres(cs, tol, max_iter, system.lame[0], system.dof_map.dim)
            name = "mixed-minres"
        x = cs.recover(y[: cs.S.shape[0]])
        mres = _relres(b - system.matvec(x), b)
        report = SolveReport(name, its, rel, tol, time.perf_counter() - t0, mres)

    log.info("%s solve: n=%d iterations=%s residual=%.2e (%.2fs)", report.method, n,
             report.iterations, report.residual, report.wall_time)
    if not report.converged:
        raise ConvergenceError(
            f"{report.method} solver stopped at relative residual {report.residual:.3e} > {tol:.1e}",
            report,
            x,
        )
    return x, report

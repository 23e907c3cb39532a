"""Monotonic-ascent subroutines for the quadratic assignment subproblem.

Both heuristics maximize ``<x, A x>`` over one-to-one matchings for a
nonnegative symmetric matrix ``A``.  Neither is globally optimal (the
problem is NP-hard); :func:`psi_with_guard` wraps either one so that the
returned matching never scores below the incumbent, which is the contract
the two-block solver relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lap import AssignmentVector, reshape_to_profit, solve_lap_max
from .tensor import MatchingShape

__all__ = ["QapResult", "MpmResult", "qap_objective", "ipfp", "mpm", "psi_with_guard"]

DEFAULT_IPFP_MAX_ITER = 50
DEFAULT_MPM_MAX_ITER = 300
DEFAULT_MPM_TOL = 1e-10


@dataclass(frozen=True)
class QapResult:
    """Outcome of a quadratic assignment subroutine.

    ``objective_trace`` holds the objective of the continuous iterate after
    every inner step, when the subroutine tracks one.
    """

    assignment: AssignmentVector
    objective: float
    inner_iterations: int
    objective_trace: tuple[float, ...] = ()


class MpmResult(NamedTuple):
    vector: np.ndarray
    iterations: int
    converged: bool
    degenerate: bool


def _check_qap(A, n: int) -> np.ndarray:
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (n, n):
        raise ValueError(f"affinity matrix must be {n}x{n}, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("affinity matrix has non-finite entries")
    scale = float(A.max(initial=0.0))
    if A.size and float(A.min()) < 0.0:
        raise ValueError("affinity matrix must be nonnegative")
    if not np.allclose(A, A.T, rtol=1e-12, atol=1e-12 * (1.0 + scale)):
        raise ValueError("affinity matrix must be symmetric")
    return A


def qap_objective(A, assignment: AssignmentVector) -> float:
    """``<x, A x>`` for the assignment's indicator vector."""
    x = assignment.indicator()
    return float(x @ (np.asarray(A, dtype=np.float64) @ x))


def ipfp(A, x0: AssignmentVector, max_iter: int = DEFAULT_IPFP_MAX_ITER) -> QapResult:
    """Integer projected fixed point iteration with exact line search.

    Alternates a linear assignment on the current gradient with a
    closed-form maximization of the quadratic along the segment toward the
    projected point.  The result is the best matching among the start, every
    projected point seen, and the discretized final iterate, so the
    objective never drops below the start's.
    """
    shape = x0.shape
    A = _check_qap(A, shape.n)
    x = x0.indicator()
    best = x0
    best_obj = float(x @ (A @ x))
    trace = [best_obj]
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        g = A @ x
        b = solve_lap_max(reshape_to_profit(g, shape))
        bx = b.indicator()
        b_obj = float(bx @ (A @ bx))
        if b_obj > best_obj:
            best, best_obj = b, b_obj
        d = bx - x
        ascent = float(g @ d)  # equals <x, A d> by symmetry
        if ascent <= 0.0:
            break  # fixed point of the projection
        Ad = A @ d
        curvature = float(d @ Ad)
        if curvature >= 0.0:
            step = 1.0
        else:
            step = min(1.0, -ascent / curvature)
        x = x + step * d
        trace.append(float(x @ (A @ x)))
    final = solve_lap_max(reshape_to_profit(A @ x, shape))
    fx = final.indicator()
    final_obj = float(fx @ (A @ fx))
    if final_obj > best_obj:
        best, best_obj = final, final_obj
    return QapResult(best, best_obj, iterations, tuple(trace))


def mpm(
    A,
    shape: MatchingShape,
    x0=None,
    max_iter: int = DEFAULT_MPM_MAX_ITER,
    tol: float = DEFAULT_MPM_TOL,
) -> MpmResult:
    """Max-pooling power iteration.

    Each coordinate ``(i, a)`` is updated with its own diagonal term plus,
    for every other row ``j``, the single best partner ``max_b A[(i,a),(j,b)]
    * x[(j,b)]``; the iterate is then renormalized to unit 2-norm.  Stops
    when successive iterates differ by at most ``tol`` or after ``max_iter``
    rounds.  Returns the continuous vector; discretization is the caller's
    job.  If an update annihilates the iterate (e.g. ``A = 0``), the previous
    iterate is returned with ``degenerate=True``.
    """
    n = shape.n
    A = _check_qap(A, n)
    if x0 is None:
        x0 = np.ones(n)
    x0 = np.asarray(x0, dtype=np.float64)
    if x0.shape != (n,):
        raise ValueError(f"start vector must have length {n}, got shape {x0.shape}")
    if not np.all(np.isfinite(x0)) or np.any(x0 < 0.0):
        raise ValueError("start vector must be finite and nonnegative")
    norm0 = float(np.linalg.norm(x0))
    if norm0 == 0.0:
        raise ValueError("start vector must be nonzero")
    x = x0 / norm0
    n1, n2 = shape.n1, shape.n2
    blocks = A.reshape(n1, n2, n1, n2)
    diag = A.diagonal().reshape(n1, n2)
    rows = np.arange(n1)
    converged = False
    degenerate = False
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        xm = x.reshape(n1, n2)
        pooled = (blocks * xm[None, None, :, :]).max(axis=3)  # (n1, n2, n1)
        total = pooled.sum(axis=2)
        own = pooled[rows, :, rows]  # pooled term of the own row, replaced below
        new = (total - own + xm * diag).reshape(n)
        norm_new = float(np.linalg.norm(new))
        if norm_new == 0.0:
            degenerate = True
            break
        new = new / norm_new
        delta = float(np.linalg.norm(new - x))
        x = new
        if delta <= tol:
            converged = True
            break
    return MpmResult(x, iterations, converged, degenerate)


def psi_with_guard(
    A,
    x0: AssignmentVector,
    method: str = "ipfp",
    *,
    ipfp_max_iter: int = DEFAULT_IPFP_MAX_ITER,
    mpm_max_iter: int = DEFAULT_MPM_MAX_ITER,
    mpm_tol: float = DEFAULT_MPM_TOL,
) -> QapResult:
    """Run a QAP subroutine and enforce monotonic ascent.

    The max-pooling output is discretized by a linear assignment on the
    continuous vector.  The candidate is returned only if its objective is at
    least the incumbent's; otherwise the incumbent comes back unchanged.
    This makes either subroutine a valid ascent step.
    """
    shape = x0.shape
    A = _check_qap(A, shape.n)
    incumbent = x0.indicator()
    incumbent_obj = float(incumbent @ (A @ incumbent))
    if method == "ipfp":
        res = ipfp(A, x0, max_iter=ipfp_max_iter)
        candidate, candidate_obj = res.assignment, res.objective
        iterations = res.inner_iterations
    elif method == "mpm":
        mres = mpm(A, shape, x0.indicator(), max_iter=mpm_max_iter, tol=mpm_tol)
        candidate = solve_lap_max(reshape_to_profit(mres.vector, shape))
        cx = candidate.indicator()
        candidate_obj = float(cx @ (A @ cx))
        iterations = mres.iterations
    else:
        raise ValueError(f"unknown subroutine {method!r}, expected 'ipfp' or 'mpm'")
    if candidate_obj >= incumbent_obj:
        return QapResult(candidate, candidate_obj, iterations)
    return QapResult(x0, incumbent_obj, iterations)

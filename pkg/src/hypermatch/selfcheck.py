"""Fast invariant suite behind the ``selfcheck`` CLI command.

Each group re-derives a core guarantee from scratch (brute force where
feasible) and reports pass/fail; the whole suite runs in a few seconds.
"""

from __future__ import annotations

import itertools
from typing import NamedTuple

import numpy as np

from .bcagm import SolverConfig, TraceViolation, bcagm_psi_solve, bcagm_solve
from .lap import solve_lap_max
from .tensor import (
    LiftedOperator,
    MatchingShape,
    SparseSymmetricTensor3,
    f4_norm_exact,
    g4_form,
)

__all__ = ["CheckResult", "GROUP_NAMES", "run_selfcheck"]


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


def _random_tensor(rng, shape, orbits):
    n = shape.n
    triples = np.empty((orbits, 3), dtype=np.intp)
    for row in range(orbits):
        triples[row] = rng.choice(n, size=3, replace=False)
    return SparseSymmetricTensor3(shape, triples, rng.uniform(0.0, 1.0, size=orbits))


def _random_matching_vec(rng, shape):
    cols = rng.permutation(shape.n2)[: shape.n1]
    x = np.zeros(shape.n)
    x[np.arange(shape.n1) * shape.n2 + cols] = 1.0
    return x


def _check_identities() -> CheckResult:
    rng = np.random.default_rng(11)
    shape = MatchingShape(3, 4)
    for _ in range(5):
        tensor = _random_tensor(rng, shape, 18)
        alpha = float(rng.uniform(0.5, 2.0))
        op = LiftedOperator(tensor, alpha)
        op0 = LiftedOperator(tensor, 0.0)
        x, y, z, t = (rng.standard_normal(shape.n) for _ in range(4))
        ref = op.form(x, y, z, t)
        for perm in itertools.permutations((x, y, z, t)):
            if abs(op.form(*perm) - ref) > 1e-12 * (1.0 + abs(ref)):
                return CheckResult("multilinear-identities", False, "permutation invariance")
        m = _random_matching_vec(rng, shape)
        s4 = op0.score(m)
        if abs(s4 - 4.0 * shape.n1 * tensor.score(m)) > 1e-10 * (1.0 + abs(s4)):
            return CheckResult("multilinear-identities", False, "lifting identity")
        if abs(op.score(m) - s4 - alpha * shape.n1**2) > 1e-10 * (1.0 + abs(s4)):
            return CheckResult("multilinear-identities", False, "constant shift on matchings")
        if abs(g4_form(x, x, x, x) - float(x @ x) ** 2) > 1e-10 * (1.0 + float(x @ x) ** 2):
            return CheckResult("multilinear-identities", False, "norm-term identity")
    return CheckResult("multilinear-identities", True, "form symmetry, lifting, norm term")


def _check_block_bounds() -> CheckResult:
    rng = np.random.default_rng(23)
    shape = MatchingShape(3, 3)
    for _ in range(4):
        tensor = _random_tensor(rng, shape, 12)
        op = LiftedOperator(tensor, 3.0 * f4_norm_exact(tensor))
        for _ in range(50):
            x, y, z, t = (rng.standard_normal(shape.n) for _ in range(4))
            scores = [op.score(v) for v in (x, y, z, t)]
            pair = op.form(x, x, y, y)
            bound = max(scores[0], scores[1])
            if bound - pair < -1e-9 * (1.0 + max(abs(pair), abs(bound))):
                return CheckResult("block-bound-inequalities", False, "two-block form")
            quad = op.form(x, y, z, t)
            bound = max(scores)
            if bound - quad < -1e-9 * (1.0 + max(abs(quad), abs(bound))):
                return CheckResult("block-bound-inequalities", False, "four-block form")
    return CheckResult("block-bound-inequalities", True, "block bounds at exact alpha")


def _enumerate_matchings(shape):
    for cols in itertools.permutations(range(shape.n2), shape.n1):
        x = np.zeros(shape.n)
        x[np.arange(shape.n1) * shape.n2 + np.array(cols)] = 1.0
        yield x


def _check_equivalence() -> CheckResult:
    rng = np.random.default_rng(37)
    shape = MatchingShape(3, 3)
    for _ in range(5):
        tensor = _random_tensor(rng, shape, 10)
        op = LiftedOperator(tensor, 3.0 * f4_norm_exact(tensor))
        points = list(_enumerate_matchings(shape))
        best_diag = max(op.score(x) for x in points)
        best_free = max(
            op.form(x, y, z, t)
            for x in points
            for y in points
            for z in points
            for t in points
        )
        if abs(best_diag - best_free) > 1e-10 * (1.0 + abs(best_diag)):
            return CheckResult("tiny-scale-equivalence", False, f"{best_diag} vs {best_free}")
    return CheckResult("tiny-scale-equivalence", True, "diagonal equals free maximum")


def _check_lap() -> CheckResult:
    rng = np.random.default_rng(41)
    for _ in range(20):
        profit = rng.standard_normal((4, 6))
        got = solve_lap_max(profit)
        rows = np.arange(4)
        got_obj = float(profit[rows, np.array(got.cols)].sum())
        best = max(
            float(profit[rows, np.array(cols)].sum())
            for cols in itertools.permutations(range(6), 4)
        )
        if got_obj != best:
            return CheckResult("lap-bruteforce", False, f"{got_obj} != {best}")
    return CheckResult("lap-bruteforce", True, "matches exhaustive optimum")


def _check_monotonic() -> CheckResult:
    rng = np.random.default_rng(53)
    shape = MatchingShape(4, 6)
    configs = [
        SolverConfig(variant="bcagm"),
        SolverConfig(variant="bcagm_psi", subroutine="ipfp"),
        SolverConfig(variant="bcagm_psi", subroutine="mpm"),
    ]
    for _ in range(15):
        tensor = _random_tensor(rng, shape, 30)
        for cfg in configs:
            try:
                sol = (bcagm_solve if cfg.variant == "bcagm" else bcagm_psi_solve)(
                    tensor, cfg
                )
            except TraceViolation as exc:
                return CheckResult("solver-monotonicity", False, str(exc))
            if sol.trace.terminated != "stalled":
                return CheckResult(
                    "solver-monotonicity", False, f"terminated={sol.trace.terminated}"
                )
    return CheckResult("solver-monotonicity", True, "strict ascent, finite termination")


GROUPS = (
    _check_identities,
    _check_block_bounds,
    _check_equivalence,
    _check_lap,
    _check_monotonic,
)

GROUP_NAMES = (
    "multilinear-identities",
    "block-bound-inequalities",
    "tiny-scale-equivalence",
    "lap-bruteforce",
    "solver-monotonicity",
)


def run_selfcheck(force_fail: bool = False) -> list[CheckResult]:
    results = [group() for group in GROUPS]
    if force_fail:
        results.append(CheckResult("forced-failure", False, "failure injected by flag"))
    return results

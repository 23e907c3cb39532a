"""Block-coordinate ascent drivers: ascent guarantees, termination, merges."""

import numpy as np
import pytest

import oracles
from hypermatch import (
    LiftedOperator,
    MatchingShape,
    SolverConfig,
    SolverTrace,
    SparseSymmetricTensor3,
    TraceViolation,
    bcagm_psi_solve,
    bcagm_solve,
    default_start,
    f4_norm_exact,
    hopm_baseline,
    solve,
)

ALL_CONFIGS = [
    SolverConfig(variant="bcagm"),
    SolverConfig(variant="bcagm_psi", subroutine="ipfp"),
    SolverConfig(variant="bcagm_psi", subroutine="mpm"),
]


def identity_tensor(n=3, value=1.0):
    shape = MatchingShape(n, n)
    triples = []
    for cols in [(a, b, c) for a in range(n) for b in range(a + 1, n) for c in range(b + 1, n)]:
        triples.append([i * n + i for i in cols])
    return SparseSymmetricTensor3(shape, triples, [value] * len(triples))


class TestConfig:
    def test_rejects_invalid(self):
        with pytest.raises(ValueError, match="variant"):
            SolverConfig(variant="gradient")
        with pytest.raises(ValueError, match="subroutine"):
            SolverConfig(subroutine="sm")
        with pytest.raises(ValueError, match="alpha_schedule"):
            SolverConfig(alpha_schedule="adaptive")
        with pytest.raises(ValueError, match="max_outer_iters"):
            SolverConfig(max_outer_iters=0)
        with pytest.raises(ValueError, match="alpha_override"):
            SolverConfig(alpha_override=-1.0)


class TestTraceAudit:
    def test_accepts_valid_trace(self):
        trace = SolverTrace(
            stage_scores=[1.0, 2.0, 2.0, 3.0],
            u_scores3=[0.5, 1.5],
            alpha_phases=[{"alpha": 0.0, "stage_start": 0, "u_start": 0}],
        )
        trace.verify(1e-12)

    def test_rejects_stage_decrease(self):
        trace = SolverTrace(
            stage_scores=[2.0, 1.0],
            u_scores3=[0.5],
            alpha_phases=[{"alpha": 0.0, "stage_start": 0, "u_start": 0}],
        )
        with pytest.raises(TraceViolation, match="stage"):
            trace.verify(1e-12)

    def test_rejects_non_strict_merges(self):
        trace = SolverTrace(stage_scores=[], u_scores3=[1.0, 1.0], alpha_phases=[])
        with pytest.raises(TraceViolation, match="strictly"):
            trace.verify(1e-12)

    def test_stage_check_is_per_phase(self):
        # values may drop across an alpha switch, only within-phase matters
        trace = SolverTrace(
            stage_scores=[5.0, 6.0, 2.0, 3.0],
            u_scores3=[0.1],
            alpha_phases=[
                {"alpha": 0.0, "stage_start": 0, "u_start": 0},
                {"alpha": 1.0, "stage_start": 2, "u_start": 1},
            ],
        )
        trace.verify(1e-12)


class TestDefaultStart:
    def test_lands_on_a_matching(self):
        rng = np.random.default_rng(40)
        shape = MatchingShape(4, 6)
        t = oracles.random_tensor(rng, shape, 30)
        start = default_start(t)
        assert start.shape == shape
        x = start.indicator()
        assert float(x.sum()) == shape.n1

    def test_zero_tensor_still_valid(self):
        start = default_start(SparseSymmetricTensor3(MatchingShape(3, 4)))
        assert len(start.cols) == 3


class TestBcagmSolve:
    def test_identity_supporting_tensor(self):
        t = identity_tensor(3, value=1.5)
        best_obj, best_cols = oracles.matching_brute(t)
        assert best_cols == (0, 1, 2)
        sol = bcagm_solve(t)
        assert sol.assignment.cols == best_cols
        assert sol.score3 == pytest.approx(best_obj, rel=1e-12)
        assert sol.score3 == pytest.approx(6.0 * 1.5, rel=1e-12)

    def test_zero_tensor_terminates_at_first_stall(self):
        sol = bcagm_solve(SparseSymmetricTensor3(MatchingShape(3, 4)))
        assert sol.score3 == 0.0
        assert sol.trace.terminated == "stalled"
        assert len(sol.assignment.cols) == 3

    def test_monotone_traces_on_random_instances(self):
        rng = np.random.default_rng(41)
        shape = MatchingShape(5, 8)
        for _ in range(30):
            t = oracles.random_tensor(rng, shape, 50)
            sol = bcagm_solve(t)
            u = sol.trace.u_scores3
            assert all(b > a for a, b in zip(u, u[1:]))
            assert sol.trace.terminated == "stalled"
            assert sol.score3 == pytest.approx(
                t.score(sol.assignment.indicator()), rel=1e-10
            )

    def test_explicit_start_is_respected(self):
        rng = np.random.default_rng(42)
        shape = MatchingShape(3, 5)
        t = oracles.random_tensor(rng, shape, 25)
        start = oracles.random_matching(rng, shape)
        sol = bcagm_solve(t, start=start)
        assert sol.score3 >= t.score(start.indicator()) - 1e-12

    def test_raw_ones_start(self):
        rng = np.random.default_rng(43)
        shape = MatchingShape(4, 6)
        t = oracles.random_tensor(rng, shape, 40)
        cfg = SolverConfig(variant="bcagm", raw_ones_start=True)
        sol = bcagm_solve(t, cfg)
        assert sol.trace.terminated == "stalled"
        assert len(sol.trace.u_scores3) >= 1
        u = sol.trace.u_scores3
        assert all(b > a for a, b in zip(u, u[1:]))
        assert sol.score3 == pytest.approx(t.score(sol.assignment.indicator()), rel=1e-12)

    def test_start_shape_mismatch(self):
        t = SparseSymmetricTensor3(MatchingShape(3, 4))
        bad = oracles.random_matching(np.random.default_rng(0), MatchingShape(3, 5))
        with pytest.raises(ValueError, match="shape"):
            bcagm_solve(t, start=bad)

    def test_alpha_schedules(self):
        rng = np.random.default_rng(44)
        shape = MatchingShape(4, 6)
        t = oracles.random_tensor(rng, shape, 40)
        scores = {}
        for schedule in ("zero_then_bound", "bound_always", "zero_only"):
            sol = bcagm_solve(t, SolverConfig(variant="bcagm", alpha_schedule=schedule))
            scores[schedule] = sol.score3
            assert sol.trace.terminated == "stalled"
        # the two-phase schedule can only improve on its first phase
        assert scores["zero_then_bound"] >= scores["zero_only"] - 1e-12

    def test_alpha_override(self):
        rng = np.random.default_rng(45)
        shape = MatchingShape(3, 5)
        t = oracles.random_tensor(rng, shape, 20)
        sol = bcagm_solve(
            t, SolverConfig(variant="bcagm", alpha_schedule="bound_always", alpha_override=123.0)
        )
        assert sol.trace.alpha_phases[0]["alpha"] == 123.0

    def test_iteration_cap_reported(self):
        rng = np.random.default_rng(46)
        shape = MatchingShape(4, 6)
        t = oracles.random_tensor(rng, shape, 40)
        sol = bcagm_solve(t, SolverConfig(variant="bcagm", max_outer_iters=1))
        assert sol.trace.terminated == "max_outer_iters"
        assert sol.outer_iterations == 1


class TestBcagmPsiSolve:
    @pytest.mark.parametrize("subroutine", ["ipfp", "mpm"])
    def test_identity_supporting_tensor(self, subroutine):
        t = identity_tensor(3, value=2.0)
        best_obj, best_cols = oracles.matching_brute(t)
        sol = bcagm_psi_solve(t, SolverConfig(variant="bcagm_psi", subroutine=subroutine))
        assert sol.assignment.cols == best_cols
        assert sol.score3 == pytest.approx(best_obj, rel=1e-12)

    @pytest.mark.parametrize("subroutine", ["ipfp", "mpm"])
    def test_zero_tensor(self, subroutine):
        sol = bcagm_psi_solve(
            SparseSymmetricTensor3(MatchingShape(3, 4)),
            SolverConfig(variant="bcagm_psi", subroutine=subroutine),
        )
        assert sol.score3 == 0.0
        assert sol.trace.terminated == "stalled"

    @pytest.mark.parametrize("subroutine", ["ipfp", "mpm"])
    def test_monotone_traces_on_random_instances(self, subroutine):
        rng = np.random.default_rng(47)
        shape = MatchingShape(5, 8)
        cfg = SolverConfig(variant="bcagm_psi", subroutine=subroutine)
        for _ in range(15):
            t = oracles.random_tensor(rng, shape, 50)
            sol = bcagm_psi_solve(t, cfg)
            u = sol.trace.u_scores3
            assert all(b > a for a, b in zip(u, u[1:]))
            assert sol.trace.terminated == "stalled"


class TestTinyScaleEquivalence:
    def test_free_maximum_equals_diagonal_maximum(self):
        # with the exact convexification weight, maximizing the form over
        # four independent blocks cannot beat the best single matching
        rng = np.random.default_rng(48)
        shape = MatchingShape(3, 3)
        matchings = [oracles.indicator(shape, cols) for cols in oracles.all_assignments(shape)]
        for _ in range(5):
            t = oracles.random_tensor(rng, shape, 12)
            op = LiftedOperator(t, 3.0 * f4_norm_exact(t))
            best_diag = max(op.score(x) for x in matchings)
            best_free = max(
                op.form(x, y, z, w)
                for x in matchings
                for y in matchings
                for z in matchings
                for w in matchings
            )
            assert best_free == pytest.approx(best_diag, rel=1e-10)

    def test_argmax_invariant_to_alpha_phase(self):
        # on matchings the alpha term is a constant shift, so the argmax
        # over matchings does not depend on alpha
        rng = np.random.default_rng(49)
        shape = MatchingShape(3, 3)
        assignments = oracles.all_assignments(shape)
        for _ in range(10):
            t = oracles.random_tensor(rng, shape, 12)
            op0 = LiftedOperator(t, 0.0)
            opb = LiftedOperator(t, 3.0 * f4_norm_exact(t))
            scores0 = [op0.score(oracles.indicator(shape, c)) for c in assignments]
            scoresb = [opb.score(oracles.indicator(shape, c)) for c in assignments]
            assert int(np.argmax(scores0)) == int(np.argmax(scoresb))
            shift = opb.alpha * shape.n1**2
            np.testing.assert_allclose(
                np.asarray(scoresb) - np.asarray(scores0),
                shift,
                rtol=1e-10,
                atol=1e-10 * (1.0 + shift),
            )


class TestHopmBaseline:
    def test_zero_tensor_degenerates(self):
        sol = hopm_baseline(SparseSymmetricTensor3(MatchingShape(3, 4)))
        assert sol.score3 == 0.0
        assert sol.trace.terminated == "degenerate"
        assert len(sol.assignment.cols) == 3

    def test_identity_supporting_tensor(self):
        t = identity_tensor(3)
        sol = hopm_baseline(t)
        assert sol.assignment.cols == (0, 1, 2)
        assert sol.trace.terminated == "converged"

    def test_iterates_have_unit_norm(self):
        # indirectly: convergence means successive normalized iterates agree
        rng = np.random.default_rng(50)
        t = oracles.random_tensor(rng, MatchingShape(4, 6), 40)
        sol = hopm_baseline(t, max_iter=500, tol=1e-12)
        assert sol.trace.terminated in ("converged", "max_iters")
        assert sol.score3 == pytest.approx(t.score(sol.assignment.indicator()), rel=1e-10)


class TestDispatcher:
    def test_solve_routes_by_variant(self):
        t = identity_tensor(3)
        s1 = solve(t, SolverConfig(variant="bcagm"))
        s2 = solve(t, SolverConfig(variant="bcagm_psi", subroutine="ipfp"))
        assert s1.assignment.cols == s2.assignment.cols == (0, 1, 2)

    def test_default_config(self):
        t = identity_tensor(3)
        assert solve(t).assignment.cols == (0, 1, 2)

import numpy as np
import pytest

from sptrsvgen import (
    EquationEvaluator,
    ScheduleViolationError,
    build_dag,
    compute_levels,
    current_schedule,
    evaluate_equations,
    extract_lower,
    init_equations,
    rewrite_thin_levels,
    serial_sptrsv,
    to_csr,
    verify_transform,
)
from helpers import (
    dense_forward_substitution,
    fig2_system,
    make_chain,
    make_identity,
    make_random_lower,
)


class TestSerialSolver:
    def test_identity(self):
        got = serial_sptrsv(make_identity(2), np.array([7.0, -3.0]))
        assert got.x.tolist() == [7.0, -3.0]
        assert got.max_abs == 7.0

    def test_2x2_hand_computed(self):
        sys0 = extract_lower(to_csr(2, [(0, 0, 2.0), (1, 0, 3.0), (1, 1, 4.0)]))
        b = np.array([2.0, 10.0])
        got = serial_sptrsv(sys0, b)
        # x0 = 2/2 = 1; x1 = (10 - 3*1)/4 = 1.75
        assert got.x.tolist() == [1.0, 1.75]
        np.testing.assert_allclose(
            got.x, dense_forward_substitution(sys0.matrix.to_dense(), b)
        )

    def test_bidiagonal_telescoping(self):
        got = serial_sptrsv(make_chain(4), np.ones(4))
        assert got.x.tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_against_dense_oracle(self):
        rng = np.random.default_rng(31)
        for _ in range(30):
            n = int(rng.integers(1, 64))
            sys0 = make_random_lower(rng, n, float(rng.uniform(0.05, 0.6)))
            b = rng.uniform(-1, 1, n)
            got = serial_sptrsv(sys0, b)
            ref = dense_forward_substitution(sys0.matrix.to_dense(), b)
            scale = max(1.0, np.abs(ref).max())
            assert np.abs(got.x - ref).max() / scale <= 1e-14

    def test_wrong_b_length(self):
        with pytest.raises(ValueError, match="length"):
            serial_sptrsv(make_identity(3), np.ones(4))


class TestEvaluateEquations:
    def test_initial_system_equals_serial(self):
        rng = np.random.default_rng(32)
        sys0 = make_random_lower(rng, 80, 0.1)
        eqs = init_equations(sys0)
        sched = compute_levels(build_dag(sys0))
        for _ in range(5):
            b = rng.uniform(-1, 1, 80)
            ref = serial_sptrsv(sys0, b)
            got = evaluate_equations(eqs, sched, b)
            np.testing.assert_allclose(got.x, ref.x, rtol=1e-13, atol=1e-14)

    def test_fig2_rewritten_row_matches_serial(self):
        sys0 = fig2_system()
        eqs = init_equations(sys0)
        from sptrsvgen import substitute

        substitute(eqs, 3, 2)
        substitute(eqs, 3, 1)
        substitute(eqs, 3, 0)
        sched = current_schedule(eqs)
        b = np.array([2.0, 10.0, 1.0, -4.0])
        ref = serial_sptrsv(sys0, b)
        got = evaluate_equations(eqs, sched, b)
        assert abs(got.x[3] - ref.x[3]) <= 1e-12

    def test_randomized_against_serial(self):
        rng = np.random.default_rng(33)
        worst = 0.0
        for _ in range(50):
            n = int(rng.integers(5, 120))
            sys0 = make_random_lower(rng, n, float(rng.uniform(0.05, 0.4)))
            eqs = init_equations(sys0)
            sched = compute_levels(build_dag(sys0))
            for _ in range(2):
                b = rng.uniform(-1, 1, n)
                ref = serial_sptrsv(sys0, b)
                got = evaluate_equations(eqs, sched, b)
                worst = max(
                    worst, np.abs(got.x - ref.x).max() / max(1.0, ref.max_abs)
                )
        assert worst <= 1e-10

    def test_order_independent_within_levels(self):
        rng = np.random.default_rng(34)
        sys0 = make_random_lower(rng, 60, 0.1)
        eqs = init_equations(sys0)
        rewrite_thin_levels(eqs, compute_levels(build_dag(sys0)), 2, 256)
        sched = current_schedule(eqs)
        b = rng.uniform(-1, 1, 60)
        base = EquationEvaluator(eqs, sched).solve(b)
        for seed in range(3):
            shuffler = np.random.default_rng(seed)
            order = np.concatenate(
                [shuffler.permutation(level) for level in sched.levels]
            )
            shuffled = EquationEvaluator(eqs, sched, row_order=order).solve(b)
            assert np.array_equal(base, shuffled)  # bitwise: per-row sums unchanged

    def test_schedule_violation_detected(self):
        sys0 = make_chain(3)
        eqs = init_equations(sys0)
        sched = compute_levels(build_dag(sys0))
        sched.level_of[1] = 2  # now row 2 (level 2) reads x[1] at level 2
        with pytest.raises(ScheduleViolationError):
            evaluate_equations(eqs, sched, np.ones(3))

    def test_incomplete_row_order_rejected(self):
        sys0 = make_identity(4)
        eqs = init_equations(sys0)
        sched = compute_levels(build_dag(sys0))
        with pytest.raises(ValueError, match="every row"):
            EquationEvaluator(eqs, sched, row_order=np.array([0, 1, 2]))
        with pytest.raises(ValueError, match="every row"):
            EquationEvaluator(eqs, sched, row_order=np.array([0, 1, 2, 2]))

    def test_linearity_of_both_solvers(self):
        rng = np.random.default_rng(35)
        sys0 = make_random_lower(rng, 50, 0.2)
        eqs = init_equations(sys0)
        sched = compute_levels(build_dag(sys0))
        b1 = rng.uniform(-1, 1, 50)
        b2 = rng.uniform(-1, 1, 50)
        alpha = 1.7
        for solver in (
            lambda b: serial_sptrsv(sys0, b).x,
            lambda b: evaluate_equations(eqs, sched, b).x,
        ):
            combined = solver(alpha * b1 + b2)
            split = alpha * solver(b1) + solver(b2)
            scale = max(1.0, np.abs(combined).max())
            assert np.abs(combined - split).max() / scale <= 1e-10


class TestVerifyTransform:
    def test_untransformed_system_passes_tight_tolerance(self):
        rng = np.random.default_rng(36)
        sys0 = make_random_lower(rng, 100, 0.1)
        eqs = init_equations(sys0)
        rep = verify_transform(sys0, eqs, trials=10, tol=1e-14)
        assert rep.passed
        assert rep.worst_error <= 1e-14

    def test_rewritten_system_passes(self):
        rng = np.random.default_rng(37)
        sys0 = make_random_lower(rng, 150, 0.05)
        eqs = init_equations(sys0)
        rewrite_thin_levels(eqs, compute_levels(build_dag(sys0)), 2, 256)
        rep = verify_transform(sys0, eqs, trials=10, tol=1e-10)
        assert rep.passed

    def test_corrupted_coefficient_fails(self):
        sys0 = make_chain(10)
        eqs = init_equations(sys0)
        eqs.equations[7].b_terms[7] *= 1.0 + 1e-6
        rep = verify_transform(sys0, eqs, trials=5, tol=1e-10)
        assert not rep.passed
        assert rep.worst_error > 1e-10

    def test_nonfinite_flagged(self):
        sys0 = make_chain(5)
        eqs = init_equations(sys0)
        eqs.equations[3].b_terms[3] = float("inf")
        rep = verify_transform(sys0, eqs, trials=3, tol=1e-10)
        assert not rep.passed
        assert rep.nonfinite

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(38)
        sys0 = make_random_lower(rng, 60, 0.1)
        eqs = init_equations(sys0)
        a = verify_transform(sys0, eqs, trials=5, tol=1e-12, seed=42)
        b = verify_transform(sys0, eqs, trials=5, tol=1e-12, seed=42)
        assert a == b

    def test_trials_validated(self):
        sys0 = make_identity(2)
        with pytest.raises(ValueError):
            verify_transform(sys0, init_equations(sys0), trials=0)

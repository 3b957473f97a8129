"""Reference forward substitution and direct evaluation of equation systems.

serial_sptrsv is the normative CSR forward-substitution solver; every
transformation and every generated kernel is checked against it. Equation
systems are evaluated level by level, which doubles as a consistency check of
the schedule they claim to satisfy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .levels import LevelSchedule


class ScheduleViolationError(RuntimeError):
    """An x-term references a row in the same or a later level (internal bug)."""


@dataclass(eq=False)
class SolveResult:
    x: np.ndarray
    max_abs: float


@dataclass
class VerificationReport:
    passed: bool
    worst_error: float
    worst_row: int
    worst_trial: int
    trials: int
    tol: float
    nonfinite: bool

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        extra = " (non-finite values)" if self.nonfinite else ""
        return (
            f"{status}: worst error {self.worst_error:.3e} at row {self.worst_row} "
            f"(trial {self.worst_trial}) over {self.trials} trials, tol {self.tol:g}{extra}"
        )


@njit(cache=True)
def _forward_substitution(n, row_ptr, col_idx, values, b, x):
    for i in range(n):
        acc = b[i]
        end = row_ptr[i + 1] - 1  # last stored entry of the row is the diagonal
        for k in range(row_ptr[i], end):
            acc -= values[k] * x[col_idx[k]]
        x[i] = acc / values[end]


def serial_sptrsv(system, b) -> SolveResult:
    """Solve L x = b by forward substitution in ascending row order."""
    b = np.ascontiguousarray(b, dtype=np.float64)
    m = system.matrix
    if len(b) != m.n:
        raise ValueError(f"b has length {len(b)}, expected {m.n}")
    x = np.empty(m.n)
    _forward_substitution(m.n, m.row_ptr, m.col_idx, m.values, b, x)
    return SolveResult(x=x, max_abs=float(np.abs(x).max()) if m.n else 0.0)


@njit(cache=True)
def _evaluate(order, term_ptr, b_len, b_idx, b_coef, x_idx, x_coef, b, x):
    for r in range(len(order)):
        row = order[r]
        acc = 0.0
        start = term_ptr[r]
        split = start + b_len[r]
        end = term_ptr[r + 1]
        for k in range(start, split):
            acc += b_coef[k] * b[b_idx[k]]
        for k in range(split, end):
            acc += x_coef[k] * x[x_idx[k]]
        x[row] = acc


class EquationEvaluator:
    """Equation system flattened to arrays for repeated right-hand sides.

    Rows are evaluated level by level in the given schedule's order; terms of
    a row are accumulated in ascending index order, b-terms first, so results
    do not depend on how the equations' maps were built.
    """

    def __init__(self, sys, schedule: LevelSchedule, row_order=None):
        if schedule.n != sys.n:
            raise ValueError(f"schedule covers {schedule.n} rows, system has {sys.n}")
        if row_order is None:
            row_order = np.concatenate(schedule.levels) if schedule.levels else np.empty(0, np.int64)
        order = np.ascontiguousarray(row_order, dtype=np.int64)

        n = sys.n
        if len(order) != n or (n and np.bincount(order, minlength=n).max() != 1):
            raise ValueError("row order must cover every row exactly once")
        term_ptr = np.zeros(n + 1, dtype=np.int64)
        b_len = np.zeros(n, dtype=np.int64)
        total = sum(eq.term_count for eq in sys.equations)
        b_idx = np.empty(total, dtype=np.int64)
        b_coef = np.empty(total)
        x_idx = np.empty(total, dtype=np.int64)
        x_coef = np.empty(total)

        level_of = schedule.level_of
        pos = 0
        for r, row in enumerate(order.tolist()):
            eq = sys.equations[row]
            own_level = level_of[row]
            for k in sorted(eq.b_terms):
                b_idx[pos] = k
                b_coef[pos] = eq.b_terms[k]
                pos += 1
            b_len[r] = len(eq.b_terms)
            for m in sorted(eq.x_terms):
                if level_of[m] >= own_level:
                    raise ScheduleViolationError(
                        f"row {row} (level {int(own_level)}) reads x[{m}] "
                        f"at level {int(level_of[m])}"
                    )
                x_idx[pos] = m
                x_coef[pos] = eq.x_terms[m]
                pos += 1
            term_ptr[r + 1] = pos

        self.n = n
        self._arrays = (order, term_ptr, b_len, b_idx, b_coef, x_idx, x_coef)

    def solve(self, b) -> np.ndarray:
        b = np.ascontiguousarray(b, dtype=np.float64)
        if len(b) != self.n:
            raise ValueError(f"b has length {len(b)}, expected {self.n}")
        x = np.empty(self.n)
        _evaluate(*self._arrays, b, x)
        return x


def evaluate_equations(sys, schedule, b) -> SolveResult:
    """Evaluate a (possibly rewritten) system level by level for one b."""
    x = EquationEvaluator(sys, schedule).solve(b)
    return SolveResult(x=x, max_abs=float(np.abs(x).max()) if len(x) else 0.0)


def verify_transform(system, sys, trials=10, tol=1e-10, seed=0) -> VerificationReport:
    """Compare the equation system against forward substitution on random b.

    Draws `trials` right-hand sides with entries uniform in [-1, 1] from a
    seeded generator and reports the worst max-relative error
    max_i |dx_i| / max(1, ||x||_inf). Non-finite values in either solution
    fail the check outright.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    from .rewrite import current_schedule

    evaluator = EquationEvaluator(sys, current_schedule(sys))
    rng = np.random.default_rng(seed)
    worst = -1.0
    worst_row = worst_trial = -1
    nonfinite = False
    for t in range(trials):
        b = rng.uniform(-1.0, 1.0, system.n)
        ref = serial_sptrsv(system, b)
        got = evaluator.solve(b)
        if not (np.isfinite(ref.x).all() and np.isfinite(got).all()):
            nonfinite = True
            bad = np.flatnonzero(~(np.isfinite(ref.x) & np.isfinite(got)))
            worst = float("inf")
            worst_row, worst_trial = int(bad[0]), t
            break
        err = np.abs(got - ref.x) / max(1.0, ref.max_abs)
        row = int(err.argmax()) if system.n else 0
        if system.n and float(err[row]) > worst:
            worst = float(err[row])
            worst_row, worst_trial = row, t
    worst = max(worst, 0.0)
    passed = not nonfinite and worst <= tol
    return VerificationReport(
        passed=passed,
        worst_error=worst,
        worst_row=worst_row,
        worst_trial=worst_trial,
        trials=trials,
        tol=tol,
        nonfinite=nonfinite,
    )

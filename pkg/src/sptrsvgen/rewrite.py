"""Symbolic equation rewriting over a lower-triangular system.

Every row i is kept in normalized closed form

    x[i] = sum_k beta_k * b[k]  +  sum_m alpha_m * x[m]      (all m < i)

with the diagonal division folded into the coefficients. Substituting row j's
equation into row i removes the i -> j dependency and inherits j's (shallower)
dependencies, which lets rows migrate to earlier levels at the cost of extra
terms. Eliminating every row of a thin level removes that level and its
synchronization barrier.

The transformation is purely algebraic and preserves the solution for every
right-hand side; `sptrsvgen.solve.verify_transform` checks this numerically.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .levels import LevelSchedule, compute_levels, dag_from_equations


class NoSuchTermError(KeyError):
    """Requested substitution of a row that is not a dependency."""

    def __init__(self, i, j):
        super().__init__(f"row {j} is not an x-term of equation {i}")
        self.i = i
        self.j = j


class ElevationResult(enum.Enum):
    REACHED = "reached"
    BUDGET_EXCEEDED = "budget_exceeded"


@dataclass(eq=False)
class Equation:
    """One row's normalized equation as sparse coefficient maps.

    Keys of x_terms are strictly smaller than `row` and never include `row`
    itself; coefficients that cancel to exactly 0.0 are removed, so repeated
    accesses to the same x or b index are always coalesced into one term.
    """

    row: int
    x_terms: dict
    b_terms: dict

    @property
    def term_count(self):
        return len(self.x_terms) + len(self.b_terms)

    def snapshot(self):
        return dict(self.x_terms), dict(self.b_terms)

    def restore(self, snap):
        self.x_terms, self.b_terms = dict(snap[0]), dict(snap[1])


@dataclass(eq=False)
class EquationSystem:
    """All row equations plus the substitution steps applied to each row."""

    equations: list
    provenance: list = field(repr=False)

    @property
    def n(self):
        return len(self.equations)

    def max_term_count(self):
        return max((eq.term_count for eq in self.equations), default=0)

    def max_abs_coefficient(self):
        worst = 0.0
        for eq in self.equations:
            for c in eq.x_terms.values():
                if abs(c) > worst:
                    worst = abs(c)
            for c in eq.b_terms.values():
                if abs(c) > worst:
                    worst = abs(c)
        return worst


@dataclass
class TransformReport:
    """Before/after accounting for one rewriting pass."""

    levels_before: int
    levels_after: int
    flops_before: int
    flops_after: int
    barrier_reduction: float
    rows_rewritten: int
    substitutions_performed: int
    rows_budget_exceeded: int
    max_terms_in_any_equation: int
    max_abs_coefficient: float

    def __post_init__(self):
        if self.levels_after > self.levels_before:
            raise ValueError("rewriting must not increase the level count")


def init_equations(system) -> EquationSystem:
    """Closed form of forward substitution: beta_i = 1/d_i, alpha_m = -L[i][m]/d_i."""
    m = system.matrix
    row_ptr = m.row_ptr.tolist()
    cols = m.col_idx.tolist()
    vals = m.values.tolist()
    diag = system.diag.tolist()
    equations = []
    for i in range(m.n):
        d = diag[i]
        start, end = row_ptr[i], row_ptr[i + 1] - 1  # last entry is the diagonal
        x_terms = {cols[k]: -vals[k] / d for k in range(start, end)}
        equations.append(Equation(row=i, x_terms=x_terms, b_terms={i: 1.0 / d}))
    return EquationSystem(equations=equations, provenance=[[] for _ in range(m.n)])


def substitute(sys: EquationSystem, i, j):
    """Replace the x[j] term of equation i with row j's current equation.

    Linearity keeps equation i's value unchanged for every b. Coefficients
    that cancel to exactly 0.0 are dropped (no epsilon pruning: inexact
    pruning would change the computed solution).
    """
    eq = sys.equations[i]
    if j not in eq.x_terms:
        raise NoSuchTermError(i, j)
    c = eq.x_terms.pop(j)
    src = sys.equations[j]
    x_terms = eq.x_terms
    for m, a in src.x_terms.items():
        merged = x_terms.get(m, 0.0) + c * a
        if merged == 0.0:
            x_terms.pop(m, None)
        else:
            x_terms[m] = merged
    b_terms = eq.b_terms
    for k, bcoef in src.b_terms.items():
        merged = b_terms.get(k, 0.0) + c * bcoef
        if merged == 0.0:
            b_terms.pop(k, None)
        else:
            b_terms[k] = merged
    sys.provenance[i].append((i, j))


def recompute_level(sys: EquationSystem, schedule: LevelSchedule, i) -> int:
    """Level of row i implied by its current x-terms under the given schedule."""
    eq = sys.equations[i]
    if not eq.x_terms:
        return 0
    level_of = schedule.level_of
    return 1 + max(int(level_of[m]) for m in eq.x_terms)


def elevate_row(sys, schedule, i, target_level, fill_budget) -> ElevationResult:
    """Substitute away every dependency of row i at a level >= target_level.

    Candidates are resolved against the schedule passed in; the schedule is
    not mutated, so a full rewriting pass works against one fixed labeling
    (substituted rows may expose already-rewritten equations, which is what
    lets consecutive thin levels collapse together). The highest-level
    candidate is substituted first, ties broken toward the larger row index;
    that order guarantees no row is substituted twice in one call.

    If the equation's term count would exceed fill_budget the row is rolled
    back to its state at entry and BUDGET_EXCEEDED is returned. On success
    every remaining x-term sits below target_level, so the recomputed level
    of row i is at most target_level.
    """
    eq = sys.equations[i]
    level_of = schedule.level_of
    snap = eq.snapshot()
    prov_mark = len(sys.provenance[i])
    cap = sys.n  # each row can be substituted at most once; anything more is a bug
    subs = 0
    while True:
        best = -1
        best_level = -1
        for m in eq.x_terms:
            lm = int(level_of[m])
            if lm < target_level:
                continue
            if lm > best_level or (lm == best_level and m > best):
                best_level = lm
                best = m
        if best < 0:
            return ElevationResult.REACHED
        substitute(sys, i, best)
        subs += 1
        if subs > cap:
            eq.restore(snap)
            del sys.provenance[i][prov_mark:]
            raise RuntimeError(
                f"elevation of row {i} exceeded the substitution cap ({cap})"
            )
        if eq.term_count > fill_budget:
            eq.restore(snap)
            del sys.provenance[i][prov_mark:]
            return ElevationResult.BUDGET_EXCEEDED


def rewrite_thin_levels(
    sys, schedule, thin_threshold, fill_budget, min_levels_kept=1
) -> TransformReport:
    """Eliminate levels of at most thin_threshold rows by elevating their rows.

    Levels are scanned in ascending order; each row of a thin level is
    elevated to the nearest preceding non-thin level (level 0 when there is
    none), rows in ascending order, so the pass is deterministic. Rows whose
    equations would outgrow fill_budget stay in place and are counted in the
    report. The scan stops early if the estimated surviving level count would
    drop below min_levels_kept.
    """
    levels_before = schedule.num_levels
    flops_before = flop_count(sys)
    widths = [len(rows) for rows in schedule.levels]
    prov_len = [len(p) for p in sys.provenance]

    rows_rewritten = 0
    substitutions = 0
    budget_blocked = 0
    emptied = 0
    nearest_fat = 0  # most recent level wider than the threshold
    for lv in range(1, schedule.num_levels):
        if widths[lv - 1] > thin_threshold:
            nearest_fat = lv - 1
        if widths[lv] > thin_threshold:
            continue
        if levels_before - emptied <= min_levels_kept:
            break
        all_reached = True
        for i in schedule.levels[lv]:
            i = int(i)
            status = elevate_row(sys, schedule, i, nearest_fat, fill_budget)
            if status is ElevationResult.BUDGET_EXCEEDED:
                budget_blocked += 1
                all_reached = False
            else:
                gained = len(sys.provenance[i]) - prov_len[i]
                if gained:
                    rows_rewritten += 1
                    substitutions += gained
        if all_reached:
            emptied += 1

    return _build_report(
        sys,
        levels_before,
        flops_before,
        rows_rewritten,
        substitutions,
        budget_blocked,
    )


def rewrite_rows(sys, schedule, rows, thin_threshold, fill_budget) -> TransformReport:
    """Elevate exactly the given rows (ascending), as a manual row selection.

    Each row's target is the nearest level preceding its own that is wider
    than thin_threshold, or level 0 when there is none.
    """
    levels_before = schedule.num_levels
    flops_before = flop_count(sys)
    widths = [len(r) for r in schedule.levels]
    fat_before = np.zeros(schedule.num_levels, dtype=np.int64)
    last_fat = 0
    for lv in range(schedule.num_levels):
        fat_before[lv] = last_fat
        if widths[lv] > thin_threshold:
            last_fat = lv

    rows_rewritten = 0
    substitutions = 0
    budget_blocked = 0
    for i in sorted(int(r) for r in rows):
        if not 0 <= i < sys.n:
            raise IndexError(f"row {i} out of range for n={sys.n}")
        lv = int(schedule.level_of[i])
        if lv == 0:
            continue
        before = len(sys.provenance[i])
        status = elevate_row(sys, schedule, i, int(fat_before[lv]), fill_budget)
        if status is ElevationResult.BUDGET_EXCEEDED:
            budget_blocked += 1
        else:
            gained = len(sys.provenance[i]) - before
            if gained:
                rows_rewritten += 1
                substitutions += gained

    return _build_report(
        sys,
        levels_before,
        flops_before,
        rows_rewritten,
        substitutions,
        budget_blocked,
    )


def flop_count(sys: EquationSystem) -> int:
    """Total FLOPs of the system under the normalized-form convention."""
    return sum(2 * eq.term_count - 1 for eq in sys.equations)


def current_schedule(sys: EquationSystem) -> LevelSchedule:
    """Recompute the level schedule implied by the system's current x-terms."""
    return compute_levels(dag_from_equations(sys))


def _build_report(sys, levels_before, flops_before, rows_rewritten, substitutions, blocked):
    after = current_schedule(sys)
    levels_after = after.num_levels
    reduction = 1.0 - levels_after / levels_before if levels_before else 0.0
    return TransformReport(
        levels_before=levels_before,
        levels_after=levels_after,
        flops_before=flops_before,
        flops_after=flop_count(sys),
        barrier_reduction=reduction,
        rows_rewritten=rows_rewritten,
        substitutions_performed=substitutions,
        rows_budget_exceeded=blocked,
        max_terms_in_any_equation=sys.max_term_count(),
        max_abs_coefficient=sys.max_abs_coefficient(),
    )

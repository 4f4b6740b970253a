import itertools

import numpy as np
import pytest

from predsearch import MipInstance, Row, Sense, VarKind, solve_lp_relaxation
from predsearch.lp import LpStatus


def make_lp(objective, rows, lower, upper, kinds=None):
    n = len(objective)
    return MipInstance(
        name="lp",
        objective=objective,
        rows=tuple(rows),
        lower=lower,
        upper=upper,
        kinds=tuple(kinds) if kinds else (VarKind.CONTINUOUS,) * n,
        var_names=tuple(f"x{i}" for i in range(n)),
    )


def enumerate_vertices_2d(rows, lower, upper):
    """Oracle: all intersection points of constraint/bound lines in 2-D,
    filtered for feasibility."""
    lines = []  # (a0, a1, rhs) treated as equalities
    for row in rows:
        coeffs = {i: c for i, c in row.terms}
        lines.append((coeffs.get(0, 0.0), coeffs.get(1, 0.0), row.rhs))
    for i, v in enumerate(lower):
        if np.isfinite(v):
            lines.append((1.0 if i == 0 else 0.0, 1.0 if i == 1 else 0.0, v))
    for i, v in enumerate(upper):
        if np.isfinite(v):
            lines.append((1.0 if i == 0 else 0.0, 1.0 if i == 1 else 0.0, v))
    points = []
    for (a, b, r1), (c, d, r2) in itertools.combinations(lines, 2):
        det = a * d - b * c
        if abs(det) < 1e-12:
            continue
        x = (r1 * d - b * r2) / det
        y = (a * r2 - r1 * c) / det
        points.append((x, y))
    feas = []
    for x, y in points:
        ok = lower[0] - 1e-9 <= x <= upper[0] + 1e-9 and lower[1] - 1e-9 <= y <= upper[1] + 1e-9
        for row in rows:
            act = sum(c * (x if i == 0 else y) for i, c in row.terms)
            if row.sense is Sense.LE and act > row.rhs + 1e-9:
                ok = False
            if row.sense is Sense.GE and act < row.rhs - 1e-9:
                ok = False
            if row.sense is Sense.EQ and abs(act - row.rhs) > 1e-9:
                ok = False
        if ok:
            feas.append((x, y))
    return feas


def test_two_var_polytope_vertex_oracle():
    rows = [Row(terms=((0, 1.0), (1, 1.0)), sense=Sense.LE, rhs=3.0)]
    inst = make_lp([-1.0, -2.0], rows, [0.0, 0.0], [2.0, 2.0])
    res = solve_lp_relaxation(inst)
    assert res.status is LpStatus.OPTIMAL
    vertices = enumerate_vertices_2d(rows, [0.0, 0.0], [2.0, 2.0])
    best = min(-x - 2 * y for x, y in vertices)
    assert res.objective == pytest.approx(best, abs=1e-9)
    assert res.objective == pytest.approx(-5.0, abs=1e-9)
    assert res.x == pytest.approx([1.0, 2.0], abs=1e-7)


def test_bound_optimum_no_rows():
    inst = make_lp([1.0], [], [0.0], [1.0])
    res = solve_lp_relaxation(inst)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(0.0, abs=1e-12)
    assert res.x == pytest.approx([0.0])


def test_contradictory_rows_infeasible():
    rows = [
        Row(terms=((0, 1.0),), sense=Sense.GE, rhs=1.0),
        Row(terms=((0, 1.0),), sense=Sense.LE, rhs=0.0),
    ]
    inst = make_lp([0.0], rows, [-10.0], [10.0])
    assert solve_lp_relaxation(inst).status is LpStatus.INFEASIBLE


def test_empty_bound_box_infeasible():
    # branch-and-bound nodes may tighten bounds into an empty box; the LP
    # layer must report that as infeasible rather than erroring out
    from predsearch.lp import compile_standard_form, solve_lp

    inst = make_lp([1.0, 1.0], [], [0.0, 0.0], [1.0, 1.0])
    form = compile_standard_form(inst)
    res = solve_lp(form, np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert res.status is LpStatus.INFEASIBLE


def test_unbounded_detected():
    inst = make_lp([-1.0], [], [0.0], [np.inf])
    assert solve_lp_relaxation(inst).status is LpStatus.UNBOUNDED


def test_equality_row_handled():
    rows = [Row(terms=((0, 1.0), (1, 1.0)), sense=Sense.EQ, rhs=2.0)]
    inst = make_lp([1.0, 3.0], rows, [0.0, 0.0], [5.0, 5.0])
    res = solve_lp_relaxation(inst)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(2.0, abs=1e-9)
    assert res.x == pytest.approx([2.0, 0.0], abs=1e-7)


def test_ge_rows_need_phase_one():
    rows = [
        Row(terms=((0, 1.0), (1, 2.0)), sense=Sense.GE, rhs=4.0),
        Row(terms=((0, 2.0), (1, 1.0)), sense=Sense.GE, rhs=4.0),
    ]
    inst = make_lp([1.0, 1.0], rows, [0.0, 0.0], [10.0, 10.0])
    res = solve_lp_relaxation(inst)
    assert res.status is LpStatus.OPTIMAL
    vertices = enumerate_vertices_2d(rows, [0.0, 0.0], [10.0, 10.0])
    assert res.objective == pytest.approx(min(x + y for x, y in vertices), abs=1e-9)


def test_free_variable_supported():
    rows = [Row(terms=((0, 1.0), (1, 1.0)), sense=Sense.EQ, rhs=1.0)]
    inst = make_lp([1.0, 0.1], rows, [-np.inf, 0.0], [np.inf, np.inf])
    res = solve_lp_relaxation(inst)
    assert res.status is LpStatus.UNBOUNDED  # x0 -> -inf compensated by x1


def test_random_lps_match_scipy():
    scipy_opt = pytest.importorskip("scipy.optimize")
    rng = np.random.default_rng(42)
    solved = 0
    for _ in range(60):
        n = int(rng.integers(2, 7))
        m = int(rng.integers(1, 6))
        c = rng.normal(size=n)
        lower = np.zeros(n)
        upper = rng.uniform(1.0, 5.0, size=n)
        rows = []
        A_ub, b_ub, A_eq, b_eq = [], [], [], []
        for _ in range(m):
            coeffs = rng.normal(size=n)
            sense = rng.choice(["LE", "GE", "EQ"], p=[0.5, 0.3, 0.2])
            terms = tuple((int(i), float(coeffs[i])) for i in range(n) if abs(coeffs[i]) > 1e-9)
            if not terms:
                continue
            point = rng.uniform(0.0, 1.0, size=n) * upper
            rhs = float(coeffs @ point)  # guarantees feasibility is plausible
            rows.append(Row(terms=terms, sense=Sense(sense), rhs=rhs))
            if sense == "LE":
                A_ub.append(coeffs), b_ub.append(rhs)
            elif sense == "GE":
                A_ub.append(-coeffs), b_ub.append(-rhs)
            else:
                A_eq.append(coeffs), b_eq.append(rhs)
        inst = make_lp(c, rows, lower, upper)
        mine = solve_lp_relaxation(inst)
        ref = scipy_opt.linprog(
            c,
            A_ub=np.array(A_ub) if A_ub else None,
            b_ub=np.array(b_ub) if b_ub else None,
            A_eq=np.array(A_eq) if A_eq else None,
            b_eq=np.array(b_eq) if b_eq else None,
            bounds=list(zip(lower, upper)),
            method="highs",
        )
        if ref.status == 0:
            assert mine.status is LpStatus.OPTIMAL, f"scipy optimal but engine says {mine.status}"
            assert mine.objective == pytest.approx(ref.fun, abs=1e-6, rel=1e-6)
            solved += 1
        elif ref.status == 2:
            assert mine.status is LpStatus.INFEASIBLE
    assert solved >= 30  # the comparison actually exercised optimal solves


def test_degenerate_lp_terminates():
    # many redundant rows through the same vertex force degenerate pivots
    rows = [
        Row(terms=((0, 1.0), (1, 1.0)), sense=Sense.LE, rhs=1.0),
        Row(terms=((0, 2.0), (1, 2.0)), sense=Sense.LE, rhs=2.0),
        Row(terms=((0, 1.0),), sense=Sense.LE, rhs=1.0),
        Row(terms=((1, 1.0),), sense=Sense.LE, rhs=1.0),
        Row(terms=((0, 3.0), (1, 3.0)), sense=Sense.LE, rhs=3.0),
    ]
    inst = make_lp([-1.0, -1.0], rows, [0.0, 0.0], [4.0, 4.0])
    res = solve_lp_relaxation(inst)
    assert res.status is LpStatus.OPTIMAL
    assert res.objective == pytest.approx(-1.0, abs=1e-9)

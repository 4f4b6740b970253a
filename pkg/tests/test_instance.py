import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predsearch import (
    MipInstance,
    Row,
    Sense,
    VarKind,
    binarize_solution,
    check_feasibility,
    evaluate_objective,
    instance_to_json,
    load_instance,
    save_instance,
)
from predsearch.errors import DimensionError, ParseError, ValidationError


def two_var_instance():
    return MipInstance(
        name="toy",
        objective=[1.0, 2.0],
        rows=(Row(terms=((0, 1.0), (1, 1.0)), sense=Sense.LE, rhs=3.0),),
        lower=[0.0, 0.0],
        upper=[2.0, 2.0],
        kinds=(VarKind.INTEGER, VarKind.INTEGER),
        var_names=("x0", "x1"),
        family="toy",
        param_seed=0,
    )


def test_round_trip_identity(tmp_path):
    inst = two_var_instance()
    path = tmp_path / "toy.json"
    save_instance(inst, path)
    loaded = load_instance(path)
    assert loaded == inst
    # byte-level canonical form is stable under a second round trip
    save_instance(loaded, tmp_path / "toy2.json")
    assert (tmp_path / "toy.json").read_bytes() == (tmp_path / "toy2.json").read_bytes()


def test_binary_bad_bounds_rejected():
    with pytest.raises(ValidationError, match="binary"):
        MipInstance(
            name="bad",
            objective=[1.0],
            rows=(),
            lower=[0.0],
            upper=[2.0],
            kinds=(VarKind.BINARY,),
            var_names=("b0",),
        )


def test_bad_file_reports_location(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x", "family": "f",\n  "param_seed": oops}')
    with pytest.raises(ParseError, match="line"):
        load_instance(path)


def test_missing_field_reported(tmp_path):
    path = tmp_path / "nofam.json"
    path.write_text('{"name": "x", "param_seed": 0, "vars": [], "rows": []}')
    with pytest.raises(ParseError, match="family"):
        load_instance(path)


def test_duplicate_column_rejected():
    with pytest.raises(ValidationError, match="duplicate"):
        MipInstance(
            name="dup",
            objective=[1.0, 1.0],
            rows=(Row(terms=((0, 1.0), (0, 2.0)), sense=Sense.LE, rhs=1.0),),
            lower=[0.0, 0.0],
            upper=[1.0, 1.0],
            kinds=(VarKind.CONTINUOUS,) * 2,
            var_names=("a", "b"),
        )


def test_integer_requires_finite_bounds():
    with pytest.raises(ValidationError, match="finite"):
        MipInstance(
            name="inf",
            objective=[1.0],
            rows=(),
            lower=[0.0],
            upper=[math.inf],
            kinds=(VarKind.INTEGER,),
            var_names=("g",),
        )


def test_evaluate_objective_examples():
    inst = two_var_instance()
    assert evaluate_objective(inst, [0.0, 0.0]) == 0.0
    assert evaluate_objective(inst, [3.0, 4.0]) == 11.0
    with pytest.raises(DimensionError):
        evaluate_objective(inst, [1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_objective_is_linear(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 8))
    inst = MipInstance(
        name="lin",
        objective=rng.normal(size=n),
        rows=(),
        lower=np.full(n, -np.inf),
        upper=np.full(n, np.inf),
        kinds=(VarKind.CONTINUOUS,) * n,
        var_names=tuple(f"x{i}" for i in range(n)),
    )
    x, y = rng.normal(size=n), rng.normal(size=n)
    a, b = rng.normal(), rng.normal()
    left = evaluate_objective(inst, a * x + b * y)
    right = a * evaluate_objective(inst, x) + b * evaluate_objective(inst, y)
    assert abs(left - right) <= 1e-12 * max(1.0, abs(left), abs(right))


def test_feasibility_examples():
    inst = two_var_instance()
    rep = check_feasibility(inst, [1.0, 1.0], tol=1e-6)
    assert rep.feasible
    assert rep.max_row_violation == 0.0
    assert rep.max_bound_violation == 0.0

    rep = check_feasibility(inst, [2.0, 2.0], tol=1e-6)
    assert not rep.feasible
    assert rep.max_row_violation == pytest.approx(1.0)

    rep = check_feasibility(inst, [2.4, 0.0], tol=1e-6)
    assert rep.max_integrality_violation == pytest.approx(0.4)


def test_feasibility_monotone_in_tolerance():
    inst = two_var_instance()
    x = [2.0 + 1e-7, 0.0]
    for tol, larger in [(1e-8, 1e-6), (1e-6, 1e-3)]:
        if check_feasibility(inst, x, tol).feasible:
            assert check_feasibility(inst, x, larger).feasible


def test_binarize_threshold_rule():
    inst = MipInstance(
        name="bin",
        objective=[0.0, 0.0, 0.0],
        rows=(),
        lower=[0.0, 0.0, 0.0],
        upper=[5.0, 5.0, 5.0],
        kinds=(VarKind.INTEGER,) * 3,
        var_names=("a", "b", "c"),
    )
    labels = binarize_solution(inst, [0.0, 3.0, 1e-7], tol=1e-6)
    assert labels.tolist() == [0, 1, 0]
    assert binarize_solution(inst, [0.0, 0.0, 0.0]).tolist() == [0, 0, 0]
    # idempotent on vectors that are already 0/1
    assert binarize_solution(inst, labels.astype(float)).tolist() == labels.tolist()


def test_binarize_skips_continuous():
    inst = MipInstance(
        name="mix",
        objective=[0.0, 0.0],
        rows=(),
        lower=[0.0, 0.0],
        upper=[np.inf, 4.0],
        kinds=(VarKind.CONTINUOUS, VarKind.INTEGER),
        var_names=("f", "y"),
    )
    assert binarize_solution(inst, [7.5, 2.0]).tolist() == [1]


def test_canonical_json_preserves_order():
    inst = two_var_instance()
    text = instance_to_json(inst)
    assert text.index('"x0"') < text.index('"x1"')

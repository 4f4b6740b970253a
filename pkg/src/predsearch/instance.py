"""Canonical MIP data model and its JSON on-disk format.

Instances are always minimization problems over rows `a.x {<=,=,>=} rhs`
with per-variable bounds and kinds. All container types are frozen and
their arrays are marked read-only, so instances can be shared freely
between threads and processes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionError, ParseError, ValidationError

BOUND_INTEGRALITY_TOL = 1e-9
DEFAULT_TOL = 1e-6


class VarKind(str, Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"
    INTEGER = "integer"


class Sense(str, Enum):
    LE = "LE"
    EQ = "EQ"
    GE = "GE"


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Row:
    """One sparse constraint row: sum of coeff*x over terms, sense, rhs."""

    terms: tuple[tuple[int, float], ...]
    sense: Sense
    rhs: float

    def indices(self) -> np.ndarray:
        return np.array([t[0] for t in self.terms], dtype=int)

    def coefficients(self) -> np.ndarray:
        return np.array([t[1] for t in self.terms], dtype=float)


@dataclass(frozen=True, eq=False)
class MipInstance:
    """A full MIP: min objective.x subject to rows and variable bounds."""

    name: str
    objective: np.ndarray
    rows: tuple[Row, ...]
    lower: np.ndarray
    upper: np.ndarray
    kinds: tuple[VarKind, ...]
    var_names: tuple[str, ...]
    family: str = ""
    param_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "objective", _frozen_array(self.objective))
        object.__setattr__(self, "lower", _frozen_array(self.lower))
        object.__setattr__(self, "upper", _frozen_array(self.upper))
        object.__setattr__(self, "rows", tuple(self.rows))
        object.__setattr__(self, "kinds", tuple(self.kinds))
        object.__setattr__(self, "var_names", tuple(self.var_names))
        self._validate()

    def __eq__(self, other) -> bool:
        if not isinstance(other, MipInstance):
            return NotImplemented
        return (
            self.name == other.name
            and self.family == other.family
            and self.param_seed == other.param_seed
            and self.var_names == other.var_names
            and self.kinds == other.kinds
            and self.rows == other.rows
            and np.array_equal(self.objective, other.objective)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    def __hash__(self):
        return hash((self.name, self.family, self.param_seed, self.var_names))

    @property
    def num_vars(self) -> int:
        return self.objective.shape[0]

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def integer_indices(self) -> np.ndarray:
        """Indices of variables with integrality requirements, ascending."""
        return np.array(
            [i for i, k in enumerate(self.kinds) if k is not VarKind.CONTINUOUS],
            dtype=int,
        )

    def _validate(self):
        n = self.num_vars
        if not (len(self.kinds) == len(self.var_names) == self.lower.shape[0] == self.upper.shape[0] == n):
            raise ValidationError(f"instance '{self.name}': inconsistent variable array lengths")
        if not np.all(np.isfinite(self.objective)):
            raise ValidationError(f"instance '{self.name}': non-finite objective coefficient")
        for i in range(n):
            lb, ub, kind = self.lower[i], self.upper[i], self.kinds[i]
            vid = f"variable {i} ('{self.var_names[i]}')"
            if lb > ub:
                raise ValidationError(f"{vid}: lower bound {lb} exceeds upper bound {ub}")
            if kind is VarKind.BINARY:
                if lb != 0.0 or ub != 1.0:
                    raise ValidationError(f"{vid}: binary variable must have bounds [0, 1], got [{lb}, {ub}]")
            elif kind is VarKind.INTEGER:
                if not (np.isfinite(lb) and np.isfinite(ub)):
                    raise ValidationError(f"{vid}: general integer variable needs finite bounds")
                if abs(lb - round(lb)) > BOUND_INTEGRALITY_TOL or abs(ub - round(ub)) > BOUND_INTEGRALITY_TOL:
                    raise ValidationError(f"{vid}: integer variable bounds [{lb}, {ub}] are not integral")
        for j, row in enumerate(self.rows):
            seen = set()
            for idx, coeff in row.terms:
                if not (0 <= idx < n):
                    raise ValidationError(f"row {j}: column index {idx} out of range [0, {n})")
                if idx in seen:
                    raise ValidationError(f"row {j}: duplicate column index {idx}")
                seen.add(idx)
                if not math.isfinite(coeff):
                    raise ValidationError(f"row {j}: non-finite coefficient on column {idx}")
            if not math.isfinite(row.rhs):
                raise ValidationError(f"row {j}: non-finite right-hand side")


@dataclass(frozen=True)
class Solution:
    """A candidate assignment with its recomputed objective value."""

    values: np.ndarray
    objective: float
    feasible: bool
    source: str = "solver"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen_array(self.values))


def make_solution(inst: MipInstance, values, *, feasible: bool, source: str = "solver") -> Solution:
    values = np.asarray(values, dtype=float)
    if values.shape[0] != inst.num_vars:
        raise DimensionError(f"solution has {values.shape[0]} values, instance has {inst.num_vars} variables")
    return Solution(values=values, objective=evaluate_objective(inst, values), feasible=feasible, source=source)


@dataclass(frozen=True)
class FeasibilityReport:
    max_row_violation: float
    max_bound_violation: float
    max_integrality_violation: float
    feasible: bool


def evaluate_objective(inst: MipInstance, x) -> float:
    """Objective value c.x of an assignment."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != inst.num_vars:
        raise DimensionError(f"assignment length {x.shape[0]} != {inst.num_vars} variables")
    return float(np.dot(inst.objective, x))


def check_feasibility(inst: MipInstance, x, tol: float = DEFAULT_TOL) -> FeasibilityReport:
    """Exact violation maxima over rows, bounds, and integrality."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] != inst.num_vars:
        raise DimensionError(f"assignment length {x.shape[0]} != {inst.num_vars} variables")
    if tol <= 0:
        raise ValueError("tolerance must be positive")

    row_viol = 0.0
    for row in inst.rows:
        activity = float(np.dot(row.coefficients(), x[row.indices()])) if row.terms else 0.0
        if row.sense is Sense.LE:
            v = activity - row.rhs
        elif row.sense is Sense.GE:
            v = row.rhs - activity
        else:
            v = abs(activity - row.rhs)
        row_viol = max(row_viol, v)
    row_viol = max(row_viol, 0.0)

    below = np.where(np.isfinite(inst.lower), inst.lower - x, -np.inf)
    above = np.where(np.isfinite(inst.upper), x - inst.upper, -np.inf)
    bound_viol = float(max(0.0, below.max(initial=-np.inf), above.max(initial=-np.inf)))

    int_idx = inst.integer_indices()
    if int_idx.size:
        xi = x[int_idx]
        int_viol = float(np.abs(xi - np.round(xi)).max())
    else:
        int_viol = 0.0

    feasible = row_viol <= tol and bound_viol <= tol and int_viol <= tol
    return FeasibilityReport(row_viol, bound_viol, int_viol, feasible)


def binarize_solution(inst: MipInstance, x, tol: float = DEFAULT_TOL) -> np.ndarray:
    """0/1 labels over the integer variables: 0 where |x_i| <= tol, else 1.

    Continuous variables are excluded; order follows ascending variable index.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] != inst.num_vars:
        raise DimensionError(f"assignment length {x.shape[0]} != {inst.num_vars} variables")
    xi = x[inst.integer_indices()]
    return (np.abs(xi) > tol).astype(np.uint8)


# --- on-disk format ---------------------------------------------------------
#
# One instance per JSON file (UTF-8):
#   name, family, param_seed,
#   vars: [{name, kind, lb, ub, obj}],  lb/ub null meaning -inf/+inf,
#   rows: [{terms: [[col, coeff], ...], sense: "LE"|"EQ"|"GE", rhs}]
# Construction order is preserved exactly so variable indices are stable
# across save/load round trips.


def _bound_to_json(v: float):
    return None if not math.isfinite(v) else float(v)


def _bound_from_json(v, default: float) -> float:
    return default if v is None else float(v)


def instance_to_dict(inst: MipInstance) -> dict:
    return {
        "name": inst.name,
        "family": inst.family,
        "param_seed": inst.param_seed,
        "vars": [
            {
                "name": inst.var_names[i],
                "kind": inst.kinds[i].value,
                "lb": _bound_to_json(float(inst.lower[i])),
                "ub": _bound_to_json(float(inst.upper[i])),
                "obj": float(inst.objective[i]),
            }
            for i in range(inst.num_vars)
        ],
        "rows": [
            {
                "terms": [[int(i), float(c)] for i, c in row.terms],
                "sense": row.sense.value,
                "rhs": float(row.rhs),
            }
            for row in inst.rows
        ],
    }


def instance_from_dict(data: dict, *, source: str = "<dict>") -> MipInstance:
    def need(obj, key, where):
        if key not in obj:
            raise ParseError(f"{source}: missing field '{key}' in {where}")
        return obj[key]

    try:
        var_entries = need(data, "vars", "instance")
        row_entries = need(data, "rows", "instance")
        names, kinds, lower, upper, obj = [], [], [], [], []
        for i, v in enumerate(var_entries):
            names.append(str(need(v, "name", f"vars[{i}]")))
            kind_raw = need(v, "kind", f"vars[{i}]")
            try:
                kinds.append(VarKind(kind_raw))
            except ValueError:
                raise ParseError(f"{source}: vars[{i}]: unknown kind '{kind_raw}'") from None
            lower.append(_bound_from_json(need(v, "lb", f"vars[{i}]"), -math.inf))
            upper.append(_bound_from_json(need(v, "ub", f"vars[{i}]"), math.inf))
            obj.append(float(need(v, "obj", f"vars[{i}]")))
        rows = []
        for j, r in enumerate(row_entries):
            sense_raw = need(r, "sense", f"rows[{j}]")
            try:
                sense = Sense(sense_raw)
            except ValueError:
                raise ParseError(f"{source}: rows[{j}]: unknown sense '{sense_raw}'") from None
            terms = tuple((int(i), float(c)) for i, c in need(r, "terms", f"rows[{j}]"))
            rows.append(Row(terms=terms, sense=sense, rhs=float(need(r, "rhs", f"rows[{j}]"))))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{source}: malformed instance data: {exc}") from exc

    return MipInstance(
        name=str(need(data, "name", "instance")),
        objective=np.array(obj, dtype=float),
        rows=tuple(rows),
        lower=np.array(lower, dtype=float),
        upper=np.array(upper, dtype=float),
        kinds=tuple(kinds),
        var_names=tuple(names),
        family=str(need(data, "family", "instance")),
        param_seed=int(need(data, "param_seed", "instance")),
    )


def instance_to_json(inst: MipInstance) -> str:
    """Canonical serialization; byte-stable for identical instances."""
    return json.dumps(instance_to_dict(inst), indent=1) + "\n"


def save_instance(inst: MipInstance, path) -> None:
    Path(path).write_text(instance_to_json(inst), encoding="utf-8")


def load_instance(path) -> MipInstance:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: cannot read: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(data, source=str(path))

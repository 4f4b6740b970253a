"""Score-guided trust-region search over a restricted sub-MIP.

Two variants:

* binary: fix the k0 lowest-scoring binaries toward 0 and the k1 highest
  toward 1, with a single budget row allowing up to delta flips.
* integer (zero-prediction): pick the k0 lowest-scoring integer variables
  as the tentative zero set X0; each gets a fresh binary indicator z_i
  with rows x_i <= ub_i * z_i (and x_i >= lb_i * z_i when lb_i < 0), plus
  one budget row sum(z) <= delta. With z_i = 0 the variable is pinned to
  zero; at most delta of them may escape.

The sub-MIP keeps the original variable indices; auxiliary indicators are
appended at the end, and results are projected back before being checked
against the original instance.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .encoding import encode_instance
from .errors import DimensionError, ValidationError
from .instance import MipInstance, Row, Sense, VarKind, check_feasibility, make_solution
from .model import GatParams, Prediction, forward, load_checkpoint
from .solver import SolveResult, SolveStatus, SolverConfig, solve_mip


class Variant(str, Enum):
    BINARY = "binary-pas"
    INTEGER = "integer-pas"


@dataclass(frozen=True)
class NeighborhoodSpec:
    variant: Variant
    x0: tuple[int, ...]
    x1: tuple[int, ...]
    delta: int
    k0: int
    k1: int

    def __post_init__(self):
        if self.delta < 0:
            raise ValidationError("delta must be non-negative")
        if set(self.x0) & set(self.x1):
            raise ValidationError("X0 and X1 must be disjoint")
        if self.variant is Variant.INTEGER and self.x1:
            raise ValidationError("the integer variant never fixes variables to nonzero values")
        if len(self.x0) != self.k0 or len(self.x1) != self.k1:
            raise ValidationError("k0/k1 disagree with the selected index sets")


def eligible_zero_indices(inst: MipInstance) -> np.ndarray:
    """Integer variables that can be fixed to zero: 0 within bounds."""
    idx = inst.integer_indices()
    ok = (inst.lower[idx] <= 0.0) & (inst.upper[idx] >= 0.0)
    return idx[ok]


def k0_from_percent(inst: MipInstance, percent: float) -> int:
    """floor(p * |eligible integer variables|), clamped to at least 1."""
    count = eligible_zero_indices(inst).size
    return max(1, int(np.floor(percent / 100.0 * count)))


def select_x0(pred: Prediction, inst: MipInstance, k0: int) -> tuple[int, ...]:
    """The k0 eligible variables with the smallest scores (ties: lowest index)."""
    eligible = eligible_zero_indices(inst)
    if k0 > eligible.size:
        raise ValidationError(f"k0={k0} exceeds the {eligible.size} eligible integer variables")
    scores = pred.scores[eligible]
    order = np.argsort(scores, kind="stable")
    return tuple(int(i) for i in eligible[order[:k0]])


def select_x0_x1_binary(pred: Prediction, inst: MipInstance, k0: int, k1: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Binary variant: k0 smallest scores form X0, k1 largest form X1.

    X1 ties break toward the highest index; overlaps (possible with score
    ties) resolve in favor of X0, X1 moving on to the next-largest score.
    """
    binaries = np.array([i for i, k in enumerate(inst.kinds) if k is VarKind.BINARY], dtype=int)
    if k0 + k1 > binaries.size:
        raise ValidationError(f"k0+k1={k0 + k1} exceeds the {binaries.size} binary variables")
    scores = pred.scores[binaries]
    asc = binaries[np.argsort(scores, kind="stable")]
    x0 = [int(i) for i in asc[:k0]]
    # descending score with descending index on ties: sort by (-score, -index)
    order = np.lexsort((-binaries, -scores))
    x1 = []
    taken = set(x0)
    for pos in order:
        if len(x1) == k1:
            break
        i = int(binaries[pos])
        if i not in taken:
            x1.append(i)
    return tuple(x0), tuple(x1)


def build_neighborhood_mip(inst: MipInstance, spec: NeighborhoodSpec) -> MipInstance:
    """Append the trust-region rows (and indicators, for the integer
    variant) to a copy of the instance. Any solution of the result,
    projected to the original variables, is feasible for the original."""
    for i in spec.x0:
        if inst.kinds[i] is VarKind.CONTINUOUS:
            raise ValidationError(f"X0 member {i} is continuous")
        if not (inst.lower[i] <= 0.0 <= inst.upper[i]):
            raise ValidationError(f"X0 member {i} cannot take value zero within its bounds")
        if not (np.isfinite(inst.lower[i]) and np.isfinite(inst.upper[i])):
            raise ValidationError(f"X0 member {i} has non-finite bounds")

    if spec.variant is Variant.BINARY:
        for i in list(spec.x0) + list(spec.x1):
            if inst.kinds[i] is not VarKind.BINARY:
                raise ValidationError(f"binary variant selected non-binary variable {i}")
        # sum_{X0} x + sum_{X1} (1 - x) <= delta   ==>   sum_{X0} x - sum_{X1} x <= delta - k1
        terms = tuple((i, 1.0) for i in spec.x0) + tuple((i, -1.0) for i in spec.x1)
        row = Row(terms=terms, sense=Sense.LE, rhs=float(spec.delta - spec.k1))
        return MipInstance(
            name=f"{inst.name}#pas",
            objective=inst.objective,
            rows=inst.rows + (row,),
            lower=inst.lower,
            upper=inst.upper,
            kinds=inst.kinds,
            var_names=inst.var_names,
            family=inst.family,
            param_seed=inst.param_seed,
        )

    n = inst.num_vars
    objective = np.concatenate([inst.objective, np.zeros(len(spec.x0))])
    lower = np.concatenate([inst.lower, np.zeros(len(spec.x0))])
    upper = np.concatenate([inst.upper, np.ones(len(spec.x0))])
    kinds = inst.kinds + (VarKind.BINARY,) * len(spec.x0)
    names = inst.var_names + tuple(f"allow_nonzero[{inst.var_names[i]}]" for i in spec.x0)
    rows = list(inst.rows)
    for pos, i in enumerate(spec.x0):
        z = n + pos
        rows.append(Row(terms=((i, 1.0), (z, -float(inst.upper[i]))), sense=Sense.LE, rhs=0.0))
        if inst.lower[i] < 0.0:
            rows.append(Row(terms=((i, 1.0), (z, -float(inst.lower[i]))), sense=Sense.GE, rhs=0.0))
    rows.append(Row(terms=tuple((n + pos, 1.0) for pos in range(len(spec.x0))), sense=Sense.LE, rhs=float(spec.delta)))
    return MipInstance(
        name=f"{inst.name}#pas",
        objective=objective,
        rows=tuple(rows),
        lower=lower,
        upper=upper,
        kinds=kinds,
        var_names=names,
        family=inst.family,
        param_seed=inst.param_seed,
    )


@dataclass(frozen=True)
class PasRunResult:
    result: SolveResult          # projected onto the original variables
    spec: NeighborhoodSpec
    prediction: Prediction
    inference_seconds: float


def _project_result(inst: MipInstance, sub: SolveResult, offset: float, feas_tol: float) -> SolveResult:
    n = inst.num_vars
    best = None
    if sub.best_solution is not None:
        values = sub.best_solution.values[:n]
        report = check_feasibility(inst, values, feas_tol)
        best = make_solution(inst, values, feasible=report.feasible, source="pas")
    incumbents = tuple((t + offset, obj) for t, obj in sub.incumbents)
    return SolveResult(
        status=sub.status,
        incumbents=incumbents,
        best_solution=best,
        best_bound=sub.best_bound,
        nodes=sub.nodes,
    )


def run_pas(
    inst: MipInstance,
    checkpoint,
    k0: int,
    delta: int,
    cfg: SolverConfig,
    *,
    variant: Variant = Variant.INTEGER,
    k1: int = 0,
) -> PasRunResult:
    """Encode, score once, restrict, solve, and project back.

    ``checkpoint`` is a path or an already-loaded GatParams. Encoding and
    inference time are charged against the wall-clock budget; in node-limit
    mode the (virtual) clock is unaffected.
    """
    t_start = time.monotonic()
    params = checkpoint if isinstance(checkpoint, GatParams) else load_checkpoint(checkpoint)[0]
    graph = encode_instance(inst, identity_width=params.identity_bits)
    pred = forward(params, graph)
    if variant is Variant.BINARY:
        x0, x1 = select_x0_x1_binary(pred, inst, k0, k1)
        spec = NeighborhoodSpec(variant=variant, x0=x0, x1=x1, delta=delta, k0=k0, k1=k1)
    else:
        x0 = select_x0(pred, inst, k0)
        spec = NeighborhoodSpec(variant=Variant.INTEGER, x0=x0, x1=(), delta=delta, k0=k0, k1=0)
    sub = build_neighborhood_mip(inst, spec)
    t_inf = time.monotonic() - t_start

    sub_cfg = cfg
    offset = 0.0
    if cfg.time_limit is not None:
        offset = t_inf
        sub_cfg = replace(cfg, time_limit=max(0.05, cfg.time_limit - t_inf))
    result = solve_mip(sub, sub_cfg)
    projected = _project_result(inst, result, offset, cfg.feas_tol)
    return PasRunResult(result=projected, spec=spec, prediction=pred, inference_seconds=t_inf)

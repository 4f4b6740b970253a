"""Branch-and-bound MILP solver with incumbent tracing and solution pooling.

The engine is deliberately simple: LP relaxations come from the embedded
bounded simplex, nodes carry bound changes only, and the default search
is best-bound with most-fractional branching. There are no cuts and no
presolve; correctness is carried by enumeration-oracle tests.

Two clocks exist. With a wall-clock ``time_limit`` incumbents are stamped
with monotonic seconds. In pure ``node_limit`` mode the stamp is the number
of processed nodes, which makes results bit-for-bit reproducible.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import DimensionError, PredsearchError, ValidationError
from .instance import MipInstance, Solution, check_feasibility, make_solution
from .lp import LpStatus, StandardForm, compile_standard_form, solve_lp


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time-limit"


class BranchRule(str, Enum):
    MOST_FRACTIONAL = "most-fractional"
    PSEUDO_COST = "pseudo-cost"


class NodeOrder(str, Enum):
    BEST_BOUND = "best-bound"
    DEPTH_FIRST = "depth-first"


@dataclass(frozen=True)
class SolverConfig:
    """Limits and strategy knobs for one solve.

    At least one of time_limit / node_limit must be set; with only a
    node_limit the run is fully deterministic and incumbent times count
    processed nodes instead of seconds.
    """

    time_limit: float | None = None
    node_limit: int | None = None
    integrality_tol: float = 1e-6
    feas_tol: float = 1e-6
    branch_rule: BranchRule = BranchRule.MOST_FRACTIONAL
    node_order: NodeOrder = NodeOrder.BEST_BOUND
    rng_seed: int = 0
    pool_capacity: int = 1
    pool_gap: float = 0.05

    def __post_init__(self):
        if self.time_limit is None and self.node_limit is None:
            raise ValidationError("solver config needs a time_limit or a node_limit")
        if self.time_limit is not None and self.time_limit <= 0:
            raise ValidationError("time_limit must be positive")
        if self.node_limit is not None and self.node_limit <= 0:
            raise ValidationError("node_limit must be positive")
        for name in ("integrality_tol", "feas_tol"):
            v = getattr(self, name)
            if not (0.0 < v < 1e-2):
                raise ValidationError(f"{name} must lie in (0, 1e-2), got {v}")
        if self.pool_capacity < 1:
            raise ValidationError("pool_capacity must be >= 1")
        object.__setattr__(self, "branch_rule", BranchRule(self.branch_rule))
        object.__setattr__(self, "node_order", NodeOrder(self.node_order))


@dataclass(frozen=True)
class SolveResult:
    status: SolveStatus
    incumbents: tuple[tuple[float, float], ...]  # (clock, objective), strictly improving
    best_solution: Solution | None
    best_bound: float
    nodes: int


@dataclass
class _Node:
    bound: float
    node_id: int
    depth: int
    lower: np.ndarray
    upper: np.ndarray


class _Engine:
    def __init__(self, inst: MipInstance, cfg: SolverConfig, *, perturb: bool = False):
        self.inst = inst
        self.cfg = cfg
        self.form: StandardForm = compile_standard_form(inst)
        self.int_idx = inst.integer_indices()
        self.has_continuous = self.int_idx.size < inst.num_vars
        if self.int_idx.size and not (
            np.all(np.isfinite(inst.lower[self.int_idx])) and np.all(np.isfinite(inst.upper[self.int_idx]))
        ):
            raise ValidationError("solve_mip requires finite bounds on all integer variables")
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence((cfg.rng_seed, 0xB0))))
        self.branch_noise = rng.uniform(0.75, 1.25, size=inst.num_vars) if perturb else np.ones(inst.num_vars)
        # pseudo-cost state: per-variable average LP bound degradation per unit
        n = inst.num_vars
        self.pc_up = np.abs(inst.objective) + 1e-6
        self.pc_dn = np.abs(inst.objective) + 1e-6
        self.pc_up_cnt = np.zeros(n)
        self.pc_dn_cnt = np.zeros(n)
        # pool keyed by rounded integer subvector
        self.pool: dict[tuple, Solution] = {}
        self.incumbent: Solution | None = None
        self.inc_obj = np.inf
        self.trace: list[tuple[float, float]] = []
        self.nodes_processed = 0
        self._t0 = time.monotonic()

    # -- clocks and cutoffs ----------------------------------------------------

    def _clock(self) -> float:
        if self.cfg.time_limit is None:
            return float(self.nodes_processed)
        return time.monotonic() - self._t0

    def _out_of_budget(self) -> bool:
        if self.cfg.node_limit is not None and self.nodes_processed >= self.cfg.node_limit:
            return True
        if self.cfg.time_limit is not None and time.monotonic() - self._t0 >= self.cfg.time_limit:
            return True
        return False

    def _cutoff(self) -> float:
        """Nodes with LP bound >= cutoff cannot contribute and are pruned."""
        if self.inc_obj == np.inf:
            return np.inf
        tol = 1e-9 * max(1.0, abs(self.inc_obj))
        if self.cfg.pool_capacity <= 1:
            return self.inc_obj - tol
        window = self.inc_obj + self.cfg.pool_gap * max(1.0, abs(self.inc_obj))
        if len(self.pool) >= self.cfg.pool_capacity:
            worst = max(s.objective for s in self.pool.values())
            return min(window, worst - tol)
        return window

    # -- incumbents and pool -----------------------------------------------------

    def _integer_key(self, x: np.ndarray) -> tuple:
        return tuple(int(round(v)) for v in x[self.int_idx])

    def _polish(self, x: np.ndarray) -> np.ndarray | None:
        """Snap integer values and, if continuous variables exist, re-solve
        the LP with the integers fixed so the point is exactly feasible."""
        snapped = x.copy()
        snapped[self.int_idx] = np.round(snapped[self.int_idx])
        if not self.has_continuous:
            return snapped
        lo = self.inst.lower.copy()
        hi = self.inst.upper.copy()
        lo[self.int_idx] = snapped[self.int_idx]
        hi[self.int_idx] = snapped[self.int_idx]
        res = solve_lp(self.form, lo, hi)
        if res.status is not LpStatus.OPTIMAL:
            return None
        return res.x

    def _record_candidate(self, x: np.ndarray) -> None:
        polished = self._polish(x)
        if polished is None:
            return
        report = check_feasibility(self.inst, polished, self.cfg.feas_tol)
        if not report.feasible:
            return
        sol = make_solution(self.inst, polished, feasible=True)
        key = self._integer_key(polished)
        if self.cfg.pool_capacity > 1:
            known = self.pool.get(key)
            if known is None or sol.objective < known.objective:
                self.pool[key] = sol
            if len(self.pool) > self.cfg.pool_capacity:
                worst = max(self.pool, key=lambda k: (self.pool[k].objective, k))
                del self.pool[worst]
        else:
            self.pool = {key: sol} if (not self.pool or sol.objective < self.inc_obj) else self.pool
        if sol.objective < self.inc_obj - 1e-12 * max(1.0, abs(sol.objective)):
            self.incumbent = sol
            self.inc_obj = sol.objective
            self.trace.append((self._clock(), sol.objective))

    # -- branching ----------------------------------------------------------------

    def _fractionality(self, x: np.ndarray) -> np.ndarray:
        xi = x[self.int_idx]
        return np.abs(xi - np.round(xi))

    def _pick_branch_var(self, x: np.ndarray, frac: np.ndarray) -> int:
        fractional = frac > self.cfg.integrality_tol
        cand = self.int_idx[fractional]
        f = frac[fractional]
        if self.cfg.branch_rule is BranchRule.PSEUDO_COST:
            up = self.pc_up[cand] * (np.ceil(x[cand]) - x[cand])
            dn = self.pc_dn[cand] * (x[cand] - np.floor(x[cand]))
            score = np.maximum(up, 1e-9) * np.maximum(dn, 1e-9)
        else:
            score = f
        score = score * self.branch_noise[cand]
        best = np.nonzero(score >= score.max() - 1e-15)[0]
        return int(cand[best[0]])

    def _update_pseudo_cost(self, var: int, direction: int, parent_bound: float, child_bound: float, frac: float):
        gain = max(child_bound - parent_bound, 0.0)
        unit = max(frac, 1e-6)
        if direction > 0:
            cnt = self.pc_up_cnt[var] + 1
            self.pc_up[var] = (self.pc_up[var] * self.pc_up_cnt[var] + gain / unit) / cnt
            self.pc_up_cnt[var] = cnt
        else:
            cnt = self.pc_dn_cnt[var] + 1
            self.pc_dn[var] = (self.pc_dn[var] * self.pc_dn_cnt[var] + gain / unit) / cnt
            self.pc_dn_cnt[var] = cnt

    def _exclusion_children(self, node: _Node, x: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """Partition the node box minus the found integer point: children fix a
        prefix of integer variables to the point and step one variable off it."""
        children = []
        lo, hi = node.lower.copy(), node.upper.copy()
        for i in self.int_idx:
            v = round(float(x[i]))
            if lo[i] <= v - 1:
                la, ha = lo.copy(), hi.copy()
                ha[i] = v - 1
                children.append((la, ha))
            if v + 1 <= hi[i]:
                la, ha = lo.copy(), hi.copy()
                la[i] = v + 1
                children.append((la, ha))
            lo[i] = v
            hi[i] = v
        return children

    # -- main loop -------------------------------------------------------------------

    def run(self) -> SolveResult:
        heap: list[tuple] = []
        counter = 0

        def push(bound: float, depth: int, lo: np.ndarray, hi: np.ndarray):
            nonlocal counter
            counter += 1
            node = _Node(bound, counter, depth, lo, hi)
            if self.cfg.node_order is NodeOrder.BEST_BOUND:
                key = (bound, counter)
            else:
                key = (-counter, bound)
            heapq.heappush(heap, (key, node))

        push(-np.inf, 0, self.inst.lower.copy(), self.inst.upper.copy())
        hit_limit = False

        while heap:
            if self._out_of_budget():
                hit_limit = True
                break
            (_, node) = heapq.heappop(heap)
            if node.bound >= self._cutoff():
                continue
            self.nodes_processed += 1

            lp = solve_lp(self.form, node.lower, node.upper)
            if lp.status is LpStatus.INFEASIBLE:
                continue
            if lp.status is LpStatus.UNBOUNDED:
                raise PredsearchError("LP relaxation unbounded; MILP model is unbounded or malformed")
            bound = lp.objective
            node.bound = max(node.bound, bound)
            if bound >= self._cutoff():
                continue

            frac = self._fractionality(lp.x)
            if self.int_idx.size == 0 or frac.max(initial=0.0) <= self.cfg.integrality_tol:
                self._record_candidate(lp.x)
                if self.cfg.pool_capacity > 1 and self.int_idx.size:
                    for lo, hi in self._exclusion_children(node, lp.x):
                        push(bound, node.depth + 1, lo, hi)
                continue

            var = self._pick_branch_var(lp.x, frac)
            v = lp.x[var]
            lo_dn, hi_dn = node.lower.copy(), node.upper.copy()
            hi_dn[var] = np.floor(v)
            lo_up, hi_up = node.lower.copy(), node.upper.copy()
            lo_up[var] = np.ceil(v)
            if lo_dn[var] <= hi_dn[var]:
                push(bound, node.depth + 1, lo_dn, hi_dn)
            if lo_up[var] <= hi_up[var]:
                push(bound, node.depth + 1, lo_up, hi_up)

        open_bounds = [node.bound for (_, node) in heap]
        if hit_limit or heap:
            status = SolveStatus.TIME_LIMIT
            best_bound = min(open_bounds) if open_bounds else self.inc_obj
            best_bound = min(best_bound, self.inc_obj)
        elif self.incumbent is not None:
            status = SolveStatus.OPTIMAL
            best_bound = self.inc_obj
        else:
            status = SolveStatus.INFEASIBLE
            best_bound = np.inf

        return SolveResult(
            status=status,
            incumbents=tuple(self.trace),
            best_solution=self.incumbent,
            best_bound=float(best_bound),
            nodes=self.nodes_processed,
        )


def solve_mip(inst: MipInstance, cfg: SolverConfig) -> SolveResult:
    """Solve a MIP to proven optimality or until a limit is reached."""
    return _Engine(inst, cfg).run()


@dataclass(frozen=True)
class PoolResult:
    solutions: tuple[Solution, ...]
    status: SolveStatus


def collect_solution_pool(inst: MipInstance, u_p: int, cfg: SolverConfig, *, restarts: int = 4) -> PoolResult:
    """Collect up to u_p feasible solutions with distinct integer parts,
    sorted by ascending objective (the first is the best incumbent found).

    The first run keeps a near-optimality window open while the pool is
    unfilled; if it comes back short, additional runs with perturbed
    branching scores append new distinct solutions until the restart budget
    is exhausted.
    """
    if u_p < 1:
        raise ValidationError("u_p must be >= 1")
    merged: dict[tuple, Solution] = {}
    status = SolveStatus.INFEASIBLE
    for attempt in range(restarts + 1):
        seed_cfg = replace(cfg, pool_capacity=u_p, rng_seed=_derive_seed(cfg.rng_seed, attempt))
        engine = _Engine(inst, seed_cfg, perturb=attempt > 0)
        result = engine.run()
        for key, sol in engine.pool.items():
            known = merged.get(key)
            if known is None or sol.objective < known.objective:
                merged[key] = sol
        if result.status is SolveStatus.OPTIMAL:
            status = SolveStatus.OPTIMAL
        elif result.status is SolveStatus.TIME_LIMIT and status is not SolveStatus.OPTIMAL:
            status = SolveStatus.TIME_LIMIT
        if len(merged) >= u_p:
            break
    ordered = sorted(merged.items(), key=lambda kv: (kv[1].objective, kv[0]))[:u_p]
    solutions = tuple(sol for _, sol in ordered)
    if not solutions and status is SolveStatus.OPTIMAL:
        status = SolveStatus.INFEASIBLE
    return PoolResult(solutions=solutions, status=status)


def _derive_seed(base: int, attempt: int) -> int:
    ss = np.random.SeedSequence((int(base) & 0xFFFFFFFF, attempt))
    return int(ss.generate_state(1, np.uint32)[0])

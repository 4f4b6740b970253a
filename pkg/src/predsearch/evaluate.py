"""Evaluation harness: hyperparameter grid search on validation instances
and the full benchmark suite with its report files.

The suite compares approaches (plain solver, score-guided variants) under
one budget per solve. Per instance, the best-known value v* is the minimum
final objective over every approach plus one longer reference solve, so
gaps are measured against the best anything ever found. Reports:

  metrics.csv   one row per instance x approach
  summary.csv   per-approach means/stds/wins, improvement vs plain,
                Wilcoxon p-values vs plain
  curves.csv    mean capped primal gap on a fixed time grid
  grid.csv      the validation grid (tune phase)
  manifest.json column documentation and the v* convention

Wins split on ties: every approach matching the per-instance best value
counts one win. All randomness is seeded per (instance, approach).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .instance import MipInstance
from .metrics import capped_primal_gap, gap_at, primal_gap, primal_integral, wilcoxon_signed_rank
from .model import GatParams, load_checkpoint
from .neighborhood import Variant, k0_from_percent, run_pas
from .solver import SolveStatus, SolverConfig, solve_mip
from .util import stable_seed, write_csv, atomic_write_text

PLAIN = "plain"


@dataclass(frozen=True)
class MetricsRecord:
    instance: str
    approach: str
    status: str
    final_objective: float | None
    v_star: float
    pg: float
    pg_raw: float
    pi: float
    nodes: int


@dataclass(frozen=True)
class GridCell:
    k0_percent: float
    k0: int
    delta: int
    mean_pg: float
    mean_pi: float


@dataclass(frozen=True)
class GridResult:
    cells: tuple[GridCell, ...]
    selected: GridCell
    selection_metric: str = "mean-pi"


def _horizon(cfg: SolverConfig) -> float:
    return cfg.time_limit if cfg.time_limit is not None else float(cfg.node_limit)


def clip_trace(trace, horizon: float):
    return tuple((t, obj) for t, obj in trace if t <= horizon + 1e-12)


def _final_objective(trace) -> float | None:
    return trace[-1][1] if trace else None


def _run_one(inst: MipInstance, approach: str, params, pas_params: dict, cfg: SolverConfig, seed: int):
    run_cfg = replace(cfg, rng_seed=seed)
    if approach == PLAIN:
        res = solve_mip(inst, run_cfg)
        return res.incumbents, res.nodes, res.status
    settings = pas_params[approach]
    variant = Variant.BINARY if approach == Variant.BINARY.value else Variant.INTEGER
    k0 = settings.get("k0")
    if k0 is None:
        k0 = k0_from_percent(inst, settings["k0_percent"])
    out = run_pas(
        inst,
        params,
        k0=k0,
        delta=int(settings["delta"]),
        cfg=run_cfg,
        variant=variant,
        k1=int(settings.get("k1", 0)),
    )
    return out.result.incumbents, out.result.nodes, out.result.status


def grid_search(
    val_entries: list[tuple[str, MipInstance]],
    checkpoint,
    delta_set,
    k0_percent_set,
    cfg: SolverConfig,
    *,
    variant: Variant = Variant.INTEGER,
    seed: int = 0,
) -> GridResult:
    """Mean validation PG/PI for every (k0, delta) pair; the selected pair
    minimizes mean PI with ties broken by mean PG, then smaller k0, then
    smaller delta. Infeasible or incumbent-free runs contribute capped
    gaps rather than aborting."""
    if not val_entries or not list(delta_set) or not list(k0_percent_set):
        raise ValidationError("grid search needs instances and non-empty parameter sets")
    params = checkpoint if isinstance(checkpoint, GatParams) else load_checkpoint(checkpoint)[0]
    horizon = _horizon(cfg)
    pairs = [(float(p), int(d)) for p in k0_percent_set for d in delta_set]

    traces: dict[tuple, tuple] = {}
    reference_best: dict[str, float | None] = {}
    for ref, inst in val_entries:
        res = solve_mip(inst, replace(cfg, rng_seed=stable_seed(seed, ref, "grid-ref")))
        reference_best[ref] = _final_objective(clip_trace(res.incumbents, horizon))
        for p, d in pairs:
            k0 = k0_from_percent(inst, p)
            out = run_pas(
                inst, params, k0=k0, delta=d,
                cfg=replace(cfg, rng_seed=stable_seed(seed, ref, f"grid-{p}-{d}")),
                variant=variant,
            )
            traces[(ref, p, d)] = clip_trace(out.result.incumbents, horizon)

    v_star: dict[str, float] = {}
    for ref, inst in val_entries:
        candidates = [reference_best[ref]] + [_final_objective(traces[(ref, p, d)]) for p, d in pairs]
        finite = [c for c in candidates if c is not None]
        v_star[ref] = min(finite) if finite else math.nan

    cells = []
    for p, d in pairs:
        pgs, pis = [], []
        for ref, inst in val_entries:
            trace = traces[(ref, p, d)]
            vs = v_star[ref]
            if math.isnan(vs):
                pgs.append(1.0)
                pis.append(horizon)
                continue
            pgs.append(capped_primal_gap(_final_objective(trace), vs))
            pis.append(primal_integral(trace, vs, horizon))
        cells.append(
            GridCell(
                k0_percent=p,
                k0=k0_from_percent(val_entries[0][1], p),
                delta=d,
                mean_pg=float(np.mean(pgs)),
                mean_pi=float(np.mean(pis)),
            )
        )
    selected = min(cells, key=lambda c: (c.mean_pi, c.mean_pg, c.k0_percent, c.delta))
    return GridResult(cells=tuple(cells), selected=selected)


@dataclass
class SuiteReport:
    records: list[MetricsRecord]
    summary: list[dict]
    curve_times: np.ndarray
    curves: dict[str, np.ndarray]
    horizon: float

    def summary_by_approach(self) -> dict[str, dict]:
        return {row["approach"]: row for row in self.summary}


def evaluate_suite(
    test_entries: list[tuple[str, MipInstance]],
    approaches: list[str],
    cfg: SolverConfig,
    *,
    checkpoint=None,
    pas_params: dict | None = None,
    reference_cfg: SolverConfig | None = None,
    seed: int = 0,
    time_grid: int = 64,
    out_dir=None,
) -> SuiteReport:
    """Run every approach on every instance, compute PG/PI against the
    shared best-known values, and aggregate the Table-style summary."""
    if not test_entries or not approaches:
        raise ValidationError("evaluate_suite needs instances and approaches")
    pas_params = pas_params or {}
    learned = [a for a in approaches if a != PLAIN]
    params = None
    if learned:
        if checkpoint is None:
            raise ValidationError("learned approaches need a checkpoint")
        params = checkpoint if isinstance(checkpoint, GatParams) else load_checkpoint(checkpoint)[0]
        for a in learned:
            if a not in pas_params:
                raise ValidationError(f"approach '{a}' is missing its (k0, delta) settings")
    horizon = _horizon(cfg)

    traces: dict[tuple[str, str], tuple] = {}
    nodes: dict[tuple[str, str], int] = {}
    statuses: dict[tuple[str, str], str] = {}
    for ref, inst in test_entries:
        for approach in approaches:
            tr, nd, status = _run_one(inst, approach, params, pas_params, cfg, stable_seed(seed, ref, approach))
            traces[(ref, approach)] = clip_trace(tr, horizon)
            nodes[(ref, approach)] = nd
            statuses[(ref, approach)] = status.value

    reference_best: dict[str, float | None] = {}
    ref_cfg = reference_cfg if reference_cfg is not None else cfg
    for ref, inst in test_entries:
        res = solve_mip(inst, replace(ref_cfg, rng_seed=stable_seed(seed, ref, "reference")))
        reference_best[ref] = res.best_solution.objective if res.best_solution is not None else None

    v_star: dict[str, float] = {}
    for ref, _ in test_entries:
        cands = [reference_best[ref]] + [_final_objective(traces[(ref, a)]) for a in approaches]
        finite = [c for c in cands if c is not None]
        v_star[ref] = min(finite) if finite else math.nan

    records = []
    for ref, _ in test_entries:
        vs = v_star[ref]
        for approach in approaches:
            trace = traces[(ref, approach)]
            final = _final_objective(trace)
            if math.isnan(vs):
                pg_raw, pg, pi = 1.0, 1.0, horizon
            else:
                pg_raw = primal_gap(final, vs)
                pg = min(1.0, pg_raw)
                pi = primal_integral(trace, vs, horizon)
            records.append(
                MetricsRecord(
                    instance=ref,
                    approach=approach,
                    status=statuses[(ref, approach)],
                    final_objective=final,
                    v_star=vs,
                    pg=pg,
                    pg_raw=pg_raw,
                    pi=pi,
                    nodes=nodes[(ref, approach)],
                )
            )

    summary = _summarize(records, test_entries, approaches)
    times = np.linspace(0.0, horizon, time_grid)
    curves = {}
    for approach in approaches:
        mat = np.zeros((len(test_entries), time_grid))
        for row, (ref, _) in enumerate(test_entries):
            vs = v_star[ref]
            tr = traces[(ref, approach)]
            for col, t in enumerate(times):
                mat[row, col] = 1.0 if math.isnan(vs) else gap_at(tr, vs, t)
        curves[approach] = mat.mean(axis=0)

    report = SuiteReport(records=records, summary=summary, curve_times=times, curves=curves, horizon=horizon)
    if out_dir is not None:
        write_report_files(report, out_dir, traces=traces)
    return report


def _summarize(records, test_entries, approaches) -> list[dict]:
    by_approach = {a: [r for r in records if r.approach == a] for a in approaches}
    per_instance = {ref: {r.approach: r for r in records if r.instance == ref} for ref, _ in test_entries}

    wins = {a: {"pg": 0, "pi": 0} for a in approaches}
    for ref, _ in test_entries:
        row = per_instance[ref]
        for metric in ("pg", "pi"):
            values = {a: getattr(row[a], metric) for a in approaches}
            best = min(values.values())
            for a, v in values.items():
                if v <= best + 1e-12 * max(1.0, abs(best)):
                    wins[a][metric] += 1

    plain_mean = {}
    if PLAIN in by_approach:
        plain_mean = {
            "pg": float(np.mean([r.pg for r in by_approach[PLAIN]])),
            "pi": float(np.mean([r.pi for r in by_approach[PLAIN]])),
        }

    summary = []
    for a in approaches:
        rows = by_approach[a]
        entry: dict = {"approach": a, "instances": len(rows)}
        for metric in ("pg", "pi"):
            vals = np.array([getattr(r, metric) for r in rows])
            entry[f"{metric}_mean"] = float(vals.mean())
            entry[f"{metric}_std"] = float(vals.std())
            entry[f"{metric}_wins"] = wins[a][metric]
            improvement = None
            if plain_mean and a != PLAIN and plain_mean[metric] > 0:
                improvement = 100.0 * (plain_mean[metric] - entry[f"{metric}_mean"]) / plain_mean[metric]
            entry[f"{metric}_improvement_vs_plain_pct"] = improvement
            p_value = None
            if a != PLAIN and PLAIN in by_approach:
                mine = np.array([getattr(per_instance[ref][a], metric) for ref, _ in test_entries])
                theirs = np.array([getattr(per_instance[ref][PLAIN], metric) for ref, _ in test_entries])
                try:
                    p_value = wilcoxon_signed_rank(mine, theirs)
                except ValidationError:
                    p_value = None
            entry[f"{metric}_wilcoxon_p_vs_plain"] = p_value
        summary.append(entry)
    return summary


# --------------------------------------------------------------------------
# report files


def write_report_files(report: SuiteReport, out_dir, *, traces=None) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "metrics.csv",
        ["instance", "approach", "status", "final_objective", "v_star", "pg", "pg_raw", "pi", "nodes"],
        [
            [r.instance, r.approach, r.status, r.final_objective, r.v_star, r.pg, r.pg_raw, r.pi, r.nodes]
            for r in report.records
        ],
    )
    header = [
        "approach", "instances",
        "pg_mean", "pg_std", "pg_wins", "pg_improvement_vs_plain_pct", "pg_wilcoxon_p_vs_plain",
        "pi_mean", "pi_std", "pi_wins", "pi_improvement_vs_plain_pct", "pi_wilcoxon_p_vs_plain",
    ]
    write_csv(out / "summary.csv", header, [[row.get(h) for h in header] for row in report.summary])
    approaches = list(report.curves)
    rows = []
    for i, t in enumerate(report.curve_times):
        rows.append([float(t)] + [float(report.curves[a][i]) for a in approaches])
    write_csv(out / "curves.csv", ["time"] + approaches, rows)
    if traces is not None:
        trace_dir = out / "traces"
        trace_dir.mkdir(exist_ok=True)
        for (ref, approach), tr in traces.items():
            write_csv(trace_dir / f"{ref}__{approach}.csv", ["time", "objective"], [[t, o] for t, o in tr])
    manifest = {
        "columns": {
            "pg": "capped primal gap |v - v*| / max(|v*|, 1e-8), fallback 1.0 when no incumbent or sign mismatch",
            "pg_raw": "uncapped primal gap (same fallback)",
            "pi": "integral of the capped primal gap over [0, horizon]",
            "wins": "ties split: every approach matching the per-instance best counts a win",
            "improvement": "100 * (plain_mean - approach_mean) / plain_mean",
        },
        "v_star": "minimum final objective over all approaches plus one reference solve per instance",
        "baseline_note": "improvement percentages compare against the embedded solver (plain), "
        "run with the same budgets as every other approach",
        "horizon": report.horizon,
    }
    atomic_write_text(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")


def write_grid_files(grid: GridResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(
        out / "grid.csv",
        ["k0_percent", "k0", "delta", "mean_pg", "mean_pi", "selected"],
        [
            [c.k0_percent, c.k0, c.delta, c.mean_pg, c.mean_pi, int(c == grid.selected)]
            for c in grid.cells
        ],
    )
    atomic_write_text(
        out / "selected.json",
        json.dumps(
            {
                "k0_percent": grid.selected.k0_percent,
                "k0": grid.selected.k0,
                "delta": grid.selected.delta,
                "selection_metric": grid.selection_metric,
            },
            indent=1,
        )
        + "\n",
    )

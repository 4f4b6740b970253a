"""Command-line pipeline: gen -> collect -> train -> tune -> eval -> report.

One JSON run-config file drives everything; a single master seed derives
every phase seed through a documented SHA-256 split (util.stable_seed on
(master, phase, index)), so the whole pipeline is reproducible
byte-for-byte when the solver budgets are node-based. Outputs are written
atomically (temp file + rename) and each subcommand overwrites only its
own artifacts, which makes re-runs idempotent.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dataset import DatasetManifest, collect_dataset, label_statistics, load_sample, save_sample
from .encoding import encode_instance
from .errors import ConfigError, PredsearchError
from .evaluate import evaluate_suite, grid_search, write_grid_files, write_report_files, SuiteReport
from .generators import FamilyConfig, build_reference_network, family_config_from_dict, gen_instance, load_family_config
from .instance import MipInstance, load_instance, save_instance, instance_to_json
from .metrics import capped_primal_gap, gap_at, primal_gap, primal_integral
from .model import TrainConfig, TrainState, init_params, load_checkpoint, save_checkpoint, train
from .neighborhood import Variant, k0_from_percent, run_pas
from .solver import SolverConfig, solve_mip
from .util import atomic_write_bytes, atomic_write_text, stable_seed, write_csv


@dataclass(frozen=True)
class RunConfig:
    family: FamilyConfig
    splits: dict[str, int]
    u_p: int
    master_seed: int
    out_dir: Path
    solver: dict[str, dict]
    model: dict
    grid: dict
    approaches: list[str]

    @property
    def identity_bits(self) -> int:
        return self.family.identity_bits


_DEFAULT_SOLVER = {
    "collect": {"node_limit": 3000, "pool_gap": 0.05, "restarts": 2},
    "tune": {"node_limit": 400},
    "eval": {"node_limit": 800},
    "reference": {"node_limit": 3200},
}
_DEFAULT_MODEL = {"embed_dim": 16, "heads": 4, "lr": 1e-3, "batch_size": 16, "max_epochs": 60}
_DEFAULT_GRID = {"delta": [1, 5, 10], "k0_percent": [50, 60, 70, 80, 90]}


def load_run_config(path, *, out_override=None, seed_override=None) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc

    fam = data.get("family_config")
    if fam is None:
        raise ConfigError(f"{path}: missing 'family_config'")
    if isinstance(fam, str):
        fam_path = (path.parent / fam) if not Path(fam).is_absolute() else Path(fam)
        if not fam_path.exists():
            raise ConfigError(f"{path}: family config not found: {fam_path}")
        family = load_family_config(fam_path)
    else:
        family = family_config_from_dict(fam)

    splits = {k: int(v) for k, v in data.get("splits", {"train": 60, "validation": 20, "test": 20}).items()}
    for name in ("train", "validation", "test"):
        if splits.get(name, 0) < 1:
            raise ConfigError(f"{path}: split '{name}' must be at least 1")

    solver = dict(_DEFAULT_SOLVER)
    solver.update(data.get("solver", {}))
    model = dict(_DEFAULT_MODEL)
    model.update(data.get("model", {}))
    grid = dict(_DEFAULT_GRID)
    grid.update(data.get("grid", {}))
    approaches = list(data.get("approaches", ["plain", "integer-pas"]))

    out_dir = Path(out_override) if out_override else Path(data.get("out_dir", "runs/default"))
    master = int(seed_override) if seed_override is not None else int(data.get("master_seed", 0))
    return RunConfig(
        family=family,
        splits=splits,
        u_p=int(data.get("u_p", 50)),
        master_seed=master,
        out_dir=out_dir,
        solver=solver,
        model=model,
        grid=grid,
        approaches=approaches,
    )


def _solver_config(section: dict, *, rng_seed: int, time_override: float | None = None) -> SolverConfig:
    known = {k: v for k, v in section.items() if k in (
        "time_limit", "node_limit", "integrality_tol", "feas_tol", "branch_rule",
        "node_order", "pool_capacity", "pool_gap",
    )}
    if time_override is not None:
        known["time_limit"] = float(time_override)
    return SolverConfig(rng_seed=rng_seed, **known)


# --------------------------------------------------------------------------
# phase implementations


def _instances_dir(cfg: RunConfig) -> Path:
    return cfg.out_dir / "instances"


def _gen_manifest_path(cfg: RunConfig) -> Path:
    return _instances_dir(cfg) / "manifest.json"


def cmd_gen(cfg: RunConfig) -> int:
    net = build_reference_network(cfg.family)
    out = _instances_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"family": cfg.family.family, "master_seed": cfg.master_seed, "splits": {}}
    index = 0
    for split in ("train", "validation", "test"):
        entries = []
        for k in range(cfg.splits[split]):
            seed = stable_seed(cfg.master_seed, "gen", index)
            inst = gen_instance(cfg.family, seed, network=net)
            fname = f"{cfg.family.family}-{split}-{k:03d}.json"
            atomic_write_bytes(out / fname, instance_to_json(inst).encode("utf-8"))
            entries.append({"file": fname, "seed": seed, "name": inst.name})
            index += 1
        manifest["splits"][split] = entries
    atomic_write_text(_gen_manifest_path(cfg), json.dumps(manifest, indent=1) + "\n")
    print(f"generated {index} instances under {out}", file=sys.stderr)
    return 0


def _load_split(cfg: RunConfig, split: str) -> list[tuple[str, MipInstance]]:
    manifest_path = _gen_manifest_path(cfg)
    if not manifest_path.exists():
        raise ConfigError(f"instance manifest missing: {manifest_path} (run 'gen' first)")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    entries = []
    for item in manifest["splits"][split]:
        inst = load_instance(_instances_dir(cfg) / item["file"])
        entries.append((Path(item["file"]).stem, inst))
    return entries


def cmd_collect(cfg: RunConfig, jobs: int = 1) -> int:
    for split in ("train", "validation"):
        entries = _load_split(cfg, split)
        section = dict(cfg.solver["collect"])
        restarts = int(section.pop("restarts", 2))
        solver_cfg = _solver_config(section, rng_seed=stable_seed(cfg.master_seed, "collect", split))
        solver_cfg = replace(solver_cfg, pool_capacity=cfg.u_p)
        manifest, samples = _collect_parallel(entries, cfg.u_p, solver_cfg, split, restarts, jobs)
        out = cfg.out_dir / "dataset" / split
        out.mkdir(parents=True, exist_ok=True)
        by_ref = dict(entries)
        for sample in samples:
            save_sample(sample, by_ref[sample.instance_ref], cfg.u_p, out / f"{sample.instance_ref}.labels")
        atomic_write_text(out / "manifest.json", manifest.to_json())
        stats = label_statistics(samples)
        atomic_write_text(
            out / "stats.json",
            json.dumps(
                {
                    "overall_zero_fraction": stats.overall_zero_fraction,
                    "rows": stats.rows,
                    "zero_frequency": [float(v) for v in stats.zero_frequency],
                },
                indent=1,
            )
            + "\n",
        )
        print(
            f"collected {split}: {len(samples)} samples, zero fraction {stats.overall_zero_fraction:.3f}",
            file=sys.stderr,
        )
    return 0


def _collect_parallel(entries, u_p, solver_cfg, split, restarts, jobs):
    if jobs <= 1 or len(entries) <= 1:
        return collect_dataset(entries, u_p, solver_cfg, split=split, restarts=restarts)
    from concurrent.futures import ProcessPoolExecutor

    chunks = [[e] for e in entries]
    results = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [
            pool.submit(collect_dataset, chunk, u_p, solver_cfg, split=split, restarts=restarts)
            for chunk in chunks
        ]
        for fut in futures:
            results.append(fut.result())
    samples = [s for _, ss in results for s in ss]
    skipped = tuple(ref for m, _ in results for ref in m.skipped)
    manifest = DatasetManifest(
        family=entries[0][1].family,
        split=split,
        sample_refs=tuple(s.instance_ref for s in samples),
        u_p=u_p,
        node_budget=solver_cfg.node_limit,
        rng_seed=solver_cfg.rng_seed,
        skipped=skipped,
    )
    return manifest, samples


def _load_dataset(cfg: RunConfig, split: str):
    out = cfg.out_dir / "dataset" / split
    manifest_path = out / "manifest.json"
    if not manifest_path.exists():
        raise ConfigError(f"dataset manifest missing: {manifest_path} (run 'collect' first)")
    manifest = DatasetManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    instances = dict(_load_split(cfg, split))
    data = []
    for ref in manifest.sample_refs:
        inst = instances[ref]
        sample = load_sample(out / f"{ref}.labels", expected_instance=inst)
        graph = encode_instance(inst, identity_width=cfg.identity_bits)
        data.append((graph, sample.labels))
    return data


def _checkpoint_path(cfg: RunConfig) -> Path:
    return cfg.out_dir / "model.ckpt"


def cmd_train(cfg: RunConfig) -> int:
    train_data = _load_dataset(cfg, "train")
    val_data = _load_dataset(cfg, "validation")
    m = cfg.model
    seed = stable_seed(cfg.master_seed, "train", 0)
    d_v = train_data[0][0].var_features.shape[1]
    params = init_params(int(m["embed_dim"]), int(m["heads"]), d_v, seed=seed)
    tcfg = TrainConfig(
        batch_size=int(m["batch_size"]),
        lr=float(m["lr"]),
        max_epochs=int(m["max_epochs"]),
        max_steps=m.get("max_steps"),
        max_seconds=m.get("max_seconds"),
        seed=seed,
    )
    best_params, best_state, history = train(train_data, val_data, tcfg, params=params)
    save_checkpoint(best_params, best_state, _checkpoint_path(cfg))
    rows = []
    steps_per_epoch = max(1, math.ceil(len(train_data) / tcfg.batch_size))
    val_at = {}
    for epoch, val in enumerate(history.val_losses):
        val_at[min((epoch + 1) * steps_per_epoch, len(history.steps))] = val
    for step, loss in zip(history.steps, history.train_losses):
        rows.append([step, loss, val_at.get(step)])
    write_csv(cfg.out_dir / "training_curve.csv", ["step", "train_loss", "val_loss"], rows)
    print(
        f"trained {history.steps[-1] if history.steps else 0} steps; "
        f"best validation loss {history.best_val_loss:.4f} (epoch {history.best_epoch})",
        file=sys.stderr,
    )
    return 0


def cmd_tune(cfg: RunConfig) -> int:
    ckpt = _checkpoint_path(cfg)
    if not ckpt.exists():
        raise ConfigError(f"checkpoint missing: {ckpt} (run 'train' first)")
    params, _ = load_checkpoint(ckpt)
    entries = _load_split(cfg, "validation")
    solver_cfg = _solver_config(cfg.solver["tune"], rng_seed=0)
    grid = grid_search(
        entries,
        params,
        cfg.grid["delta"],
        cfg.grid["k0_percent"],
        solver_cfg,
        seed=stable_seed(cfg.master_seed, "tune", 0),
    )
    write_grid_files(grid, cfg.out_dir / "tune")
    print(
        f"selected k0={grid.selected.k0_percent}% delta={grid.selected.delta} "
        f"(mean PI {grid.selected.mean_pi:.3f})",
        file=sys.stderr,
    )
    return 0


def cmd_eval(cfg: RunConfig, *, time_budget: float | None = None) -> int:
    learned = [a for a in cfg.approaches if a != "plain"]
    params = None
    if learned:
        ckpt = _checkpoint_path(cfg)
        if not ckpt.exists():
            raise ConfigError(f"checkpoint missing for learned approaches: {ckpt}")
        params, _ = load_checkpoint(ckpt)
    selected_path = cfg.out_dir / "tune" / "selected.json"
    pas_params = {}
    if learned:
        if not selected_path.exists():
            raise ConfigError(f"tuned parameters missing: {selected_path} (run 'tune' first)")
        sel = json.loads(selected_path.read_text(encoding="utf-8"))
        for a in learned:
            pas_params[a] = {"k0_percent": float(sel["k0_percent"]), "delta": int(sel["delta"])}
    entries = _load_split(cfg, "test")
    solver_cfg = _solver_config(cfg.solver["eval"], rng_seed=0, time_override=time_budget)
    ref_cfg = _solver_config(cfg.solver["reference"], rng_seed=0)
    report = evaluate_suite(
        entries,
        cfg.approaches,
        solver_cfg,
        checkpoint=params,
        pas_params=pas_params,
        reference_cfg=ref_cfg,
        seed=stable_seed(cfg.master_seed, "eval", 0),
        out_dir=cfg.out_dir / "eval",
    )
    for row in report.summary:
        print(
            f"{row['approach']}: PG mean {row['pg_mean']:.4f} (wins {row['pg_wins']}), "
            f"PI mean {row['pi_mean']:.3f} (wins {row['pi_wins']})",
            file=sys.stderr,
        )
    return 0


def cmd_report(cfg: RunConfig) -> int:
    """Rebuild summary.csv and curves.csv from the stored traces and
    per-instance best-known values without re-running any solver."""
    eval_dir = cfg.out_dir / "eval"
    metrics_path = eval_dir / "metrics.csv"
    if not metrics_path.exists():
        raise ConfigError(f"metrics missing: {metrics_path} (run 'eval' first)")
    manifest = json.loads((eval_dir / "manifest.json").read_text(encoding="utf-8"))
    horizon = float(manifest["horizon"])
    lines = metrics_path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    idx = {name: i for i, name in enumerate(header)}
    instances: list[str] = []
    approaches: list[str] = []
    v_star: dict[str, float] = {}
    statuses: dict[tuple[str, str], str] = {}
    nodes: dict[tuple[str, str], int] = {}
    for line in lines[1:]:
        parts = line.split(",")
        ref, approach = parts[idx["instance"]], parts[idx["approach"]]
        if ref not in instances:
            instances.append(ref)
        if approach not in approaches:
            approaches.append(approach)
        v_star[ref] = float(parts[idx["v_star"]])
        statuses[(ref, approach)] = parts[idx["status"]]
        nodes[(ref, approach)] = int(parts[idx["nodes"]])

    traces = {}
    for ref in instances:
        for approach in approaches:
            tpath = eval_dir / "traces" / f"{ref}__{approach}.csv"
            if not tpath.exists():
                print(f"warning: missing trace {tpath}; treating as empty", file=sys.stderr)
                traces[(ref, approach)] = ()
                continue
            rows = tpath.read_text(encoding="utf-8").splitlines()[1:]
            traces[(ref, approach)] = tuple(
                (float(a), float(b)) for a, b in (line.split(",") for line in rows if line)
            )

    from .evaluate import MetricsRecord, _summarize

    records = []
    for ref in instances:
        vs = v_star[ref]
        for approach in approaches:
            tr = traces[(ref, approach)]
            final = tr[-1][1] if tr else None
            pg_raw = primal_gap(final, vs)
            records.append(
                MetricsRecord(
                    instance=ref,
                    approach=approach,
                    status=statuses[(ref, approach)],
                    final_objective=final,
                    v_star=vs,
                    pg=min(1.0, pg_raw),
                    pg_raw=pg_raw,
                    pi=primal_integral(tr, vs, horizon),
                    nodes=nodes[(ref, approach)],
                )
            )
    summary = _summarize(records, [(ref, None) for ref in instances], approaches)
    times = np.linspace(0.0, horizon, 64)
    curves = {
        a: np.array([
            np.mean([gap_at(traces[(ref, a)], v_star[ref], t) for ref in instances]) for t in times
        ])
        for a in approaches
    }
    report = SuiteReport(records=records, summary=summary, curve_times=times, curves=curves, horizon=horizon)
    write_report_files(report, eval_dir, traces=traces)
    print(f"report rebuilt under {eval_dir}", file=sys.stderr)
    return 0


def cmd_run_pas(args) -> int:
    inst = load_instance(args.instance)
    params, _ = load_checkpoint(args.checkpoint)
    if args.k0.endswith("%"):
        k0 = k0_from_percent(inst, float(args.k0[:-1]))
    else:
        k0 = int(args.k0)
    if args.time_limit is None and args.node_limit is None:
        raise ConfigError("run-pas needs --time-limit or --node-limit")
    cfg = SolverConfig(
        time_limit=args.time_limit,
        node_limit=args.node_limit,
        rng_seed=args.seed,
    )
    variant = Variant(args.variant)
    out = run_pas(inst, params, k0=k0, delta=args.delta, cfg=cfg, variant=variant, k1=args.k1)
    write_csv(args.trace, ["time", "objective"], [[t, o] for t, o in out.result.incumbents])
    final = out.result.best_solution.objective if out.result.best_solution else None
    print(
        f"status {out.result.status.value}; nodes {out.result.nodes}; "
        f"inference {out.inference_seconds:.3f}s; final objective {final}",
        file=sys.stderr,
    )
    return 0


def cmd_selftest() -> int:
    """Embedded oracle suites; nonzero exit on any failure."""
    import itertools
    from .model import bce_loss, forward, value_and_grad
    from .neighborhood import NeighborhoodSpec, build_neighborhood_mip, eligible_zero_indices
    from .metrics import wilcoxon_signed_rank

    failures = []

    def check(name, ok):
        print(f"selftest: {name}: {'ok' if ok else 'FAIL'}", file=sys.stderr)
        if not ok:
            failures.append(name)

    # gradient vs central finite differences on a tiny model
    rng = np.random.default_rng(0)
    from .encoding import BipartiteGraph

    graph = BipartiteGraph(
        var_features=rng.uniform(-1, 1, size=(5, 15)),
        cons_features=rng.uniform(-1, 1, size=(3, 4)),
        edge_var=rng.integers(0, 5, size=8),
        edge_cons=rng.integers(0, 3, size=8),
        edge_features=rng.uniform(-1, 1, size=(8, 1)),
        integer_mask=np.ones(5, dtype=bool),
    )
    params = init_params(4, 2, 15, seed=1)
    labels = rng.integers(0, 2, size=(2, 5)).astype(float)
    loss, g = value_and_grad(params, graph, labels)
    flat, arrays = [], []
    for name, arr in g.array_items():
        flat.append(arr.ravel())
    flat_g = np.concatenate(flat)
    theta0 = np.concatenate([a.ravel() for _, a in params.array_items()])
    step = 1e-4
    probe = np.linspace(0, theta0.size - 1, 120).astype(int)
    worst = 0.0
    from dataclasses import replace as _replace

    def unflat(vec):
        out, off = {}, 0
        for name, arr in params.array_items():
            out[name] = vec[off : off + arr.size].reshape(arr.shape)
            off += arr.size
        return _replace(params, **out)

    for i in probe:
        up, dn = theta0.copy(), theta0.copy()
        up[i] += step
        dn[i] -= step
        num = (bce_loss(forward(unflat(up), graph), labels) - bce_loss(forward(unflat(dn), graph), labels)) / (2 * step)
        if abs(flat_g[i]) > 1e-8:
            worst = max(worst, abs(flat_g[i] - num) / abs(flat_g[i]))
    check("gradient-finite-difference", worst < 1e-4)

    # branch and bound vs exhaustive enumeration
    from .instance import Row, Sense, VarKind

    ok = True
    for k in range(6):
        rng2 = np.random.default_rng(100 + k)
        n = int(rng2.integers(3, 7))
        widths = rng2.integers(1, 4, size=n)
        c = np.round(rng2.normal(scale=5.0, size=n), 3)
        cols = rng2.choice(n, size=min(3, n), replace=False)
        coeffs = np.round(rng2.normal(scale=2.0, size=len(cols)), 3)
        point = rng2.integers(0, widths[cols] + 1).astype(float)
        rhs = float(coeffs @ point) + 1.0
        inst = MipInstance(
            name=f"selftest{k}",
            objective=c,
            rows=(Row(terms=tuple((int(i), float(v)) for i, v in zip(cols, coeffs)), sense=Sense.LE, rhs=rhs),),
            lower=np.zeros(n),
            upper=widths.astype(float),
            kinds=(VarKind.INTEGER,) * n,
            var_names=tuple(f"x{i}" for i in range(n)),
        )
        res = solve_mip(inst, SolverConfig(node_limit=50_000))
        best = None
        for combo in itertools.product(*[range(int(w) + 1) for w in widths]):
            x = np.array(combo, dtype=float)
            if all(
                sum(cc * x[i] for i, cc in row.terms) <= row.rhs + 1e-9 for row in inst.rows
            ):
                val = float(c @ x)
                best = val if best is None or val < best else best
        if best is None:
            ok = ok and res.best_solution is None
        else:
            ok = ok and res.best_solution is not None and abs(res.best_solution.objective - best) <= 1e-6
    check("solver-enumeration-equivalence", ok)

    # neighborhood soundness: delta = |X0| reproduces the optimum
    inst = MipInstance(
        name="nbsound",
        objective=[-1.0, -2.0],
        rows=(Row(terms=((0, 1.0), (1, 1.0)), sense=Sense.LE, rhs=3.0),),
        lower=[0.0, 0.0],
        upper=[2.0, 2.0],
        kinds=(VarKind.INTEGER, VarKind.INTEGER),
        var_names=("x0", "x1"),
    )
    full = solve_mip(inst, SolverConfig(node_limit=10_000))
    elig = tuple(int(i) for i in eligible_zero_indices(inst))
    spec = NeighborhoodSpec(variant=Variant.INTEGER, x0=elig, x1=(), delta=len(elig), k0=len(elig), k1=0)
    sub = solve_mip(build_neighborhood_mip(inst, spec), SolverConfig(node_limit=10_000))
    check(
        "neighborhood-equivalence",
        abs(sub.best_solution.objective - full.best_solution.objective) <= 1e-6,
    )
    spec0 = NeighborhoodSpec(variant=Variant.INTEGER, x0=elig, x1=(), delta=0, k0=len(elig), k1=0)
    sub0 = solve_mip(build_neighborhood_mip(inst, spec0), SolverConfig(node_limit=10_000))
    projected = sub0.best_solution.values[: inst.num_vars]
    check("neighborhood-forcing", bool(np.all(projected == 0.0)))

    # metric closed forms
    check("primal-integral-step", abs(primal_integral([(2.0, 150.0)], 100.0, 10.0) - 6.0) < 1e-12)
    a = np.array([2.0, 3.0, 4.0, 5.0, 6.0])
    b = np.array([1.0, 1.5, 2.0, 2.5, 3.0])
    check("wilcoxon-exact", abs(wilcoxon_signed_rank(a, b) - 0.0625) < 1e-12)

    if failures:
        print(f"selftest failed: {', '.join(failures)}", file=sys.stderr)
        return 3
    print("selftest passed", file=sys.stderr)
    return 0


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predsearch",
        description="Zero-variable prediction and trust-region search pipeline for parametric MIPs",
    )
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for parallel phases")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out", help="override the config's output directory")
        p.add_argument("--seed", type=int, help="override the master seed")
        return p

    with_config(sub.add_parser("gen", help="generate instance files and the split manifest"))
    with_config(sub.add_parser("collect", help="solve training/validation instances into label datasets"))
    with_config(sub.add_parser("train", help="train the scoring network"))
    with_config(sub.add_parser("tune", help="grid-search (k0, delta) on the validation split"))
    ev = with_config(sub.add_parser("eval", help="run the benchmark suite on the test split"))
    ev.add_argument("--time-budget", type=float, help="wall seconds per solve (overrides node budgets)")
    with_config(sub.add_parser("report", help="rebuild report files from stored eval artifacts"))

    rp = sub.add_parser("run-pas", help="one guided solve on one instance")
    rp.add_argument("--instance", required=True)
    rp.add_argument("--checkpoint", required=True)
    rp.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.INTEGER.value)
    rp.add_argument("--k0", required=True, help="count, or percentage like '60%%' of eligible integer variables")
    rp.add_argument("--k1", type=int, default=0, help="binary variant: variables fixed toward 1")
    rp.add_argument("--delta", type=int, required=True)
    rp.add_argument("--time-limit", type=float)
    rp.add_argument("--node-limit", type=int)
    rp.add_argument("--seed", type=int, default=0)
    rp.add_argument("--trace", required=True, help="output CSV of (time, objective) incumbents")

    sub.add_parser("selftest", help="run the embedded oracle suites")
    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 2
    try:
        if args.command == "selftest":
            return cmd_selftest()
        if args.command == "run-pas":
            return cmd_run_pas(args)
        cfg = load_run_config(args.config, out_override=args.out, seed_override=args.seed)
        if args.command == "gen":
            return cmd_gen(cfg)
        if args.command == "collect":
            return cmd_collect(cfg, jobs=args.jobs)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "tune":
            return cmd_tune(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, time_budget=args.time_budget)
        if args.command == "report":
            return cmd_report(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PredsearchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

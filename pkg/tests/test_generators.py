import numpy as np
import pytest

from predsearch import VarKind, binarize_solution, check_feasibility
from predsearch.errors import GenerationError
from predsearch.generators import (
    MmcnpConfig,
    SlapConfig,
    build_reference_network,
    family_config_from_dict,
    family_config_to_json,
    gen_instance,
    sample_perturbation,
)
from predsearch.solver import SolveStatus, SolverConfig, solve_mip

CHAIN = MmcnpConfig(
    vendors=1,
    fulfillment_centers=1,
    delivery_centers=1,
    arcs=2,
    commodities=1,
    paths_per_commodity=4,
    path_cap=10,
    truck_capacity=(10.0, 10.0),
    demand_range=(5.0, 5.0),
    demand_spread=0.0,
    structure_seed=1,
)

SMALL_MMCNP = MmcnpConfig(
    vendors=2,
    fulfillment_centers=2,
    delivery_centers=2,
    arcs=16,
    commodities=4,
    paths_per_commodity=6,
    path_cap=60,
    structure_seed=3,
)

SMALL_SLAP = SlapConfig(nodes=6, arcs=16, structure_seed=5)


def test_chain_network_counts():
    net = build_reference_network(CHAIN)
    assert len(net.arcs) == 2
    assert len(net.paths[0]) == 1
    assert net.paths[0][0] == (0, 1)


def test_chain_optimum_one_truck_per_arc():
    inst = gen_instance(CHAIN, 0)
    res = solve_mip(inst, SolverConfig(node_limit=5_000))
    assert res.status is SolveStatus.OPTIMAL
    trucks = [v for name, v in zip(inst.var_names, res.best_solution.values) if name.startswith("trucks")]
    assert trucks == pytest.approx([1.0, 1.0])


def test_structure_deterministic():
    n1 = build_reference_network(SMALL_MMCNP)
    n2 = build_reference_network(SMALL_MMCNP)
    assert n1.arcs == n2.arcs
    assert n1.paths == n2.paths
    assert np.array_equal(n1.ref_demands, n2.ref_demands)


def test_default_desk_config_reachability():
    net = build_reference_network(MmcnpConfig())
    assert len(net.arcs) == 60
    assert len(net.paths) == 12
    for plist in net.paths:
        assert len(plist) >= 1


def test_zero_spread_equals_reference():
    cfg = MmcnpConfig(**{**SMALL_MMCNP.__dict__, "demand_spread": 0.0})
    net = build_reference_network(cfg)
    d1 = sample_perturbation(cfg, 1, network=net)
    d2 = sample_perturbation(cfg, 99, network=net)
    assert np.array_equal(d1.values, net.ref_demands)
    assert np.array_equal(d2.values, net.ref_demands)
    a = gen_instance(cfg, 1, network=net)
    b = gen_instance(cfg, 99, network=net)
    assert np.array_equal(a.objective, b.objective)
    assert a.rows == b.rows  # identical rhs: the degenerate draw removed all variation


def test_clamp_respected_under_huge_spread():
    cfg = MmcnpConfig(**{**SMALL_MMCNP.__dict__, "demand_spread": 50.0})
    net = build_reference_network(cfg)
    for seed in range(40):
        draw = sample_perturbation(cfg, seed, network=net)
        assert np.all(draw.values >= net.clamp_lo - 1e-9)
        assert np.all(draw.values <= net.clamp_hi + 1e-9)


def test_draw_mean_near_reference():
    cfg = MmcnpConfig(**{**SMALL_MMCNP.__dict__, "demand_spread": 0.1})
    net = build_reference_network(cfg)
    draws = np.stack([sample_perturbation(cfg, s, network=net).values for s in range(10_000)])
    mean = draws.mean(axis=0)
    assert np.all(np.abs(mean - net.ref_demands) <= 0.02 * net.ref_demands)


def test_structural_stability_across_seeds():
    net = build_reference_network(SMALL_MMCNP)
    insts = [gen_instance(SMALL_MMCNP, s, network=net) for s in range(5)]
    base = insts[0]
    for inst in insts[1:]:
        assert inst.num_vars == base.num_vars
        assert inst.num_rows == base.num_rows
        assert inst.kinds == base.kinds
        assert inst.var_names == base.var_names
        # only EQ right-hand sides (demands) differ
        for ra, rb in zip(base.rows, inst.rows):
            assert ra.terms == rb.terms
            assert ra.sense == rb.sense


def test_mmcnp_instances_feasible_and_solvable():
    net = build_reference_network(SMALL_MMCNP)
    for seed in range(10):
        inst = gen_instance(SMALL_MMCNP, seed, network=net)
        res = solve_mip(inst, SolverConfig(node_limit=20_000))
        assert res.best_solution is not None, f"seed {seed} found no solution"
        assert check_feasibility(inst, res.best_solution.values, 1e-6).feasible


def test_slap_draws_all_feasible():
    net = build_reference_network(SMALL_SLAP)
    for seed in range(25):
        inst = gen_instance(SMALL_SLAP, seed, network=net)   # gen itself asserts reference feasibility
        res = solve_mip(inst, SolverConfig(node_limit=20_000))
        assert res.best_solution is not None, f"slap seed {seed} not solved"


def test_slap_bounds_sorted_and_clamped():
    net = build_reference_network(SMALL_SLAP)
    n_train = len(net.train_arcs)
    reqs = np.array([a.req for a in net.train_arcs], dtype=float)
    for seed in range(40):
        draw = sample_perturbation(SMALL_SLAP, seed, network=net)
        lb, ub = draw.values[:n_train], draw.values[n_train:]
        assert np.all(lb <= ub)
        assert np.all(lb >= 0)
        assert np.all(ub >= reqs)


def test_slap_structure_static_rows_vary_rhs_only():
    net = build_reference_network(SMALL_SLAP)
    a = gen_instance(SMALL_SLAP, 0, network=net)
    b = gen_instance(SMALL_SLAP, 1, network=net)
    assert a.var_names == b.var_names
    assert np.array_equal(a.lower, b.lower)
    assert np.array_equal(a.upper, b.upper)
    diffs = [j for j, (ra, rb) in enumerate(zip(a.rows, b.rows)) if ra.rhs != rb.rhs]
    assert diffs, "at least one bound row should differ between draws"
    for ra, rb in zip(a.rows, b.rows):
        assert ra.terms == rb.terms


def test_mmcnp_zero_fraction_on_small_config():
    # quick directional check; the full calibration gate runs in acceptance
    net = build_reference_network(SMALL_MMCNP)
    fractions = []
    for seed in range(8):
        inst = gen_instance(SMALL_MMCNP, seed, network=net)
        res = solve_mip(inst, SolverConfig(node_limit=20_000))
        labels = binarize_solution(inst, res.best_solution.values)
        fractions.append(1.0 - labels.mean())
    assert np.mean(fractions) > 0.5


def test_config_json_round_trip():
    text = family_config_to_json(SMALL_SLAP)
    import json

    cfg = family_config_from_dict(json.loads(text))
    assert cfg == SMALL_SLAP


def test_path_cap_error():
    cfg = MmcnpConfig(**{**SMALL_MMCNP.__dict__, "path_cap": 1})
    with pytest.raises(GenerationError, match="cap"):
        build_reference_network(cfg)

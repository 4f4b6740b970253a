"""Deterministic generators for two parametric instance families.

MMCNP-lite: middle-mile consolidation network design. A layered
vendor -> fulfillment-center -> last-mile-delivery digraph carries
commodities on enumerated paths; continuous path flows must satisfy
demand, and integer truck counts open capacity on each service arc.
Only the commodity demands vary across instances (clamped normal draws
around references); the network, costs, and capacities are fixed per
structure seed, so all instances of a family share variable/constraint
structure exactly.

SLAP-lite: strategic locomotive assignment. Integer locomotive counts
flow on scheduled train arcs (with per-arc lower/upper availability
bounds that vary across instances) and on light-travel arcs, where
integer light-train counts open repositioning capacity. Rows are per-node
flow balance, per-arc bound rows, tonnage (power) rows, light capacity
links, and a fleet cap.

Both generators construct an explicit reference solution for every draw
and fail loudly if it is infeasible, which keeps 100% of sampled
instances solvable by construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, GenerationError
from .instance import MipInstance, Row, Sense, VarKind, check_feasibility

MMCNP_FAMILY = "mmcnp-lite"
SLAP_FAMILY = "slap-lite"


def _rng(*key) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(tuple(int(k) & 0xFFFFFFFF for k in key))))


# --------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class MmcnpConfig:
    vendors: int = 2
    fulfillment_centers: int = 3
    delivery_centers: int = 3
    arcs: int = 60
    commodities: int = 12
    paths_per_commodity: int = 12
    path_cap: int = 200
    max_legs: int = 3
    truck_capacity: tuple[float, float] = (60.0, 140.0)
    demand_range: tuple[float, float] = (20.0, 60.0)
    demand_spread: float = 0.25          # sigma as a fraction of the reference demand
    demand_clamp: tuple[float, float] = (0.6, 1.4)  # clamp window as fractions of reference
    truck_cost_rate: float = 30.0
    flow_cost_rate: float = 0.02
    structure_seed: int = 0
    identity_bits: int = 16

    family: str = MMCNP_FAMILY

    def __post_init__(self):
        if min(self.vendors, self.fulfillment_centers, self.delivery_centers, self.arcs, self.commodities) < 1:
            raise ConfigError("mmcnp sizes must be positive")
        if self.demand_clamp[0] <= 0 or self.demand_clamp[0] > 1 or self.demand_clamp[1] < 1:
            raise ConfigError("demand clamp window must bracket the reference (0 < lo <= 1 <= hi)")
        if self.demand_spread < 0:
            raise ConfigError("demand_spread must be non-negative")

    @property
    def facilities(self) -> int:
        return self.vendors + self.fulfillment_centers + self.delivery_centers


@dataclass(frozen=True)
class SlapConfig:
    nodes: int = 20
    arcs: int = 80
    light_share: float = 0.5
    req_range: tuple[int, int] = (1, 3)
    bound_spread: float = 1.5            # half-width of the uniform bound draws
    light_capacity: int = 3
    rate_train: float = 1.0
    rate_light: float = 2.5
    light_fixed: float = 40.0
    structure_seed: int = 0
    identity_bits: int = 16

    family: str = SLAP_FAMILY

    def __post_init__(self):
        if self.nodes < 3 or self.arcs < 2 * self.nodes:
            raise ConfigError("slap needs >= 3 nodes and arcs >= 2 * nodes (train and light cycles)")
        if not (0.0 < self.light_share < 1.0):
            raise ConfigError("light_share must be in (0, 1)")
        if self.bound_spread < 0:
            raise ConfigError("bound_spread must be non-negative")


FamilyConfig = MmcnpConfig | SlapConfig


def family_config_to_json(cfg: FamilyConfig) -> str:
    return json.dumps(asdict(cfg), indent=1) + "\n"


def family_config_from_dict(data: dict) -> FamilyConfig:
    data = dict(data)
    family = data.pop("family", None)
    try:
        if family == MMCNP_FAMILY:
            for key in ("truck_capacity", "demand_range", "demand_clamp"):
                if key in data:
                    data[key] = tuple(data[key])
            return MmcnpConfig(**data)
        if family == SLAP_FAMILY:
            if "req_range" in data:
                data["req_range"] = tuple(data["req_range"])
            return SlapConfig(**data)
    except TypeError as exc:
        raise ConfigError(f"bad family config field: {exc}") from exc
    raise ConfigError(f"unknown family '{family}'")


def load_family_config(path) -> FamilyConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return family_config_from_dict(data)


@dataclass(frozen=True)
class PerturbationDraw:
    instance_seed: int
    values: np.ndarray  # mmcnp: demands; slap: lower bounds then upper bounds

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


# --------------------------------------------------------------------------
# MMCNP-lite


@dataclass(frozen=True)
class MmcnpArc:
    index: int
    tail: int
    head: int
    capacity: float
    cost: float


@dataclass(frozen=True)
class MmcnpNetwork:
    vendors: tuple[int, ...]
    fcs: tuple[int, ...]
    lmds: tuple[int, ...]
    arcs: tuple[MmcnpArc, ...]
    commodity_od: tuple[tuple[int, int], ...]
    ref_demands: np.ndarray
    clamp_lo: np.ndarray
    clamp_hi: np.ndarray
    paths: tuple[tuple[tuple[int, ...], ...], ...]  # per commodity, tuples of arc indices
    path_costs: tuple[tuple[float, ...], ...]
    truck_ub: np.ndarray


def _build_mmcnp(cfg: MmcnpConfig) -> MmcnpNetwork:
    rng = _rng(cfg.structure_seed, 0xA1)
    nv, nf, nl = cfg.vendors, cfg.fulfillment_centers, cfg.delivery_centers
    vendors = tuple(range(nv))
    fcs = tuple(range(nv, nv + nf))
    lmds = tuple(range(nv + nf, nv + nf + nl))
    coords = rng.uniform(0.0, 100.0, size=(cfg.facilities, 2))

    lanes = [(v, f) for v in vendors for f in fcs]
    lanes += [(f, g) for f in fcs for g in fcs if f != g]
    lanes += [(f, l) for f in fcs for l in lmds]
    if cfg.arcs < len(lanes):
        keep = sorted(rng.choice(len(lanes), size=cfg.arcs, replace=False).tolist())
        lanes_used = [lanes[i] for i in keep]
        extra_lane_ids = []
    else:
        lanes_used = list(lanes)
        extra_lane_ids = sorted(rng.choice(len(lanes), size=cfg.arcs - len(lanes), replace=True).tolist())

    def lane_dist(lane):
        a, b = lane
        return float(np.linalg.norm(coords[a] - coords[b])) + 5.0

    arcs = []
    for lane in lanes_used:
        cap = float(rng.uniform(*cfg.truck_capacity))
        cost = lane_dist(lane) * cfg.truck_cost_rate * float(rng.uniform(0.9, 1.1))
        arcs.append(MmcnpArc(len(arcs), lane[0], lane[1], cap, round(cost, 4)))
    for lane_id in extra_lane_ids:
        lane = lanes[lane_id]
        cap = float(rng.uniform(*cfg.truck_capacity))
        cost = lane_dist(lane) * cfg.truck_cost_rate * float(rng.uniform(0.95, 1.6))
        arcs.append(MmcnpArc(len(arcs), lane[0], lane[1], cap, round(cost, 4)))

    od = []
    for _ in range(cfg.commodities):
        od.append((int(rng.choice(vendors)), int(rng.choice(lmds))))
    ref_demands = np.round(rng.uniform(*cfg.demand_range, size=cfg.commodities), 3)
    clamp_lo = np.round(cfg.demand_clamp[0] * ref_demands, 3)
    clamp_hi = np.round(cfg.demand_clamp[1] * ref_demands, 3)

    # arc-level simple paths with at most max_legs legs, cheapest kept
    out_arcs: dict[int, list[MmcnpArc]] = {}
    for arc in arcs:
        out_arcs.setdefault(arc.tail, []).append(arc)

    def enumerate_paths(origin: int, dest: int):
        found = []

        def walk(node, used_arcs, visited):
            if len(used_arcs) > cfg.max_legs:
                return
            for arc in out_arcs.get(node, []):
                if arc.head in visited:
                    continue
                if arc.head == dest:
                    found.append(tuple(a.index for a in used_arcs + [arc]))
                elif len(used_arcs) + 1 < cfg.max_legs and arc.head not in lmds:
                    walk(arc.head, used_arcs + [arc], visited | {arc.head})

        walk(origin, [], {origin})
        return found

    paths, path_costs = [], []
    total = 0
    for k, (o, d) in enumerate(od):
        cand = enumerate_paths(o, d)
        if not cand:
            raise GenerationError(f"commodity {k} ({o}->{d}) has no path; add arcs or facilities")
        cand.sort(key=lambda p: (sum(arcs[a].cost for a in p), p))
        kept = tuple(cand[: cfg.paths_per_commodity])
        total += len(kept)
        paths.append(kept)
        path_costs.append(tuple(round(sum(lane_dist((arcs[a].tail, arcs[a].head)) for a in p) * cfg.flow_cost_rate, 6) for p in kept))
    if total > cfg.path_cap:
        raise GenerationError(
            f"path enumeration produced {total} > cap {cfg.path_cap}; use smaller sizes or fewer paths per commodity"
        )

    truck_ub = np.array([max(1.0, math.ceil(float(clamp_hi.sum()) / arc.capacity)) for arc in arcs])
    return MmcnpNetwork(
        vendors=vendors,
        fcs=fcs,
        lmds=lmds,
        arcs=tuple(arcs),
        commodity_od=tuple(od),
        ref_demands=ref_demands,
        clamp_lo=clamp_lo,
        clamp_hi=clamp_hi,
        paths=tuple(paths),
        path_costs=tuple(path_costs),
        truck_ub=truck_ub,
    )


def _sample_mmcnp(cfg: MmcnpConfig, net: MmcnpNetwork, instance_seed: int) -> PerturbationDraw:
    rng = _rng(cfg.structure_seed, 0xD2, instance_seed)
    sigma = cfg.demand_spread * net.ref_demands
    demands = rng.normal(loc=net.ref_demands, scale=sigma)
    demands = np.clip(demands, net.clamp_lo, net.clamp_hi)
    return PerturbationDraw(instance_seed=instance_seed, values=np.round(demands, 3))


def _mmcnp_instance(cfg: MmcnpConfig, net: MmcnpNetwork, draw: PerturbationDraw) -> MipInstance:
    demands = draw.values
    flow_vars = [(k, p) for k, plist in enumerate(net.paths) for p in range(len(plist))]
    n_flow = len(flow_vars)
    n_arc = len(net.arcs)
    names = [f"flow[k{k},p{p}]" for k, p in flow_vars] + [f"trucks[a{a.index}]" for a in net.arcs]
    objective = np.concatenate(
        [
            np.array([net.path_costs[k][p] for k, p in flow_vars]),
            np.array([a.cost for a in net.arcs]),
        ]
    )
    lower = np.zeros(n_flow + n_arc)
    upper = np.concatenate([np.full(n_flow, np.inf), net.truck_ub.astype(float)])
    kinds = (VarKind.CONTINUOUS,) * n_flow + (VarKind.INTEGER,) * n_arc

    flow_index = {kp: i for i, kp in enumerate(flow_vars)}
    rows = []
    for k in range(cfg.commodities):
        terms = tuple((flow_index[(k, p)], 1.0) for p in range(len(net.paths[k])))
        rows.append(Row(terms=terms, sense=Sense.EQ, rhs=float(demands[k])))
    arc_paths: dict[int, list[int]] = {a.index: [] for a in net.arcs}
    for k, plist in enumerate(net.paths):
        for p, arc_ids in enumerate(plist):
            for a in arc_ids:
                arc_paths[a].append(flow_index[(k, p)])
    for a in net.arcs:
        terms = tuple((i, 1.0) for i in sorted(arc_paths[a.index])) + ((n_flow + a.index, -a.capacity),)
        rows.append(Row(terms=terms, sense=Sense.LE, rhs=0.0))

    inst = MipInstance(
        name=f"{cfg.family}-s{cfg.structure_seed}-i{draw.instance_seed}",
        objective=objective,
        rows=tuple(rows),
        lower=lower,
        upper=upper,
        kinds=kinds,
        var_names=tuple(names),
        family=cfg.family,
        param_seed=draw.instance_seed,
    )

    # reference routing: everything on the cheapest path; trucks sized to fit
    x = np.zeros(inst.num_vars)
    for k in range(cfg.commodities):
        x[flow_index[(k, 0)]] = demands[k]
    for a in net.arcs:
        load = sum(x[i] for i in arc_paths[a.index])
        x[n_flow + a.index] = math.ceil(load / a.capacity - 1e-12) if load > 0 else 0.0
    report = check_feasibility(inst, x, 1e-6)
    if not report.feasible:
        raise GenerationError(
            f"{inst.name}: reference routing infeasible (row {report.max_row_violation:.3g}, "
            f"bound {report.max_bound_violation:.3g}); clamp window is inconsistent with capacities"
        )
    return inst


# --------------------------------------------------------------------------
# SLAP-lite


@dataclass(frozen=True)
class SlapArc:
    index: int
    tail: int
    head: int
    kind: str          # "train" | "light"
    req: int           # train arcs: locomotives needed by the schedule
    tonnage: float     # train arcs: power requirement row rhs
    cost: float


@dataclass(frozen=True)
class SlapNetwork:
    nodes: int
    train_arcs: tuple[SlapArc, ...]
    light_arcs: tuple[SlapArc, ...]
    light_cycle: tuple[int, ...]   # positions into light_arcs forming a node cycle
    lb_ref: np.ndarray
    ub_ref: np.ndarray
    power_per_loco: float
    fleet_cap: float
    loco_ub: float
    light_flow_ub: float


def _cycle_pairs(order: np.ndarray):
    n = len(order)
    return [(int(order[i]), int(order[(i + 1) % n])) for i in range(n)]


def _build_slap(cfg: SlapConfig) -> SlapNetwork:
    rng = _rng(cfg.structure_seed, 0xB3)
    n_light = max(cfg.nodes, int(round(cfg.arcs * cfg.light_share)))
    n_train = cfg.arcs - n_light
    if n_train < cfg.nodes:
        raise ConfigError("slap config leaves fewer train arcs than nodes; increase arcs")
    coords = rng.uniform(0.0, 100.0, size=(cfg.nodes, 2))

    def dist(a, b):
        return float(np.linalg.norm(coords[a] - coords[b])) + 5.0

    power = 2000.0
    train_pairs = _cycle_pairs(rng.permutation(cfg.nodes))
    while len(train_pairs) < n_train:
        a, b = rng.choice(cfg.nodes, size=2, replace=False)
        train_pairs.append((int(a), int(b)))
    train_arcs = []
    for idx, (a, b) in enumerate(train_pairs):
        req = int(rng.integers(cfg.req_range[0], cfg.req_range[1] + 1))
        tonnage = round(power * float(rng.uniform(req - 0.7, req)), 2)
        cost = round(dist(a, b) * cfg.rate_train, 4)
        train_arcs.append(SlapArc(idx, a, b, "train", req, tonnage, cost))

    light_pairs = _cycle_pairs(rng.permutation(cfg.nodes))
    while len(light_pairs) < n_light:
        a, b = rng.choice(cfg.nodes, size=2, replace=False)
        light_pairs.append((int(a), int(b)))
    light_arcs = []
    for idx, (a, b) in enumerate(light_pairs):
        cost = round(dist(a, b) * cfg.rate_light, 4)
        light_arcs.append(SlapArc(idx, a, b, "light", 0, 0.0, cost))
    light_cycle = tuple(range(cfg.nodes))  # the first nodes light arcs form the cycle

    reqs = np.array([a.req for a in train_arcs], dtype=float)
    lb_ref = reqs.copy()
    ub_ref = reqs + 2.0
    loco_ub = float(reqs.max() + 4.0)
    light_flow_ub = float(2.0 * (reqs + 1.0).sum())
    fleet_cap = float((reqs + 2.0).sum() + 2 * cfg.nodes)
    return SlapNetwork(
        nodes=cfg.nodes,
        train_arcs=tuple(train_arcs),
        light_arcs=tuple(light_arcs),
        light_cycle=light_cycle,
        lb_ref=lb_ref,
        ub_ref=ub_ref,
        power_per_loco=power,
        fleet_cap=fleet_cap,
        loco_ub=loco_ub,
        light_flow_ub=light_flow_ub,
    )


def _sample_slap(cfg: SlapConfig, net: SlapNetwork, instance_seed: int) -> PerturbationDraw:
    rng = _rng(cfg.structure_seed, 0xE4, instance_seed)
    reqs = np.array([a.req for a in net.train_arcs], dtype=float)
    s = cfg.bound_spread
    p = np.round(rng.uniform(net.lb_ref - s, net.lb_ref + s))
    q = np.round(rng.uniform(net.ub_ref - s, net.ub_ref + s))
    p = np.clip(p, 0.0, reqs + 1.0)
    q = np.clip(q, reqs, reqs + 4.0)
    lb = np.minimum(p, q)
    ub = np.maximum(p, q)
    return PerturbationDraw(instance_seed=instance_seed, values=np.concatenate([lb, ub]))


def _slap_reference_solution(net: SlapNetwork, lb: np.ndarray, cap: int, n_train: int, n_light: int) -> np.ndarray:
    x_train = np.maximum(np.array([a.req for a in net.train_arcs], dtype=float), lb)
    imbalance = np.zeros(net.nodes)
    for a, v in zip(net.train_arcs, x_train):
        imbalance[a.head] += v
        imbalance[a.tail] -= v
    # route the correction along the light cycle: y_i - y_{i-1} = delta(v_i)
    y_light = np.zeros(n_light)
    cycle = [net.light_arcs[i] for i in net.light_cycle]
    partial = 0.0
    partials = []
    for arc in cycle:
        partial += imbalance[arc.tail]
        partials.append(partial)
    offset = -min(0.0, min(partials))
    for pos, arc in enumerate(cycle):
        y_light[arc.index] = partials[pos] + offset
    z_light = np.ceil(y_light / cap - 1e-12)
    return np.concatenate([x_train, y_light, z_light])


def _slap_instance(cfg: SlapConfig, net: SlapNetwork, draw: PerturbationDraw) -> MipInstance:
    n_train, n_light = len(net.train_arcs), len(net.light_arcs)
    lb_draw = draw.values[:n_train]
    ub_draw = draw.values[n_train:]
    names = (
        [f"loco[t{a.index}]" for a in net.train_arcs]
        + [f"light_loco[g{a.index}]" for a in net.light_arcs]
        + [f"light_train[g{a.index}]" for a in net.light_arcs]
    )
    objective = np.concatenate(
        [
            np.array([a.cost for a in net.train_arcs]),
            np.array([a.cost for a in net.light_arcs]),
            np.full(n_light, cfg.light_fixed),
        ]
    )
    z_ub = math.ceil(net.light_flow_ub / cfg.light_capacity)
    lower = np.zeros(n_train + 2 * n_light)
    upper = np.concatenate(
        [np.full(n_train, net.loco_ub), np.full(n_light, net.light_flow_ub), np.full(n_light, float(z_ub))]
    )
    kinds = (VarKind.INTEGER,) * (n_train + 2 * n_light)

    def xvar(i):
        return i

    def yvar(i):
        return n_train + i

    def zvar(i):
        return n_train + n_light + i

    rows = []
    incoming: dict[int, list[int]] = {v: [] for v in range(cfg.nodes)}
    outgoing: dict[int, list[int]] = {v: [] for v in range(cfg.nodes)}
    for a in net.train_arcs:
        incoming[a.head].append(xvar(a.index))
        outgoing[a.tail].append(xvar(a.index))
    for a in net.light_arcs:
        incoming[a.head].append(yvar(a.index))
        outgoing[a.tail].append(yvar(a.index))
    for v in range(cfg.nodes):
        terms = tuple((i, 1.0) for i in incoming[v]) + tuple((i, -1.0) for i in outgoing[v])
        rows.append(Row(terms=terms, sense=Sense.EQ, rhs=0.0))
    for a in net.train_arcs:
        rows.append(Row(terms=((xvar(a.index), 1.0),), sense=Sense.GE, rhs=float(lb_draw[a.index])))
    for a in net.train_arcs:
        rows.append(Row(terms=((xvar(a.index), 1.0),), sense=Sense.LE, rhs=float(ub_draw[a.index])))
    for a in net.train_arcs:
        rows.append(Row(terms=((xvar(a.index), net.power_per_loco),), sense=Sense.GE, rhs=a.tonnage))
    for a in net.light_arcs:
        rows.append(
            Row(terms=((yvar(a.index), 1.0), (zvar(a.index), -float(cfg.light_capacity))), sense=Sense.LE, rhs=0.0)
        )
    fleet_terms = tuple((xvar(a.index), 1.0) for a in net.train_arcs)
    rows.append(Row(terms=fleet_terms, sense=Sense.LE, rhs=net.fleet_cap))

    inst = MipInstance(
        name=f"{cfg.family}-s{cfg.structure_seed}-i{draw.instance_seed}",
        objective=objective,
        rows=tuple(rows),
        lower=lower,
        upper=upper,
        kinds=kinds,
        var_names=tuple(names),
        family=cfg.family,
        param_seed=draw.instance_seed,
    )
    ref = _slap_reference_solution(net, lb_draw, cfg.light_capacity, n_train, n_light)
    report = check_feasibility(inst, ref, 1e-6)
    if not report.feasible:
        raise GenerationError(
            f"{inst.name}: reference locomotive flow infeasible "
            f"(row {report.max_row_violation:.3g}, bound {report.max_bound_violation:.3g})"
        )
    return inst


# --------------------------------------------------------------------------
# public dispatch


def build_reference_network(cfg: FamilyConfig):
    """Fixed per-family structure; identical output for identical structure_seed."""
    if isinstance(cfg, MmcnpConfig):
        return _build_mmcnp(cfg)
    if isinstance(cfg, SlapConfig):
        return _build_slap(cfg)
    raise ConfigError(f"unknown family config {type(cfg)!r}")


def sample_perturbation(cfg: FamilyConfig, instance_seed: int, network=None) -> PerturbationDraw:
    """The per-instance parameter draw, deterministic in (cfg, instance_seed)."""
    net = network if network is not None else build_reference_network(cfg)
    if isinstance(cfg, MmcnpConfig):
        return _sample_mmcnp(cfg, net, instance_seed)
    return _sample_slap(cfg, net, instance_seed)


def gen_instance(cfg: FamilyConfig, instance_seed: int, network=None) -> MipInstance:
    """Generate one instance of the family for the given seed."""
    net = network if network is not None else build_reference_network(cfg)
    draw = sample_perturbation(cfg, instance_seed, network=net)
    if isinstance(cfg, MmcnpConfig):
        return _mmcnp_instance(cfg, net, draw)
    return _slap_instance(cfg, net, draw)

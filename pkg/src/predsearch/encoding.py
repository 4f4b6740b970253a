"""Bipartite variable-constraint graph encoding of a MIP instance.

Variable feature layout (15 columns, fixed for checkpoint portability):

    0-2   kind one-hot (continuous, binary, integer)
    3-4   lower/upper bound divided by the largest finite |bound| (0 if infinite)
    5-6   lower/upper bound finiteness flags
    7     objective coefficient / max |c|
    8     degree / number of rows
    9-12  incident coefficient mean, min, max, population std, / max |A|
    13    appears-in-objective flag
    14    reserved zero pad

Constraint features: sense one-hot (LE, EQ, GE) + rhs / max(max |rhs|, 1).
Edge feature: coefficient / max |coefficient| within its own row.

The base encoding is permutation-equivariant. append_identity widens the
variable features with a big-endian binary expansion of each variable
index, which deliberately breaks that equivariance so models can tell
corresponding variables apart across instances of one parametric family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .instance import MipInstance, Sense, VarKind

BASE_VAR_FEATURES = 15
CONS_FEATURES = 4
EDGE_FEATURES = 1

_KIND_COL = {VarKind.CONTINUOUS: 0, VarKind.BINARY: 1, VarKind.INTEGER: 2}
_SENSE_COL = {Sense.LE: 0, Sense.EQ: 1, Sense.GE: 2}


@dataclass(frozen=True)
class BipartiteGraph:
    var_features: np.ndarray    # n x (15 + B)
    cons_features: np.ndarray   # m x 4
    edge_var: np.ndarray        # edge source variable indices
    edge_cons: np.ndarray       # edge target constraint indices
    edge_features: np.ndarray   # e x 1
    integer_mask: np.ndarray    # n bools, True where the variable is integer
    identity_width: int = 0

    def __post_init__(self):
        for name in ("var_features", "cons_features", "edge_var", "edge_cons", "edge_features", "integer_mask"):
            arr = getattr(self, name)
            arr.flags.writeable = False

    @property
    def num_vars(self) -> int:
        return self.var_features.shape[0]

    @property
    def num_cons(self) -> int:
        return self.cons_features.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_var.shape[0]


def encode_bipartite(inst: MipInstance) -> BipartiteGraph:
    """Deterministic, permutation-equivariant encoding of an instance."""
    n, m = inst.num_vars, inst.num_rows

    finite_bounds = np.concatenate([inst.lower[np.isfinite(inst.lower)], inst.upper[np.isfinite(inst.upper)]])
    bscale = float(np.abs(finite_bounds).max()) if finite_bounds.size else 0.0
    bscale = bscale if bscale > 0 else 1.0
    cscale = float(np.abs(inst.objective).max())
    cscale = cscale if cscale > 0 else 1.0

    edge_var, edge_cons, edge_coeff = [], [], []
    for j, row in enumerate(inst.rows):
        for i, c in row.terms:
            if c != 0.0:
                edge_var.append(i)
                edge_cons.append(j)
                edge_coeff.append(c)
    edge_var = np.array(edge_var, dtype=int)
    edge_cons = np.array(edge_cons, dtype=int)
    edge_coeff = np.array(edge_coeff, dtype=float)
    ascale = float(np.abs(edge_coeff).max()) if edge_coeff.size else 1.0
    ascale = ascale if ascale > 0 else 1.0

    var = np.zeros((n, BASE_VAR_FEATURES))
    for i in range(n):
        var[i, _KIND_COL[inst.kinds[i]]] = 1.0
    lb_fin = np.isfinite(inst.lower)
    ub_fin = np.isfinite(inst.upper)
    var[:, 3] = np.where(lb_fin, inst.lower / bscale, 0.0)
    var[:, 4] = np.where(ub_fin, inst.upper / bscale, 0.0)
    var[:, 5] = lb_fin.astype(float)
    var[:, 6] = ub_fin.astype(float)
    var[:, 7] = inst.objective / cscale
    if edge_coeff.size:
        deg = np.bincount(edge_var, minlength=n).astype(float)
        sums = np.bincount(edge_var, weights=edge_coeff, minlength=n)
        sums_sq = np.bincount(edge_var, weights=edge_coeff**2, minlength=n)
        mins = np.full(n, np.inf)
        maxs = np.full(n, -np.inf)
        np.minimum.at(mins, edge_var, edge_coeff)
        np.maximum.at(maxs, edge_var, edge_coeff)
        touched = deg > 0
        mean = np.zeros(n)
        mean[touched] = sums[touched] / deg[touched]
        variance = np.zeros(n)
        variance[touched] = np.maximum(sums_sq[touched] / deg[touched] - mean[touched] ** 2, 0.0)
        var[:, 8] = deg / max(m, 1)
        var[touched, 9] = mean[touched] / ascale
        var[touched, 10] = mins[touched] / ascale
        var[touched, 11] = maxs[touched] / ascale
        var[touched, 12] = np.sqrt(variance[touched]) / ascale
    var[:, 13] = (inst.objective != 0.0).astype(float)
    # column 14 stays zero (reserved)

    cons = np.zeros((m, CONS_FEATURES))
    if m:
        rhs = np.array([row.rhs for row in inst.rows])
        rhs_scale = max(float(np.abs(rhs).max()), 1.0)
        for j, row in enumerate(inst.rows):
            cons[j, _SENSE_COL[row.sense]] = 1.0
        cons[:, 3] = rhs / rhs_scale

    if edge_coeff.size:
        row_max = np.zeros(m)
        np.maximum.at(row_max, edge_cons, np.abs(edge_coeff))
        edge_feat = (edge_coeff / row_max[edge_cons]).reshape(-1, 1)
    else:
        edge_feat = np.zeros((0, 1))

    return BipartiteGraph(
        var_features=var,
        cons_features=cons,
        edge_var=edge_var,
        edge_cons=edge_cons,
        edge_features=edge_feat,
        integer_mask=np.array([k is not VarKind.CONTINUOUS for k in inst.kinds]),
        identity_width=0,
    )


def identity_bits(index: int, width: int) -> np.ndarray:
    """Big-endian binary expansion of a variable index."""
    return np.array([(index >> (width - 1 - b)) & 1 for b in range(width)], dtype=float)


def append_identity(graph: BipartiteGraph, width: int) -> BipartiteGraph:
    """Append a big-endian binary index encoding to the variable features."""
    n = graph.num_vars
    if graph.identity_width != 0:
        raise ValidationError("graph already carries identity features")
    if width < 0 or (n > 0 and 2**width < n):
        raise DimensionError(f"identity width {width} cannot address {n} variables (need 2^B >= n)")
    bits = np.zeros((n, width))
    for i in range(n):
        bits[i] = identity_bits(i, width)
    return BipartiteGraph(
        var_features=np.hstack([graph.var_features, bits]),
        cons_features=graph.cons_features.copy(),
        edge_var=graph.edge_var.copy(),
        edge_cons=graph.edge_cons.copy(),
        edge_features=graph.edge_features.copy(),
        integer_mask=graph.integer_mask.copy(),
        identity_width=width,
    )


def encode_instance(inst: MipInstance, identity_width: int = 0) -> BipartiteGraph:
    """Encode and, when identity_width > 0, append identity features."""
    graph = encode_bipartite(inst)
    if identity_width:
        graph = append_identity(graph, identity_width)
    return graph


def write_graph_dump(graph: BipartiteGraph, path) -> None:
    """Plain-text debugging dump: dimensions header, feature blocks, edges."""
    lines = [
        f"vars {graph.num_vars} cons {graph.num_cons} edges {graph.num_edges} "
        f"var_width {graph.var_features.shape[1]} identity {graph.identity_width}"
    ]
    for row in graph.var_features:
        lines.append("v " + " ".join(repr(float(x)) for x in row))
    for row in graph.cons_features:
        lines.append("c " + " ".join(repr(float(x)) for x in row))
    for i, j, f in zip(graph.edge_var, graph.edge_cons, graph.edge_features[:, 0] if graph.num_edges else []):
        lines.append(f"e {i} {j} {f!r}")
    from pathlib import Path

    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

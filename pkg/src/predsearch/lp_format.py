"""LP text format export/import and the optional external-solver adapter.

The exporter writes positional names (x0, x1, ...) so arbitrary variable
names never clash with LP syntax; original names are kept in comments.
The importer understands exactly this dialect plus a Maximize section,
which is negated into the canonical minimization form on load.
"""

from __future__ import annotations

import math
import shlex
import subprocess
import tempfile
from pathlib import Path

import numpy as np

from .errors import ParseError, PredsearchError
from .instance import MipInstance, Row, Sense, make_solution
from .solver import SolveResult, SolveStatus

_SENSE_TO_OP = {Sense.LE: "<=", Sense.EQ: "=", Sense.GE: ">="}
_OP_TO_SENSE = {"<=": Sense.LE, "=<": Sense.LE, "=": Sense.EQ, ">=": Sense.GE, "=>": Sense.GE}


def _num(v: float) -> str:
    return repr(float(v))


def _terms_text(terms) -> str:
    parts = []
    for idx, coeff in terms:
        sign = "-" if coeff < 0 else "+"
        parts.append(f"{sign} {_num(abs(coeff))} x{idx}")
    if not parts:
        return "0 x0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def export_lp_file(inst: MipInstance, path) -> None:
    lines = [f"\\ instance {inst.name} (family {inst.family}, seed {inst.param_seed})"]
    for i, name in enumerate(inst.var_names):
        lines.append(f"\\ x{i} := {name}")
    lines.append("Minimize")
    obj_terms = [(i, c) for i, c in enumerate(inst.objective.tolist()) if c != 0.0]
    lines.append(f" obj: {_terms_text(obj_terms)}")
    lines.append("Subject To")
    for j, row in enumerate(inst.rows):
        lines.append(f" c{j}: {_terms_text(row.terms)} {_SENSE_TO_OP[row.sense]} {_num(row.rhs)}")
    lines.append("Bounds")
    for i in range(inst.num_vars):
        lb, ub = float(inst.lower[i]), float(inst.upper[i])
        if not math.isfinite(lb) and not math.isfinite(ub):
            lines.append(f" x{i} free")
        elif not math.isfinite(lb):
            lines.append(f" -inf <= x{i} <= {_num(ub)}")
        elif not math.isfinite(ub):
            lines.append(f" {_num(lb)} <= x{i} <= +inf")
        else:
            lines.append(f" {_num(lb)} <= x{i} <= {_num(ub)}")
    generals = [i for i, k in enumerate(inst.kinds) if k.value == "integer"]
    binaries = [i for i, k in enumerate(inst.kinds) if k.value == "binary"]
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(f"x{i}" for i in generals))
    if binaries:
        lines.append("Binaries")
        lines.append(" " + " ".join(f"x{i}" for i in binaries))
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_bound_token(tok: str) -> float:
    t = tok.lower().lstrip("+")
    if t in ("-inf", "-infinity"):
        return -math.inf
    if t in ("inf", "infinity"):
        return math.inf
    return float(tok)


def _parse_terms(text: str, where: str) -> list[tuple[int, float]]:
    tokens = text.replace("+", " + ").replace("-", " - ").split()
    terms: list[tuple[int, float]] = []
    sign, coeff = 1.0, None
    for tok in tokens:
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        if tok.startswith("x"):
            idx = int(tok[1:])
            terms.append((idx, sign * (1.0 if coeff is None else coeff)))
            sign, coeff = 1.0, None
        else:
            try:
                coeff = float(tok)
            except ValueError:
                raise ParseError(f"{where}: unexpected token '{tok}'") from None
    return terms


def import_lp_file(path) -> MipInstance:
    """Parse the dialect written by export_lp_file back into an instance."""
    path = Path(path)
    section = None
    maximize = False
    obj_terms: list[tuple[int, float]] = []
    raw_rows: list[tuple[list[tuple[int, float]], Sense, float]] = []
    bounds: dict[int, tuple[float, float]] = {}
    generals: set[int] = set()
    binaries: set[int] = set()
    name = path.stem

    for ln, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("\\")[0].strip()
        where = f"{path}: line {ln}"
        if not line:
            continue
        lowered = line.lower()
        if lowered in ("minimize", "maximize", "subject to", "bounds", "generals", "binaries", "end"):
            section = lowered
            maximize = maximize or lowered == "maximize"
            continue
        if section in ("minimize", "maximize"):
            body = line.split(":", 1)[1] if ":" in line else line
            obj_terms.extend(_parse_terms(body, where))
        elif section == "subject to":
            body = line.split(":", 1)[1] if ":" in line else line
            op = next((o for o in ("<=", ">=", "=<", "=>", "=") if o in body), None)
            if op is None:
                raise ParseError(f"{where}: constraint without relational operator")
            lhs, rhs = body.split(op, 1)
            raw_rows.append((_parse_terms(lhs, where), _OP_TO_SENSE[op], float(rhs)))
        elif section == "bounds":
            if lowered.endswith(" free"):
                idx = int(line.split()[0][1:])
                bounds[idx] = (-math.inf, math.inf)
            else:
                parts = line.split("<=")
                if len(parts) == 3:
                    lb = _parse_bound_token(parts[0].strip())
                    idx = int(parts[1].strip()[1:])
                    ub = _parse_bound_token(parts[2].strip())
                    bounds[idx] = (lb, ub)
                elif len(parts) == 2:
                    idx = int(parts[0].strip()[1:])
                    bounds[idx] = (0.0, _parse_bound_token(parts[1].strip()))
                else:
                    raise ParseError(f"{where}: unsupported bound line '{line}'")
        elif section == "generals":
            generals.update(int(t[1:]) for t in line.split())
        elif section == "binaries":
            binaries.update(int(t[1:]) for t in line.split())
        elif section == "end":
            continue
        else:
            raise ParseError(f"{where}: content before any section header")

    indices = {i for i, _ in obj_terms} | {i for t, _, _ in raw_rows for i, _ in t}
    indices |= set(bounds) | generals | binaries
    n = (max(indices) + 1) if indices else 0
    objective = np.zeros(n)
    for i, c in obj_terms:
        objective[i] += c
    if maximize:
        objective = -objective
    lower = np.zeros(n)
    upper = np.full(n, math.inf)
    for i, (lb, ub) in bounds.items():
        lower[i], upper[i] = lb, ub
    kinds = []
    from .instance import VarKind

    for i in range(n):
        if i in binaries:
            kinds.append(VarKind.BINARY)
            lower[i], upper[i] = 0.0, 1.0
        elif i in generals:
            kinds.append(VarKind.INTEGER)
        else:
            kinds.append(VarKind.CONTINUOUS)
    rows = tuple(Row(terms=tuple(t), sense=s, rhs=r) for t, s, r in raw_rows)
    return MipInstance(
        name=name,
        objective=objective,
        rows=rows,
        lower=lower,
        upper=upper,
        kinds=tuple(kinds),
        var_names=tuple(f"x{i}" for i in range(n)),
    )


def parse_solution_file(path, num_vars: int) -> np.ndarray:
    """Parse 'name value' lines produced by an external solver."""
    x = np.zeros(num_vars)
    for ln, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("="):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"{path}: line {ln}: expected 'name value', got '{line}'")
        name, value = parts
        if not name.startswith("x"):
            continue
        idx = int(name[1:])
        if not (0 <= idx < num_vars):
            raise ParseError(f"{path}: line {ln}: variable index {idx} out of range")
        x[idx] = float(value)
    return x


def solve_with_external(inst: MipInstance, command_template: str, *, workdir=None, feas_tol: float = 1e-6) -> SolveResult:
    """File-based adapter: write an LP file, run an external command, read a
    solution file. The template must contain {lp} and {sol} placeholders.
    Never required by the pipeline; results come back with status FEASIBLE.
    """
    with tempfile.TemporaryDirectory(dir=workdir) as td:
        lp_path = Path(td) / "model.lp"
        sol_path = Path(td) / "model.sol"
        export_lp_file(inst, lp_path)
        cmd = command_template.format(lp=str(lp_path), sol=str(sol_path))
        proc = subprocess.run(shlex.split(cmd), capture_output=True, text=True)
        if proc.returncode != 0:
            raise PredsearchError(f"external solver failed (exit {proc.returncode}): {proc.stderr[:500]}")
        if not sol_path.exists():
            raise PredsearchError("external solver produced no solution file")
        x = parse_solution_file(sol_path, inst.num_vars)
    from .instance import check_feasibility

    feasible = check_feasibility(inst, x, feas_tol).feasible
    sol = make_solution(inst, x, feasible=feasible, source="external")
    return SolveResult(
        status=SolveStatus.FEASIBLE if feasible else SolveStatus.TIME_LIMIT,
        incumbents=((0.0, sol.objective),) if feasible else (),
        best_solution=sol if feasible else None,
        best_bound=-math.inf,
        nodes=0,
    )

"""Thin, checked interface to semidefinite solvers.

A problem is: minimize c^T x subject to affine PSD blocks, sparse linear
equalities, and box bounds on single variables. The default backend is
Clarabel with chordal decomposition (essential here: the purity LMI is a
block arrow and decomposing it is what keeps solves fast); cvxopt serves as
an independent cross-check, and problems can be exported in sparse SDPA
format for any external solver.

Every optimal return is self-verified: equality residual, PSD eigenvalue
floor, and weak duality against the backend's dual bound. A solve that
fails those checks is downgraded to numerical_failure rather than trusted.

Clarabel is run single-threaded so repeated solves are bit-reproducible.
"""

from __future__ import annotations

import math
import os
import subprocess
import tempfile
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, ParameterError, ValidationError
from .soslmi import LinearMatrixExpr

__all__ = [
    "SdpProblem",
    "SdpSolution",
    "solve_sdp",
    "fix_variables",
    "write_sdpa",
    "read_sdpa",
    "SdpaData",
    "solve_with_sdpa_binary",
]

_SQRT2 = math.sqrt(2.0)


@dataclass
class SdpProblem:
    num_vars: int
    objective: np.ndarray
    psd_constraints: list
    eq_matrix: sp.csr_matrix
    eq_rhs: np.ndarray
    box: list = field(default_factory=list)
    objective_offset: float = 0.0

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.num_vars,):
            raise DimensionError("objective length does not match num_vars")
        self.eq_matrix = sp.csr_matrix(self.eq_matrix)
        self.eq_rhs = np.asarray(self.eq_rhs, dtype=float)
        if self.eq_matrix.shape != (len(self.eq_rhs), self.num_vars):
            raise DimensionError("equality system shape mismatch")
        for idx, lo, hi in self.box:
            if not 0 <= idx < self.num_vars:
                raise DimensionError(f"box index {idx} out of range")
            if not lo < hi:
                raise ParameterError(f"empty box [{lo}, {hi}]")

    def violations(self, x: np.ndarray):
        """(max equality residual, min PSD eigenvalue, max box violation)."""
        eq_res = 0.0
        if self.eq_rhs.size:
            eq_res = float(np.abs(self.eq_matrix @ x - self.eq_rhs).max())
        min_eig = math.inf
        for expr in self.psd_constraints:
            vals = np.linalg.eigvalsh(expr.evaluate(x))
            min_eig = min(min_eig, float(vals[0]))
        if min_eig is math.inf:
            min_eig = 0.0
        box_res = 0.0
        for idx, lo, hi in self.box:
            box_res = max(box_res, lo - x[idx], x[idx] - hi)
        return eq_res, min_eig, max(box_res, 0.0)


@dataclass
class SdpSolution:
    status: str
    x: np.ndarray | None
    objective_value: float | None
    dual_objective: float | None
    max_violation: float | None
    solver_name: str
    iterations: int
    solver_status: str


def _svec_rows(expr: LinearMatrixExpr):
    """Scaled upper-triangle vectorization of the block, column-major, with
    off-diagonal entries multiplied by sqrt(2) (the isometric convention)."""
    dim = expr.dim
    total = dim * (dim + 1) // 2
    pos = np.zeros((dim, dim), dtype=np.int64)
    t = 0
    for j in range(dim):
        for i in range(j + 1):
            pos[i, j] = t
            t += 1

    def svec_dense(m):
        out = np.zeros(total)
        t = 0
        for j in range(dim):
            for i in range(j + 1):
                out[t] = m[i, j] * (1.0 if i == j else _SQRT2)
                t += 1
        return out

    def svec_sparse(m):
        coo = m.tocoo()
        rows, vals = [], []
        for i, j, v in zip(coo.row, coo.col, coo.data):
            if i > j:
                continue
            rows.append(pos[i, j])
            vals.append(v * (1.0 if i == j else _SQRT2))
        return rows, vals

    return total, svec_dense, svec_sparse


def _assemble_clarabel(prob: SdpProblem, tol: float):
    import clarabel

    n = prob.num_vars
    cones = []
    a_blocks = []
    b_parts = []

    n_eq = prob.eq_matrix.shape[0]
    if n_eq:
        cones.append(clarabel.ZeroConeT(n_eq))
        a_blocks.append(prob.eq_matrix)
        b_parts.append(prob.eq_rhs)

    if prob.box:
        rows, cols, data, rhs = [], [], [], []
        for t, (idx, lo, hi) in enumerate(prob.box):
            rows.append(2 * t)
            cols.append(idx)
            data.append(-1.0)
            rhs.append(-lo)
            rows.append(2 * t + 1)
            cols.append(idx)
            data.append(1.0)
            rhs.append(hi)
        cones.append(clarabel.NonnegativeConeT(2 * len(prob.box)))
        a_blocks.append(sp.coo_matrix((data, (rows, cols)),
                                      shape=(2 * len(prob.box), n)).tocsr())
        b_parts.append(np.array(rhs))

    for expr in prob.psd_constraints:
        total, svec_dense, svec_sparse = _svec_rows(expr)
        cones.append(clarabel.PSDTriangleConeT(expr.dim))
        rows, cols, data = [], [], []
        for v, coeff in expr.coeffs.items():
            r_idx, vals = svec_sparse(coeff)
            rows.extend(r_idx)
            cols.extend([v] * len(r_idx))
            data.extend([-w for w in vals])
        a_blocks.append(sp.coo_matrix((data, (rows, cols)),
                                      shape=(total, n)).tocsr())
        b_parts.append(svec_dense(expr.const))

    a = sp.vstack(a_blocks).tocsc()
    b = np.concatenate(b_parts)
    p = sp.csc_matrix((n, n))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_threads = 1
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    # Feasibility stays tight even when the caller relaxes the gap: the
    # solution invariants promise 1e-7-level residuals independent of tol.
    settings.tol_feas = min(tol, 1e-8)
    solver = clarabel.DefaultSolver(p, prob.objective, a, b, cones, settings)
    return solver


def _solve_clarabel(prob: SdpProblem, tol: float) -> SdpSolution:
    solver = _assemble_clarabel(prob, tol)
    res = solver.solve()
    status = str(res.status)
    x = np.asarray(res.x, dtype=float) if res.x is not None else None
    obj = float(res.obj_val) + prob.objective_offset if res.obj_val is not None else None
    dual = float(res.obj_val_dual) + prob.objective_offset \
        if res.obj_val_dual is not None else None
    almost = False
    if status == "Solved":
        mapped = "optimal"
    elif status == "AlmostSolved":
        # Reduced-accuracy exit: trust it only if our own feasibility and
        # duality-gap checks below pass.
        mapped = "optimal"
        almost = True
    elif status in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        mapped = "infeasible"
    else:
        mapped = "numerical_failure"
    return _finish(prob, mapped, x, obj, dual, "clarabel",
                   int(res.iterations), status, tol, almost=almost)


def _solve_cvxopt(prob: SdpProblem, tol: float) -> SdpSolution:
    from cvxopt import matrix, solvers, spmatrix

    n = prob.num_vars
    g_rows, g_cols, g_data = [], [], []
    h_parts = []
    dims = {"l": 0, "q": [], "s": []}
    offset = 0

    if prob.box:
        for idx, lo, hi in prob.box:
            g_rows.append(offset)
            g_cols.append(idx)
            g_data.append(-1.0)
            h_parts.append(-lo)
            g_rows.append(offset + 1)
            g_cols.append(idx)
            g_data.append(1.0)
            h_parts.append(hi)
            offset += 2
        dims["l"] = offset

    for expr in prob.psd_constraints:
        dim = expr.dim
        dims["s"].append(dim)
        for v, coeff in expr.coeffs.items():
            coo = coeff.tocoo()
            for i, j, val in zip(coo.row, coo.col, coo.data):
                g_rows.append(int(offset + j * dim + i))
                g_cols.append(int(v))
                g_data.append(float(-val))
        h_parts.extend(expr.const.flatten(order="F"))
        offset += dim * dim

    g = spmatrix(g_data, g_rows, g_cols, (offset, n))
    h = matrix(np.asarray(h_parts, dtype=float))
    c = matrix(prob.objective)

    a_coo = prob.eq_matrix.tocoo()
    a = spmatrix([float(v) for v in a_coo.data],
                 [int(v) for v in a_coo.row],
                 [int(v) for v in a_coo.col], prob.eq_matrix.shape)
    b = matrix(prob.eq_rhs)

    opts = {"show_progress": False, "abstol": tol, "reltol": tol,
            "feastol": tol, "maxiters": 200}
    try:
        sol = solvers.conelp(c, g, h, dims, a, b, options=opts)
    except (ValueError, ZeroDivisionError, ArithmeticError) as exc:
        return SdpSolution(status="numerical_failure", x=None,
                           objective_value=None, dual_objective=None,
                           max_violation=None, solver_name="cvxopt",
                           iterations=0, solver_status=f"exception: {exc}")

    raw = sol["status"]
    x = np.asarray(sol["x"]).ravel() if sol["x"] is not None else None
    obj = float(sol["primal objective"]) + prob.objective_offset \
        if sol["primal objective"] is not None else None
    dual = float(sol["dual objective"]) + prob.objective_offset \
        if sol["dual objective"] is not None else None
    if raw == "optimal":
        mapped = "optimal"
    elif raw == "primal infeasible":
        mapped = "infeasible"
    else:
        mapped = "numerical_failure"
    return _finish(prob, mapped, x, obj, dual, "cvxopt",
                   int(sol.get("iterations", 0)), raw, tol)


def _finish(prob, mapped, x, obj, dual, name, iters, raw, tol,
            almost: bool = False) -> SdpSolution:
    max_violation = None
    if mapped == "optimal" and x is None:
        mapped = "numerical_failure"
    if x is not None:
        eq_res, min_eig, box_res = prob.violations(x)
        max_violation = max(eq_res, -min(min_eig, 0.0), box_res)
        if mapped == "optimal":
            gap_tol = max(tol, 1e-9) * (1.0 + abs(obj)) * 10.0
            b_scale = 1.0 + (float(np.abs(prob.eq_rhs).max())
                             if prob.eq_rhs.size else 0.0)
            if eq_res > 1e-7 * b_scale or min_eig < -1e-7 or box_res > 1e-7:
                mapped = "numerical_failure"
            elif dual is not None and obj < dual - gap_tol:
                mapped = "numerical_failure"
            elif almost and (dual is None or abs(obj - dual) > gap_tol):
                mapped = "numerical_failure"
    return SdpSolution(status=mapped, x=x, objective_value=obj,
                       dual_objective=dual, max_violation=max_violation,
                       solver_name=name, iterations=iters, solver_status=raw)


def solve_sdp(prob: SdpProblem, tol: float = 1e-8,
              backend: str = "clarabel") -> SdpSolution:
    if backend == "clarabel":
        return _solve_clarabel(prob, tol)
    if backend == "cvxopt":
        return _solve_cvxopt(prob, tol)
    if backend == "sdpa":
        return solve_with_sdpa_binary(prob, tol)
    raise ParameterError(f"unknown backend {backend!r}")


def fix_variables(prob: SdpProblem, fixed: dict) -> tuple[SdpProblem, np.ndarray]:
    """Substitute fixed values for some variables, shrinking the problem.

    Returns the reduced problem and the index map old <- new (an array
    whose entry t is the original index of reduced variable t).
    """
    for idx in fixed:
        if not 0 <= idx < prob.num_vars:
            raise DimensionError(f"fixed index {idx} out of range")
    keep = np.array([i for i in range(prob.num_vars) if i not in fixed],
                    dtype=np.int64)
    new_of_old = {old: new for new, old in enumerate(keep)}
    fvec = np.zeros(prob.num_vars)
    for idx, val in fixed.items():
        fvec[idx] = val

    new_psd = []
    for expr in prob.psd_constraints:
        const = expr.const.copy()
        coeffs = {}
        for v, coeff in expr.coeffs.items():
            if v in fixed:
                if fixed[v] != 0.0:
                    const += fixed[v] * coeff.toarray()
            else:
                coeffs[new_of_old[v]] = coeff
        new_psd.append(LinearMatrixExpr(dim=expr.dim, const=const, coeffs=coeffs))

    rhs = prob.eq_rhs - prob.eq_matrix @ fvec
    a_new = prob.eq_matrix[:, keep].tocsr()
    live = np.asarray((abs(a_new) > 0).sum(axis=1)).ravel() > 0
    dead_bad = (~live) & (np.abs(rhs) > 1e-9)
    if dead_bad.any():
        raise ValidationError(
            "fixing these variables contradicts an equality "
            f"(residual {np.abs(rhs[dead_bad]).max():.3e})"
        )
    a_new = a_new[live]
    rhs = rhs[live]

    box = []
    for idx, lo, hi in prob.box:
        if idx in fixed:
            if not lo - 1e-12 <= fixed[idx] <= hi + 1e-12:
                raise ValidationError(
                    f"fixed value {fixed[idx]} leaves box [{lo}, {hi}]")
        else:
            box.append((new_of_old[idx], lo, hi))

    offset = prob.objective_offset + float(prob.objective @ fvec)
    reduced = SdpProblem(
        num_vars=len(keep),
        objective=prob.objective[keep],
        psd_constraints=new_psd,
        eq_matrix=a_new,
        eq_rhs=rhs,
        box=box,
        objective_offset=offset,
    )
    return reduced, keep


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_sdpa(prob: SdpProblem, path: str):
    """Write the problem in sparse SDPA format (.dat-s).

    Encoding: minimize c^T x with sum_v x_v F_v - F_0 in the cone; each PSD
    block appears as-is (F_v = coefficient, F_0 = -constant) and equalities
    plus box bounds become paired rows of one diagonal block. Values keep
    17 significant digits so a round trip is exact to the printed decimals.
    """
    lines = []
    n = prob.num_vars
    eq = prob.eq_matrix.tocsr()
    n_eq = eq.shape[0]
    lp_rows = 2 * n_eq + 2 * len(prob.box)
    block_dims = [expr.dim for expr in prob.psd_constraints]
    if lp_rows:
        block_dims.append(-lp_rows)

    lines.append(f"{n} = mDIM")
    lines.append(f"{len(block_dims)} = nBLOCK")
    lines.append(", ".join(str(d) for d in block_dims) + " = bLOCKsTRUCT")
    lines.append(", ".join(_fmt(v) for v in prob.objective))

    def entry(mat_no, blk, i, j, val):
        if val != 0.0:
            lines.append(f"{mat_no} {blk} {i + 1} {j + 1} {_fmt(val)}")

    for blk, expr in enumerate(prob.psd_constraints, start=1):
        const = expr.const
        for i in range(expr.dim):
            for j in range(i, expr.dim):
                entry(0, blk, i, j, -const[i, j])
        for v, coeff in expr.coeffs.items():
            coo = coeff.tocoo()
            for i, j, val in zip(coo.row, coo.col, coo.data):
                if i <= j:
                    entry(v + 1, blk, i, j, val)

    if lp_rows:
        blk = len(block_dims)
        row = 0
        for t in range(n_eq):
            lo, hi = eq.indptr[t], eq.indptr[t + 1]
            for col, val in zip(eq.indices[lo:hi], eq.data[lo:hi]):
                entry(col + 1, blk, row, row, val)
                entry(col + 1, blk, row + 1, row + 1, -val)
            entry(0, blk, row, row, prob.eq_rhs[t])
            entry(0, blk, row + 1, row + 1, -prob.eq_rhs[t])
            row += 2
        for idx, lo_v, hi_v in prob.box:
            entry(idx + 1, blk, row, row, 1.0)
            entry(0, blk, row, row, lo_v)
            entry(idx + 1, blk, row + 1, row + 1, -1.0)
            entry(0, blk, row + 1, row + 1, -hi_v)
            row += 2

    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class SdpaData:
    num_vars: int
    block_dims: list
    objective: np.ndarray
    entries: dict  # (mat_no, block) -> {(i, j): value}, 0-based, i <= j

    def block_matrix(self, mat_no: int, blk: int) -> np.ndarray:
        dim = abs(self.block_dims[blk - 1])
        out = np.zeros((dim, dim))
        for (i, j), v in self.entries.get((mat_no, blk), {}).items():
            out[i, j] = v
            out[j, i] = v
        return out


def read_sdpa(path: str) -> SdpaData:
    """Parse a sparse SDPA file written by write_sdpa (comments tolerated)."""
    header = []
    entries: dict = {}
    objective = None
    with open(path) as fh:
        for raw in fh:
            line = raw.split("*")[0].split('"')[0].strip()
            if not line:
                continue
            if len(header) < 3:
                header.append(line)
                continue
            if objective is None:
                cleaned = line.replace(",", " ").replace("(", " ").replace(")", " ")
                objective = np.array([float(tok) for tok in cleaned.split()])
                continue
            toks = line.replace(",", " ").split()
            if len(toks) != 5:
                raise ValidationError(f"malformed SDPA entry line: {raw!r}")
            mat_no, blk, i, j, val = (int(toks[0]), int(toks[1]),
                                      int(toks[2]), int(toks[3]),
                                      float(toks[4]))
            key = (mat_no, blk)
            ii, jj = i - 1, j - 1
            entries.setdefault(key, {})[(min(ii, jj), max(ii, jj))] = val
    if objective is None or len(header) < 3:
        raise ValidationError("SDPA file is truncated")
    num_vars = int(header[0].split("=")[0].split()[0])
    cleaned = header[2].split("=")[0].replace(",", " ").replace("{", " ")
    cleaned = cleaned.replace("}", " ").replace("(", " ").replace(")", " ")
    block_dims = [int(tok) for tok in cleaned.split()]
    if len(objective) != num_vars:
        raise ValidationError("objective length disagrees with mDIM")
    return SdpaData(num_vars=num_vars, block_dims=block_dims,
                    objective=objective, entries=entries)


def solve_with_sdpa_binary(prob: SdpProblem, tol: float = 1e-8) -> SdpSolution:
    """Solve through an external sdpa executable named by PURITYOPT_SDPA_BIN.

    Kept behind an environment variable: nothing in the package requires
    the binary, this is an escape hatch for double-checking solves.
    """
    binary = os.environ.get("PURITYOPT_SDPA_BIN")
    if not binary:
        raise ParameterError(
            "set PURITYOPT_SDPA_BIN to the sdpa executable to use this backend")
    with tempfile.TemporaryDirectory() as tmp:
        dat = os.path.join(tmp, "problem.dat-s")
        out = os.path.join(tmp, "problem.out")
        write_sdpa(prob, dat)
        res = subprocess.run([binary, "-ds", dat, "-o", out],
                             capture_output=True, text=True, timeout=3600)
        if res.returncode != 0:
            return SdpSolution(status="numerical_failure", x=None,
                               objective_value=None, dual_objective=None,
                               max_violation=None, solver_name="sdpa",
                               iterations=0,
                               solver_status=f"exit {res.returncode}")
        phase, obj_p, obj_d, xvec = _parse_sdpa_output(out)
    x = np.asarray(xvec) if xvec is not None else None
    mapped = "optimal" if phase == "pdOPT" else (
        "infeasible" if phase in ("pINF_dFEAS", "pdINF") else "numerical_failure")
    obj = obj_p + prob.objective_offset if obj_p is not None else None
    dual = obj_d + prob.objective_offset if obj_d is not None else None
    return _finish(prob, mapped, x, obj, dual, "sdpa", 0, phase or "unknown", tol)


def _parse_sdpa_output(path: str):
    phase = None
    obj_p = obj_d = None
    xvec = None
    with open(path) as fh:
        lines = fh.readlines()
    for t, line in enumerate(lines):
        if "phase.value" in line:
            phase = line.split("=")[-1].strip()
        elif "objValPrimal" in line:
            obj_p = float(line.split("=")[-1])
        elif "objValDual" in line:
            obj_d = float(line.split("=")[-1])
        elif line.strip() == "xVec =":
            vec_line = lines[t + 1].strip().strip("{}")
            if vec_line:
                xvec = [float(tok) for tok in vec_line.split(",")]
    return phase, obj_p, obj_d, xvec

"""Compilation of the worst-case purity constraint into affine PSD form.

The constraint "output purity >= 1 - eps for every pure codespace input"
is a nonnegativity requirement on a degree-4 homogeneous polynomial in the
real parameters of the input state. Writing that polynomial against a
degree-2 monomial basis turns nonnegativity into existence of a PSD Gram
matrix; the Gram freedom enters through a kernel basis, and a Schur
complement against fixed shifted blocks makes the whole thing affine in the
encoder variables. For a 2-dimensional codespace (real or complex inputs)
the compiled constraint is exact; for larger codespaces it is a sufficient
condition, so feasibility only certifies a lower bound on the purity.

Decision variables are always ordered: real parts of the encoder transfer
matrix (row-major), then imaginary parts, then eps, then the kernel
multipliers tau.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .channels import SuperopMatrix, hermitian_real_embed
from .errors import DimensionError, ParameterError, PreconditionError, ValidationError

__all__ = [
    "MODES",
    "DecisionLayout",
    "LinearMatrixExpr",
    "SosContext",
    "build_P",
    "choose_k",
    "monomial_map",
    "gram_kernel_basis",
    "make_sos_context",
    "build_purity_lmi",
    "assemble_problem",
]

MODES = ("real_qubit", "complex_qubit", "general_r")

_SQRT2 = math.sqrt(2.0)


@dataclass
class DecisionLayout:
    """Dense, stable indexing of the scalar decision variables."""

    n: int
    r: int
    num_tau: int

    @property
    def num_e(self) -> int:
        """Complex entries of the encoder transfer matrix."""
        return self.n ** 2 * self.r ** 2

    @property
    def num_vars(self) -> int:
        return 2 * self.num_e + 1 + self.num_tau

    def re_index(self, a: int, b: int) -> int:
        return a * self.r ** 2 + b

    def im_index(self, a: int, b: int) -> int:
        return self.num_e + a * self.r ** 2 + b

    @property
    def eps_index(self) -> int:
        return 2 * self.num_e

    def tau_index(self, j: int) -> int:
        if not 0 <= j < self.num_tau:
            raise DimensionError(f"tau index {j} out of range ({self.num_tau})")
        return 2 * self.num_e + 1 + j

    def var_name(self, idx: int) -> str:
        ne, rr = self.num_e, self.r ** 2
        if idx < ne:
            return f"ReE[{idx // rr},{idx % rr}]"
        if idx < 2 * ne:
            k = idx - ne
            return f"ImE[{k // rr},{k % rr}]"
        if idx == 2 * ne:
            return "eps"
        return f"tau[{idx - 2 * ne - 1}]"


@dataclass
class LinearMatrixExpr:
    """A symmetric matrix depending affinely on scalar variables:
    const + sum_v x[v] * coeffs[v]."""

    dim: int
    const: np.ndarray
    coeffs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.const.shape != (self.dim, self.dim):
            raise DimensionError("constant block has the wrong shape")
        if np.abs(self.const - self.const.T).max() > 1e-12:
            raise ValidationError("constant block is not symmetric within 1e-12")
        for v, mat in self.coeffs.items():
            m = sp.csr_matrix(mat)
            if m.shape != (self.dim, self.dim):
                raise DimensionError(f"coefficient block for var {v} has wrong shape")
            asym = abs(m - m.T)
            if asym.nnz and asym.max() > 1e-12:
                raise ValidationError(
                    f"coefficient block for var {v} is not symmetric within 1e-12"
                )
            self.coeffs[v] = m

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        out = self.const.copy()
        for v, mat in self.coeffs.items():
            xv = x[v]
            if xv != 0.0:
                out += xv * mat.toarray()
        return out


def build_P(a) -> np.ndarray:
    """Real PSD matrix whose quadratic form on the stacked [Re; Im] of a
    vector u equals the squared norm of (channel transfer matrix) @ u."""
    mat = a.matrix if isinstance(a, SuperopMatrix) else np.asarray(a, dtype=complex)
    gram = mat.conj().T @ mat
    return hermitian_real_embed(gram, atol=1e-9)


def choose_k(p: np.ndarray) -> float:
    """Shift making k*I - P strictly positive definite with a 5% margin.

    Returns 1.0 for the zero matrix, otherwise max(2, 1.05 * lambda_max).
    """
    lam = float(np.linalg.eigvalsh(p).max())
    if lam <= 1e-12:
        return 1.0
    return max(2.0, 1.05 * lam)


def _degree_two_pairs(v: int):
    """Index pairs (i <= j) of the degree-2 monomials, graded-lex order."""
    return [(i, j) for i in range(v) for j in range(i, v)]


def _monomial_scales(pairs) -> np.ndarray:
    return np.array([1.0 if i == j else _SQRT2 for i, j in pairs])


def evaluate_monomials(v: int, x: np.ndarray) -> np.ndarray:
    """The scaled degree-2 monomial vector z(x); satisfies <z|z> = |x|^4."""
    pairs = _degree_two_pairs(v)
    scales = _monomial_scales(pairs)
    return np.array([s * x[i] * x[j] for (i, j), s in zip(pairs, scales)])


def monomial_map(r: int, mode: str):
    """Constant maps tying the monomial vector to the doubled-up state.

    Returns (W, M, v): v real parameters describe a pure codespace state,
    M maps the scaled degree-2 monomial vector z(x) (length v(v+1)/2) to a
    reduced vector, and the isometry W maps that to phi (x) phi* (plain
    phi (x) phi for real inputs). The identity phi (x) phi* = W M z(x)
    holds exactly.
    """
    if mode == "real_qubit":
        if r != 2:
            raise ParameterError("real_qubit mode requires r = 2")
        w = np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1 / _SQRT2, 0.0],
            [0.0, 1 / _SQRT2, 0.0],
            [0.0, 0.0, 1.0],
        ], dtype=complex)
        return w, np.eye(3), 2
    if mode == "complex_qubit":
        if r != 2:
            raise ParameterError("complex_qubit mode requires r = 2")
        w = np.array([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1 / _SQRT2, 1j / _SQRT2, 0.0],
            [0.0, 1 / _SQRT2, -1j / _SQRT2, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ], dtype=complex)
        # reduced vector [x1^2 + x2^2, sqrt2 x1 x3, sqrt2 x2 x3, x3^2]
        # against z over (x1, x2, x3)
        m = np.zeros((4, 6))
        pairs = _degree_two_pairs(3)
        pos = {p: i for i, p in enumerate(pairs)}
        m[0, pos[(0, 0)]] = 1.0
        m[0, pos[(1, 1)]] = 1.0
        m[1, pos[(0, 2)]] = 1.0
        m[2, pos[(1, 2)]] = 1.0
        m[3, pos[(2, 2)]] = 1.0
        return w, m, 3
    if mode == "general_r":
        if r < 2:
            raise ParameterError("general_r mode requires r >= 2")
        return _general_monomial_map(r)
    raise ParameterError(f"unknown mode {mode!r}; known: {MODES}")


def _general_monomial_map(r: int):
    """Hermitian-coordinate parameterization for any codespace dimension.

    State: phi_j = x_j + i x_{r+j} for j < r-1, phi_{r-1} = x_{r-1} (real),
    so v = 2r - 1. The reduced vector lists the diagonal of phi phi^dag,
    then sqrt2*Re and sqrt2*Im of each off-diagonal entry (row-major pairs).
    """
    v = 2 * r - 1
    pairs = _degree_two_pairs(v)
    pos = {p: i for i, p in enumerate(pairs)}
    d = len(pairs)

    def imag_var(j):
        # imaginary partner of amplitude j; the last amplitude has none
        return r + j if j < r - 1 else None

    cols = []
    rows_m = []

    def unit(i, j):
        e = np.zeros(r * r, dtype=complex)
        e[i * r + j] = 1.0
        return e

    for j in range(r):
        cols.append(unit(j, j))
        row = np.zeros(d)
        row[pos[(j, j)]] = 1.0
        ij = imag_var(j)
        if ij is not None:
            row[pos[(ij, ij)]] = 1.0
        rows_m.append(row)
    for i in range(r):
        for j in range(i + 1, r):
            cols.append((unit(i, j) + unit(j, i)) / _SQRT2)
            cols.append(1j * (unit(i, j) - unit(j, i)) / _SQRT2)
            ii, jj = imag_var(i), imag_var(j)
            re_row = np.zeros(d)
            im_row = np.zeros(d)
            # sqrt2 Re(phi_i conj(phi_j)) and sqrt2 Im(phi_i conj(phi_j))
            # expanded over the sqrt2-scaled cross monomials of z(x).
            re_row[pos[(i, j)]] = 1.0
            if ii is not None and jj is not None:
                re_row[pos[(ii, jj)]] = 1.0
                im_row[pos[(min(j, ii), max(j, ii))]] = 1.0
                im_row[pos[(min(i, jj), max(i, jj))]] = -1.0
            elif ii is not None:  # phi_j real
                im_row[pos[(min(j, ii), max(j, ii))]] = 1.0
            rows_m.append(re_row)
            rows_m.append(im_row)

    w = np.column_stack(cols)
    m = np.vstack(rows_m)
    return w, m, v


def gram_kernel_basis(v: int):
    """Basis of symmetric matrices K with z(x)^T K z(x) identically zero.

    Built combinatorially: monomial products z_a z_b sharing one degree-4
    exponent vector are interchangeable placements of the same coefficient,
    and each basis element trades the bucket's first placement against one
    other. Dimension is d(d+1)/2 - C(v+3, 4) with d = v(v+1)/2.
    """
    if v < 2:
        raise ParameterError(f"need at least 2 variables, got {v}")
    pairs = _degree_two_pairs(v)
    scales = _monomial_scales(pairs)
    d = len(pairs)

    buckets: dict = {}
    for a in range(d):
        for b in range(a, d):
            mu = [0] * v
            for idx in pairs[a] + pairs[b]:
                mu[idx] += 1
            buckets.setdefault(tuple(mu), []).append((a, b))

    basis = []
    for mu in sorted(buckets):
        slots = buckets[mu]
        if len(slots) < 2:
            continue
        a0, b0 = slots[0]
        w0 = (2.0 if a0 != b0 else 1.0) * scales[a0] * scales[b0]
        for a1, b1 in slots[1:]:
            w1 = (2.0 if a1 != b1 else 1.0) * scales[a1] * scales[b1]
            k = np.zeros((d, d))
            k[a0, b0] = k[b0, a0] = 1.0 / w0
            k[a1, b1] = k[b1, a1] = -1.0 / w1
            k /= np.abs(k).max()
            basis.append(k)
    return basis


def _qubit_weight_shift_pairs():
    """Factor pairs that move the doubly-placed quartic coefficient between
    its two Gram slots for two real parameters; with these in play a single
    kernel multiplier suffices and the corner block stays isotropic."""
    s1 = np.zeros((3, 3))
    s1[0, 1] = 1 / _SQRT2
    s2 = np.zeros((3, 3))
    s2[2, 1] = 1 / _SQRT2
    s3 = np.diag([1.0, 0.0, 0.0])
    s4 = np.diag([0.0, 0.0, 1.0])
    return [(s1, s2, 1.0), (s3, s4, -1.0)]


@dataclass
class SosContext:
    """Everything fixed for one (channel, codespace, input model) triple."""

    n: int
    r: int
    mode: str
    P: np.ndarray
    k: float
    W: np.ndarray
    M: np.ndarray
    S_basis: list
    cross_pairs: list
    corner_scale: float


def make_sos_context(a: SuperopMatrix, r: int, mode: str,
                     k: float | None = None) -> SosContext:
    """Build the compilation context from the error channel's transfer matrix."""
    if a.dim_in != a.dim_out:
        raise DimensionError("error channel must map a space to itself")
    n = a.dim_in
    p = build_P(a)
    kk = choose_k(p) if k is None else float(k)
    _check_shift(p, kk)

    w, m, v = monomial_map(r, mode)
    if np.abs(w.conj().T @ w - np.eye(w.shape[1])).max() > 1e-12:
        raise ValidationError("monomial-to-state map is not an isometry")
    s_basis = gram_kernel_basis(v)
    pairs = _qubit_weight_shift_pairs() if mode == "real_qubit" else []
    c = _corner_scale(m, pairs)
    return SosContext(n=n, r=r, mode=mode, P=p, k=kk, W=w, M=m,
                      S_basis=s_basis, cross_pairs=pairs, corner_scale=c)


def _check_shift(p: np.ndarray, k: float):
    low = float(np.linalg.eigvalsh(p).max())
    if k - low < 1e-6 * k:
        raise PreconditionError(
            f"shift k = {k} leaves k*I - P with margin {k - low:.3e} "
            f"(needs > {1e-6 * k:.1e})"
        )


def _corner_scale(m: np.ndarray, pairs) -> float:
    """The constant c with sum of factor Grams = (c - 1) M^T M, from the
    isometry substitution; also checks the factor pairs are benign (their
    symmetrized cross products vanish)."""
    mtm = m.T @ m
    total = np.zeros_like(mtm)
    for ca, cb, _sign in pairs:
        fa, fb = m @ ca, m @ cb
        cross = fa.T @ fb + fb.T @ fa
        if np.abs(cross).max() > 1e-12:
            raise ValidationError("factor pair has non-vanishing symmetric cross term")
        total += fa.T @ fa + fb.T @ fb
    if not pairs:
        return 1.0
    scale = np.trace(total) / np.trace(mtm)
    if np.abs(total - scale * mtm).max() > 1e-12:
        raise ValidationError("factor pair Grams are not proportional to M^T M")
    return 1.0 + float(scale)


def _clip_tiny(mat: np.ndarray, rel: float = 1e-14) -> np.ndarray:
    """Zero out inversion round-off so structural zeros stay zero and the
    backend sees the true sparsity."""
    out = mat.copy()
    cut = rel * np.abs(out).max()
    out[np.abs(out) < cut] = 0.0
    return out


def _stacked_row_coeffs(f: np.ndarray, b: int):
    """Row contributions of one complex encoder entry column b through the
    complex factor f = W @ (M-composed map): returns per-variable-kind
    (top-row vector, bottom-row vector) for Re and Im variables."""
    fr, fi = f[b].real, f[b].imag
    return (fr, fi), (-fi, fr)


def build_purity_lmi(ctx: SosContext, layout: DecisionLayout) -> LinearMatrixExpr:
    """The block LMI enforcing worst-case purity >= 1 - eps.

    Layout: one shifted main block, one doubled block per factor pair, and
    the Gram corner. Fixed diagonal blocks are inverses; off-diagonal
    columns are affine in the encoder entries; the corner is affine in eps
    and the kernel multipliers.
    """
    n, r = ctx.n, ctx.r
    if layout.n != n or layout.r != r or layout.num_tau != len(ctx.S_basis):
        raise DimensionError("decision layout does not match the context")
    _check_shift(ctx.P, ctx.k)

    n2 = n * n
    m0 = 2 * n2
    d = ctx.M.shape[1]
    dim = m0 + len(ctx.cross_pairs) * 2 * m0 + d
    corner_off = dim - d

    const = np.zeros((dim, dim))
    eye = np.eye(m0)
    const[:m0, :m0] = _clip_tiny(np.linalg.inv(ctx.k * eye - ctx.P))
    off = m0
    for _ca, _cb, sign in ctx.cross_pairs:
        big = np.block([
            [ctx.k * eye, -sign * ctx.P],
            [-sign * ctx.P, ctx.k * eye],
        ])
        const[off: off + 2 * m0, off: off + 2 * m0] = _clip_tiny(np.linalg.inv(big))
        off += 2 * m0
    mtm = ctx.M.T @ ctx.M
    const[corner_off:, corner_off:] = (ctx.corner_scale * ctx.k - 1.0) * mtm

    coeffs: dict = {}

    def add_rows(var: int, row_indices, row_vectors):
        entries = coeffs.setdefault(var, ([], [], []))
        rows, cols, data = entries
        for ridx, vec in zip(row_indices, row_vectors):
            nz = np.nonzero(vec)[0]
            for c_ in nz:
                rows.extend((ridx, corner_off + c_))
                cols.extend((corner_off + c_, ridx))
                data.extend((vec[c_], vec[c_]))

    # One complex factor per block group: main uses W M, each pair member
    # uses W M C. Variable ReE[a,b] feeds Re of the factor row into the top
    # (real) half and Im into the bottom half; ImE[a,b] rotates them.
    factors = [(0, ctx.W @ ctx.M)]
    off = m0
    for ca, cb, _sign in ctx.cross_pairs:
        factors.append((off, ctx.W @ (ctx.M @ ca)))
        factors.append((off + m0, ctx.W @ (ctx.M @ cb)))
        off += 2 * m0
    for a in range(n2):
        for b in range(r * r):
            re_var = layout.re_index(a, b)
            im_var = layout.im_index(a, b)
            for block_off, f in factors:
                (re_top, re_bot), (im_top, im_bot) = _stacked_row_coeffs(f, b)
                add_rows(re_var, (block_off + a, block_off + n2 + a), (re_top, re_bot))
                add_rows(im_var, (block_off + a, block_off + n2 + a), (im_top, im_bot))

    sparse_coeffs = {
        v: sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
        for v, (rows, cols, data) in coeffs.items()
    }

    corner_block = sp.lil_matrix((dim, dim))
    corner_block[corner_off:, corner_off:] = mtm
    sparse_coeffs[layout.eps_index] = corner_block.tocsr()
    for j, s in enumerate(ctx.S_basis):
        blk = sp.lil_matrix((dim, dim))
        blk[corner_off:, corner_off:] = s
        sparse_coeffs[layout.tau_index(j)] = blk.tocsr()

    return LinearMatrixExpr(dim=dim, const=const, coeffs=sparse_coeffs)


def _choi_psd_expr(layout: DecisionLayout) -> LinearMatrixExpr:
    """Real embedding of the encoder's Choi matrix as an affine PSD block."""
    n, r = layout.n, layout.r
    nr = n * r
    dim = 2 * nr
    coeffs: dict = {}
    for i in range(n):
        for j in range(n):
            a = i * n + j
            for k in range(r):
                for ell in range(r):
                    b = k * r + ell
                    p_, q_ = i * r + k, j * r + ell
                    re_var = layout.re_index(a, b)
                    im_var = layout.im_index(a, b)
                    re_entries = coeffs.setdefault(re_var, ([], [], []))
                    im_entries = coeffs.setdefault(im_var, ([], [], []))
                    if p_ == q_:
                        rows, cols, data = re_entries
                        rows.extend((p_, nr + p_))
                        cols.extend((p_, nr + p_))
                        data.extend((1.0, 1.0))
                        continue
                    rows, cols, data = re_entries
                    rows.extend((p_, q_, nr + p_, nr + q_))
                    cols.extend((q_, p_, nr + q_, nr + p_))
                    data.extend((0.5, 0.5, 0.5, 0.5))
                    rows, cols, data = im_entries
                    rows.extend((p_, nr + q_, nr + p_, q_))
                    cols.extend((nr + q_, p_, q_, nr + p_))
                    data.extend((-0.5, -0.5, 0.5, 0.5))
    sparse_coeffs = {
        v: sp.coo_matrix((data, (rows, cols)), shape=(dim, dim)).tocsr()
        for v, (rows, cols, data) in coeffs.items()
    }
    return LinearMatrixExpr(dim=dim, const=np.zeros((dim, dim)), coeffs=sparse_coeffs)


def _equality_rows(layout: DecisionLayout):
    """Trace preservation and Hermiticity of the encoder's Choi matrix,
    as sparse real equality rows over the layout."""
    n, r = layout.n, layout.r
    rows = []
    rhs = []
    cols_of = []

    def emit(entries, b_val):
        cols_of.append(entries)
        rhs.append(b_val)

    for k in range(r):
        for ell in range(r):
            b = k * r + ell
            emit([(layout.re_index(i * n + i, b), 1.0) for i in range(n)],
                 1.0 if k == ell else 0.0)
            emit([(layout.im_index(i * n + i, b), 1.0) for i in range(n)], 0.0)

    seen = set()
    for i in range(n):
        for j in range(n):
            for k in range(r):
                for ell in range(r):
                    p_, q_ = i * r + k, j * r + ell
                    if (q_, p_) in seen or (p_, q_) in seen:
                        continue
                    seen.add((p_, q_))
                    a, b = i * n + j, k * r + ell
                    a2, b2 = j * n + i, ell * r + k
                    if p_ == q_:
                        emit([(layout.im_index(a, b), 1.0)], 0.0)
                    else:
                        emit([(layout.re_index(a, b), 1.0),
                              (layout.re_index(a2, b2), -1.0)], 0.0)
                        emit([(layout.im_index(a, b), 1.0),
                              (layout.im_index(a2, b2), 1.0)], 0.0)

    data, ri, ci = [], [], []
    for row_idx, entries in enumerate(cols_of):
        for col, val in entries:
            ri.append(row_idx)
            ci.append(col)
            data.append(val)
    a_eq = sp.coo_matrix((data, (ri, ci)),
                         shape=(len(cols_of), layout.num_vars)).tocsr()
    return a_eq, np.array(rhs)


def assemble_problem(ctx: SosContext, layout: DecisionLayout,
                     objective: np.ndarray):
    """Bundle the purity LMI, the Choi PSD block, trace preservation and
    Hermiticity equalities, and the box on eps into one conic problem."""
    from .sdp import SdpProblem

    objective = np.asarray(objective, dtype=float)
    if objective.shape != (layout.num_vars,):
        raise DimensionError(
            f"objective has shape {objective.shape}, layout wants "
            f"({layout.num_vars},)"
        )
    lmi = build_purity_lmi(ctx, layout)
    choi = _choi_psd_expr(layout)
    a_eq, b_eq = _equality_rows(layout)
    return SdpProblem(
        num_vars=layout.num_vars,
        objective=objective,
        psd_constraints=[lmi, choi],
        eq_matrix=a_eq,
        eq_rhs=b_eq,
        box=[(layout.eps_index, 0.0, 1.0)],
    )

"""Kraus channels, their matrix representations, and purity helpers.

Conventions used throughout the package:

* States are vectorized row-major: ``|rho>> = rho.reshape(-1)``. This is the
  same vector as ``(rho (x) I)|I>>`` where ``|I>> = sum_j |j> (x) |j>*`` in the
  computational basis, so for a pure state ``|a><a|`` the vectorization is
  ``|a> (x) |a>*``.
* A channel with Kraus operators ``{A_i}`` (each ``m x n``) has the transfer
  matrix ``X2 = sum_i A_i (x) conj(A_i)`` of size ``m^2 x n^2`` acting on
  vectorized states.
* Composite indices pack row-major: pair ``(a, b)`` with ``b`` running over a
  space of dimension ``d2`` maps to ``a*d2 + b``. The Choi matrix ``X1`` is
  indexed by (output, input) pairs and is obtained from ``X2`` by the pure
  index permutation ``X1[(i,k),(j,l)] = X2[(i,j),(k,l)]``, never by matrix
  multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    InconsistencyError,
    MalformedChoiError,
    NotRankOneError,
    ValidationError,
)

__all__ = [
    "KrausChannel",
    "SuperopMatrix",
    "ChoiMatrix",
    "PurePreservingReport",
    "identity_vector",
    "vectorize_state",
    "unvectorize_state",
    "purity",
    "validate_density_matrix",
    "apply_channel",
    "kraus_to_superop",
    "superop_compose",
    "rearrange",
    "rearrange_inv",
    "is_pure_preserving",
    "extract_kraus_rank_one",
    "compute_omega",
    "hermitian_real_embed",
    "eigh_descending",
]


def _as_complex(a) -> np.ndarray:
    return np.asarray(a, dtype=complex)


def eigh_descending(h: np.ndarray):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending."""
    vals, vecs = np.linalg.eigh(h)
    return vals[::-1], vecs[:, ::-1]


def identity_vector(dim: int) -> np.ndarray:
    """Vectorized identity ``|I>> = sum_j |j> (x) |j>*`` in the computational
    basis; its squared norm is ``dim``."""
    if dim < 1:
        raise DimensionError(f"dimension must be >= 1, got {dim}")
    v = np.zeros(dim * dim, dtype=complex)
    v[:: dim + 1] = 1.0
    return v


def vectorize_state(rho: np.ndarray) -> np.ndarray:
    """Row-major vectorization of a density matrix."""
    rho = _as_complex(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1)


def unvectorize_state(vec: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vectorize_state`."""
    vec = _as_complex(vec).reshape(-1)
    d = round(len(vec) ** 0.5)
    if d * d != len(vec):
        raise DimensionError(f"length {len(vec)} is not a perfect square")
    return vec.reshape(d, d)


def purity(rho: np.ndarray) -> float:
    """Tr(rho^2) of a density matrix."""
    rho = _as_complex(rho)
    value = float(np.trace(rho @ rho).real)
    if __debug__:
        # Same number through the vectorized inner product <<rho|rho>>.
        vec = rho.reshape(-1)
        assert abs(float(np.vdot(vec, vec).real) - value) <= 1e-12 * (1.0 + abs(value))
    return value


def validate_density_matrix(rho: np.ndarray, *, herm_tol: float = 1e-12,
                            trace_tol: float = 1e-12, eig_tol: float = 1e-10) -> np.ndarray:
    """Check Hermiticity, unit trace, and positivity; returns the input."""
    rho = _as_complex(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {rho.shape}")
    if np.abs(rho - rho.conj().T).max() > herm_tol:
        raise ValidationError("state is not Hermitian within tolerance")
    if abs(np.trace(rho).real - 1.0) > trace_tol or abs(np.trace(rho).imag) > trace_tol:
        raise ValidationError("state trace differs from 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise ValidationError("state has a negative eigenvalue beyond tolerance")
    return rho


@dataclass
class KrausChannel:
    """A trace-preserving channel given by Kraus operators, each m x n.

    ``sum_i A_i^dag A_i = I_n`` is enforced within ``atol`` at construction.
    """

    kraus: tuple
    dim_in: int = field(init=False)
    dim_out: int = field(init=False)
    atol: float = 1e-10

    def __post_init__(self):
        ops = tuple(_as_complex(a) for a in self.kraus)
        if not ops:
            raise DimensionError("a channel needs at least one Kraus operator")
        m, n = ops[0].shape
        for a in ops:
            if a.shape != (m, n):
                raise DimensionError("Kraus operators have inconsistent shapes")
        gram = sum(a.conj().T @ a for a in ops)
        defect = np.abs(gram - np.eye(n)).max()
        if defect > self.atol:
            raise ValidationError(
                f"Kraus set is not trace preserving: max |sum A^dag A - I| = {defect:.3e}"
            )
        for a in ops:
            a.setflags(write=False)
        self.kraus = ops
        self.dim_in = n
        self.dim_out = m


@dataclass
class SuperopMatrix:
    """Transfer-matrix representation of a channel, size m^2 x n^2.

    Construction checks the trace-preservation row condition
    ``<<I_m| X = <<I_n|`` and that the rearranged matrix has no eigenvalue
    below ``-atol`` (complete positivity up to tolerance).
    """

    dim_in: int
    dim_out: int
    matrix: np.ndarray
    atol: float = 1e-10

    def __post_init__(self):
        x = _as_complex(self.matrix)
        n, m = self.dim_in, self.dim_out
        if x.shape != (m * m, n * n):
            raise DimensionError(
                f"expected shape {(m * m, n * n)} for dims ({n} -> {m}), got {x.shape}"
            )
        row = identity_vector(m).conj() @ x
        if np.abs(row - identity_vector(n).conj()).max() > self.atol:
            raise ValidationError("transfer matrix is not trace preserving")
        choi = _choi_permute(x, n, m)
        low = np.linalg.eigvalsh(0.5 * (choi + choi.conj().T)).min()
        if low < -self.atol:
            raise ValidationError(
                f"rearranged matrix has eigenvalue {low:.3e}; not completely positive"
            )
        x.setflags(write=False)
        self.matrix = x


@dataclass
class ChoiMatrix:
    """Choi matrix of a channel, size mn x mn, rows indexed by
    (output, input) pairs packed row-major."""

    dim_in: int
    dim_out: int
    matrix: np.ndarray
    atol: float = 1e-10

    def __post_init__(self):
        x = _as_complex(self.matrix)
        n, m = self.dim_in, self.dim_out
        if x.shape != (m * n, m * n):
            raise DimensionError(
                f"expected shape {(m * n, m * n)} for dims ({n} -> {m}), got {x.shape}"
            )
        if np.abs(x - x.conj().T).max() > self.atol:
            raise ValidationError("Choi matrix is not Hermitian within tolerance")
        if np.linalg.eigvalsh(0.5 * (x + x.conj().T)).min() < -self.atol:
            raise ValidationError("Choi matrix has a negative eigenvalue beyond tolerance")
        # Partial trace over the output factor must give I_n.
        pt = x.reshape(m, n, m, n).trace(axis1=0, axis2=2)
        if np.abs(pt - np.eye(n)).max() > self.atol:
            raise ValidationError("partial trace over the output factor is not identity")
        x.setflags(write=False)
        self.matrix = x


def apply_channel(ch: KrausChannel, rho: np.ndarray) -> np.ndarray:
    """Apply the Kraus sum ``sum_i A_i rho A_i^dag``."""
    rho = _as_complex(rho)
    if rho.shape != (ch.dim_in, ch.dim_in):
        raise DimensionError(
            f"state has shape {rho.shape}, channel expects ({ch.dim_in}, {ch.dim_in})"
        )
    out = np.zeros((ch.dim_out, ch.dim_out), dtype=complex)
    for a in ch.kraus:
        out += a @ rho @ a.conj().T
    return out


def kraus_to_superop(ch: KrausChannel) -> SuperopMatrix:
    """Transfer matrix ``X2 = sum_i A_i (x) conj(A_i)``."""
    m, n = ch.dim_out, ch.dim_in
    x = np.zeros((m * m, n * n), dtype=complex)
    for a in ch.kraus:
        x += np.kron(a, a.conj())
    return SuperopMatrix(dim_in=n, dim_out=m, matrix=x, atol=ch.atol)


def superop_compose(after: SuperopMatrix, before: SuperopMatrix) -> SuperopMatrix:
    """Transfer matrix of the cascade: ``after`` applied to the output of
    ``before``."""
    if after.dim_in != before.dim_out:
        raise DimensionError(
            f"cannot compose: inner dims {after.dim_in} != {before.dim_out}"
        )
    return SuperopMatrix(
        dim_in=before.dim_in,
        dim_out=after.dim_out,
        matrix=after.matrix @ before.matrix,
        atol=max(after.atol, before.atol),
    )


def _choi_permute(x2: np.ndarray, n: int, m: int) -> np.ndarray:
    """Index permutation from transfer to Choi ordering (raw arrays)."""
    t = x2.reshape(m, m, n, n)
    return t.transpose(0, 2, 1, 3).reshape(m * n, m * n)


def _choi_permute_inv(x1: np.ndarray, n: int, m: int) -> np.ndarray:
    t = x1.reshape(m, n, m, n)
    return t.transpose(0, 2, 1, 3).reshape(m * m, n * n)


def rearrange(x2: SuperopMatrix) -> ChoiMatrix:
    """Choi matrix from the transfer matrix by index permutation."""
    return ChoiMatrix(
        dim_in=x2.dim_in,
        dim_out=x2.dim_out,
        matrix=_choi_permute(x2.matrix, x2.dim_in, x2.dim_out),
        atol=x2.atol,
    )


def rearrange_inv(x1: ChoiMatrix) -> SuperopMatrix:
    """Transfer matrix from the Choi matrix; exact inverse of
    :func:`rearrange`."""
    return SuperopMatrix(
        dim_in=x1.dim_in,
        dim_out=x1.dim_out,
        matrix=_choi_permute_inv(x1.matrix, x1.dim_in, x1.dim_out),
        atol=x1.atol,
    )


def _rank_from_eigenvalues(vals_desc: np.ndarray, ratio_tol: float) -> int:
    """Numerical rank: count of eigenvalues above ratio_tol * lambda_max."""
    lam = float(vals_desc[0])
    return int(np.sum(vals_desc > ratio_tol * lam))


@dataclass
class PurePreservingReport:
    """Outcome of the two equivalent pure-preservation tests, with the
    witnesses used to decide each one."""

    pure_preserving: bool
    unitary_defect: float
    choi_rank: int
    choi_eigenvalues: np.ndarray


def is_pure_preserving(x2: SuperopMatrix, tol: float = 1e-8,
                       rank_ratio_tol: float = 1e-3) -> PurePreservingReport:
    """Decide whether a channel maps every pure state to a pure state.

    Runs two independent tests and insists they agree: (a) the transfer
    matrix is an isometry, ``X^dag X = I`` within ``tol``; (b) the Choi
    matrix has numerical rank one under ``rank_ratio_tol``. Disagreement
    raises :class:`InconsistencyError`, which usually means the tolerances
    straddle a borderline input.
    """
    x = x2.matrix
    defect = float(np.abs(x.conj().T @ x - np.eye(x.shape[1])).max())
    isometry_ok = defect <= tol

    choi = _choi_permute(x, x2.dim_in, x2.dim_out)
    vals, _ = eigh_descending(0.5 * (choi + choi.conj().T))
    rank = _rank_from_eigenvalues(vals, rank_ratio_tol)
    rank_ok = rank == 1

    if isometry_ok != rank_ok:
        raise InconsistencyError(
            "pure-preservation tests disagree: "
            f"isometry defect {defect:.3e} (tol {tol:.1e}) vs Choi rank {rank} "
            f"(eigenvalues {np.array2string(vals[:4], precision=3)})"
        )
    return PurePreservingReport(
        pure_preserving=isometry_ok,
        unitary_defect=defect,
        choi_rank=rank,
        choi_eigenvalues=vals,
    )


def extract_kraus_rank_one(x1, dim_in: int | None = None,
                           rank_ratio_tol: float = 1e-3) -> np.ndarray:
    """Recover the single Kraus operator from a rank-one Choi matrix.

    Accepts a :class:`ChoiMatrix` or a raw mn x mn array (then ``dim_in``
    is required). The leading eigenvalue must equal ``dim_in`` within
    ``1e-6 * dim_in``; the eigenvector, scaled by sqrt(lambda), de-vectorizes
    to the operator. Global phase is fixed so the largest-magnitude entry is
    real positive, ties broken by lowest linear index.
    """
    if isinstance(x1, ChoiMatrix):
        mat = x1.matrix
        n = x1.dim_in if dim_in is None else dim_in
        if n != x1.dim_in:
            raise DimensionError(f"dim_in {n} contradicts Choi metadata {x1.dim_in}")
    else:
        if dim_in is None:
            raise DimensionError("dim_in is required for a raw Choi array")
        mat = _as_complex(x1)
        n = dim_in
    size = mat.shape[0]
    if mat.shape != (size, size) or size % n != 0:
        raise DimensionError(f"Choi shape {mat.shape} incompatible with dim_in {n}")
    m = size // n

    vals, vecs = eigh_descending(0.5 * (mat + mat.conj().T))
    rank = _rank_from_eigenvalues(vals, rank_ratio_tol)
    if rank != 1:
        raise NotRankOneError(
            f"Choi matrix has numerical rank {rank}; leading eigenvalues "
            f"{np.array2string(vals[: rank + 1], precision=6)}"
        )
    lam = float(vals[0])
    if abs(lam - n) > 1e-6 * n:
        raise MalformedChoiError(
            f"leading eigenvalue {lam!r} differs from dim_in {n} beyond 1e-6*dim_in"
        )
    vec = vecs[:, 0] * np.sqrt(lam)
    pivot = int(np.argmax(np.abs(vec)))
    phase = vec[pivot] / abs(vec[pivot])
    op = (vec / phase).reshape(m, n)
    defect = np.abs(op.conj().T @ op - np.eye(n)).max()
    if defect > 1e-8:
        raise MalformedChoiError(
            f"extracted operator is not an isometry: defect {defect:.3e}"
        )
    return op


def compute_omega(ch: KrausChannel) -> np.ndarray:
    """Hermitian form whose expectation on ``|phi> (x) |phi>`` is the output
    purity of ``|phi><phi|``: ``sum_ij (A_j^dag A_i) (x) (A_i^dag A_j)``."""
    n = ch.dim_in
    omega = np.zeros((n * n, n * n), dtype=complex)
    for ai in ch.kraus:
        for aj in ch.kraus:
            left = aj.conj().T @ ai
            omega += np.kron(left, left.conj().T)
    return omega


def hermitian_real_embed(h: np.ndarray, atol: float = 1e-10) -> np.ndarray:
    """Real symmetric embedding [[Re h, -Im h], [Im h, Re h]] of a Hermitian
    matrix. The output is PSD exactly when the input is, with every
    eigenvalue doubled in multiplicity."""
    h = _as_complex(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {h.shape}")
    if np.abs(h - h.conj().T).max() > atol:
        raise ValidationError("input is not Hermitian within tolerance")
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])

"""Dense symmetric linear algebra under the slow-feature pipeline.

All routines operate on float64 numpy arrays.  Matrices passed to the
eigensolvers must be square, finite and symmetric; covariance
accumulation produces exactly symmetric output by construction.

The generalized solver follows the whitening route: eigendecompose the
constraint matrix, drop near-null directions relative to its largest
eigenvalue, and solve an ordinary symmetric problem in the whitened
coordinates.  Eigenvalues always come back in ascending order, so the
slowest directions sit first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCovariance,
    EmptyTrainingSet,
    InvalidDimension,
    InvalidMatrix,
    NotPSD,
)

# Constraint-matrix directions below this fraction of the largest
# eigenvalue are treated as null space and discarded.
DEFAULT_REL_CUTOFF = 1e-8

# Allowed relative asymmetry / negativity before an input is rejected.
_SYMMETRY_RTOL = 1e-10
_PSD_RTOL = 1e-8
_PSD_ATOL = 1e-12


@dataclass(frozen=True)
class EigenResult:
    """Eigenvalues in ascending order with eigenvectors as matching columns.

    ``eigenvectors[:, j]`` belongs to ``eigenvalues[j]``.  For the
    generalized problem the columns are normalized against the
    constraint matrix rather than the identity.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


@dataclass(frozen=True)
class PcaModel:
    """Mean vector plus an orthonormal ``(out_dim, in_dim)`` projection.

    Rows of ``projection`` are the leading principal directions in
    decreasing order of explained variance.
    """

    mean: np.ndarray
    projection: np.ndarray
    explained_eigenvalues: np.ndarray

    @property
    def in_dim(self) -> int:
        return self.projection.shape[1]

    @property
    def out_dim(self) -> int:
        return self.projection.shape[0]

    def transform(self, x: np.ndarray) -> np.ndarray:
        """Center and project ``x`` (a vector or rows of vectors)."""
        return (np.asarray(x, dtype=float) - self.mean) @ self.projection.T


def _symmetrize(m: np.ndarray) -> np.ndarray:
    # (m + m.T) / 2 is exactly symmetric in IEEE arithmetic because
    # addition commutes entrywise.
    return (m + m.T) / 2.0


def _check_square_sym(m, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidMatrix(f"{name} must be square, got shape {m.shape}")
    if m.size == 0:
        raise InvalidMatrix(f"{name} is empty")
    if not np.all(np.isfinite(m)):
        raise InvalidMatrix(f"{name} has non-finite entries")
    scale = max(float(np.abs(m).max()), 1.0)
    if float(np.abs(m - m.T).max()) > _SYMMETRY_RTOL * scale:
        raise InvalidMatrix(f"{name} is not symmetric")
    return m


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive.

    Ties resolve to the lowest row index, which argmax already gives.
    """
    if vectors.shape[1] == 0:
        return vectors
    rows = np.abs(vectors).argmax(axis=0)
    picked = vectors[rows, np.arange(vectors.shape[1])]
    signs = np.where(picked < 0.0, -1.0, 1.0)
    return vectors * signs


def sym_eig(m) -> EigenResult:
    """Eigendecompose a symmetric matrix.

    Parameters
    ----------
    m : array_like
        Square symmetric matrix (relative asymmetry up to 1e-10 is
        tolerated and symmetrized away).

    Returns
    -------
    EigenResult
        Eigenvalues ascending, orthonormal eigenvector columns, each
        column's largest-magnitude entry positive.

    Raises
    ------
    InvalidMatrix
        If ``m`` is not square, finite and symmetric.
    """
    m = _symmetrize(_check_square_sym(m))
    values, vectors = np.linalg.eigh(m)
    return EigenResult(values, _fix_signs(vectors))


def gen_eig_sym(a, b, rel_cutoff: float = DEFAULT_REL_CUTOFF) -> EigenResult:
    """Solve the generalized symmetric problem ``a W = b W diag(lam)``.

    Works by whitening: eigendecompose ``b = U D U^T``, discard
    directions with ``d_i < rel_cutoff * max(d)``, form
    ``S = U_kept D_kept^{-1/2}``, solve ``sym_eig(S^T a S)`` and map the
    vectors back as ``W = S V``.  ``a`` may be indefinite; ``b`` must be
    positive semidefinite.

    Returns
    -------
    EigenResult
        Eigenvalues ascending.  Each returned column ``w`` satisfies
        ``w^T b w = 1``; the number of pairs equals the retained rank
        of ``b``.

    Raises
    ------
    InvalidMatrix
        Non-symmetric input or mismatched shapes.
    NotPSD
        ``b`` has an eigenvalue negative beyond tolerance.
    DegenerateCovariance
        No direction of ``b`` survives the cutoff.
    """
    a = _check_square_sym(a, "a")
    b = _check_square_sym(b, "b")
    if a.shape != b.shape:
        raise InvalidMatrix(f"shape mismatch: a is {a.shape}, b is {b.shape}")

    d, u = np.linalg.eigh(_symmetrize(b))
    d_max = float(d.max())
    if float(d.min()) < -(_PSD_RTOL * max(d_max, 0.0) + _PSD_ATOL):
        raise NotPSD(f"constraint matrix has eigenvalue {d.min():.3e}")
    if d_max <= 0.0:
        raise DegenerateCovariance("constraint matrix is numerically zero")

    kept = d >= rel_cutoff * d_max
    if not kept.any():
        raise DegenerateCovariance("no directions survive the rank cutoff")
    s = u[:, kept] / np.sqrt(d[kept])

    inner = sym_eig(_symmetrize(s.T @ a @ s))
    vectors = _fix_signs(s @ inner.eigenvectors)
    return EigenResult(inner.eigenvalues, vectors)


def pca_fit(data, out_dim: int) -> PcaModel:
    """Fit PCA on row-sample data.

    Parameters
    ----------
    data : array_like, shape (n_samples, in_dim)
        At least two samples.
    out_dim : int
        Number of leading principal directions to keep,
        ``1 <= out_dim <= in_dim``.

    Returns
    -------
    PcaModel
        ``projection`` rows are orthonormal, ordered by decreasing
        eigenvalue of the sample covariance (denominator ``n - 1``).
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise InvalidMatrix(f"data must be 2-D, got shape {data.shape}")
    n, in_dim = data.shape
    if n < 2:
        raise EmptyTrainingSet(f"pca_fit needs at least 2 samples, got {n}")
    if not np.all(np.isfinite(data)):
        raise InvalidMatrix("data has non-finite entries")
    if not 1 <= out_dim <= in_dim:
        raise InvalidDimension(
            f"out_dim must be in [1, {in_dim}], got {out_dim}")

    centered = data - data.mean(axis=0)
    cov = _symmetrize(centered.T @ centered / (n - 1))
    res = sym_eig(cov)
    # sym_eig sorts ascending; take the top out_dim, largest first.
    idx = np.arange(in_dim - 1, in_dim - 1 - out_dim, -1)
    return PcaModel(
        mean=data.mean(axis=0),
        projection=res.eigenvectors[:, idx].T.copy(),
        explained_eigenvalues=res.eigenvalues[idx].copy(),
    )


def _as_minisequences(minisequences) -> list[np.ndarray]:
    seqs = [np.asarray(s, dtype=float) for s in minisequences]
    if not seqs:
        raise EmptyTrainingSet("no minisequences given")
    dims = set()
    for s in seqs:
        if s.ndim != 2 or s.shape[0] < 1:
            raise InvalidMatrix(
                f"each minisequence must be (length, dim) with length >= 1, got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise InvalidMatrix("minisequence has non-finite entries")
        dims.add(s.shape[1])
    if len(dims) != 1:
        raise InvalidDimension(f"mixed minisequence dims: {sorted(dims)}")
    return seqs


def sequence_moments(minisequences):
    """Global mean plus second-moment matrices of a set of minisequences.

    Returns ``(mean, b, a, count_b, count_a)`` where ``mean`` is taken
    over all time points of all minisequences, ``b`` is the mean outer
    product of the centered vectors, and ``a`` is the mean outer product
    of within-minisequence forward differences (unit time step,
    differences never cross minisequence boundaries).  Both matrices are
    exactly symmetric.
    """
    seqs = _as_minisequences(minisequences)
    stacked = np.vstack(seqs)
    mean = stacked.mean(axis=0)
    z = stacked - mean
    count_b = stacked.shape[0]
    b = _symmetrize(z.T @ z / count_b)

    dim = stacked.shape[1]
    diffs = []
    offset = 0
    for s in seqs:
        n = s.shape[0]
        if n >= 2:
            zs = z[offset:offset + n]
            diffs.append(zs[1:] - zs[:-1])
        offset += n
    if diffs:
        dz = np.vstack(diffs)
        count_a = dz.shape[0]
        a = _symmetrize(dz.T @ dz / count_a)
    else:
        count_a = 0
        a = np.zeros((dim, dim))
    return mean, b, a, count_b, count_a


def accumulate_covariances(minisequences):
    """Two-pass covariance and derivative-covariance accumulation.

    Parameters
    ----------
    minisequences : sequence of array_like
        Each element is a ``(length, dim)`` array of row vectors; a
        length-1 minisequence contributes to the covariance only.

    Returns
    -------
    (b, a, count_b, count_a)
        ``b`` is the covariance of all vectors after centering by the
        global mean; ``a`` is the mean outer product of the
        within-minisequence forward differences.  ``count_b`` and
        ``count_a`` are the number of vectors and differences pooled.
    """
    _, b, a, count_b, count_a = sequence_moments(minisequences)
    return b, a, count_b, count_a

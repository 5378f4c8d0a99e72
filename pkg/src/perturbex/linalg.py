"""Dense symmetric positive definite operators with cached spectral form.

Everything downstream needs fractional powers of the same few matrices
(curvature ``F`` and metric ``D``): ``F^{-1}`` for Newton steps,
``F^{-1/2}`` and ``F^{1/2}`` for dual/primal curvature norms, ``D^{-1}``
for metric-normalized residuals.  A single eigendecomposition per operator,
computed at construction and reused for every power, is the cheapest safe
way to get all of them at the problem sizes this package targets
(dimension up to a few hundred).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import constants
from .errors import DimensionMismatch, NotPositiveDefinite, NotSymmetric

__all__ = [
    "SpdOperator",
    "spd_from_dense",
    "spd_power_operator",
    "apply_power",
    "weighted_norm",
    "kappa_between",
    "as_vector",
]


def as_vector(v, dim: int | None = None) -> np.ndarray:
    """Coerce ``v`` to a finite 1-d float array, optionally checking length."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatch(f"expected length {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class SpdOperator:
    """A symmetric positive definite matrix with its eigendecomposition.

    Attributes
    ----------
    matrix : ndarray
        The (symmetrized) dense matrix.
    eigenvalues : ndarray
        Eigenvalues in descending order, all strictly positive.
    eigenvectors : ndarray
        Orthonormal eigenvectors, column ``i`` paired with ``eigenvalues[i]``.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "dim", int(self.matrix.shape[0]))
        for arr in (self.matrix, self.eigenvalues, self.eigenvectors):
            arr.setflags(write=False)

    def apply(self, v) -> np.ndarray:
        """Matrix-vector product ``M v``."""
        return self.matrix @ as_vector(v, self.dim)

    def apply_power(self, t: float, v) -> np.ndarray:
        """Apply ``M^t v`` through the spectral factorization."""
        vec = as_vector(v, self.dim)
        coeffs = self.eigenvectors.T @ vec
        return self.eigenvectors @ (self.eigenvalues**t * coeffs)

    def power(self, t: float) -> np.ndarray:
        """Dense ``M^t`` as a symmetric matrix."""
        scaled = self.eigenvectors * self.eigenvalues**t
        out = scaled @ self.eigenvectors.T
        return 0.5 * (out + out.T)

    @property
    def condition_number(self) -> float:
        return float(self.eigenvalues[0] / self.eigenvalues[-1])

    def __repr__(self) -> str:  # keep reprs short in reports and tracebacks
        return f"SpdOperator(dim={self.dim}, cond={self.condition_number:.3g})"


def spd_from_dense(matrix) -> SpdOperator:
    """Validate a dense symmetric positive definite matrix and factor it.

    Parameters
    ----------
    matrix : array_like
        Square matrix.  Asymmetry beyond ``1e-12`` relative to the largest
        entry raises :class:`NotSymmetric`; an eigenvalue below
        ``1e-10 * lambda_max`` raises :class:`NotPositiveDefinite`.

    Returns
    -------
    SpdOperator
    """
    M = np.asarray(matrix, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    scale = np.abs(M).max()
    asym = np.abs(M - M.T).max()
    if asym > constants.SYMMETRY_RTOL * max(scale, 1e-300):
        raise NotSymmetric(
            f"asymmetry {asym:.3e} exceeds {constants.SYMMETRY_RTOL:.0e} * {scale:.3e}"
        )
    sym = 0.5 * (M + M.T)
    vals, vecs = np.linalg.eigh(sym)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    if vals[0] <= 0.0 or vals[-1] <= constants.SPD_EIG_FLOOR * vals[0]:
        raise NotPositiveDefinite(
            f"smallest eigenvalue {vals[-1]:.3e} below floor "
            f"{constants.SPD_EIG_FLOOR:.0e} * {vals[0]:.3e}"
        )
    recon = (vecs * vals) @ vecs.T
    err = np.linalg.norm(recon - sym)
    if err > constants.RECONSTRUCTION_RTOL * max(np.linalg.norm(sym), 1e-300):
        raise NotPositiveDefinite(f"eigenfactor round-trip error {err:.3e} too large")
    return SpdOperator(matrix=sym, eigenvalues=vals, eigenvectors=vecs)


def spd_power_operator(M: SpdOperator, t: float) -> SpdOperator:
    """Build ``M^t`` as a new :class:`SpdOperator`, reusing the eigenbasis."""
    vals = M.eigenvalues**t
    order = np.argsort(vals)[::-1]
    vals = vals[order].copy()
    vecs = M.eigenvectors[:, order].copy()
    dense = (vecs * vals) @ vecs.T
    return SpdOperator(matrix=0.5 * (dense + dense.T), eigenvalues=vals, eigenvectors=vecs)


def apply_power(M: SpdOperator, t: float, v) -> np.ndarray:
    """Free-function form of :meth:`SpdOperator.apply_power`."""
    return M.apply_power(t, v)


def weighted_norm(M: SpdOperator, v) -> float:
    """Euclidean norm of ``M v``."""
    return float(np.linalg.norm(M.apply(v)))


def _square_of(D) -> np.ndarray:
    if isinstance(D, SpdOperator):
        mat = D.matrix
    else:
        mat = np.asarray(D, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {mat.shape}")
    return mat @ mat


def kappa_between(D, F: SpdOperator) -> float:
    """Smallest ``kappa`` with ``D^2 <= kappa^2 F`` in the Loewner order.

    ``D`` may be an :class:`SpdOperator` or any symmetric positive
    semidefinite array (a zero metric gives ``kappa = 0``).  Computed as the
    square root of the largest eigenvalue of ``F^{-1/2} D^2 F^{-1/2}``.
    """
    D2 = _square_of(D)
    if D2.shape[0] != F.dim:
        raise DimensionMismatch(
            f"metric has dimension {D2.shape[0]}, curvature has {F.dim}"
        )
    Fmh = F.power(-0.5)
    S = Fmh @ D2 @ Fmh
    S = 0.5 * (S + S.T)
    top = float(np.linalg.eigvalsh(S)[-1])
    return float(np.sqrt(max(top, 0.0)))

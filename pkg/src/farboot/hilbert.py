"""Finite-basis model of a separable Hilbert space.

A curve is represented by its coefficient vector with respect to a fixed
orthonormal basis of dimension ``d``; a bounded linear operator by the dense
``d x d`` matrix acting on those coefficients.  The rank-one (Kronecker)
product of two curves ``y, z`` is the operator ``x -> <y, x> z``, stored as
the matrix ``outer(z, y)`` so that plain matrix-vector multiplication
realises the definition.  All downstream covariance formulas inherit their
orientation from this single convention.

Three norms are provided: the curve norm induced by the scalar product, the
operator (spectral) norm and the Hilbert-Schmidt (Frobenius) norm.  The
spectral norm never exceeds the Hilbert-Schmidt norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FuncVec",
    "HsOp",
    "inner",
    "norm",
    "kron",
    "adjoint",
    "op_norm",
    "hs_norm",
    "hs_inner",
    "identity",
    "basis_vector",
]


def _frozen_array(values, *, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-dimensional array, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("empty coefficient array")
    if not np.all(np.isfinite(arr)):
        raise ValueError("coefficients must be finite")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class FuncVec:
    """A curve as a coefficient vector in the fixed orthonormal basis."""

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "coeffs", _frozen_array(self.coeffs, ndim=1))

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def __add__(self, other: "FuncVec") -> "FuncVec":
        return FuncVec(self.coeffs + other.coeffs)

    def __sub__(self, other: "FuncVec") -> "FuncVec":
        return FuncVec(self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "FuncVec":
        return FuncVec(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "FuncVec":
        return FuncVec(-self.coeffs)

    def __repr__(self) -> str:
        return f"FuncVec(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class HsOp:
    """A linear operator as a square coefficient matrix in the same basis."""

    mat: np.ndarray

    def __post_init__(self) -> None:
        arr = _frozen_array(self.mat, ndim=2)
        if arr.shape[0] != arr.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {arr.shape}")
        object.__setattr__(self, "mat", arr)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    def __call__(self, x: FuncVec) -> FuncVec:
        if x.dim != self.dim:
            raise ValueError(f"dimension mismatch: operator {self.dim}, vector {x.dim}")
        return FuncVec(self.mat @ x.coeffs)

    def __matmul__(self, other: "HsOp") -> "HsOp":
        if other.dim != self.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
        return HsOp(self.mat @ other.mat)

    def __add__(self, other: "HsOp") -> "HsOp":
        return HsOp(self.mat + other.mat)

    def __sub__(self, other: "HsOp") -> "HsOp":
        return HsOp(self.mat - other.mat)

    def __mul__(self, scalar: float) -> "HsOp":
        return HsOp(self.mat * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "HsOp":
        return HsOp(-self.mat)

    def __repr__(self) -> str:
        return f"HsOp(dim={self.dim})"


def inner(x: FuncVec, y: FuncVec) -> float:
    """Scalar product of two curves.

    Raises ``ValueError`` on dimension mismatch.
    """
    if x.dim != y.dim:
        raise ValueError(f"dimension mismatch: {x.dim} vs {y.dim}")
    return float(x.coeffs @ y.coeffs)


def norm(x: FuncVec) -> float:
    """Curve norm induced by the scalar product."""
    return float(np.linalg.norm(x.coeffs))


def kron(y: FuncVec, z: FuncVec) -> HsOp:
    """Rank-one operator mapping ``x`` to ``<y, x> z``.

    Stored as ``outer(z, y)``: applying the matrix to ``x`` evaluates the
    scalar product with ``y`` and scales ``z``.
    """
    if y.dim != z.dim:
        raise ValueError(f"dimension mismatch: {y.dim} vs {z.dim}")
    return HsOp(np.outer(z.coeffs, y.coeffs))


def adjoint(a: HsOp) -> HsOp:
    """Adjoint operator, characterised by ``<A(y), z> = <y, adjoint(A)(z)>``.

    In a real orthonormal basis this is the matrix transpose.
    """
    return HsOp(a.mat.T)


def op_norm(a: HsOp) -> float:
    """Operator (spectral) norm: the largest singular value.

    Computed by full singular value decomposition; at the dimensions used
    here exactness is worth more than speed.
    """
    return float(np.linalg.norm(a.mat, 2))


def hs_norm(a: HsOp) -> float:
    """Hilbert-Schmidt norm: the Frobenius norm of the coefficient matrix."""
    return float(np.linalg.norm(a.mat, "fro"))


def hs_inner(a: HsOp, b: HsOp) -> float:
    """Hilbert-Schmidt scalar product (Frobenius inner product)."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(np.sum(a.mat * b.mat))


def identity(dim: int) -> HsOp:
    return HsOp(np.eye(dim))


def basis_vector(j: int, dim: int) -> FuncVec:
    """The ``j``-th orthonormal basis curve (0-based index)."""
    if not 0 <= j < dim:
        raise ValueError(f"basis index {j} out of range for dimension {dim}")
    e = np.zeros(dim)
    e[j] = 1.0
    return FuncVec(e)

"""Sparse symmetric third-order affinity tensors and implicit fourth-order lifting.

The third-order tensor is stored by canonical orbits: one strictly increasing
index triple stands for the six permuted copies of a symmetric entry.  A
:class:`LiftedOperator` evaluates contractions of the lifted fourth-order
tensor (four index-shifted copies of the third-order one, plus an optional
convexifying term scaled by ``alpha``) directly from the orbit list; the
fourth-order tensor itself is never materialized.
"""

from __future__ import annotations

import operator
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DENSE_MATRIX_LIMIT",
    "F4_EXACT_LIMIT",
    "ThresholdExceeded",
    "MatchingShape",
    "SparseSymmetricTensor3",
    "LiftedOperator",
    "g4_form",
    "alpha_bound",
    "f4_norm_exact",
]

# n above which n-by-n dense results are refused (~200 MB of float64).
DENSE_MATRIX_LIMIT = 5000
# n above which the O(n^4) exact lifted norm is refused.
F4_EXACT_LIMIT = 40


class ThresholdExceeded(ValueError):
    """The operation would materialize a larger object than allowed."""


@dataclass(frozen=True)
class MatchingShape:
    """Dimensions of a correspondence problem.

    ``n1`` template points (rows) are matched into ``n2`` scene points
    (columns), ``n1 <= n2``.  Candidate pairs are linearized row-major:
    the 0-based pair ``(i, j)`` maps to linear index ``i * n2 + j``.
    External documents use 1-based indices; everything in-process is 0-based.
    """

    n1: int
    n2: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "n1", operator.index(self.n1))
        object.__setattr__(self, "n2", operator.index(self.n2))
        if self.n1 < 1 or self.n2 < self.n1:
            raise ValueError(f"need 1 <= n1 <= n2, got n1={self.n1}, n2={self.n2}")

    @property
    def n(self) -> int:
        return self.n1 * self.n2

    def linear_index(self, i: int, j: int) -> int:
        if not (0 <= i < self.n1 and 0 <= j < self.n2):
            raise IndexError(f"pair ({i}, {j}) outside {self.n1}x{self.n2} grid")
        return i * self.n2 + j

    def pair(self, lin: int) -> tuple[int, int]:
        if not 0 <= lin < self.n:
            raise IndexError(f"linear index {lin} outside [0, {self.n})")
        return divmod(lin, self.n2)


def _as_vector(x, n: int, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (n,):
        raise ValueError(f"{name} must have length {n}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


class SparseSymmetricTensor3:
    """Nonnegative symmetric third-order tensor in canonical-orbit storage.

    Each stored orbit ``(i, j, k, v)`` with ``i < j < k`` represents the six
    permuted entries of value ``v``.  Triples are canonicalized at ingest
    (sorted ascending), triples with a repeated index are rejected, and
    duplicate triples are summed.  Instances are immutable and safe to share
    across threads; all contractions run in the fixed stored-orbit order, so
    repeated evaluations are bit-identical.
    """

    __slots__ = ("shape", "idx", "val")

    def __init__(self, shape: MatchingShape, triples=None, values=None):
        n = shape.n
        if triples is None and values is None:
            idx = np.empty((0, 3), dtype=np.intp)
            val = np.empty(0, dtype=np.float64)
        else:
            idx = np.asarray(triples, dtype=np.intp)
            val = np.asarray(values, dtype=np.float64)
            if idx.ndim != 2 or idx.shape[1] != 3:
                raise ValueError(f"triples must be (m, 3), got shape {idx.shape}")
            if val.shape != (idx.shape[0],):
                raise ValueError("values must match the number of triples")
            if not np.all(np.isfinite(val)):
                raise ValueError("affinity values must be finite")
            if val.size and float(val.min()) < 0.0:
                raise ValueError("affinity values must be nonnegative")
            if idx.size:
                if int(idx.min()) < 0 or int(idx.max()) >= n:
                    raise ValueError(f"triple index outside [0, {n})")
                idx = np.sort(idx, axis=1)
                if np.any(idx[:, 0] == idx[:, 1]) or np.any(idx[:, 1] == idx[:, 2]):
                    raise ValueError("triples with a repeated index are not allowed")
                idx, inverse = np.unique(idx, axis=0, return_inverse=True)
                val = np.bincount(
                    inverse.reshape(-1), weights=val, minlength=idx.shape[0]
                )
        idx.setflags(write=False)
        val.setflags(write=False)
        self.shape = shape
        self.idx = idx
        self.val = val

    @property
    def nnz(self) -> int:
        """Number of stored canonical orbits."""
        return int(self.val.size)

    def score(self, x) -> float:
        """Matching score: the full symmetric tensor contracted with x three times.

        Equals ``6 * sum_orbits v * x_i * x_j * x_k`` since every orbit of
        distinct indices has exactly six permuted copies.
        """
        x = _as_vector(x, self.shape.n, "x")
        if not self.val.size:
            return 0.0
        i, j, k = self.idx[:, 0], self.idx[:, 1], self.idx[:, 2]
        return 6.0 * float(np.dot(self.val, x[i] * x[j] * x[k]))

    def trilinear(self, x, y, z) -> float:
        """The symmetric trilinear form evaluated at three vectors."""
        n = self.shape.n
        x = _as_vector(x, n, "x")
        y = _as_vector(y, n, "y")
        z = _as_vector(z, n, "z")
        if not self.val.size:
            return 0.0
        i, j, k = self.idx[:, 0], self.idx[:, 1], self.idx[:, 2]
        terms = (
            x[i] * (y[j] * z[k] + y[k] * z[j])
            + x[j] * (y[i] * z[k] + y[k] * z[i])
            + x[k] * (y[i] * z[j] + y[j] * z[i])
        )
        return float(np.dot(self.val, terms))

    def contract_vec(self, x, y) -> np.ndarray:
        """Contract two modes: returns the vector ``l -> sum_ij T_ijl x_i y_j``.

        Each orbit ``(i, j, k, v)`` sends ``v * (x_a y_b + x_b y_a)`` to the
        output coordinate ``c`` for each choice of ``c`` in ``{i, j, k}``,
        ``{a, b}`` being the two remaining indices.
        """
        n = self.shape.n
        x = _as_vector(x, n, "x")
        y = _as_vector(y, n, "y")
        if not self.val.size:
            return np.zeros(n)
        i, j, k = self.idx[:, 0], self.idx[:, 1], self.idx[:, 2]
        w_i = self.val * (x[j] * y[k] + x[k] * y[j])
        w_j = self.val * (x[i] * y[k] + x[k] * y[i])
        w_k = self.val * (x[i] * y[j] + x[j] * y[i])
        out = np.bincount(i, weights=w_i, minlength=n)
        out += np.bincount(j, weights=w_j, minlength=n)
        out += np.bincount(k, weights=w_k, minlength=n)
        return out

    def contract_mat(self, x) -> np.ndarray:
        """Contract one mode: returns the symmetric matrix ``(k, l) -> sum_i T_ikl x_i``."""
        n = self.shape.n
        if n > DENSE_MATRIX_LIMIT:
            raise ThresholdExceeded(
                f"refusing to materialize a {n}x{n} matrix (limit {DENSE_MATRIX_LIMIT})"
            )
        x = _as_vector(x, n, "x")
        if not self.val.size:
            return np.zeros((n, n))
        i, j, k = self.idx[:, 0], self.idx[:, 1], self.idx[:, 2]
        w_i = self.val * x[i]
        w_j = self.val * x[j]
        w_k = self.val * x[k]
        # Mirrored positions receive identical weight streams, so the result
        # is exactly symmetric.
        pos = np.concatenate([j * n + k, k * n + j, i * n + k, k * n + i, i * n + j, j * n + i])
        wts = np.concatenate([w_i, w_i, w_j, w_j, w_k, w_k])
        flat = np.bincount(pos, weights=wts, minlength=n * n)
        return flat.reshape(n, n)

    def frobenius_norm(self) -> float:
        """Frobenius norm of the full symmetric tensor: ``sqrt(6 * sum v^2)``."""
        if not self.val.size:
            return 0.0
        return float(np.sqrt(6.0 * np.dot(self.val, self.val)))


@dataclass(frozen=True)
class LiftedOperator:
    """Implicit fourth-order operator built from a third-order tensor.

    Represents the fourth-order tensor whose entries are the sums of the
    third-order entries over each dropped index, plus ``alpha`` times the
    symmetric tensor whose score function is the fourth power of the 2-norm.
    All contractions are computed from the orbit list.
    """

    tensor: SparseSymmetricTensor3
    alpha: float = 0.0

    def __post_init__(self) -> None:
        a = float(self.alpha)
        if not np.isfinite(a) or a < 0.0:
            raise ValueError(f"alpha must be finite and nonnegative, got {self.alpha}")
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.tensor.shape.n

    def form(self, x, y, z, t) -> float:
        """The symmetric multilinear form at four vectors.

        Invariant under any permutation of the arguments.
        """
        n = self.n
        x = _as_vector(x, n, "x")
        y = _as_vector(y, n, "y")
        z = _as_vector(z, n, "z")
        t = _as_vector(t, n, "t")
        tn = self.tensor
        val = (
            tn.trilinear(x, y, z) * float(t.sum())
            + tn.trilinear(x, y, t) * float(z.sum())
            + tn.trilinear(x, z, t) * float(y.sum())
            + tn.trilinear(y, z, t) * float(x.sum())
        )
        if self.alpha:
            val += self.alpha * g4_form(x, y, z, t)
        return float(val)

    def score(self, x) -> float:
        """Score function: the form on the diagonal, ``form(x, x, x, x)``.

        Equals ``4 * score3(x) * sum(x) + alpha * ||x||_2^4``.
        """
        x = _as_vector(x, self.n, "x")
        return self.form(x, x, x, x)

    def contract_vec(self, x, y, z) -> np.ndarray:
        """Gradient-direction contraction: the vector ``form(x, y, z, .)``."""
        n = self.n
        x = _as_vector(x, n, "x")
        y = _as_vector(y, n, "y")
        z = _as_vector(z, n, "z")
        tn = self.tensor
        out = np.full(n, tn.trilinear(x, y, z))
        out += float(z.sum()) * tn.contract_vec(x, y)
        out += float(y.sum()) * tn.contract_vec(x, z)
        out += float(x.sum()) * tn.contract_vec(y, z)
        if self.alpha:
            out += (self.alpha / 3.0) * (
                float(x @ y) * z + float(x @ z) * y + float(y @ z) * x
            )
        return out

    def contract_mat(self, x, y) -> np.ndarray:
        """Hessian-direction contraction: the symmetric matrix ``form(x, y, ., .)``."""
        n = self.n
        if n > DENSE_MATRIX_LIMIT:
            raise ThresholdExceeded(
                f"refusing to materialize a {n}x{n} matrix (limit {DENSE_MATRIX_LIMIT})"
            )
        x = _as_vector(x, n, "x")
        y = _as_vector(y, n, "y")
        tn = self.tensor
        c = tn.contract_vec(x, y)
        out = c[:, None] + c[None, :]
        mx = tn.contract_mat(x)
        my = mx if y is x else tn.contract_mat(y)
        out += float(y.sum()) * mx
        out += float(x.sum()) * my
        if self.alpha:
            out += (self.alpha / 3.0) * (
                float(x @ y) * np.eye(n) + np.outer(x, y) + np.outer(y, x)
            )
        return out


def g4_form(x, y, z, t) -> float:
    """Symmetric multilinear extension of the fourth power of the 2-norm.

    ``(<x,y><z,t> + <x,z><y,t> + <x,t><y,z>) / 3``; on the diagonal it
    equals ``||x||_2^4``.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if not (x.shape == y.shape == z.shape == t.shape) or x.ndim != 1:
        raise ValueError("g4_form needs four 1-D vectors of equal length")
    return float(
        (float(x @ y) * float(z @ t) + float(x @ z) * float(y @ t) + float(x @ t) * float(y @ z))
        / 3.0
    )


def alpha_bound(tensor: SparseSymmetricTensor3) -> float:
    """A convexification weight that is always sufficient.

    The lifted tensor is the sum of four copies of the third-order tensor,
    each constant along one mode, so its Frobenius norm is at most
    ``4 * sqrt(n)`` times the third-order norm.  Returns three times that
    upper bound, avoiding the O(n^4) exact norm.
    """
    return 12.0 * float(np.sqrt(tensor.shape.n)) * tensor.frobenius_norm()


def _dense3(tensor: SparseSymmetricTensor3) -> np.ndarray:
    n = tensor.shape.n
    dense = np.zeros((n, n, n))
    if tensor.val.size:
        i, j, k = tensor.idx[:, 0], tensor.idx[:, 1], tensor.idx[:, 2]
        v = tensor.val
        dense[i, j, k] = v
        dense[i, k, j] = v
        dense[j, i, k] = v
        dense[j, k, i] = v
        dense[k, i, j] = v
        dense[k, j, i] = v
    return dense


def f4_norm_exact(tensor: SparseSymmetricTensor3) -> float:
    """Exact Frobenius norm of the lifted fourth-order tensor, by brute force.

    Materializes all n^4 entries; intended as a small-scale reference only.
    """
    n = tensor.shape.n
    if n > F4_EXACT_LIMIT:
        raise ThresholdExceeded(
            f"exact lifted norm needs n <= {F4_EXACT_LIMIT}, got n = {n}"
        )
    t3 = _dense3(tensor)
    f4 = (
        t3[:, :, :, None]
        + t3[:, :, None, :]
        + t3[:, None, :, :]
        + t3[None, :, :, :]
    )
    return float(np.sqrt(np.sum(f4 * f4)))

"""Generic correction-step machinery for constrained Galerkin solves.

The trial space V sits inside an enclosing coefficient space W and is the
common null space of a handful of linear constraint rows (boundary
functionals).  Solving ``P_V(B v - f) = 0`` with ``v`` in V is done in
three steps:

* preliminary (once per operator): build an orthonormal basis s_1..s_K of
  the complement of V in W and split each s_i = q_i + q~_i with
  ``P_V B q_i = 0`` and q~_i in V;
* main: obtain *any* w in W with ``P_V(B w - f) = 0``;
* correction: ``v = w - sum_i (w, s_i) q_i``.

All inner products are weighted (diagonal weights, Chebyshev by default).
`galerkin_solve_dense` assembles and solves the constrained problem
directly on a basis of V; it is the correctness oracle for everything
else.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConstraintSet",
    "CorrectionBasis",
    "complement_basis",
    "prepare_correction",
    "correct",
    "galerkin_solve_dense",
]

# Relative tolerance for rank decisions during orthonormalization.
_RANK_TOL = 1e-13
# Condition-number guard for the dense K-free solves.
_SINGULAR_COND = 1e14


class ConstraintSet:
    """K independent linear functionals over coefficient space.

    ``rows`` is a (K, M+1) array; the trial space V is its null space.
    Rank is checked at construction and a (deterministic) null-space basis
    is computed once for oracle assembly and invariant checks.
    """

    def __init__(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        k, n = rows.shape
        if k > n:
            raise ValueError(f"{k} constraints exceed space dimension {n}")
        if k > 0 and np.linalg.matrix_rank(rows) < k:
            raise ValueError("constraint rows are linearly dependent")
        self._rows = rows
        self._rows.setflags(write=False)
        # SVD gives an orthonormal null-space basis with a fixed ordering.
        if k == 0:
            self._null = np.eye(n)
        else:
            _, _, vh = np.linalg.svd(rows)
            self._null = vh[k:].T.copy()
        self._null.setflags(write=False)

    @property
    def rows(self):
        return self._rows

    @property
    def n_constraints(self):
        return self._rows.shape[0]

    @property
    def size(self):
        """Dimension of the enclosing space W (= M + 1)."""
        return self._rows.shape[1]

    @property
    def null_basis(self):
        """Orthonormal (Euclidean) basis of V as columns, shape (M+1, M+1-K)."""
        return self._null

    def residual(self, v):
        """Constraint row values c_i . v, shape (K,) (or stacked)."""
        return np.tensordot(np.asarray(v), self._rows, axes=([-1], [1]))


@dataclass(frozen=True)
class CorrectionBasis:
    """Precomputed data binding one ConstraintSet to one operator B.

    ``s`` holds the orthonormal complement basis (rows), ``q`` the parts
    with ``P_V B q_i = 0`` and ``q_tilde = s - q`` the parts inside V.
    """

    s: np.ndarray
    q: np.ndarray
    q_tilde: np.ndarray
    weights: np.ndarray
    operator_id: str = ""
    constraint_rows: np.ndarray = field(default=None, repr=False)

    @property
    def n_constraints(self):
        return self.s.shape[0]

    @property
    def size(self):
        return self.s.shape[1]


def complement_basis(cset, weights):
    """Orthonormal basis of the complement of V in W, shape (K, M+1).

    Each constraint row is mapped to its Riesz representer under the
    weighted inner product (divide entrywise by the weights), and the
    representers are orthonormalized by modified Gram-Schmidt with one
    reorthogonalization pass.
    """
    weights = np.asarray(weights, dtype=float)
    k, n = cset.rows.shape
    if weights.shape != (n,):
        raise ValueError(f"weights of length {weights.shape} do not match space size {n}")
    if k == 0:
        return np.zeros((0, n))
    reps = cset.rows / weights
    basis = []
    scale = np.sqrt(np.sum(weights * reps**2, axis=1))
    for i in range(k):
        v = reps[i].copy()
        for _ in range(2):
            for u in basis:
                v -= np.sum(weights * v * u) * u
        norm = np.sqrt(np.sum(weights * v * v))
        if norm <= _RANK_TOL * scale[i]:
            raise ValueError("constraint rows are numerically rank deficient")
        basis.append(v / norm)
    return np.array(basis)


def _dense_operator(apply_b, n):
    if callable(apply_b):
        cols = [np.asarray(apply_b(col)) for col in np.eye(n)]
        return np.column_stack(cols)
    b = np.asarray(apply_b, dtype=float)
    if b.shape != (n, n):
        raise ValueError(f"operator matrix shape {b.shape} does not match space size {n}")
    return b


def prepare_correction(cset, apply_b, weights, operator_id=""):
    """Preliminary step: decompose the complement basis for operator B.

    ``apply_b`` is either a callable giving the action of B on a
    coefficient vector in W, or the dense (M+1, M+1) matrix itself.
    Solves the dense K-free problems P_V B (q~_i - s_i) = 0 with q~_i in V
    after one factorization of P_V B restricted to V.
    """
    weights = np.asarray(weights, dtype=float)
    s = complement_basis(cset, weights)
    n = cset.size
    bmat = _dense_operator(apply_b, n)
    z = cset.null_basis
    # P_V x = 0 on V-coordinates <=> Z^T W x = 0, so the restricted matrix is
    # C = Z^T W B Z and the right-hand sides are Z^T W B s_i.
    wz = weights[:, None] * z
    cmat = wz.T @ bmat @ z
    if cmat.size and np.linalg.cond(cmat) > _SINGULAR_COND:
        name = operator_id or "operator"
        raise ValueError(
            f"{name}: P_V B is singular on the trial space; "
            "the correction decomposition does not exist"
        )
    rhs = wz.T @ (bmat @ s.T)
    y = np.linalg.solve(cmat, rhs) if cmat.size else np.zeros((z.shape[1], len(s)))
    q_tilde = (z @ y).T
    return CorrectionBasis(
        s=s,
        q=s - q_tilde,
        q_tilde=q_tilde,
        weights=weights,
        operator_id=operator_id,
        constraint_rows=cset.rows,
    )


def correct(w, cb):
    """Correction step: map a W-space solution into the trial space V.

    Returns ``v = w - sum_i b_i q_i`` with ``b_i = (w, s_i)`` weighted.
    ``w`` may be a stacked array of coefficient vectors (last axis).
    """
    w = np.asarray(w)
    if w.shape[-1] != cb.size:
        raise ValueError(f"vector length {w.shape[-1]} does not match basis size {cb.size}")
    if cb.n_constraints == 0:
        return w.copy()
    b = np.tensordot(w, cb.weights * cb.s, axes=([-1], [1]))
    return w - np.tensordot(b, cb.q, axes=([-1], [0]))


def galerkin_solve_dense(b_matrix, cset, f):
    """Solve P_V(B v - f) = 0, v in V, by direct dense assembly on V.

    The reference implementation of the traditional one-step method; used
    as the oracle against which the three-step pipeline is checked.
    """
    f = np.asarray(f)
    n = cset.size
    bmat = _dense_operator(b_matrix, n)
    z = cset.null_basis
    weights = inner_weights_for(n)
    wz = weights[:, None] * z
    amat = wz.T @ bmat @ z
    if amat.size and np.linalg.cond(amat) > _SINGULAR_COND:
        raise ValueError("projected operator is singular on the trial space")
    fv = _pad(f, n)
    y = np.linalg.solve(amat, wz.T @ fv)
    return z @ y


def inner_weights_for(n):
    # Local import keeps this module usable for generic weights while the
    # dense oracle defaults to the Chebyshev ones used everywhere else.
    from .chebyshev import inner_weights

    return inner_weights(n)


def _pad(a, n):
    a = np.asarray(a)
    if a.shape[-1] >= n:
        return a[..., :n]
    out = np.zeros(a.shape[:-1] + (n,), dtype=a.dtype)
    out[..., : a.shape[-1]] = a
    return out

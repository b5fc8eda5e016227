"""Worked 1D solvers: boundary projection, the recursive Helmholtz solve,
and the fourth-order generalization used by the implicit poloidal
velocity update.

Main steps solve the unconstrained problem exactly in the enclosing
Chebyshev space W = span(T_0 .. T_{N+1}); the correction step of
:mod:`specgal.galerkin` then maps the result into the trial space.  All
main steps cost O(N) per solve and accept stacked coefficient arrays
(series along the last axis) with broadcastable scalar coefficients, so a
whole plane of Fourier modes is solved in one call.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chebyshev import boundary_row, differentiate, inner_product, inner_weights
from .galerkin import ConstraintSet, complement_basis, correct

__all__ = [
    "HelmholtzProblem",
    "project_dirichlet",
    "helmholtz_main_step",
    "solve_helmholtz",
    "fourth_order_main_step",
    "solve_fourth_order",
]


@dataclass(frozen=True)
class HelmholtzProblem:
    """Constant-coefficient problem alpha*v + beta*v'' = f on T_0..T_{N+1}."""

    alpha: complex
    beta: complex
    f: np.ndarray
    trunc: int

    def __post_init__(self):
        if self.alpha == 0:
            raise ValueError(
                "alpha = 0: the recursive solve divides by alpha; "
                "use galerkin_solve_dense for the pure second-derivative case"
            )
        if self.trunc < 0:
            raise ValueError("truncation degree must be non-negative")


@lru_cache(maxsize=None)
def _dirichlet_complement(trunc):
    rows = np.vstack([boundary_row(0, 1, trunc + 1), boundary_row(0, -1, trunc + 1)])
    cset = ConstraintSet(rows)
    s = complement_basis(cset, inner_weights(trunc + 2))
    s.setflags(write=False)
    return s


def project_dirichlet(f, trunc):
    """Weighted-orthogonal projection of f onto the span of T_0..T_{N+1}
    vanishing at both endpoints.

    The main step truncates f to degrees 0..N+1; the correction subtracts
    the components along the even/odd complement directions.
    """
    f = np.asarray(f)
    n = trunc + 2
    w = np.zeros(f.shape[:-1] + (n,), dtype=f.dtype)
    m = min(f.shape[-1], n)
    w[..., :m] = f[..., :m]
    s = _dirichlet_complement(trunc)
    ws = inner_weights(n) * s
    # two passes: the second removes the roundoff the first leaves along
    # the complement directions, keeping endpoint values at machine zero
    for _ in range(2):
        b = np.tensordot(w, ws, axes=([-1], [1]))
        w = w - np.tensordot(b, s, axes=([-1], [0]))
    return w


def helmholtz_main_step(alpha, beta, f, trunc, counter=None):
    """Exact solve of alpha*w + beta*w'' = f in W = span(T_0..T_{N+1}).

    Backward two-stride recursion: degrees are peeled from the top, and
    the second-derivative content of each peeled term is pushed down onto
    lower-degree right-hand-side and auxiliary coefficients using the
    three-term identity relating 2 T_k to T''_{k+2}, T''_k and T''_{k-2}.
    Even and odd degree chains never couple and are processed
    independently.  Each coefficient is touched O(1) times.

    ``alpha``/``beta`` may be scalars or arrays broadcastable against the
    leading axes of ``f``; the series runs along the last axis.  If
    ``counter`` is a dict, its "ops" entry is incremented once per
    processed degree (cost instrumentation).
    """
    alpha = np.asarray(alpha)
    beta = np.asarray(beta)
    if np.any(alpha == 0):
        raise ValueError(
            "alpha = 0 in the Helmholtz main step; use galerkin_solve_dense instead"
        )
    f = np.asarray(f)
    m = trunc + 1
    lead = np.broadcast_shapes(f.shape[:-1], alpha.shape, beta.shape)
    dtype = np.result_type(f.dtype, alpha.dtype, beta.dtype, float)
    fw = np.zeros(lead + (m + 1,), dtype=dtype)
    ncopy = min(f.shape[-1], m + 1)
    fw[..., :ncopy] = f[..., :ncopy]
    aux = np.zeros_like(fw)
    w = np.zeros_like(fw)
    ops = 0
    for start in (m, m - 1):
        for d in range(start, 1, -2):
            w[..., d] = fw[..., d] / alpha
            c = aux[..., d] - beta * w[..., d]
            if d >= 5:
                fw[..., d - 2] += 4.0 * d * (d - 1) * c
                aux[..., d - 2] += (2.0 * d / (d - 3)) * c
                aux[..., d - 4] -= (d * (d - 1.0) / ((d - 3) * (d - 4))) * c
            elif d == 4:
                # T''_4 = 48 T_2 + 8 T''_2
                fw[..., 2] += 48.0 * c
                aux[..., 2] += 8.0 * c
            elif d == 3:
                # T''_3 = 24 T_1
                fw[..., 1] += 24.0 * c
            else:
                # T''_2 = 4 T_0
                fw[..., 0] += 4.0 * c
            ops += 1
    if m >= 1:
        w[..., 1] = fw[..., 1] / alpha
    w[..., 0] = fw[..., 0] / alpha
    ops += 2
    if counter is not None:
        counter["ops"] = counter.get("ops", 0) + ops
    return w


def solve_helmholtz(problem, cb, counter=None):
    """Three-step solve of P_V(alpha*v + beta*v'' - f) = 0, v in V.

    ``cb`` must have been prepared for the same (alpha, beta) operator and
    the same constraint set.
    """
    w = helmholtz_main_step(problem.alpha, problem.beta, problem.f, problem.trunc, counter)
    return correct(w, cb)


def _integration_matrix(n):
    """Coefficient-space antiderivative: rows >= 1 of S @ D = identity."""
    s = np.zeros((n, n))
    for k in range(1, n):
        s[k, k - 1] = (2.0 if k == 1 else 1.0) / (2.0 * k)
        if k + 1 < n:
            s[k, k + 1] = -1.0 / (2.0 * k)
    return s


def _second_derivative_matrix(n):
    d2 = np.zeros((n, n))
    eye = np.eye(n)
    for j in range(n):
        d2[:, j] = differentiate(differentiate(eye[:, j]))
    return d2


@lru_cache(maxsize=None)
def _fourth_order_structure(trunc):
    """Fixed banded building blocks for the quasi-banded fourth-order solve.

    The equation c0 w + c2 w'' + c4 w'''' = f is integrated four times in
    coefficient space: rows k >= 4 of S^4(residual) = 0 give a
    pentadiagonal-per-parity band (upper bandwidth 8 after reindexing),
    and the four highest coefficient equations complete the system.  The
    combined matrix is upper triangular banded, so one back-substitution
    solves it in O(N).
    """
    n = trunc + 2
    if n < 5:
        raise ValueError("fourth-order solve needs truncation degree N >= 3")
    s = _integration_matrix(n)
    s2 = s @ s
    s4 = s2 @ s2
    d2 = _second_derivative_matrix(n)
    d4 = d2 @ d2
    nb = 9  # upper bandwidth 8 plus the diagonal
    c0b = np.zeros((nb, n))
    c2b = np.zeros((nb, n))
    c4b = np.zeros((nb, n))
    top = n - 4
    for i in range(top):
        k = i + 4
        for j in range(nb):
            col = i + j
            if col >= n:
                break
            c0b[j, i] = s4[k, col]
            c2b[j, i] = s2[k, col]
            c4b[j, i] = 1.0 if col == k else 0.0
    for i in range(top, n):
        for j in range(nb):
            col = i + j
            if col >= n:
                break
            c0b[j, i] = 1.0 if col == i else 0.0
            c2b[j, i] = d2[i, col]
            c4b[j, i] = d4[i, col]
    for arr in (c0b, c2b, c4b, s4):
        arr.setflags(write=False)
    return c0b, c2b, c4b, s4


def fourth_order_main_step(c0, c2, c4, f, trunc):
    """Exact solve of c0 w + c2 w'' + c4 w'''' = f in W = span(T_0..T_{N+1}).

    Quasi-banded integrated formulation; see `_fourth_order_structure`.
    ``c0``, ``c2``, ``c4`` may be arrays broadcastable against the leading
    axes of ``f``.  Requires c0 != 0.
    """
    c0 = np.asarray(c0, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    c4 = np.asarray(c4, dtype=float)
    if np.any(c0 == 0):
        raise ValueError(
            "c0 = 0 makes the banded fourth-order solve singular; "
            "use galerkin_solve_dense instead"
        )
    f = np.asarray(f)
    c0b, c2b, c4b, s4 = _fourth_order_structure(trunc)
    n = trunc + 2
    lead = np.broadcast_shapes(f.shape[:-1], c0.shape, c2.shape, c4.shape)
    dtype = np.result_type(f.dtype, float)
    fw = np.zeros(lead + (n,), dtype=dtype)
    ncopy = min(f.shape[-1], n)
    fw[..., :ncopy] = f[..., :ncopy]
    band = (
        c0[..., None, None] * c0b
        + c2[..., None, None] * c2b
        + c4[..., None, None] * c4b
    )
    g = np.empty_like(fw)
    s4f = np.tensordot(fw, s4, axes=([-1], [1]))
    g[..., : n - 4] = s4f[..., 4:]
    g[..., n - 4 :] = fw[..., n - 4 :]
    w = np.zeros_like(fw)
    for i in range(n - 1, -1, -1):
        acc = g[..., i].copy()
        for j in range(1, min(9, n - i)):
            acc -= band[..., j, i] * w[..., i + j]
        w[..., i] = acc / band[..., 0, i]
    return w


def solve_fourth_order(c0, c2, c4, f, constraints, cb):
    """Three-step solve of P_V(c0 v + c2 v'' + c4 v'''' - f) = 0, v in V.

    ``constraints`` is the ConstraintSet defining V (four rows for the
    clamped poloidal velocity); ``cb`` must have been prepared for the
    same operator and constraints.
    """
    if constraints.n_constraints != cb.n_constraints:
        raise ValueError("constraint set and correction basis disagree on the number of rows")
    trunc = constraints.size - 2
    w = fourth_order_main_step(c0, c2, c4, f, trunc)
    return correct(w, cb)


def residual_norm(alpha, beta, v, f, cset):
    """Weighted norm of P_V(alpha v + beta v'' - f); diagnostic helper."""
    f = np.asarray(f)
    r = alpha * np.asarray(v) + beta * differentiate(differentiate(v))
    n = cset.size
    rr = np.zeros(r.shape[:-1] + (n,), dtype=np.result_type(r.dtype, f.dtype))
    m = min(r.shape[-1], n)
    rr[..., :m] = r[..., :m]
    m = min(f.shape[-1], n)
    rr[..., :m] -= f[..., :m]
    z = cset.null_basis
    w = inner_weights(n)
    # Weighted projection onto V: solve (Z^T W Z) y = Z^T W r, proj = Z y.
    gram = z.T @ (w[:, None] * z)
    coords = np.linalg.solve(gram, np.tensordot(rr, w[:, None] * z, axes=([-1], [0]))[..., None])
    proj = np.tensordot(coords[..., 0], z.T, axes=([-1], [0]))
    return np.sqrt(np.abs(np.sum(w * proj * np.conj(proj), axis=-1)))

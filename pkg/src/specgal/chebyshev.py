"""Chebyshev coefficient-space primitives.

A series is a plain numpy array of coefficients ``a_0 .. a_M`` representing
``sum_k a_k T_k(x)`` on [-1, 1]; entries may be real or complex.  Every
routine here operates along the *last* axis, so a stacked array of series
(for example one series per Fourier mode) is handled in a single call.
"""

import numpy as np

__all__ = [
    "inner_weights",
    "inner_product",
    "differentiate",
    "boundary_row",
    "second_derivative_expansion",
    "eval_at",
]


def inner_weights(n):
    """Diagonal weights of the working inner product for T_0 .. T_{n-1}.

    The convention used throughout this package is (T_0, T_0) = pi/2 and
    (T_k, T_k) = pi for k >= 1.  (Note this swaps the classical values of
    the Chebyshev-weighted integrals, which are pi for the constant mode
    and pi/2 otherwise; any fixed positive weights give a valid inner
    product, and every constraint, projection and solver in this package
    uses this one consistently.)
    """
    w = np.full(n, np.pi)
    w[0] = np.pi / 2
    return w


def _pad_last(a, n):
    a = np.asarray(a)
    if a.shape[-1] >= n:
        return a[..., :n]
    out = np.zeros(a.shape[:-1] + (n,), dtype=a.dtype)
    out[..., : a.shape[-1]] = a
    return out


def inner_product(a, b):
    """Weighted inner product sum_k w_k a_k conj(b_k) of two series.

    Shorter series are treated as zero-padded.  For stacked inputs the
    product is taken along the last axis and the leading axes broadcast.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = max(a.shape[-1], b.shape[-1])
    a = _pad_last(a, n)
    b = _pad_last(b, n)
    return np.sum(inner_weights(n) * a * np.conj(b), axis=-1)


def differentiate(a):
    """Coefficients of the derivative of a Chebyshev series.

    Implements the backward recurrence b_k = b_{k+2} + 2(k+1) a_{k+1},
    2 b_0 = b_2 + 2 a_1 (vectorized as reversed cumulative sums along the
    two parity chains).  The result has the same length as the input; its
    final entry is always zero.
    """
    a = np.asarray(a)
    n = a.shape[-1]
    dtype = np.result_type(a.dtype, float)
    b = np.zeros(a.shape[:-1] + (n,), dtype=dtype)
    if n <= 1:
        return b
    # r_k = 2(k+1) a_{k+1}; b_k = r_k + r_{k+2} + ... within each parity
    r = 2.0 * np.arange(1, n) * a[..., 1:]
    for start in (n - 2, n - 3):
        if start < 0:
            continue
        idx = np.arange(start, -1, -2)
        b[..., idx] = np.cumsum(r[..., idx], axis=-1)
    b[..., 0] *= 0.5
    return b


def boundary_row(order, endpoint, trunc):
    """Endpoint-evaluation functional as a row over coefficients a_0..a_M.

    Dotting the returned vector with a coefficient array gives the value
    (order 0), first derivative (order 1) or second derivative (order 2)
    of the series at ``endpoint`` (+1 or -1).  Analytic values are used:
    T_j(1) = 1, T_j'(1) = j^2, T_j''(1) = (j^4 - j^2)/3, and parity gives
    T_j^(m)(-1) = (-1)^(j+m) T_j^(m)(1).

    Parameters
    ----------
    order : int
        Derivative order, one of {0, 1, 2}.
    endpoint : int
        +1 or -1.
    trunc : int
        Highest degree M; the row has M + 1 entries.
    """
    if order not in (0, 1, 2):
        raise ValueError(f"unsupported derivative order {order!r}; expected 0, 1 or 2")
    if endpoint not in (1, -1):
        raise ValueError(f"endpoint must be +1 or -1, got {endpoint!r}")
    j = np.arange(trunc + 1)
    if order == 0:
        base = np.ones(trunc + 1)
    elif order == 1:
        base = j.astype(float) ** 2
    else:
        base = (j.astype(float) ** 4 - j.astype(float) ** 2) / 3.0
    if endpoint == 1:
        return base
    return (-1.0) ** (j + order) * base


def second_derivative_expansion(k):
    """Express 2 T_k through second derivatives of neighbouring degrees.

    Returns the three (degree, coefficient) pairs (c_hi, c_mid, c_lo) with

        2 T_k = c_hi T''_{k+2} + c_mid T''_k + c_lo T''_{k-2},

    where c_hi = 1/(2(k+1)(k+2)), c_mid = -1/((k-1)(k+1)) and
    c_lo = 1/(2(k-1)(k-2)).  Requires k >= 3 (the relation degenerates
    below that; the recursive solver never asks for smaller k).
    """
    if k < 3:
        raise ValueError(f"expansion requires degree k >= 3, got {k}")
    return (
        (k + 2, 1.0 / (2.0 * (k + 1) * (k + 2))),
        (k, -1.0 / ((k - 1.0) * (k + 1.0))),
        (k - 2, 1.0 / (2.0 * (k - 1) * (k - 2))),
    )


def eval_at(a, x):
    """Evaluate a Chebyshev series at x in [-1, 1] by Clenshaw recurrence.

    ``a`` may be a stacked array of series (last axis = coefficients) and
    ``x`` a scalar or array broadcastable against the leading axes.
    """
    a = np.asarray(a)
    x = np.asarray(x)
    if np.any(np.abs(x) > 1.0 + 1e-12):
        raise ValueError("evaluation point outside [-1, 1]")
    shape = np.broadcast_shapes(a.shape[:-1], x.shape)
    dtype = np.result_type(a.dtype, x.dtype, float)
    b1 = np.zeros(shape, dtype=dtype)
    b2 = np.zeros(shape, dtype=dtype)
    for k in range(a.shape[-1] - 1, 0, -1):
        b1, b2 = a[..., k] + 2.0 * x * b1 - b2, b1
    out = a[..., 0] + x * b1 - b2
    return out[()]

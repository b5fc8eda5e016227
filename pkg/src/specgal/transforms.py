"""Spectral <-> physical conversions and dealiased products.

Fields are periodic in x1, x2 (Fourier modes n1 = -N1..N1, n2 = -N2..N2,
stored in that centred order) and expanded in Chebyshev polynomials
T_0..T_{N3+1} in x3.  The physical grid is uniform in x1, x2 and uses
Chebyshev-Gauss-Lobatto points cos(pi*j/P3) in x3, zero-padded by the 3/2
rule in all three directions so that truncating a pointwise product
realizes its Galerkin projection exactly.

Normalization: a unit spectral coefficient transforms to a physical field
of unit amplitude, i.e. coefficient c on mode (n1, n2, n3) gives
c * exp(i(alpha1 n1 x1 + alpha2 n2 x2)) * T_{n3}(x3).
"""

import os
from dataclasses import dataclass

import numpy as np
import scipy.fft

__all__ = [
    "SpectralField3D",
    "PhysicalField3D",
    "fourier_pad",
    "chebyshev_pad",
    "gauss_lobatto_nodes",
    "to_physical",
    "to_spectral",
    "pointwise_product",
]

# Transform lines are independent, so multithreaded plans give bitwise
# identical results for any worker count.
_WORKERS = min(4, os.cpu_count() or 1)


def fourier_pad(n_modes):
    """Padded grid size for a periodic direction carrying n_modes modes."""
    return int(np.ceil(1.5 * n_modes))


def chebyshev_pad(n_coeffs):
    """Padded interval count P3 for a Chebyshev direction (grid has P3+1 points)."""
    return int(np.ceil(1.5 * n_coeffs))


def gauss_lobatto_nodes(p3):
    """Chebyshev-Gauss-Lobatto points cos(pi*j/P3), j = 0..P3."""
    return np.cos(np.pi * np.arange(p3 + 1) / p3)


@dataclass
class SpectralField3D:
    """Complex mode coefficients, shape (..., 2*N1+1, 2*N2+1, N3+2).

    A leading axis of length 3 marks a vector field.  ``real`` declares
    conjugate symmetry u[-n1, -n2] = conj(u[n1, n2]) (a real field).
    """

    data: np.ndarray
    alpha1: float
    alpha2: float
    real: bool = True

    @property
    def n1(self):
        return (self.data.shape[-3] - 1) // 2

    @property
    def n2(self):
        return (self.data.shape[-2] - 1) // 2

    @property
    def n3(self):
        return self.data.shape[-1] - 2

    @property
    def dims(self):
        return (self.n1, self.n2, self.n3)


@dataclass
class PhysicalField3D:
    """Grid values, shape (..., P1, P2, P3+1); 3/2-padded collocation grid."""

    values: np.ndarray
    alpha1: float
    alpha2: float
    real: bool = True


def _cheb_values(coeffs, p3):
    """Series values at the P3+1 Gauss-Lobatto points (synthesis DCT-I)."""
    n = coeffs.shape[-1]
    z = np.zeros(coeffs.shape[:-1] + (p3 + 1,), dtype=coeffs.dtype)
    z[..., : min(n, p3 + 1)] = coeffs[..., : min(n, p3 + 1)]
    z[..., 1:-1] *= 0.5
    return scipy.fft.dct(z, type=1, axis=-1, workers=_WORKERS)


def _cheb_coeffs(values, n_coeffs):
    """Chebyshev coefficients from Gauss-Lobatto values (analysis DCT-I)."""
    p3 = values.shape[-1] - 1
    t = scipy.fft.dct(values, type=1, axis=-1, workers=_WORKERS) / p3
    t[..., 0] *= 0.5
    t[..., -1] *= 0.5
    return t[..., :n_coeffs]


def _embed_centred(block, p1, axis_len):
    """Place a centred-mode block into FFT layout along axis -3."""
    n1 = (axis_len - 1) // 2
    out = np.zeros(block.shape[:-3] + (p1,) + block.shape[-2:], dtype=complex)
    out[..., : n1 + 1, :, :] = block[..., n1:, :, :]
    if n1 > 0:
        out[..., p1 - n1 :, :, :] = block[..., :n1, :, :]
    return out


def _spectral_to_grid_complex(modes, p1, p2, p3):
    modes = np.asarray(modes)
    m1, m2 = modes.shape[-3], modes.shape[-2]
    n2 = (m2 - 1) // 2
    buf = _embed_centred(modes, p1, m1)
    swapped = np.swapaxes(buf, -3, -2)
    swapped = _embed_centred(swapped, p2, m2)
    buf = np.swapaxes(swapped, -3, -2)
    buf = scipy.fft.ifft(buf, axis=-3, norm="forward", workers=_WORKERS)
    buf = scipy.fft.ifft(buf, axis=-2, norm="forward", workers=_WORKERS)
    return _cheb_values(buf, p3)


def _spectral_to_grid_real(modes, p1, p2, p3):
    """Inverse transform of a conjugate-symmetric mode array to real values.

    The x3 synthesis runs on the unpadded half-plane n2 >= 0 and the x2
    inverse uses the real half-spectrum transform, roughly halving the
    work relative to the general complex path.
    """
    modes = np.asarray(modes)
    m1, m2 = modes.shape[-3], modes.shape[-2]
    n1, n2 = (m1 - 1) // 2, (m2 - 1) // 2
    half = _cheb_values(modes[..., :, n2:, :], p3)
    # embed straight into the full half-spectrum width so the inverse
    # transforms run without further padding copies
    buf = np.zeros(modes.shape[:-3] + (p1, p2 // 2 + 1, p3 + 1), dtype=complex)
    buf[..., : n1 + 1, : n2 + 1, :] = half[..., n1:, :, :]
    if n1 > 0:
        buf[..., p1 - n1 :, : n2 + 1, :] = half[..., :n1, :, :]
    buf = scipy.fft.ifft(buf, axis=-3, norm="forward", workers=_WORKERS)
    return scipy.fft.irfft(buf, n=p2, axis=-2, norm="forward", workers=_WORKERS)


def spectral_to_grid(modes, p1, p2, p3, real=True):
    """Array-level inverse transform onto the padded physical grid.

    ``modes`` has centred Fourier layout on axes -3, -2 and Chebyshev
    coefficients on axis -1.  With ``real`` the input must be conjugate
    symmetric and real values are returned.
    """
    if real:
        return _spectral_to_grid_real(modes, p1, p2, p3)
    return _spectral_to_grid_complex(modes, p1, p2, p3)


def grid_to_spectral(values, n1, n2, n_coeffs):
    """Array-level forward transform with truncation to the centred layout.

    Real input uses the half-spectrum transform in x2 and rebuilds the
    negative-n2 modes from conjugate symmetry.
    """
    values = np.asarray(values)
    p1, p2 = values.shape[-3], values.shape[-2]
    idx1 = np.arange(-n1, n1 + 1) % p1
    if np.isrealobj(values):
        spec = scipy.fft.rfft(values, axis=-2, norm="forward", workers=_WORKERS)
        spec = scipy.fft.fft(spec, axis=-3, norm="forward", workers=_WORKERS)
        sub = spec[..., idx1, :, :][..., :, : n2 + 1, :]
        coef = _cheb_coeffs(sub, n_coeffs)
        full = np.empty(coef.shape[:-3] + (2 * n1 + 1, 2 * n2 + 1, n_coeffs),
                        dtype=complex)
        full[..., n2:, :] = coef
        if n2 > 0:
            full[..., :n2, :] = np.conj(coef[..., ::-1, -1:0:-1, :])
        return full
    spec = scipy.fft.fft(values.astype(complex), axis=-3, norm="forward",
                         workers=_WORKERS)
    spec = scipy.fft.fft(spec, axis=-2, norm="forward", workers=_WORKERS)
    idx2 = np.arange(-n2, n2 + 1) % p2
    spec = spec[..., idx1, :, :][..., :, idx2, :]
    return _cheb_coeffs(spec, n_coeffs)


def _padded_sizes(dims):
    n1, n2, n3 = dims
    return fourier_pad(2 * n1 + 1), fourier_pad(2 * n2 + 1), chebyshev_pad(n3 + 2)


def to_physical(u):
    """Inverse Fourier x Chebyshev transform onto the 3/2-padded grid."""
    p1, p2, p3 = _padded_sizes(u.dims)
    vals = spectral_to_grid(u.data, p1, p2, p3, real=u.real)
    return PhysicalField3D(values=vals, alpha1=u.alpha1, alpha2=u.alpha2, real=u.real)


def to_spectral(p, dims):
    """Forward transform followed by truncation to |n1|<=N1, |n2|<=N2, n3<=N3+1.

    The physical grid must match the 3/2 padding of the target dims.
    """
    n1, n2, n3 = dims
    p1, p2, p3 = _padded_sizes(dims)
    shape = p.values.shape
    if shape[-3:] != (p1, p2, p3 + 1):
        raise ValueError(
            f"grid {shape[-3:]} does not match the padded sizes {(p1, p2, p3 + 1)} "
            f"for dims {tuple(dims)}"
        )
    data = grid_to_spectral(p.values, n1, n2, n3 + 2)
    return SpectralField3D(data=data, alpha1=p.alpha1, alpha2=p.alpha2, real=p.real)


def pointwise_product(a, b):
    """Dealiased product: multiply on the padded grid, transform back, truncate.

    With 3/2 padding the retained coefficients equal the exact Galerkin
    projection of the product of the represented functions.
    """
    if a.data.shape[-3:] != b.data.shape[-3:]:
        raise ValueError(f"incompatible dims {a.data.shape[-3:]} vs {b.data.shape[-3:]}")
    pa = to_physical(a)
    pb = to_physical(b)
    prod = PhysicalField3D(
        values=pa.values * pb.values,
        alpha1=a.alpha1,
        alpha2=a.alpha2,
        real=a.real and b.real,
    )
    return to_spectral(prod, a.dims)

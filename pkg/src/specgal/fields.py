"""Toroidal-poloidal-mean decomposition and boundary constraint sets.

A solenoidal vector field on the periodic plane layer splits per Fourier
mode into a toroidal part curl(T e3), a poloidal part curl curl(P e3) and,
for the (0, 0) mode, a horizontal mean field (M1, M2, 0).  This module
provides the decomposition and reconstruction, the per-mode reduction of
a momentum right-hand side to its poloidal scalar equation (the double
curl annihilates the pressure gradient), and the constraint rows encoding
every field component's boundary conditions:

* temperature and velocity components vanish at both walls (no-slip,
  fixed temperature); the poloidal velocity additionally has zero normal
  derivative there;
* the magnetic field sees an electrically insulating upper wall (matching
  a harmonic exterior potential that decays upward) and a perfectly
  conducting lower wall.
"""

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chebyshev import boundary_row, differentiate
from .galerkin import ConstraintSet
from .transforms import SpectralField3D

__all__ = [
    "TPMDecomposition",
    "mode_wavenumbers",
    "decompose_solenoidal",
    "reconstruct_vector",
    "poloidal_velocity_rhs",
    "constraints_for",
    "divergence",
    "curl",
]

COMPONENTS = (
    "temperature",
    "toroidal_b",
    "poloidal_b",
    "mean_b",
    "toroidal_v",
    "poloidal_v",
    "mean_v",
)

_DIVERGENCE_WARN = 1e-8


@dataclass
class TPMDecomposition:
    """Per-mode toroidal/poloidal potentials plus the (0,0) mean field."""

    g_tor: np.ndarray  # (2*N1+1, 2*N2+1, N3+2); zero at the (0, 0) mode
    g_pol: np.ndarray
    mean1: np.ndarray  # (N3+2,)
    mean2: np.ndarray
    alpha1: float
    alpha2: float


def mode_wavenumbers(n1, n2, alpha1, alpha2):
    """Centred-layout wavenumbers kx (m1,), ky (m2,) and k2 = kx^2 + ky^2."""
    kx = alpha1 * np.arange(-n1, n1 + 1)
    ky = alpha2 * np.arange(-n2, n2 + 1)
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    return kx, ky, k2


def _wavenumbers_of(field):
    n1 = (field.data.shape[-3] - 1) // 2
    n2 = (field.data.shape[-2] - 1) // 2
    return mode_wavenumbers(n1, n2, field.alpha1, field.alpha2)


def divergence(field):
    """Spectral divergence i kx F1 + i ky F2 + d F3/dx3 of a vector field."""
    kx, ky, _ = _wavenumbers_of(field)
    f1, f2, f3 = field.data
    return (
        1j * kx[:, None, None] * f1
        + 1j * ky[None, :, None] * f2
        + differentiate(f3)
    )


def curl(field):
    """Spectral curl of a 3-component field (mode-wise, x3 by recurrence)."""
    kx, ky, _ = _wavenumbers_of(field)
    f1, f2, f3 = field.data
    ikx = 1j * kx[:, None, None]
    iky = 1j * ky[None, :, None]
    out = np.empty_like(field.data)
    out[0] = iky * f3 - differentiate(f2)
    out[1] = differentiate(f1) - ikx * f3
    out[2] = ikx * f2 - iky * f1
    return SpectralField3D(out, field.alpha1, field.alpha2, real=field.real)


def decompose_solenoidal(field):
    """Split a solenoidal field into toroidal/poloidal potentials and means.

    Per mode (n1, n2) != (0, 0):
        -k^2 G_T = i ky F1 - i kx F2   (e3 . curl of the field),
         k^2 G_P = F3,
    and the (0, 0) mode carries the horizontal means M_j = F^j_{0,0}.
    Emits a warning if the input's relative divergence exceeds 1e-8.
    """
    kx, ky, k2 = _wavenumbers_of(field)
    f1, f2, f3 = field.data
    div = divergence(field)
    scale = np.sqrt(np.sum(np.abs(field.data) ** 2))
    if scale > 0:
        rel = np.sqrt(np.sum(np.abs(div) ** 2)) / scale
        if rel > _DIVERGENCE_WARN:
            warnings.warn(
                f"decomposing a field with relative divergence {rel:.2e}",
                stacklevel=2,
            )
    k2safe = np.where(k2 == 0, 1.0, k2)[:, :, None]
    ikx = 1j * kx[:, None, None]
    iky = 1j * ky[None, :, None]
    g_tor = (ikx * f2 - iky * f1) / k2safe
    g_pol = f3 / k2safe
    i0, j0 = (f1.shape[0] - 1) // 2, (f1.shape[1] - 1) // 2
    g_tor[i0, j0] = 0.0
    g_pol[i0, j0] = 0.0
    return TPMDecomposition(
        g_tor=g_tor,
        g_pol=g_pol,
        mean1=f1[i0, j0].copy(),
        mean2=f2[i0, j0].copy(),
        alpha1=field.alpha1,
        alpha2=field.alpha2,
    )


def reconstruct_vector(dec):
    """Rebuild the vector field from a TPMDecomposition.

    Toroidal: (i ky G_T, -i kx G_T, 0); poloidal:
    (i kx G_P', i ky G_P', k^2 G_P); mean field at the (0, 0) mode.
    The result is divergence-free by construction.
    """
    m1, m2, nc = dec.g_tor.shape
    n1, n2 = (m1 - 1) // 2, (m2 - 1) // 2
    kx, ky, k2 = mode_wavenumbers(n1, n2, dec.alpha1, dec.alpha2)
    ikx = 1j * kx[:, None, None]
    iky = 1j * ky[None, :, None]
    dpol = differentiate(dec.g_pol)
    out = np.empty((3, m1, m2, nc), dtype=complex)
    out[0] = iky * dec.g_tor + ikx * dpol
    out[1] = -ikx * dec.g_tor + iky * dpol
    out[2] = k2[:, :, None] * dec.g_pol
    out[0, n1, n2] += dec.mean1
    out[1, n1, n2] += dec.mean2
    return SpectralField3D(out, dec.alpha1, dec.alpha2, real=True)


def poloidal_rhs_all(field):
    """Right-hand side of the poloidal scalar equation for every mode.

    Applying e3 . curl curl to a (not necessarily solenoidal) field gives
    k^2 F3 + i kx dF1/dx3 + i ky dF2/dx3 per mode; any gradient part of
    the field drops out.  The poloidal tendency potential G then solves
    k^2 (k^2 G - G'') = rhs.
    """
    kx, ky, k2 = _wavenumbers_of(field)
    f1, f2, f3 = field.data
    return (
        k2[:, :, None] * f3
        + 1j * kx[:, None, None] * differentiate(f1)
        + 1j * ky[None, :, None] * differentiate(f2)
    )


def poloidal_velocity_rhs(field, n1, n2):
    """Per-mode right-hand side of the poloidal scalar equation.

    ``n1``, ``n2`` index the Fourier mode; the (0, 0) mode has no poloidal
    part and raises.
    """
    if n1 == 0 and n2 == 0:
        raise ValueError("the (0, 0) mode has no poloidal component")
    nmax1 = (field.data.shape[-3] - 1) // 2
    nmax2 = (field.data.shape[-2] - 1) // 2
    if abs(n1) > nmax1 or abs(n2) > nmax2:
        raise ValueError(f"mode ({n1}, {n2}) outside the stored range")
    return poloidal_rhs_all(field)[n1 + nmax1, n2 + nmax2]


@lru_cache(maxsize=None)
def _constraints_cached(component, n3, k):
    trunc = n3 + 1
    j = np.arange(trunc + 1)
    if component in ("temperature", "toroidal_v", "mean_v"):
        rows = [boundary_row(0, 1, trunc), boundary_row(0, -1, trunc)]
    elif component in ("toroidal_b", "mean_b"):
        # Value at the insulating top wall, tangential-derivative row at the
        # conducting bottom wall.  The derivative row keeps the sign pattern
        # (0, -1, 4, -9, ...); a homogeneous constraint row is scale
        # invariant, so this spans the same functional as the true
        # endpoint-derivative values (0, 1, -4, 9, ...).
        rows = [boundary_row(0, 1, trunc), -boundary_row(1, -1, trunc)]
    elif component == "poloidal_b":
        if k is None or k <= 0:
            raise ValueError("poloidal_b constraints need the horizontal wavenumber k > 0")
        # Insulating top: the interior solution joins a harmonic exterior
        # mode ~ exp(-k x3), encoded as sum (k - n3^2) b_{n3} = 0; conducting
        # bottom: second derivative and value vanish (second row scaled by 3
        # relative to T''(-1), again immaterial for a homogeneous row).
        rows = [
            k - j.astype(float) ** 2,
            (-1.0) ** j * (j.astype(float) ** 4 - j.astype(float) ** 2),
            boundary_row(0, -1, trunc),
        ]
    elif component == "poloidal_v":
        rows = [
            boundary_row(0, 1, trunc),
            boundary_row(0, -1, trunc),
            boundary_row(1, 1, trunc),
            boundary_row(1, -1, trunc),
        ]
    else:
        raise ValueError(f"unknown component {component!r}; expected one of {COMPONENTS}")
    return ConstraintSet(np.vstack(rows))


def constraints_for(component, n3, k=None):
    """Boundary ConstraintSet for a field component on T_0..T_{N3+1}.

    ``component`` is one of ``temperature``, ``toroidal_b``,
    ``poloidal_b``, ``mean_b``, ``toroidal_v``, ``poloidal_v``,
    ``mean_v``.  The poloidal magnetic rows depend on the horizontal
    wavenumber magnitude ``k`` of the mode (and are undefined at (0, 0)).
    """
    key = float(k) if k is not None else None
    return _constraints_cached(component, int(n3), key)

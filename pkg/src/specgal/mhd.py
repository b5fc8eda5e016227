"""Plane-layer magnetoconvection with rotation and magnetic induction.

State variables live in spectral space: temperature coefficients plus
toroidal/poloidal potentials and horizontal mean fields for velocity and
magnetic field, per Fourier mode (n1, n2) and Chebyshev degree n3.  Time
units are thermal-diffusion units; the layer occupies x3 in [-1, 1].

Momentum:    dv/dt = v x curl v + P tau v x e_r + P lap v
                     + P R theta e_z - grad p - b x curl b
Induction:   db/dt = curl(v x b) + eta lap b
Heat:        dtheta/dt = -(v . grad) theta + v_z + lap theta

with div v = div b = 0, no-slip isothermal walls, insulating top /
perfectly conducting bottom for b, and horizontal periodicity.

Pressure never appears explicitly: the toroidal/mean parts of the
momentum right-hand side are extracted algebraically and the poloidal
part through a double curl, which annihilates gradients.  Every tendency
is mapped into its boundary-condition space with the correction step, so
boundary conditions hold after every stage of every scheme.
"""

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from . import solvers1d
from .chebyshev import differentiate, inner_weights
from .fields import (
    TPMDecomposition,
    constraints_for,
    mode_wavenumbers,
    reconstruct_vector,
)
from .galerkin import complement_basis, prepare_correction
from .transforms import (
    SpectralField3D,
    chebyshev_pad,
    fourier_pad,
    grid_to_spectral,
    spectral_to_grid,
)

__all__ = [
    "Params",
    "SpectralState",
    "EnergySample",
    "NumericalError",
    "rhs_full",
    "step_euler_explicit",
    "step_rk4",
    "step_imex_euler",
    "energies",
    "velocity_field",
    "magnetic_field",
    "random_state",
    "roll_state",
]


class NumericalError(RuntimeError):
    """Raised when a tendency or solve produces non-finite values."""


@dataclass(frozen=True)
class Params:
    """Physical parameters of the magnetoconvection run.

    ``eta`` is the magnetic diffusivity coefficient of the induction
    equation in thermal-diffusion units; if omitted it defaults to
    prandtl / pm.  ``e_r`` is the rotation axis (used exactly as given,
    not normalized).  ``l1``, ``l2`` are the horizontal periods.
    """

    prandtl: float = 1.0
    rayleigh: float = 0.0
    tau: float = 0.0
    pm: float = 1.0
    eta: float = None
    e_r: tuple = (0.0, 0.0, 1.0)
    l1: float = 2.0 * math.pi
    l2: float = 2.0 * math.pi

    def __post_init__(self):
        if self.prandtl <= 0:
            raise ValueError("Prandtl number must be positive")
        if self.pm <= 0:
            raise ValueError("magnetic Prandtl number must be positive")
        if self.eta is None:
            object.__setattr__(self, "eta", self.prandtl / self.pm)
        if self.eta <= 0:
            raise ValueError("magnetic diffusivity must be positive")
        if self.l1 <= 0 or self.l2 <= 0:
            raise ValueError("horizontal periods must be positive")
        object.__setattr__(self, "e_r", tuple(float(c) for c in self.e_r))

    @property
    def alpha1(self):
        return 2.0 * math.pi / self.l1

    @property
    def alpha2(self):
        return 2.0 * math.pi / self.l2


class EnergySample(NamedTuple):
    t: float
    e_v: float
    e_b: float


_FIELDS = (
    "theta",
    "v_tor",
    "v_pol",
    "v_mean1",
    "v_mean2",
    "b_tor",
    "b_pol",
    "b_mean1",
    "b_mean2",
)


@dataclass
class SpectralState:
    """Full spectral state at one instant.

    3D arrays have shape (2*N1+1, 2*N2+1, N3+2) in centred Fourier
    layout; mean fields are 1D of length N3+2.  The (0, 0) entries of the
    toroidal/poloidal arrays are identically zero.
    """

    theta: np.ndarray
    v_tor: np.ndarray
    v_pol: np.ndarray
    v_mean1: np.ndarray
    v_mean2: np.ndarray
    b_tor: np.ndarray
    b_pol: np.ndarray
    b_mean1: np.ndarray
    b_mean2: np.ndarray
    t: float = 0.0

    @classmethod
    def zeros(cls, n1, n2, n3, t=0.0):
        shape3 = (2 * n1 + 1, 2 * n2 + 1, n3 + 2)
        kw = {name: np.zeros(shape3, dtype=complex) for name in _FIELDS[:3]}
        kw |= {name: np.zeros(shape3, dtype=complex) for name in ("b_tor", "b_pol")}
        kw |= {name: np.zeros(n3 + 2, dtype=complex)
               for name in ("v_mean1", "v_mean2", "b_mean1", "b_mean2")}
        return cls(t=t, **kw)

    @property
    def dims(self):
        m1, m2, nc = self.theta.shape
        return ((m1 - 1) // 2, (m2 - 1) // 2, nc - 2)

    def copy(self):
        return replace(self, **{name: getattr(self, name).copy() for name in _FIELDS})


def lincomb(t, *pairs):
    """Linear combination sum(c * state) over (state, coefficient) pairs."""
    kw = {}
    for name in _FIELDS:
        kw[name] = sum(c * getattr(s, name) for s, c in pairs)
    return SpectralState(t=t, **kw)


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values in the {name} tendency")


def _cross(a, b):
    return np.stack(
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    )


def _cross_const(a, e):
    """Cross product of a stacked vector field with a constant vector."""
    e1, e2, e3 = e
    return np.stack(
        [
            a[1] * e3 - a[2] * e2,
            a[2] * e1 - a[0] * e3,
            a[0] * e2 - a[1] * e1,
        ]
    )


def _clenshaw_curtis(n_coeffs):
    """Quadrature nodes/weights for int_{-1}^{1} dx, exact for the energy
    integrand (degree <= 2*n_coeffs - 2), plus the evaluation matrix."""
    p = 2 * n_coeffs
    j = np.arange(p + 1)
    k = np.arange(p + 1)
    cosmat = np.cos(np.pi * np.outer(k, j) / p)
    scale = np.full(p + 1, 2.0 / p)
    scale[0] = scale[-1] = 1.0 / p
    analysis = cosmat * scale[None, :]
    analysis[0] *= 0.5
    analysis[-1] *= 0.5
    moments = np.zeros(p + 1)
    even = np.arange(0, p + 1, 2)
    moments[even] = 2.0 / (1.0 - even.astype(float) ** 2)
    weights = analysis.T @ moments
    eval_mat = np.cos(np.pi * np.outer(j, np.arange(n_coeffs)) / p)
    return eval_mat, weights


class _Workspace:
    """Preliminary-step products for one (resolution, parameters) pair.

    Everything here is built once and reused across time steps: constraint
    sets, complement bases, per-mode correction data for the explicit
    poloidal-velocity solve, transform sizes, quadrature, and (per time
    step size) the implicit-solve operator bundles.
    """

    def __init__(self, dims, params):
        self.dims = dims
        self.params = params
        n1, n2, n3 = dims
        self.nc = n3 + 2
        self.trunc = n3
        self.kx, self.ky, self.k2 = mode_wavenumbers(n1, n2, params.alpha1, params.alpha2)
        self.k2safe = np.where(self.k2 == 0.0, 1.0, self.k2)
        self.i0, self.j0 = n1, n2
        self.weights = inner_weights(self.nc)
        self.d2 = solvers1d._second_derivative_matrix(self.nc)
        self.d4 = self.d2 @ self.d2

        self.cs_dir = constraints_for("temperature", n3)
        self.cs_torb = constraints_for("toroidal_b", n3)
        self.cs_polv = constraints_for("poloidal_v", n3)
        self.s_dir = complement_basis(self.cs_dir, self.weights)
        self.s_torb = complement_basis(self.cs_torb, self.weights)
        self.s_polv = complement_basis(self.cs_polv, self.weights)

        # Poloidal-b rows depend on the mode's horizontal wavenumber; stack
        # the complement bases (and null bases, for implicit solves) over
        # the whole mode plane.  The (0, 0) slot gets k = 1 dummy rows; its
        # coefficients are kept identically zero anyway.
        m1, m2 = 2 * n1 + 1, 2 * n2 + 1
        r_polb = self.nc - 3
        self.s_polb = np.empty((m1, m2, 3, self.nc))
        self.z_polb = np.empty((m1, m2, self.nc, r_polb))
        for i in range(m1):
            for j in range(m2):
                kmag = math.sqrt(self.k2[i, j]) if self.k2[i, j] > 0 else 1.0
                cs = constraints_for("poloidal_b", n3, kmag)
                self.s_polb[i, j] = complement_basis(cs, self.weights)
                self.z_polb[i, j] = cs.null_basis

        # Correction data for the explicit poloidal-velocity solve
        # P_V(k^2 g - g'' - rhs) = 0, one operator per mode.
        self.q_polv_exp = self._stacked_q(
            self.cs_polv.null_basis,
            self.s_polv,
            [(self.k2safe, np.eye(self.nc)), (-1.0, self.d2)],
        )

        self.p1 = fourier_pad(m1)
        self.p2 = fourier_pad(m2)
        self.p3 = chebyshev_pad(self.nc)

        self.energy_eval, self.energy_weights = _clenshaw_curtis(self.nc)
        self._imex = {}

    # -- correction helpers -------------------------------------------------

    def _stacked_q(self, z, s, coeff_mats):
        """q_i = s_i - q~_i for a batch of operators sum_m c_m(mode) M_m.

        ``z`` is the (nc, r) null basis shared by all modes (or stacked
        (m1, m2, nc, r)); ``s`` likewise (K, nc) or stacked.  Returns the
        stacked q array (m1, m2, K, nc).
        """
        w = self.weights
        stacked_z = z.ndim == 4
        stacked_s = s.ndim == 4
        cmat = 0.0
        rhs = 0.0
        for coeff, mat in coeff_mats:
            coeff = np.asarray(coeff, dtype=float)
            wm = w[:, None] * mat
            if stacked_z:
                g = np.einsum("xynr,nm,xyms->xyrs", z, wm, z)
                r = np.einsum("xynr,nm,xykm->xyrk", z, wm, s)
            else:
                g = z.T @ wm @ z
                if stacked_s:
                    r = np.einsum("nr,nm,xykm->xyrk", z, wm, s)
                else:
                    r = z.T @ wm @ s.T
            cmat = cmat + coeff[..., None, None] * g
            rhs = rhs + coeff[..., None, None] * r
        m1, m2 = self.k2.shape
        cmat = np.broadcast_to(cmat, (m1, m2) + cmat.shape[-2:])
        rhs = np.broadcast_to(rhs, (m1, m2) + rhs.shape[-2:])
        y = np.linalg.solve(cmat, rhs)
        if stacked_z:
            q_tilde = np.einsum("xynr,xyrk->xykn", z, y)
        else:
            q_tilde = np.einsum("nr,xyrk->xykn", z, y)
        return s - q_tilde

    def project(self, arr, s):
        """Identity-operator correction (weighted projection onto V)."""
        b = arr @ (self.weights * s).T
        return arr - b @ s

    def project_polb(self, arr):
        b = np.einsum("xyn,xykn->xyk", arr * self.weights, self.s_polb)
        out = arr - np.einsum("xyk,xykn->xyn", b, self.s_polb)
        out[self.i0, self.j0] = 0.0
        return out

    def correct_stacked(self, w, s, q):
        """Correction with per-mode q (and possibly per-mode s).

        A final identity projection strips the roundoff left outside V by
        the correction arithmetic when the main-step solution is much
        larger than the corrected result (the exact-in-W solve amplifies
        top-degree content through the downward recursion).
        """
        if s.ndim == 2:
            b = w @ (self.weights * s).T
            v = w - b @ q if q.ndim == 2 else \
                w - np.einsum("xyk,xykn->xyn", b, q)
            return self.project(v, s)
        b = np.einsum("xyn,xykn->xyk", w * self.weights, s)
        v = w - np.einsum("xyk,xykn->xyn", b, q)
        bb = np.einsum("xyn,xykn->xyk", v * self.weights, s)
        return v - np.einsum("xyk,xykn->xyn", bb, s)

    # -- spectral helpers ---------------------------------------------------

    def lap_mode(self, arr):
        """Per-mode Laplacian -k^2 + d^2/dx3^2 of stacked series."""
        return -self.k2[:, :, None] * arr + arr @ self.d2.T

    def d2_apply(self, arr):
        return arr @ self.d2.T

    def tp_split(self, data):
        """Toroidal/poloidal potentials and means of a solenoidal field."""
        ikx = 1j * self.kx[:, None, None]
        iky = 1j * self.ky[None, :, None]
        k2s = self.k2safe[:, :, None]
        g_tor = (ikx * data[1] - iky * data[0]) / k2s
        g_pol = data[2] / k2s
        g_tor[self.i0, self.j0] = 0.0
        g_pol[self.i0, self.j0] = 0.0
        return g_tor, g_pol, data[0, self.i0, self.j0], data[1, self.i0, self.j0]

    def curl(self, data):
        ikx = 1j * self.kx[:, None, None]
        iky = 1j * self.ky[None, :, None]
        out = np.empty_like(data)
        out[0] = iky * data[2] - differentiate(data[1])
        out[1] = differentiate(data[0]) - ikx * data[2]
        out[2] = ikx * data[1] - iky * data[0]
        return out

    def poloidal_rhs(self, data):
        ikx = 1j * self.kx[:, None, None]
        iky = 1j * self.ky[None, :, None]
        return (
            self.k2[:, :, None] * data[2]
            + ikx * differentiate(data[0])
            + iky * differentiate(data[1])
        )

    def to_grid(self, data):
        return spectral_to_grid(data, self.p1, self.p2, self.p3, real=True)

    def to_modes(self, values):
        n1, n2, n3 = self.dims
        return grid_to_spectral(values, n1, n2, n3 + 2)

    def reconstruct(self, g_tor, g_pol, mean1, mean2):
        dec = TPMDecomposition(
            g_tor=g_tor,
            g_pol=g_pol,
            mean1=mean1,
            mean2=mean2,
            alpha1=self.params.alpha1,
            alpha2=self.params.alpha2,
        )
        return reconstruct_vector(dec).data

    # -- right-hand side ----------------------------------------------------

    def _raw_terms(self, state, linear_only):
        """Reconstructions plus the dealiased quadratic terms.

        Returns (v, b, adv_theta_hat, curl_e, f_quad_hat): the advective
        temperature term -(v.grad)theta, curl(v x b), and
        v x curl v - b x curl b, all spectral (zero when linear_only).
        """
        v = self.reconstruct(state.v_tor, state.v_pol, state.v_mean1, state.v_mean2)
        b = self.reconstruct(state.b_tor, state.b_pol, state.b_mean1, state.b_mean2)
        if linear_only:
            zero3 = np.zeros_like(v)
            return v, b, np.zeros_like(state.theta), zero3, zero3
        ikx = 1j * self.kx[:, None, None]
        iky = 1j * self.ky[None, :, None]
        grad_theta = np.stack(
            [ikx * state.theta, iky * state.theta, differentiate(state.theta)]
        )
        omega = self.curl(v)
        jcur = self.curl(b)
        # one batched transform for all fifteen scalar lines
        grids = self.to_grid(np.concatenate([v, b, omega, jcur, grad_theta]))
        vp, bp, op, jp, gp = (grids[3 * i : 3 * i + 3] for i in range(5))
        adv = -(vp * gp).sum(axis=0)
        emf = _cross(vp, bp)
        f_quad = _cross(vp, op) - _cross(bp, jp)
        hats = self.to_modes(np.concatenate([adv[None], emf, f_quad]))
        # products of real fields are real; make the conjugate symmetry of
        # the forward transforms exact so it is preserved indefinitely
        hats = _hermitian(hats)
        return v, b, hats[0], self.curl(hats[1:4]), hats[4:7]

    def _momentum_working_field(self, state, v, f_quad_hat):
        """Momentum right-hand side without pressure and without diffusion."""
        p = self.params
        ft = f_quad_hat + p.prandtl * p.tau * _cross_const(v, p.e_r)
        ft[2] = ft[2] + p.prandtl * p.rayleigh * state.theta
        return ft

    def rhs(self, state, linear_only=False):
        """Full explicit tendency, each component corrected into its space."""
        p = self.params
        v, b, adv_hat, curl_e, f_quad_hat = self._raw_terms(state, linear_only)

        f_theta = adv_hat + v[2] + self.lap_mode(state.theta)
        theta_t = self.project(f_theta, self.s_dir)
        _check_finite("temperature", theta_t)

        g_tor_b, g_pol_b, em1, em2 = self.tp_split(curl_e)
        b_tor_t = self.project(g_tor_b + p.eta * self.lap_mode(state.b_tor), self.s_torb)
        b_pol_t = self.project_polb(g_pol_b + p.eta * self.lap_mode(state.b_pol))
        b_m1_t = self.project(em1 + p.eta * self.d2_apply(state.b_mean1), self.s_torb)
        b_m2_t = self.project(em2 + p.eta * self.d2_apply(state.b_mean2), self.s_torb)
        _check_finite("magnetic", b_tor_t)

        ft = self._momentum_working_field(state, v, f_quad_hat)
        ikx = 1j * self.kx[:, None, None]
        iky = 1j * self.ky[None, :, None]
        g_tor_v = (ikx * ft[1] - iky * ft[0]) / self.k2safe[:, :, None]
        g_tor_v[self.i0, self.j0] = 0.0
        v_tor_t = self.project(
            g_tor_v + p.prandtl * self.lap_mode(state.v_tor), self.s_dir
        )
        v_m1_t = self.project(
            ft[0, self.i0, self.j0] + p.prandtl * self.d2_apply(state.v_mean1), self.s_dir
        )
        v_m2_t = self.project(
            ft[1, self.i0, self.j0] + p.prandtl * self.d2_apply(state.v_mean2), self.s_dir
        )

        rhs_pol = self.poloidal_rhs(ft) / self.k2safe[:, :, None]
        g_dot = solvers1d.helmholtz_main_step(self.k2safe, -1.0, rhs_pol, self.trunc)
        g_dot = g_dot + p.prandtl * self.lap_mode(state.v_pol)
        v_pol_t = self.correct_stacked(g_dot, self.s_polv, self.q_polv_exp)
        v_pol_t[self.i0, self.j0] = 0.0
        _check_finite("velocity", v_pol_t)

        return SpectralState(
            theta=theta_t,
            v_tor=v_tor_t,
            v_pol=v_pol_t,
            v_mean1=v_m1_t,
            v_mean2=v_m2_t,
            b_tor=b_tor_t,
            b_pol=b_pol_t,
            b_mean1=b_m1_t,
            b_mean2=b_m2_t,
            t=0.0,
        )

    # -- implicit-explicit Euler ---------------------------------------------

    def imex_operators(self, dt):
        ops = self._imex.get(dt)
        if ops is None:
            ops = _ImexOperators(self, dt)
            self._imex[dt] = ops
        return ops

    def imex_step(self, state, dt, linear_only=False):
        """One implicit-explicit Euler step: stiff diffusion implicit, the
        quadratic, rotation and buoyancy terms explicit."""
        p = self.params
        ops = self.imex_operators(dt)
        v, b, adv_hat, curl_e, f_quad_hat = self._raw_terms(state, linear_only)

        f_theta = state.theta + dt * (adv_hat + v[2])
        theta_n = solvers1d.helmholtz_main_step(ops.alpha_theta, -dt, f_theta, self.trunc)
        theta_n = self.correct_stacked(theta_n, self.s_dir, ops.q_theta)
        _check_finite("temperature", theta_n)

        g_tor_b, g_pol_b, em1, em2 = self.tp_split(curl_e)
        f_btor = state.b_tor + dt * g_tor_b
        b_tor_n = solvers1d.helmholtz_main_step(ops.alpha_b, -dt * p.eta, f_btor, self.trunc)
        b_tor_n = self.correct_stacked(b_tor_n, self.s_torb, ops.q_btor)
        f_bpol = state.b_pol + dt * g_pol_b
        b_pol_n = solvers1d.helmholtz_main_step(ops.alpha_b, -dt * p.eta, f_bpol, self.trunc)
        b_pol_n = self.correct_stacked(b_pol_n, self.s_polb, ops.q_bpol)
        b_pol_n[self.i0, self.j0] = 0.0
        b_m1_n = self.project(
            solvers1d.solve_helmholtz(
                solvers1d.HelmholtzProblem(
                    1.0, -dt * p.eta, state.b_mean1 + dt * em1, self.trunc
                ),
                ops.cb_bmean,
            ),
            self.s_torb,
        )
        b_m2_n = self.project(
            solvers1d.solve_helmholtz(
                solvers1d.HelmholtzProblem(
                    1.0, -dt * p.eta, state.b_mean2 + dt * em2, self.trunc
                ),
                ops.cb_bmean,
            ),
            self.s_torb,
        )
        _check_finite("magnetic", b_pol_n)

        ft = self._momentum_working_field(state, v, f_quad_hat)
        ikx = 1j * self.kx[:, None, None]
        iky = 1j * self.ky[None, :, None]
        g_tor_v = (ikx * ft[1] - iky * ft[0]) / self.k2safe[:, :, None]
        g_tor_v[self.i0, self.j0] = 0.0
        f_vtor = state.v_tor + dt * g_tor_v
        v_tor_n = solvers1d.helmholtz_main_step(
            ops.alpha_vtor, -dt * p.prandtl, f_vtor, self.trunc
        )
        v_tor_n = self.correct_stacked(v_tor_n, self.s_dir, ops.q_vtor)
        v_m1_n = self.project(
            solvers1d.solve_helmholtz(
                solvers1d.HelmholtzProblem(
                    1.0, -dt * p.prandtl, state.v_mean1 + dt * ft[0, self.i0, self.j0],
                    self.trunc,
                ),
                ops.cb_vmean,
            ),
            self.s_dir,
        )
        v_m2_n = self.project(
            solvers1d.solve_helmholtz(
                solvers1d.HelmholtzProblem(
                    1.0, -dt * p.prandtl, state.v_mean2 + dt * ft[1, self.i0, self.j0],
                    self.trunc,
                ),
                ops.cb_vmean,
            ),
            self.s_dir,
        )

        # Poloidal velocity: the double-curled implicit operator is fourth
        # order; its right-hand side carries the current field through the
        # second-order form k^2 g - g''.
        rhs_pol = self.poloidal_rhs(ft) / self.k2safe[:, :, None]
        f_vpol = (
            self.k2[:, :, None] * state.v_pol
            - self.d2_apply(state.v_pol)
            + dt * rhs_pol
        )
        v_pol_n = solvers1d.fourth_order_main_step(
            ops.c0_vpol, ops.c2_vpol, ops.c4_vpol, f_vpol, self.trunc
        )
        v_pol_n = self.correct_stacked(v_pol_n, self.s_polv, ops.q_vpol)
        v_pol_n[self.i0, self.j0] = 0.0
        _check_finite("velocity", v_pol_n)

        return SpectralState(
            theta=theta_n,
            v_tor=v_tor_n,
            v_pol=v_pol_n,
            v_mean1=v_m1_n,
            v_mean2=v_m2_n,
            b_tor=b_tor_n,
            b_pol=b_pol_n,
            b_mean1=b_m1_n,
            b_mean2=b_m2_n,
            t=state.t + dt,
        )

    # -- diagnostics ----------------------------------------------------------

    def energy_of(self, data):
        vals = np.tensordot(data, self.energy_eval, axes=([-1], [1]))
        cell = 0.5 * self.params.l1 * self.params.l2
        return cell * float(np.sum(self.energy_weights * np.abs(vals) ** 2))


class _ImexOperators:
    """Per-time-step-size implicit operator bundle (built once, reused)."""

    def __init__(self, ws, dt):
        p = ws.params
        eye = np.eye(ws.nc)
        k2 = ws.k2
        self.alpha_theta = 1.0 + dt * k2
        self.alpha_vtor = 1.0 + dt * p.prandtl * k2
        self.alpha_b = 1.0 + dt * p.eta * k2
        self.q_theta = ws._stacked_q(
            ws.cs_dir.null_basis, ws.s_dir, [(self.alpha_theta, eye), (-dt, ws.d2)]
        )
        self.q_vtor = ws._stacked_q(
            ws.cs_dir.null_basis,
            ws.s_dir,
            [(self.alpha_vtor, eye), (-dt * p.prandtl, ws.d2)],
        )
        self.q_btor = ws._stacked_q(
            ws.cs_torb.null_basis, ws.s_torb, [(self.alpha_b, eye), (-dt * p.eta, ws.d2)]
        )
        self.q_bpol = ws._stacked_q(
            ws.z_polb, ws.s_polb, [(self.alpha_b, eye), (-dt * p.eta, ws.d2)]
        )
        # Unconditionally stable implicit diffusion for the fourth-order
        # poloidal operator: k^2(1 + dt P k^2) g - (1 + 2 dt P k^2) g''
        # + dt P g''''.
        self.c0_vpol = ws.k2safe * (1.0 + dt * p.prandtl * ws.k2safe)
        self.c2_vpol = -(1.0 + 2.0 * dt * p.prandtl * ws.k2safe)
        self.c4_vpol = np.full_like(ws.k2safe, dt * p.prandtl)
        self.q_vpol = ws._stacked_q(
            ws.cs_polv.null_basis,
            ws.s_polv,
            [(self.c0_vpol, eye), (self.c2_vpol, ws.d2), (self.c4_vpol, ws.d4)],
        )
        self.cb_vmean = prepare_correction(
            ws.cs_dir,
            np.eye(ws.nc) - dt * p.prandtl * ws.d2,
            ws.weights,
            operator_id=f"imex mean velocity dt={dt}",
        )
        self.cb_bmean = prepare_correction(
            ws.cs_torb,
            np.eye(ws.nc) - dt * p.eta * ws.d2,
            ws.weights,
            operator_id=f"imex mean magnetic dt={dt}",
        )


_WORKSPACES = {}


def _workspace(dims, params):
    key = (tuple(dims), params)
    ws = _WORKSPACES.get(key)
    if ws is None:
        ws = _Workspace(tuple(dims), params)
        _WORKSPACES[key] = ws
    return ws


# -- public operations --------------------------------------------------------


def rhs_full(state, params, linear_only=False):
    """Full right-hand side (tendency) of the coupled system.

    Nonlinear products are evaluated on the dealiased physical grid;
    pressure is removed by the toroidal/poloidal reduction; every
    component is corrected into its boundary-condition space.  With
    ``linear_only`` the quadratic terms are skipped (testing hook).
    """
    return _workspace(state.dims, params).rhs(state, linear_only)


def step_euler_explicit(state, params, dt, linear_only=False):
    """Forward Euler step u + dt * P f(u)."""
    if dt <= 0:
        raise ValueError("time step must be positive")
    ws = _workspace(state.dims, params)
    tend = ws.rhs(state, linear_only)
    return lincomb(state.t + dt, (state, 1.0), (tend, dt))


def step_rk4(state, params, dt, linear_only=False):
    """Classical fourth-order Runge-Kutta step with projected stages."""
    if dt <= 0:
        raise ValueError("time step must be positive")
    ws = _workspace(state.dims, params)
    d1 = ws.rhs(state, linear_only)
    d2 = ws.rhs(lincomb(state.t, (state, 1.0), (d1, dt / 2)), linear_only)
    d3 = ws.rhs(lincomb(state.t, (state, 1.0), (d2, dt / 2)), linear_only)
    d4 = ws.rhs(lincomb(state.t, (state, 1.0), (d3, dt)), linear_only)
    return lincomb(
        state.t + dt,
        (state, 1.0),
        (d1, dt / 6),
        (d2, dt / 3),
        (d3, dt / 3),
        (d4, dt / 6),
    )


def step_imex_euler(state, params, dt, linear_only=False):
    """Implicit-explicit Euler step: implicit diffusion, explicit rest."""
    if dt <= 0:
        raise ValueError("time step must be positive")
    return _workspace(state.dims, params).imex_step(state, dt, linear_only)


def velocity_field(state, params):
    """Reconstructed 3-component spectral velocity field."""
    ws = _workspace(state.dims, params)
    data = ws.reconstruct(state.v_tor, state.v_pol, state.v_mean1, state.v_mean2)
    return SpectralField3D(data, params.alpha1, params.alpha2, real=True)


def magnetic_field(state, params):
    """Reconstructed 3-component spectral magnetic field."""
    ws = _workspace(state.dims, params)
    data = ws.reconstruct(state.b_tor, state.b_pol, state.b_mean1, state.b_mean2)
    return SpectralField3D(data, params.alpha1, params.alpha2, real=True)


def energies(state, params):
    """Kinetic and magnetic energies over one periodicity cell.

    E = 1/2 int |field|^2 dV via Fourier-Parseval in the horizontal
    directions and Clenshaw-Curtis quadrature in x3 (exact for the
    polynomial integrand).
    """
    ws = _workspace(state.dims, params)
    ev = ws.energy_of(ws.reconstruct(state.v_tor, state.v_pol, state.v_mean1, state.v_mean2))
    eb = ws.energy_of(ws.reconstruct(state.b_tor, state.b_pol, state.b_mean1, state.b_mean2))
    return EnergySample(t=state.t, e_v=ev, e_b=eb)


# -- initial conditions --------------------------------------------------------


def _hermitian(arr):
    """Symmetrize a centred-layout mode array so the field is real.

    Flips the two Fourier axes (third- and second-to-last), so scalar
    (m1, m2, nc) and stacked vector (3, m1, m2, nc) arrays both work.
    """
    return 0.5 * (arr + np.conj(arr[..., ::-1, ::-1, :]))


def project_state(state, params):
    """Project every component of a state into its boundary-condition space."""
    ws = _workspace(state.dims, params)
    state.theta = ws.project(state.theta, ws.s_dir)
    state.v_tor = ws.project(state.v_tor, ws.s_dir)
    state.v_pol = ws.project(state.v_pol, ws.s_polv)
    state.v_pol[ws.i0, ws.j0] = 0.0
    state.v_tor[ws.i0, ws.j0] = 0.0
    state.b_tor = ws.project(state.b_tor, ws.s_torb)
    state.b_tor[ws.i0, ws.j0] = 0.0
    state.b_pol = ws.project_polb(state.b_pol)
    state.v_mean1 = ws.project(state.v_mean1, ws.s_dir)
    state.v_mean2 = ws.project(state.v_mean2, ws.s_dir)
    state.b_mean1 = ws.project(state.b_mean1, ws.s_torb)
    state.b_mean2 = ws.project(state.b_mean2, ws.s_torb)
    return state


def random_state(n1, n2, n3, params, seed=0, amp_theta=0.1, amp_v=1.0, amp_b=1e-3):
    """Seeded random low-mode state, solenoidal and boundary-compatible.

    Only modes with |n1|, |n2| <= 2 are populated, with geometrically
    tapered Chebyshev profiles; every component is then projected into its
    constraint space.
    """
    rng = np.random.default_rng(seed)
    state = SpectralState.zeros(n1, n2, n3)
    nc = n3 + 2
    taper = 0.5 ** np.arange(nc)
    taper[min(6, nc):] = 0.0  # smooth vertical profiles only
    w1, w2 = min(2, n1), min(2, n2)

    def rand3(amp):
        arr = np.zeros((2 * n1 + 1, 2 * n2 + 1, nc), dtype=complex)
        block = rng.standard_normal((2 * w1 + 1, 2 * w2 + 1, nc))
        block = block + 1j * rng.standard_normal(block.shape)
        arr[n1 - w1 : n1 + w1 + 1, n2 - w2 : n2 + w2 + 1, :] = amp * block * taper
        return _hermitian(arr)

    def rand1(amp):
        return (amp * rng.standard_normal(nc) * taper).astype(complex)

    state.theta = rand3(amp_theta)
    state.v_tor = rand3(amp_v)
    state.v_pol = rand3(amp_v)
    state.v_mean1 = rand1(amp_v)
    state.v_mean2 = rand1(amp_v)
    state.b_tor = rand3(amp_b)
    state.b_pol = rand3(amp_b)
    state.b_mean1 = rand1(amp_b)
    state.b_mean2 = rand1(amp_b)
    return project_state(state, params)


def roll_state(n1, n2, n3, params, amp_theta=0.5, amp_v=1.0, amp_b=1e-3):
    """Single-roll analytic perturbation: one horizontal mode, smooth
    boundary-compatible vertical profiles, plus a small magnetic seed."""
    if n1 < 1:
        raise ValueError("roll initial condition needs N1 >= 1")
    state = SpectralState.zeros(n1, n2, n3)
    nc = n3 + 2
    # (1 - x^2)^2 and (1 - x^2): clamped / Dirichlet vertical profiles.
    clamped = np.zeros(nc)
    clamped[0], clamped[2], clamped[4] = 3.0 / 8.0, -0.5, 1.0 / 8.0
    dirich = np.zeros(nc)
    dirich[0], dirich[2] = 0.5, -0.5
    i0, j0 = n1, n2
    for di in (-1, 1):
        state.v_pol[i0 + di, j0] = 0.5 * amp_v * clamped
        state.theta[i0 + di, j0] = 0.5 * amp_theta * dirich
        state.b_pol[i0 + di, j0] = 0.5 * amp_b * clamped
        if n2 >= 1:
            state.b_tor[i0, j0 + di] = 0.5 * amp_b * dirich
    state.b_mean1 = (amp_b * dirich).astype(complex)
    return project_state(state, params)

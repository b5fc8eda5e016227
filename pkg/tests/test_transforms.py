import numpy as np
import numpy.polynomial.chebyshev as npcheb
import pytest

from specgal.transforms import (
    PhysicalField3D,
    SpectralField3D,
    chebyshev_pad,
    fourier_pad,
    gauss_lobatto_nodes,
    pointwise_product,
    to_physical,
    to_spectral,
)

ALPHA = 1.0


def spectral(n1, n2, n3, data=None, real=True):
    shape = (2 * n1 + 1, 2 * n2 + 1, n3 + 2)
    arr = np.zeros(shape, dtype=complex) if data is None else data
    return SpectralField3D(arr, ALPHA, ALPHA, real=real)


def set_mode(field, n1, n2, n3, value):
    nmax1 = field.n1
    nmax2 = field.n2
    field.data[n1 + nmax1, n2 + nmax2, n3] = value


def random_real_field(n1, n2, n3, seed):
    rng = np.random.default_rng(seed)
    shape = (2 * n1 + 1, 2 * n2 + 1, n3 + 2)
    arr = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    arr = 0.5 * (arr + np.conj(arr[::-1, ::-1]))
    return spectral(n1, n2, n3, arr)


class TestPadding:
    def test_fourier_rule(self):
        assert fourier_pad(2 * 4 + 1) >= 3 * (2 * 4 + 1) / 2

    def test_chebyshev_rule(self):
        assert chebyshev_pad(8 + 2) >= 3 * (8 + 2) / 2


class TestToPhysical:
    def test_constant_mode(self):
        u = spectral(2, 2, 4)
        set_mode(u, 0, 0, 0, 3.5)
        p = to_physical(u)
        np.testing.assert_allclose(p.values, 3.5, atol=1e-13)

    def test_t1_gives_lobatto_nodes(self):
        u = spectral(2, 2, 4)
        set_mode(u, 0, 0, 1, 1.0)
        p = to_physical(u)
        nodes = gauss_lobatto_nodes(chebyshev_pad(6))
        np.testing.assert_allclose(p.values[0, 0], nodes, atol=1e-13)

    def test_single_fourier_mode_samples_exponential(self):
        u = spectral(3, 2, 3, real=False)
        set_mode(u, 2, -1, 0, 1.0 + 0.5j)
        u.real = False
        p = to_physical(u)
        p1, p2 = p.values.shape[0], p.values.shape[1]
        x1 = 2 * np.pi * np.arange(p1) / p1
        x2 = 2 * np.pi * np.arange(p2) / p2
        expected = (1.0 + 0.5j) * np.exp(1j * (2 * x1[:, None] - x2[None, :]))
        np.testing.assert_allclose(p.values[:, :, 0], expected, atol=1e-12)


class TestRoundTrip:
    @pytest.mark.parametrize("seed", range(4))
    def test_round_trip_identity(self, seed):
        u = random_real_field(3, 2, 5, seed)
        back = to_spectral(to_physical(u), u.dims)
        np.testing.assert_allclose(back.data, u.data, atol=1e-13)

    def test_zero(self):
        u = spectral(2, 2, 3)
        p = to_physical(u)
        assert np.all(to_spectral(p, u.dims).data == 0)

    def test_cosine_splits_into_conjugate_modes(self):
        n1 = 3
        dims = (n1, 0, 2)
        p1 = fourier_pad(2 * n1 + 1)
        p2 = fourier_pad(1)
        p3 = chebyshev_pad(4)
        x1 = 2 * np.pi * np.arange(p1) / p1
        vals = np.broadcast_to(
            np.cos(x1)[:, None, None], (p1, p2, p3 + 1)
        ).copy()
        u = to_spectral(PhysicalField3D(vals, ALPHA, ALPHA), dims)
        assert u.data[n1 + 1, 0, 0] == pytest.approx(0.5)
        assert u.data[n1 - 1, 0, 0] == pytest.approx(0.5)
        u.data[n1 + 1, 0, 0] = 0
        u.data[n1 - 1, 0, 0] = 0
        assert np.abs(u.data).max() < 1e-14

    def test_grid_mismatch_rejected(self):
        u = random_real_field(2, 2, 4, 0)
        p = to_physical(u)
        with pytest.raises(ValueError, match="padded"):
            to_spectral(p, (3, 2, 4))


def convolve_oracle(a, b):
    """Direct mode-by-mode convolution with exact Chebyshev products."""
    n1, n2, n3 = a.dims
    nc = n3 + 2
    out = np.zeros_like(a.data)
    for i1 in range(-n1, n1 + 1):
        for j1 in range(-n2, n2 + 1):
            for i2 in range(-n1, n1 + 1):
                for j2 in range(-n2, n2 + 1):
                    i, j = i1 + i2, j1 + j2
                    if abs(i) > n1 or abs(j) > n2:
                        continue
                    ca = a.data[i1 + n1, j1 + n2]
                    cb = b.data[i2 + n1, j2 + n2]
                    prod = npcheb.chebmul(ca, cb)[: nc]
                    out[i + n1, j + n2, : len(prod)] += prod
    return out


class TestPointwiseProduct:
    def test_constant_times_field(self):
        a = spectral(2, 2, 4)
        set_mode(a, 0, 0, 0, 2.0)
        b = random_real_field(2, 2, 4, 3)
        prod = pointwise_product(a, b)
        np.testing.assert_allclose(prod.data, 2.0 * b.data, atol=1e-12)

    def test_conjugate_exponentials_cancel(self):
        a = spectral(2, 1, 2, real=False)
        b = spectral(2, 1, 2, real=False)
        set_mode(a, 1, 0, 0, 1.0)
        set_mode(b, -1, 0, 0, 1.0)
        prod = pointwise_product(a, b)
        assert prod.data[2, 1, 0] == pytest.approx(1.0)
        prod.data[2, 1, 0] = 0
        assert np.abs(prod.data).max() < 1e-14

    @pytest.mark.parametrize("seed", range(3))
    def test_matches_convolution_oracle(self, seed):
        a = random_real_field(2, 2, 4, 10 + seed)
        b = random_real_field(2, 2, 4, 20 + seed)
        prod = pointwise_product(a, b)
        oracle = convolve_oracle(a, b)
        np.testing.assert_allclose(prod.data, oracle, atol=1e-12)

    def test_no_aliased_images_at_max_mode(self):
        # modes at +-N1 produce content only at 2 N1 (discarded) and 0
        n1 = 2
        a = spectral(n1, 1, 3, real=False)
        b = spectral(n1, 1, 3, real=False)
        set_mode(a, n1, 0, 0, 1.0)
        set_mode(b, n1, 0, 0, 1.0)
        prod = pointwise_product(a, b)
        oracle = convolve_oracle(a, b)  # exact: everything truncated away
        np.testing.assert_allclose(prod.data, oracle, atol=1e-13)
        assert np.abs(prod.data).max() < 1e-13


class TestInvariants:
    def test_parseval(self):
        # spectral norm with the true quadrature weights equals the
        # physical-grid quadrature (trapezoid in the Fourier directions,
        # Gauss-Lobatto in x3 with the Chebyshev weight)
        u = random_real_field(2, 2, 4, 42)
        p = to_physical(u)
        p1, p2, np3 = p.values.shape
        p3 = np3 - 1
        wq = np.full(p3 + 1, np.pi / p3)
        wq[0] *= 0.5
        wq[-1] *= 0.5
        phys = np.sum(np.abs(p.values) ** 2 * wq) / (p1 * p2)
        wcheb = np.full(u.data.shape[-1], np.pi / 2)
        wcheb[0] = np.pi
        spec = np.sum(wcheb * np.abs(u.data) ** 2)
        assert phys == pytest.approx(spec, rel=1e-11)

    def test_reality_preserved(self):
        u = random_real_field(3, 3, 5, 7)
        v = random_real_field(3, 3, 5, 8)
        prod = pointwise_product(u, v)
        sym = np.conj(prod.data[::-1, ::-1])
        np.testing.assert_allclose(prod.data, sym, atol=1e-13)

    def test_linearity(self):
        u = random_real_field(2, 2, 4, 1)
        v = random_real_field(2, 2, 4, 2)
        both = SpectralField3D(u.data + 2.0 * v.data, ALPHA, ALPHA)
        pu = to_physical(u).values
        pv = to_physical(v).values
        pb = to_physical(both).values
        np.testing.assert_allclose(pb, pu + 2.0 * pv, atol=1e-12)

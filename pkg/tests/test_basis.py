import math

import numpy as np
import pytest

from stochexpand import basis, quadrature
from stochexpand.basis import Interval, bessel_roots, gram_matrix, haar_index

IV = Interval(0.0, 1.0)


class TestEvaluation:
    def test_legendre_constant_member(self):
        assert basis.legendre(IV).eval(0, 0.3) == pytest.approx(1.0)

    def test_legendre_scaled_interval(self):
        sys = basis.legendre(Interval(2.0, 6.0))
        # phi_0 = 1/sqrt(T - t)
        assert sys.eval(0, 3.7) == pytest.approx(0.5)

    def test_trigonometric_constant(self):
        assert basis.trigonometric(IV).eval(0, 0.7) == pytest.approx(1.0)

    def test_trigonometric_ordering(self):
        sys = basis.trigonometric(IV)
        x = 0.13
        assert sys.eval(1, x) == pytest.approx(math.sqrt(2) * math.sin(2 * math.pi * x))
        assert sys.eval(2, x) == pytest.approx(math.sqrt(2) * math.cos(2 * math.pi * x))
        assert sys.eval(3, x) == pytest.approx(math.sqrt(2) * math.sin(4 * math.pi * x))

    def test_haar_first_member_values(self):
        sys = basis.haar(IV)
        assert sys.eval(1, 0.25) == pytest.approx(1.0)
        assert sys.eval(1, 0.75) == pytest.approx(-1.0)

    def test_haar_right_continuity(self):
        sys = basis.haar(IV)
        eps = 1e-12
        # at the midpoint jump the value is the right limit
        assert sys.eval(1, 0.5) == pytest.approx(sys.eval(1, 0.5 + eps))
        assert sys.eval(1, 0.5) != pytest.approx(sys.eval(1, 0.5 - eps))

    def test_haar_indexing(self):
        assert haar_index(1) == (0, 1)
        assert haar_index(2) == (1, 1)
        assert haar_index(3) == (1, 2)
        assert haar_index(4) == (2, 1)

    def test_walsh_is_product_of_rademacher(self):
        sys = basis.walsh(IV)
        x = np.linspace(0.01, 0.99, 37)
        r1 = (-1.0) ** np.floor(2 * x)
        r2 = (-1.0) ** np.floor(4 * x)
        assert np.allclose(sys.eval(3, x), r1 * r2)

    def test_walsh_index_range(self):
        sys = basis.walsh(IV, max_bits=3)
        with pytest.raises(IndexError):
            sys.eval(8, 0.5)

    def test_negative_index_rejected(self):
        with pytest.raises(IndexError):
            basis.legendre(IV).eval(-1, 0.5)

    def test_bessel_unit_is_sqrt_scaled(self):
        w = basis.bessel_weighted(1.0, 0)
        u = basis.bessel_unit(1.0, 0)
        x = np.linspace(0.05, 0.95, 11)
        assert np.allclose(u.eval(4, x), np.sqrt(x) * w.eval(4, x))

    def test_bessel_requires_zero_start(self):
        with pytest.raises(ValueError):
            basis.OrthonormalSystem("bessel_weighted", Interval(0.5, 1.0))


class TestGram:
    @pytest.mark.parametrize("factory,count,tol", [
        (basis.legendre, 8, 1e-12),
        (basis.trigonometric, 8, 1e-12),
        (basis.haar, 7, 1e-13),
        (basis.walsh, 8, 1e-13),
    ])
    def test_unit_weight_systems(self, factory, count, tol):
        gram = gram_matrix(factory(IV), count)
        assert np.max(np.abs(gram - np.eye(count))) < tol

    def test_bessel_weighted(self):
        gram = gram_matrix(basis.bessel_weighted(1.0, 0), 5)
        assert np.max(np.abs(gram - np.eye(5))) < 1e-8

    def test_bessel_normalization(self):
        sys = basis.bessel_weighted(2.0, 0)
        for j in range(11):
            val, _ = quadrature.integrate(lambda x: sys.eval(j, x) ** 2 * x, 0.0, 2.0)
            assert val == pytest.approx(1.0, abs=1e-8)

    def test_shifted_interval(self):
        gram = gram_matrix(basis.legendre(Interval(1.5, 4.0)), 6)
        assert np.max(np.abs(gram - np.eye(6))) < 1e-12


class TestRoots:
    def test_j0_first_zeros(self):
        roots = bessel_roots(0, 3).roots
        assert roots == pytest.approx(
            [2.404825557695773, 5.520078110286311, 8.653727912911012], abs=1e-12)

    def test_j1_first_zero(self):
        assert bessel_roots(1, 1).roots[0] == pytest.approx(3.831705970207512, abs=1e-12)

    def test_roots_increase(self):
        roots = bessel_roots(2, 20).roots
        assert np.all(np.diff(roots) > 0)
        # consecutive large zeros approach spacing pi
        assert np.all(np.diff(roots) < math.pi + 1.0)


def test_completeness_proxy_projection_error():
    # L2 error of projecting f(x) = x decreases monotonically with degree
    sys = basis.legendre(IV)
    norm_sq = 1.0 / 3.0
    errors = []
    for p in range(13):
        coeffs = [quadrature.integrate(lambda x, j=j: x * sys.eval(j, x), 0.0, 1.0)[0]
                  for j in range(p + 1)]
        errors.append(norm_sq - sum(c * c for c in coeffs))
    assert all(a >= b - 1e-13 for a, b in zip(errors, errors[1:]))
    assert errors[1] < 1e-12  # linear f is captured exactly at degree 1

"""Tests for core.special: Gamma/Beta helpers, incomplete gamma and E_v."""
import math
import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy import integrate, special as sp

from core.errors import DivergenceError, DomainError
from core.special import (
    EXPINT_SWITCH,
    beta_fn,
    gamma_fn,
    gamma_ratio,
    generalized_expint,
    log_beta,
    lower_incomplete_gamma,
    regularized_lower_gamma,
    upper_incomplete_gamma,
)


class TestGammaBeta(unittest.TestCase):
    def test_gamma_integers(self):
        self.assertAlmostEqual(gamma_fn(5.0), 24.0, places=12)
        assert_allclose(gamma_fn(np.array([1.0, 2.0, 3.0])), [1.0, 1.0, 2.0])

    def test_gamma_pole(self):
        with self.assertRaises(DomainError):
            gamma_fn(-2.0)

    def test_gamma_ratio_beyond_overflow(self):
        # Γ(301)/Γ(300) = 300 although both factors overflow a double
        self.assertAlmostEqual(gamma_ratio(301.0, 300.0), 300.0, delta=1e-8)
        # Γ(N+1)/Γ(N+1/3) ~ N^{2/3}
        n = 1e6
        self.assertAlmostEqual(gamma_ratio(n + 1.0, n + 1.0 / 3.0) / n ** (2.0 / 3.0), 1.0, places=5)

    def test_beta_symmetry(self):
        for x, y in [(0.3, 7.0), (2.5, 46.0), (11.0, 1.0 / 3.0)]:
            self.assertEqual(beta_fn(x, y), beta_fn(y, x), "beta must be symmetric bit for bit")
            self.assertAlmostEqual(log_beta(x, y), math.log(beta_fn(x, y)), places=10)

    def test_beta_domain(self):
        with self.assertRaises(DomainError):
            beta_fn(0.0, 1.0)


class TestIncompleteGamma(unittest.TestCase):
    def test_lower_plus_upper(self):
        for s in (0.5, 1.0, 3.7, 20.0):
            for x in (0.01, 1.0, 5.0, 40.0):
                total = lower_incomplete_gamma(s, x) + upper_incomplete_gamma(s, x)
                self.assertAlmostEqual(total / gamma_fn(s), 1.0, places=10)

    def test_regularized_matches_quadrature(self):
        s, x = 2.3, 1.7
        direct = integrate.quad(lambda t: t ** (s - 1) * math.exp(-t), 0.0, x)[0] / gamma_fn(s)
        self.assertAlmostEqual(regularized_lower_gamma(s, x), direct, places=10)

    def test_domain(self):
        with self.assertRaises(DomainError):
            regularized_lower_gamma(0.0, 1.0)
        with self.assertRaises(DomainError):
            lower_incomplete_gamma(1.0, -0.5)


class TestGeneralizedExpint(unittest.TestCase):
    def test_integer_orders_match_scipy(self):
        x = np.array([1e-6, 0.01, 0.5, 1.0, 1.49, 1.51, 3.0, 10.0, 50.0])
        for n in (1, 2, 5):
            assert_allclose(generalized_expint(n, x), sp.expn(n, x), rtol=1e-10)

    def test_real_order_matches_quadrature(self):
        for v in (1.7142857, 2.25, 3.5):
            for x in (0.05, 0.9, 2.0, 8.0):
                direct = integrate.quad(lambda t: math.exp(-x * t) * t ** (-v), 1.0, math.inf,
                                        epsabs=0, epsrel=1e-12)[0]
                self.assertAlmostEqual(generalized_expint(v, x) / direct, 1.0, places=9,
                                       msg=f"E_{v}({x})")

    def test_continuous_across_switch(self):
        v = 2.0 + 1.0 / 1.4
        lo = generalized_expint(v, EXPINT_SWITCH * (1 - 1e-12))
        hi = generalized_expint(v, EXPINT_SWITCH * (1 + 1e-12))
        self.assertAlmostEqual(lo / hi, 1.0, places=9)

    def test_zero_argument(self):
        self.assertAlmostEqual(generalized_expint(3.0, 0.0), 0.5, places=14)
        with self.assertRaises(DivergenceError):
            generalized_expint(1.0, 0.0)

    def test_domain(self):
        with self.assertRaises(DomainError):
            generalized_expint(0.0, 1.0)
        with self.assertRaises(DomainError):
            generalized_expint(2.0, -1.0)

    def test_recurrence(self):
        # v E_{v+1}(x) = e^{-x} - x E_v(x)
        v, x = 1.8, 0.7
        lhs = v * generalized_expint(v + 1.0, x)
        rhs = math.exp(-x) - x * generalized_expint(v, x)
        self.assertAlmostEqual(lhs, rhs, places=12)


if __name__ == "__main__":
    unittest.main()

"""Tests for core.distances: BPP distance laws and their samplers."""
import math
import unittest

import numpy as np
from numpy.testing import assert_allclose
from scipy import integrate, stats

from core.distances import (
    BppParams,
    OrderedDistances,
    equidistant_mode,
    equidistant_pdf,
    equidistant_printed_mass,
    fourth_nearest_pdf,
    interferer_cdf_conditional,
    interferer_pdf_conditional,
    joint_pdf_4nearest,
    kth_nearest_cdf,
    kth_nearest_pdf,
    nearest_cdf,
    nearest_pdf,
    sample_interferer_distances,
    sample_ordered_nearest,
)
from core.errors import DomainError, ParameterError

R = 3000.0


class TestBppParams(unittest.TestCase):
    def test_accepts_four(self):
        self.assertEqual(BppParams(4, R).n_abs, 4)

    def test_rejects(self):
        for n, r in [(3, R), (10.5, R), (10, 0.0), (10, math.inf)]:
            with self.assertRaises(ParameterError):
                BppParams(n, r)


class TestDensities(unittest.TestCase):
    def setUp(self):
        self.p = BppParams(50, R)

    def test_single_distance(self):
        self.assertEqual(nearest_cdf(self.p, R), 1.0)
        self.assertAlmostEqual(integrate.quad(lambda r: nearest_pdf(self.p, r), 0, R)[0], 1.0, places=12)
        with self.assertRaises(DomainError):
            nearest_pdf(self.p, R * 1.01)

    def test_conditional_interferer(self):
        d = 500.0
        mass = integrate.quad(lambda r: interferer_pdf_conditional(self.p, d, r), d, R)[0]
        self.assertAlmostEqual(mass, 1.0, places=12)
        self.assertEqual(interferer_cdf_conditional(self.p, d, d), 0.0)
        with self.assertRaises(DomainError):
            interferer_pdf_conditional(self.p, d, 0.5 * d)

    def test_kth_nearest_normalizes(self):
        for k in (1, 4, 10):
            mass = integrate.quad(lambda r: kth_nearest_pdf(self.p, k, r), 0, R, limit=200)[0]
            self.assertAlmostEqual(mass, 1.0, places=8, msg=f"k={k}")
            self.assertAlmostEqual(kth_nearest_cdf(self.p, k, R), 1.0, places=12)

    def test_kth_cdf_matches_pdf(self):
        r = 900.0
        direct = integrate.quad(lambda x: kth_nearest_pdf(self.p, 4, x), 0, r, limit=200)[0]
        self.assertAlmostEqual(kth_nearest_cdf(self.p, 4, r), direct, places=9)

    def test_joint_marginal_is_fourth(self):
        # integrate r1 < r2 < r3 out of the joint density at a fixed r4
        p = BppParams(12, 1.0)
        r4 = 0.5
        inner = integrate.tplquad(
            lambda r1, r2, r3: joint_pdf_4nearest(p, np.array([r1, r2, r3, r4])),
            0, r4, lambda r3: 0, lambda r3: r3, lambda r3, r2: 0, lambda r3, r2: r2,
            epsabs=1e-10, epsrel=1e-8)[0]
        self.assertAlmostEqual(inner / fourth_nearest_pdf(p, r4), 1.0, places=5)

    def test_joint_rejects_unordered(self):
        with self.assertRaises(DomainError):
            joint_pdf_4nearest(self.p, np.array([10.0, 5.0, 20.0, 30.0]))
        with self.assertRaises(DomainError):
            OrderedDistances.checked([10.0, 20.0, 30.0, R * 2], R)

    def test_equidistant_normalizes(self):
        for k in (3, 4, 6):
            mass = integrate.quad(lambda x: equidistant_pdf(self.p, k, x), 0, R, limit=200)[0]
            self.assertAlmostEqual(mass, 1.0, places=8, msg=f"k={k}")

    def test_equidistant_mode(self):
        mode = equidistant_mode(self.p)
        grid = np.linspace(1.0, R - 1.0, 20001)
        self.assertAlmostEqual(grid[np.argmax(equidistant_pdf(self.p, 4, grid))] / mode, 1.0, places=3)

    def test_printed_mass_exact_at_four_only(self):
        # the printed general-k constant reproduces the k = 4 normalizer only approximately
        self.assertNotAlmostEqual(equidistant_printed_mass(self.p, 6), 1.0, places=2)
        self.assertGreater(equidistant_printed_mass(self.p, 4), 0.0)


class TestSamplers(unittest.TestCase):
    def test_ordered_single_draw(self):
        p = BppParams(20, R)
        d = sample_ordered_nearest(p, 4, seed=1)
        self.assertIsInstance(d, OrderedDistances)
        self.assertTrue(d.r1 < d.r2 < d.r3 < d.r4 <= R)

    def test_fourth_order_statistic_law(self):
        p = BppParams(50, R)
        r4 = sample_ordered_nearest(p, 4, seed=3, size=50000)[:, 3]
        stat = stats.kstest(r4, lambda x: kth_nearest_cdf(p, 4, np.clip(x, 0, R))).statistic
        self.assertLess(stat, 0.01)

    def test_interferer_sampler(self):
        p = BppParams(150, R)
        d = 500.0
        r = sample_interferer_distances(p, d, 100000, seed=5)
        self.assertTrue(np.all((r >= d) & (r <= R)))
        stat = stats.kstest(r, lambda x: interferer_cdf_conditional(p, d, np.clip(x, d, R))).statistic
        self.assertLess(stat, 0.02)

    def test_interferer_sampler_broadcasts(self):
        p = BppParams(10, R)
        d = np.array([[100.0], [2000.0]])
        r = sample_interferer_distances(p, d, (2, 6), seed=0)
        self.assertTrue(np.all(r[0] >= 100.0) and np.all(r[1] >= 2000.0))
        with self.assertRaises(DomainError):
            sample_interferer_distances(p, R, 3, seed=0)

    def test_reproducible(self):
        p = BppParams(30, R)
        assert_allclose(sample_ordered_nearest(p, 4, seed=9, size=10), sample_ordered_nearest(p, 4, seed=9, size=10))


if __name__ == "__main__":
    unittest.main()

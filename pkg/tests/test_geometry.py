"""
Tests for core.predicates and core.geometry.

Covers the exact orientation / in-sphere predicates, BPP sampling in a ball,
both Delaunay backends and the audits used by the validation report.
"""
import math
import os
import tempfile
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from core.errors import DegeneracyError, ParameterError
from core.geometry import (
    CELLS_PER_POINT,
    NetworkRealization,
    Tetrahedralization,
    Tetrahedron,
    audit_empty_circumsphere,
    audit_face_sharing,
    audit_volume_conservation,
    circumsphere,
    circumspheres,
    delaunay_tetrahedralize,
    expected_cell_volume,
    expected_voronoi_cell_volume,
    interior_cell_volumes,
    k_nearest,
    locate_tetrahedron,
    mean_cell_volume,
    read_realization_csv,
    sample_bpp,
    tetrahedron_volumes,
    write_realization_csv,
)
from core.predicates import insphere, orient3d
from core.runner import corrupt_tessellation

REGULAR = np.array([
    [1.0, 0.0, -1.0 / math.sqrt(2.0)],
    [-1.0, 0.0, -1.0 / math.sqrt(2.0)],
    [0.0, 1.0, 1.0 / math.sqrt(2.0)],
    [0.0, -1.0, 1.0 / math.sqrt(2.0)],
])


class TestPredicates(unittest.TestCase):
    def test_orient3d_signs(self):
        o, x, y, z = np.zeros(3), np.eye(3)[0], np.eye(3)[1], np.eye(3)[2]
        self.assertEqual(orient3d(o, x, y, z), 1)
        self.assertEqual(orient3d(o, y, x, z), -1)
        self.assertEqual(orient3d(o, x, y, np.array([0.3, 0.4, 0.0])), 0)

    def test_orient3d_exact_near_coplanar(self):
        # far below the float filter; decided by the exact fallback
        a, b, c = np.zeros(3), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
        d = np.array([0.25, 0.25, 1e-300])
        self.assertEqual(orient3d(a, b, c, d), 1)

    def test_insphere_inside_outside(self):
        a, b, c, d = REGULAR
        self.assertEqual(insphere(a, b, c, d, np.array([0.1, 0.1, 0.1])), 1)
        self.assertEqual(insphere(a, b, c, d, np.array([2.0, 2.0, 2.0])), -1)
        # orientation of the first four points must not matter
        self.assertEqual(insphere(b, a, c, d, np.array([0.1, 0.1, 0.1])), 1)

    def test_insphere_cospherical_tie_is_decided(self):
        # the eight cube corners share one sphere; the tie is broken deterministically
        corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
        first = insphere(*corners[[0, 1, 2, 4]], corners[7], ids=(0, 1, 2, 4, 7))
        again = insphere(*corners[[0, 1, 2, 4]], corners[7], ids=(0, 1, 2, 4, 7))
        self.assertIn(first, (-1, 1))
        self.assertEqual(first, again)

    def test_insphere_flat_tetrahedron(self):
        flat = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]], dtype=float)
        self.assertEqual(insphere(*flat, np.array([0.5, 0.5, 0.5])), 0)


class TestSampling(unittest.TestCase):
    def test_points_inside_ball(self):
        net = sample_bpp(5000, 3000.0, seed=1)
        self.assertEqual(net.n, 5000)
        self.assertTrue(np.all(net.norms() <= 3000.0))

    def test_radial_law(self):
        n = 20000
        net = sample_bpp(n, 3000.0, seed=7)
        stat = stats.kstest((net.norms() / 3000.0) ** 3, "uniform").statistic
        self.assertLess(stat, 1.63 / math.sqrt(n))

    def test_seed_reproducible(self):
        assert_array_equal(sample_bpp(40, 10.0, seed=3).coords, sample_bpp(40, 10.0, seed=3).coords)

    def test_rejects_bad_arguments(self):
        with self.assertRaises(ParameterError):
            sample_bpp(0, 1.0)
        with self.assertRaises(ParameterError):
            sample_bpp(10, -1.0)

    def test_csv_round_trip(self):
        net = sample_bpp(25, 3000.0, seed=11)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "net.csv")
            write_realization_csv(net, path)
            back = read_realization_csv(path)
        assert_array_equal(back.coords, net.coords)
        self.assertEqual(back.radius_m, net.radius_m)
        self.assertEqual(back.seed, 11)

    def test_k_nearest(self):
        net = NetworkRealization(10.0, np.array([[3.0, 0, 0], [1.0, 0, 0], [0, 2.0, 0]]))
        self.assertEqual([i for i, _ in k_nearest(net, np.zeros(3), 2)], [1, 2])


class TestDelaunay(unittest.TestCase):
    def test_single_tetrahedron_plus_center(self):
        coords = np.vstack([REGULAR, [[0.0, 0.0, 0.0]]])
        tess = delaunay_tetrahedralize(NetworkRealization(2.0, coords))
        self.assertEqual(len(tess), 4)
        self.assertLess(audit_volume_conservation(tess), 1e-12)

    def test_backends_agree(self):
        net = sample_bpp(60, 3000.0, seed=5)
        bw = delaunay_tetrahedralize(net, backend="bowyer-watson")
        qh = delaunay_tetrahedralize(net, backend="qhull")
        assert_array_equal(bw.simplices, qh.simplices)

    def test_empty_circumsphere_and_volume(self):
        for seed in range(20):
            tess = delaunay_tetrahedralize(sample_bpp(50, 3000.0, seed=seed))
            self.assertEqual(audit_empty_circumsphere(tess), [], f"seed {seed}")
            self.assertLess(audit_volume_conservation(tess), 1e-6)
            self.assertEqual(audit_face_sharing(tess), 0)

    def test_cell_count_near_homogeneous_mean(self):
        n = 400
        tess = delaunay_tetrahedralize(sample_bpp(n, 3000.0, seed=9), backend="qhull")
        # boundary cells pull the count below 24 pi^2 / 35 per point
        self.assertGreater(len(tess) / n, 0.6 * CELLS_PER_POINT)
        self.assertLess(len(tess) / n, 1.1 * CELLS_PER_POINT)

    def test_homogeneity_and_rotation(self):
        net = sample_bpp(40, 3000.0, seed=2)
        base = delaunay_tetrahedralize(net, backend="qhull").simplices
        assert_array_equal(delaunay_tetrahedralize(net.scaled(0.001), backend="qhull").simplices, base)
        q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(3, 3)))
        assert_array_equal(delaunay_tetrahedralize(net.rotated(q), backend="qhull").simplices, base)

    def test_degenerate_input(self):
        flat = np.c_[np.random.default_rng(1).random((10, 2)), np.zeros(10)]
        with self.assertRaises(DegeneracyError):
            delaunay_tetrahedralize(NetworkRealization(2.0, flat))
        with self.assertRaises(ParameterError):
            delaunay_tetrahedralize(NetworkRealization(2.0, REGULAR))

    def test_circumsphere_regular(self):
        c = circumsphere(Tetrahedron((0, 1, 2, 3)), NetworkRealization(2.0, REGULAR))
        assert_allclose(c.center, np.zeros(3), atol=1e-12)
        self.assertAlmostEqual(c.radius, math.sqrt(1.5), places=12)

    def test_locate(self):
        tess = delaunay_tetrahedralize(sample_bpp(50, 3000.0, seed=4), backend="qhull")
        cell = locate_tetrahedron(tess, np.zeros(3))
        self.assertIsNotNone(cell)
        bary = tess.barycentric(np.zeros(3))
        idx = [t.vertex_ids for t in tess.tetrahedra].index(cell.vertex_ids)
        self.assertTrue(np.all(bary[idx] >= -1e-10))
        self.assertIsNone(locate_tetrahedron(tess, np.array([1e5, 0.0, 0.0])))

    def test_corrupted_complex_is_flagged(self):
        tess = delaunay_tetrahedralize(sample_bpp(50, 3000.0, seed=0), backend="qhull")
        bad = corrupt_tessellation(tess, seed=0)
        self.assertIsInstance(bad, Tetrahedralization)
        self.assertGreater(len(audit_empty_circumsphere(bad)), 0)

    def test_cell_volumes_and_spheres(self):
        tess = delaunay_tetrahedralize(sample_bpp(40, 3000.0, seed=6), backend="qhull")
        vols = tetrahedron_volumes(tess)
        self.assertTrue(np.all(vols > 0))
        assert_allclose(mean_cell_volume(tess), vols.sum() / len(tess), rtol=1e-12)
        centers, radii = circumspheres(tess)
        coords = tess.source.coords
        for cell, c, rho in zip(tess.simplices[:10], centers[:10], radii[:10]):
            assert_allclose(np.linalg.norm(coords[cell] - c, axis=1), rho, rtol=1e-9)

    def test_mean_cell_volume_against_bulk_value(self):
        n, radius = 100, 3000.0
        target = expected_cell_volume(n, radius)
        hull_means, interior = [], []
        for seed in range(200):
            tess = delaunay_tetrahedralize(sample_bpp(n, radius, seed=seed), backend="qhull")
            hull_means.append(mean_cell_volume(tess))
            interior.append(interior_cell_volumes(tess, 0.5 * radius))
        interior = np.concatenate(interior)
        self.assertGreater(len(interior), 1000)
        self.assertLess(abs(interior.mean() / target - 1.0), 0.10)
        # the hull falls short of the ball near its surface
        ratio = float(np.mean(hull_means)) / target
        self.assertGreater(ratio, 0.75)
        self.assertLess(ratio, 1.0)
        with self.assertRaises(ParameterError):
            interior_cell_volumes(tess, 2 * radius)

    def test_expected_volumes(self):
        self.assertAlmostEqual(expected_voronoi_cell_volume(50, 3.0) / expected_cell_volume(50, 3.0),
                               CELLS_PER_POINT, places=12)


if __name__ == "__main__":
    unittest.main()

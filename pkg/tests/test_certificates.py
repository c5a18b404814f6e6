"""Tests for the M-matrix checks and the BIBO / CIBO / CICO certificates."""

import math
import os
import sys
import unittest
import logging

import numpy as np

logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from grid_robustness.certificates import check_bibo, check_cibo, check_cico, mmatrix_checks, spectral_radius
from grid_robustness.errors import ProblemError
from grid_robustness.gain import linear_gains, sector_gain
from grid_robustness.lure import build_lure
from grid_robustness.network import smib_case, solve_equilibrium


class TestMMatrix(unittest.TestCase):
    """Test cases for the nonnegative-matrix lemma."""

    def test_simple_matrices(self):
        checks = mmatrix_checks(np.zeros((3, 3)))
        self.assertEqual(checks.rho, 0.0)
        self.assertTrue(checks.inverse_positive)
        np.testing.assert_allclose(checks.positive_vector, np.ones(3))

        checks = mmatrix_checks(0.5 * np.eye(2))
        self.assertAlmostEqual(checks.rho, 0.5, places=10)
        self.assertTrue(checks.inverse_positive)
        np.testing.assert_allclose(checks.positive_vector, [2.0, 2.0])

        checks = mmatrix_checks(np.array([[0.0, 2.0], [2.0, 0.0]]))
        self.assertAlmostEqual(checks.rho, 2.0, places=10)
        self.assertFalse(checks.inverse_positive)
        self.assertIsNone(checks.positive_vector)

    def test_rejects_negative_entries(self):
        with self.assertRaises(ValueError):
            mmatrix_checks(np.array([[0.1, -0.2], [0.0, 0.1]]))

    def test_three_conditions_agree(self):
        """On random nonnegative matrices rho < 1, inverse positivity and a positive vector coincide."""
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 1000:
            n = int(rng.integers(2, 21))
            Z = rng.uniform(0.0, 1.0, size=(n, n))
            if rng.random() < 0.3:
                Z *= rng.random((n, n)) < 0.3
            pattern = (Z > 0).astype(float)
            if not np.any(np.linalg.matrix_power(pattern, n)):
                continue  # nilpotent pattern, rho = 0
            rho_raw = float(np.max(np.abs(np.linalg.eigvals(Z))))
            if rho_raw < 1e-6:
                continue
            target = rng.uniform(0.1, 2.0)
            if abs(target - 1.0) < 1e-3:
                continue
            Z *= target / rho_raw
            checks = mmatrix_checks(Z)
            self.assertAlmostEqual(checks.rho, target, delta=1e-6 * max(1.0, target))
            stable = target < 1
            self.assertEqual(checks.inverse_positive, stable)
            self.assertEqual(checks.positive_vector is not None, stable)
            if stable:
                self.assertTrue(np.all(checks.positive_vector > 0))
                self.assertTrue(np.all(Z @ checks.positive_vector < checks.positive_vector))
            checked += 1

    def test_spectral_radius_empty(self):
        self.assertEqual(spectral_radius(np.zeros((0, 0))), 0.0)


class TestCertificates(unittest.TestCase):
    """Test cases for the SMIB certificates."""

    @classmethod
    def setUpClass(cls):
        case = smib_case()
        eq = solve_equilibrium(case)
        cls.phi_star = eq.phi_star
        cls.gains = linear_gains(build_lure(case, eq))

    def test_smib_interior_point(self):
        zbar = np.array([1.2])
        ok, margins = check_cibo(self.gains, self.phi_star, np.array([0.45]), zbar)
        self.assertTrue(ok)
        self.assertGreater(margins[0], 0.0)
        ok, margins = check_cibo(self.gains, self.phi_star, np.array([0.55]), zbar)
        self.assertFalse(ok)
        self.assertLess(margins[0], 0.0)

    def test_smib_small_gain_boundary(self):
        """At zbar = 2.4 the loop gain gamma_zv gamma_psi just exceeds one."""
        result = check_cico(self.gains, self.phi_star, np.zeros(1), np.array([2.4]), math.inf)
        self.assertFalse(result.bibo_ok)
        self.assertFalse(result.cibo_ok)
        self.assertAlmostEqual(result.spectral_radius, 1.008, delta=0.02)
        bibo = check_bibo(self.gains, sector_gain(self.phi_star, 2.4))
        self.assertFalse(bibo)
        self.assertIsNone(bibo.closed_loop_gain)

    def test_bibo_closed_loop_gain(self):
        psi = sector_gain(self.phi_star, 1.2)
        result = check_bibo(self.gains, psi)
        self.assertTrue(result)
        g = self.gains
        expected = g.yu[0, 0] + g.yv[0, 0] * psi.diag[0] * g.zu[0, 0] / (1 - g.zv[0, 0] * psi.diag[0])
        self.assertAlmostEqual(float(result.closed_loop_gain[0, 0]), expected, places=12)
        self.assertAlmostEqual(result.spectral_radius, g.zv[0, 0] * psi.diag[0], places=10)

    def test_infinite_ybar_reduces_to_cibo(self):
        for ubar in (0.0, 0.3, 0.6):
            with self.subTest(ubar=ubar):
                result = check_cico(self.gains, self.phi_star, np.array([ubar]), np.array([1.2]), math.inf)
                ok, margins = check_cibo(self.gains, self.phi_star, np.array([ubar]), np.array([1.2]))
                self.assertEqual(result.cico_ok, ok)
                self.assertEqual(result.cibo_ok, ok)
                np.testing.assert_allclose(result.margins["z"], margins)
                self.assertTrue(np.all(np.isinf(result.margins["y"])))

    def test_frequency_limit(self):
        ubar, zbar = np.array([0.45]), np.array([1.2])
        loose = check_cico(self.gains, self.phi_star, ubar, zbar, 0.2)
        tight = check_cico(self.gains, self.phi_star, ubar, zbar, 0.1)
        self.assertTrue(loose.cico_ok)
        self.assertTrue(tight.cibo_ok)
        self.assertFalse(tight.cico_ok)
        self.assertAlmostEqual(float(loose.margins_y[0] - tight.margins_y[0]), 0.1, places=12)

    def test_implication_chain(self):
        """cico => cibo => bibo on random operating points."""
        rng = np.random.default_rng(9)
        for _ in range(200):
            ubar = np.array([rng.uniform(0.0, 1.0)])
            zbar = np.array([rng.uniform(0.0, math.pi - self.phi_star[0])])
            ybar = rng.choice([math.inf, rng.uniform(0.01, 0.5)])
            result = check_cico(self.gains, self.phi_star, ubar, zbar, ybar)
            if result.cico_ok:
                self.assertTrue(result.cibo_ok)
            if result.cibo_ok:
                self.assertTrue(result.bibo_ok)

    def test_shrinking_disturbance_stays_certified(self):
        zbar = np.array([1.0])
        result = check_cico(self.gains, self.phi_star, np.array([0.4]), zbar, 0.3)
        self.assertTrue(result.cico_ok)
        for scale in np.linspace(0.0, 1.0, 11):
            self.assertTrue(check_cico(self.gains, self.phi_star, scale * np.array([0.4]), zbar, 0.3).cico_ok)

    def test_zero_disturbance_certified(self):
        result = check_cico(self.gains, self.phi_star, np.zeros(1), np.array([0.5]), 0.1)
        self.assertTrue(result.cico_ok)

    def test_to_dict_keys(self):
        result = check_cico(self.gains, self.phi_star, np.zeros(1), np.array([0.5]), math.inf)
        self.assertEqual(
            set(result.to_dict()),
            {"ubar", "zbar", "ybar", "bibo_ok", "cibo_ok", "cico_ok", "spectral_radius", "margins"},
        )

    def test_problem_errors(self):
        zbar = np.array([1.0])
        with self.assertRaises(ProblemError):
            check_cico(self.gains, self.phi_star, np.zeros(1), zbar, 0.0)
        with self.assertRaises(ProblemError):
            check_cico(self.gains, self.phi_star, np.zeros(1), zbar, math.nan)
        with self.assertRaises(ProblemError):
            check_cico(self.gains, self.phi_star, np.array([-0.1]), zbar, math.inf)
        with self.assertRaises(ProblemError):
            check_cibo(self.gains, self.phi_star, np.zeros(2), zbar)
        with self.assertRaises(ProblemError):
            check_cibo(self.gains, self.phi_star, np.zeros(1), np.array([1.0, 1.0]))


if __name__ == '__main__':
    unittest.main()

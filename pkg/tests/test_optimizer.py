"""Tests for the maximum certified disturbance optimizer."""

import math
import os
import sys
import tempfile
import unittest
import logging

import numpy as np

logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from grid_robustness import utils
from grid_robustness.certificates import check_cico
from grid_robustness.errors import ProblemError
from grid_robustness.gain import GainMatrices, linear_gains
from grid_robustness.lure import build_lure
from grid_robustness.network import parse_grid, smib_case, solve_equilibrium
from grid_robustness.optimizer import COUPLED, FREE, OptProblem, constraint_margins, max_disturbance, sweep_zbar


def pipeline(case):
    eq = solve_equilibrium(case)
    return eq, linear_gains(build_lure(case, eq))


class TestSmibOptimum(unittest.TestCase):
    """Test cases on the single-machine infinite-bus system."""

    @classmethod
    def setUpClass(cls):
        cls.eq, cls.gains = pipeline(smib_case())
        cls.problem = OptProblem.create(cls.gains, cls.eq.phi_star, [1.0])
        cls.solution = max_disturbance(cls.problem)

    def test_reference_optimum(self):
        self.assertAlmostEqual(float(self.solution.zbar_star[0]), 1.219, delta=0.02)
        self.assertAlmostEqual(self.solution.mu_star, 0.4997, delta=0.02 * 0.4997)
        self.assertEqual(self.solution.binding_row, "z:1-2")
        self.assertEqual(self.solution.mode, COUPLED)

    def test_stationarity(self):
        """At the optimum gamma_zv * w'(zbar) = 1, i.e. cos(|phi*| + zbar) = cos|phi*| - 1 / gamma_zv."""
        a = abs(float(self.eq.phi_star[0]))
        expected = math.acos(math.cos(a) - 1.0 / self.gains.zv[0, 0]) - a
        self.assertAlmostEqual(float(self.solution.zbar_star[0]), expected, delta=1e-4)

    def test_matches_grid_oracle(self):
        """The optimum is the maximum of a fine zbar sweep, up to the grid resolution."""
        grid = np.linspace(0.0, self.problem.domain[0], 3001)
        points = sweep_zbar(self.problem, grid)
        best = max(point.mu for point in points)
        self.assertGreaterEqual(self.solution.mu_star, best - 1e-9)
        self.assertLessEqual(self.solution.mu_star - best, 1e-5)

    def test_sweep_is_concave_where_positive(self):
        grid = np.linspace(0.05, 2.3, 200)
        mu = np.array([point.mu for point in sweep_zbar(self.problem, grid)])
        self.assertTrue(np.all(mu > 0))
        self.assertTrue(np.all(np.diff(mu, 2) <= 1e-9))

    def test_sweep_vanishes_near_small_gain_limit(self):
        """mu falls to zero around zbar = 2.4, where the loop gain reaches one."""
        points = sweep_zbar(self.problem, [2.3, 2.5])
        self.assertGreater(points[0].mu, 0.0)
        self.assertEqual(points[1].mu, 0.0)
        self.assertGreater(points[1].spectral_radius, 1.0)

    def test_sweep_domain_and_fractions(self):
        points = sweep_zbar(self.problem, [-0.1, 3.0])
        self.assertTrue(all(point.binding_row == "domain" and point.mu == 0.0 for point in points))
        self.assertTrue(math.isnan(points[1].margin))
        by_fraction = sweep_zbar(self.problem, [0.5], uniform=False)[0]
        by_value = sweep_zbar(self.problem, [0.5 * self.problem.domain[0]])[0]
        self.assertAlmostEqual(by_fraction.mu, by_value.mu, places=12)
        self.assertEqual(by_fraction.zbar, 0.5)
        self.assertEqual(set(by_value.to_row()), {"zbar", "mu", "binding_row", "margin", "scale", "spectral_radius", "ybar_bound"})

    def test_closure(self):
        """The reported point passes the independent certificate check and binds one row."""
        s = self.solution
        result = check_cico(self.gains, self.eq.phi_star, s.ubar_star, s.zbar_star, math.inf)
        self.assertTrue(result.cico_ok)
        self.assertTrue(s.certificate.cico_ok)
        margins = constraint_margins(self.problem, s.ubar_star, s.zbar_star)
        self.assertGreater(margins.min(), 0.0)
        self.assertLess(margins.min(), 1e-6)
        self.assertEqual(s.scale, float(s.ubar_star.max()))

    def test_frequency_limit_is_monotone(self):
        mus = []
        for ybar in (0.05, 0.1, 0.2, math.inf):
            p = OptProblem.create(self.gains, self.eq.phi_star, [1.0], ybar=ybar)
            solution = max_disturbance(p)
            self.assertTrue(solution.certificate.cico_ok)
            mus.append(solution.mu_star)
        self.assertTrue(all(b >= a - 1e-7 for a, b in zip(mus, mus[1:])))
        self.assertLess(mus[1], mus[3])
        self.assertAlmostEqual(mus[2], mus[3], delta=1e-6)

    def test_solution_serializes(self):
        path = os.path.join(tempfile.mkdtemp(), "solution.json")
        utils.save_json(path, self.solution.to_dict())
        data = utils.load_json(path)
        self.assertEqual(data["mode"], COUPLED)
        self.assertTrue(data["certificate"]["cico_ok"])
        self.assertIsNone(data["certificate"]["margins"]["y"][0])


class TestProblemValidation(unittest.TestCase):
    """ProblemError cases for OptProblem.create and max_disturbance."""

    @classmethod
    def setUpClass(cls):
        cls.eq, cls.gains = pipeline(smib_case())

    def test_degenerate_direction(self):
        with self.assertRaises(ProblemError) as ctx:
            OptProblem.create(self.gains, self.eq.phi_star, [0.0])
        self.assertIn("degenerate direction", str(ctx.exception))

    def test_infeasible_ybar(self):
        for ybar in (0.0, -1.0, math.nan):
            with self.assertRaises(ProblemError) as ctx:
                OptProblem.create(self.gains, self.eq.phi_star, [1.0], ybar=ybar)
            self.assertIn("infeasible ybar", str(ctx.exception))

    def test_bad_shapes_and_mode(self):
        with self.assertRaises(ProblemError):
            OptProblem.create(self.gains, self.eq.phi_star, [1.0, 1.0])
        with self.assertRaises(ProblemError):
            OptProblem.create(self.gains, self.eq.phi_star, [-1.0])
        with self.assertRaises(ProblemError):
            max_disturbance(OptProblem.create(self.gains, self.eq.phi_star, [1.0]), mode="greedy")


class TestLinearAndMultiBus(unittest.TestCase):

    def test_linear_limit_reaches_domain_edge(self):
        """With gamma_zv = 0 the angle row is linear and the optimum sits at the box edge."""
        gains = GainMatrices(
            yu=np.array([[0.1]]),
            yv=np.array([[0.1]]),
            zu=np.array([[2.0]]),
            zv=np.array([[0.0]]),
            output_labels=("y:1",),
            input_labels=("u_G:1",),
            line_labels=("1-2",),
        )
        p = OptProblem.create(gains, [0.25], [1.0])
        solution = max_disturbance(p)
        self.assertAlmostEqual(solution.mu_star, (math.pi - 0.25) / 2.0, delta=1e-6)
        self.assertAlmostEqual(float(solution.zbar_star[0]), math.pi - 0.25, delta=1e-6)

    def test_free_mode_dominates_coupled(self):
        case = parse_grid(utils.case_path("three_bus"))
        eq, gains = pipeline(case)
        p = OptProblem.create(gains, eq.phi_star, np.ones(3))
        coupled = max_disturbance(p)
        free = max_disturbance(p, mode=FREE)
        self.assertTrue(coupled.certificate.cico_ok)
        self.assertTrue(free.certificate.cico_ok)
        np.testing.assert_allclose(coupled.ubar_star, coupled.scale * np.ones(3))
        self.assertGreaterEqual(free.mu_star, coupled.mu_star * (1 - 1e-6))
        self.assertTrue(np.all(free.ubar_star >= 0))

    def test_three_bus_matches_grid_search(self):
        """Coupled optimum agrees with an exhaustive search over the per-line zbar box."""
        case = parse_grid(utils.case_path("three_bus"))
        eq, gains = pipeline(case)
        c = np.ones(3)
        p = OptProblem.create(gains, eq.phi_star, c)
        solution = max_disturbance(p)

        a = np.abs(eq.phi_star)
        d = gains.zu @ p.c_hat

        def best_on_grid(lo, hi, points):
            axes = [np.linspace(lo[i], hi[i], points) for i in range(a.size)]
            Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, a.size)
            W = Z * np.cos(a) - np.sin(a + Z) + np.sin(a)
            R = Z - W @ gains.zv.T
            scale = np.min(R / d, axis=1)
            scale[np.any(R < 0, axis=1)] = 0.0
            k = int(np.argmax(scale))
            return float(scale[k]) * float(c @ p.c_hat), Z[k]

        U = p.domain
        oracle, z_best = best_on_grid(np.zeros(3), U, 31)
        cell = U / 30
        oracle, _ = best_on_grid(np.maximum(z_best - cell, 0.0), np.minimum(z_best + cell, U), 21)
        logger.info(f"optimizer {solution.mu_star:.6g}, grid search {oracle:.6g}")
        self.assertGreaterEqual(solution.mu_star, oracle * (1 - 1e-6))
        self.assertLessEqual(solution.mu_star, oracle * 1.01)

    def test_direction_scaling(self):
        """Scaling c rescales mu but not the certified disturbance box."""
        case = parse_grid(utils.case_path("three_bus"))
        eq, gains = pipeline(case)
        c = np.array([1.0, 2.0, 0.5])
        a = max_disturbance(OptProblem.create(gains, eq.phi_star, c))
        b = max_disturbance(OptProblem.create(gains, eq.phi_star, 3.0 * c))
        np.testing.assert_allclose(a.ubar_star, b.ubar_star, rtol=1e-6)
        self.assertAlmostEqual(b.mu_star, 3.0 * a.mu_star, delta=1e-6 * b.mu_star)


class TestCase39PerBus(unittest.TestCase):
    """Per-bus certified bounds on the 39-bus system."""

    def test_well_connected_loads_beat_generators(self):
        case = parse_grid(utils.case_path("case39"))
        eq = solve_equilibrium(case)
        sys_ = build_lure(case, eq)
        gains = linear_gains(sys_)
        input_ids = list(sys_.gen_ids) + list(sys_.load_ids)

        def mu_at(bus_id):
            c = np.zeros(len(input_ids))
            c[input_ids.index(bus_id)] = 1.0
            return max_disturbance(OptProblem.create(gains, eq.phi_star, c)).mu_star

        hubs = [bus_id for bus_id in sys_.load_ids if case.degree(bus_id) >= 4]
        self.assertEqual(sorted(hubs), [2, 6, 16, 26])
        generator_mu = [mu_at(bus_id) for bus_id in sys_.gen_ids]
        hub_mu = [mu_at(bus_id) for bus_id in hubs]
        logger.info(f"generators max mu {max(generator_mu):.4g}, hub loads min mu {min(hub_mu):.4g}")
        self.assertGreater(min(hub_mu), max(generator_mu))


if __name__ == '__main__':
    unittest.main()

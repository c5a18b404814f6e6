"""Tests for the grid-robustness command line."""

import contextlib
import io
import math
import os
import sys
import tempfile
import unittest
import logging

import pandas as pd

logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from grid_robustness import utils
from grid_robustness.cli import EXIT_NOT_CERTIFIED, EXIT_OK, main


class TestCli(unittest.TestCase):
    """Test cases for main()."""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def out(self, name):
        return os.path.join(self.temp_dir, name)

    def run_cli(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            code = main(list(argv))
        logger.debug(f"grid-robustness {' '.join(argv)} -> {code}")
        return code, stdout.getvalue(), stderr.getvalue()

    def test_gains(self):
        out = self.out("gains")
        code, stdout, _ = self.run_cli("gains", "--case", "smib", "--out", out, "--dump-matrices")
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(os.path.join(out, "gains.csv"))
        self.assertEqual(list(frame.columns), ["block", "output", "input", "gain"])
        self.assertEqual(list(frame["block"]), ["yu", "yv", "zu", "zv"])
        self.assertAlmostEqual(float(frame["gain"][2]), 1.4378, delta=0.02 * 1.4378)
        data = utils.load_json(os.path.join(out, "gains.json"))
        self.assertAlmostEqual(abs(data["equilibrium"]["phi_star"][0]), math.asin(0.25), places=9)
        self.assertLessEqual(data["equilibrium"]["residual"], 1e-10)
        self.assertTrue(os.path.exists(os.path.join(out, "matrices", "A.csv")))
        self.assertIn("gamma_zu", stdout)

    def test_malformed_case_exits_2(self):
        data = utils.load_json(utils.case_path("smib"))
        data["lines"][0]["phi"] = 0.0
        path = self.out("bad.json")
        utils.save_json(path, data)
        code, _, stderr = self.run_cli("gains", "--case", path, "--out", self.out("bad"))
        self.assertEqual(code, 2)
        self.assertIn("error: network:", stderr)
        self.assertIn("nonpositive line coefficient", stderr)

    def test_missing_case_exits_2(self):
        code, _, _ = self.run_cli("gains", "--case", self.out("nowhere.json"), "--out", self.out("x"))
        self.assertEqual(code, 2)

    def test_certify(self):
        out = self.out("certify")
        code, _, _ = self.run_cli("certify", "--case", "smib", "--out", out, "--ubar", "0", "--zbar", "1.0")
        self.assertEqual(code, EXIT_OK)
        result = utils.load_json(os.path.join(out, "certificate.json"))
        self.assertTrue(result["cico_ok"])
        self.assertIsNone(result["ybar"][0])

        code, _, _ = self.run_cli("certify", "--case", "smib", "--out", out, "--ubar", "0", "--zbar", "2.5")
        self.assertEqual(code, EXIT_NOT_CERTIFIED)
        self.assertFalse(utils.load_json(os.path.join(out, "certificate.json"))["bibo_ok"])

        code, _, _ = self.run_cli("certify", "--case", "smib", "--out", out, "--ubar", "0.45", "--zbar", "1.2", "--ybar", "0.1")
        self.assertEqual(code, EXIT_NOT_CERTIFIED)

    def test_certify_argument_errors(self):
        code, _, _ = self.run_cli("certify", "--case", "smib", "--out", self.out("c"), "--ubar", "0")
        self.assertEqual(code, 2)
        code, _, _ = self.run_cli("certify", "--case", "smib", "--out", self.out("c"), "--zbar", "1", "--ubar", "0.1,0.2")
        self.assertEqual(code, 2)
        code, _, _ = self.run_cli("certify", "--case", "smib", "--out", self.out("c"), "--zbar", "1", "--tol", "bogus=1")
        self.assertEqual(code, 2)

    def test_maxdist(self):
        out = self.out("maxdist")
        code, stdout, _ = self.run_cli("maxdist", "--case", "smib", "--out", out)
        self.assertEqual(code, EXIT_OK)
        solution = utils.load_json(os.path.join(out, "solution.json"))
        self.assertAlmostEqual(solution["mu_star"], 0.4997, delta=0.02 * 0.4997)
        self.assertTrue(solution["certificate"]["cico_ok"])
        frame = pd.read_csv(os.path.join(out, "solution.csv"))
        self.assertEqual(list(frame.columns), ["zbar", "mu", "binding_row", "margin", "scale"])
        self.assertIn("mu* =", stdout)

    def test_maxdist_per_bus(self):
        out = self.out("per_bus")
        code, _, _ = self.run_cli("maxdist", "--case", "three_bus", "--out", out, "--per-bus")
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(os.path.join(out, "per_bus.csv"))
        self.assertEqual(list(frame["bus"]), [1, 2, 3])
        self.assertEqual(list(frame["kind"]), ["gen", "gen", "load"])
        self.assertEqual(list(frame["degree"]), [2, 2, 2])
        self.assertTrue((frame["mu"] > 0).all())

    def test_maxdist_unknown_bus(self):
        code, _, stderr = self.run_cli("maxdist", "--case", "three_bus", "--out", self.out("m"), "--direction", "7=1")
        self.assertEqual(code, 2)
        self.assertIn("error: cli:", stderr)

    def test_sweep_is_deterministic(self):
        first, second = self.out("sweep1"), self.out("sweep2")
        for out in (first, second):
            code, _, _ = self.run_cli("sweep", "--case", "smib", "--out", out, "--zbar-grid", "0.5:3.0:0.5", "--no-empirical")
            self.assertEqual(code, EXIT_OK)
        for name in ("sweep.csv", "gap.json"):
            with open(os.path.join(first, name), "rb") as a, open(os.path.join(second, name), "rb") as b:
                self.assertEqual(a.read(), b.read())
        frame = pd.read_csv(os.path.join(first, "sweep.csv"))
        self.assertEqual(len(frame), 6)
        self.assertEqual(frame["binding_row"].iloc[-1], "domain")
        self.assertTrue(os.path.exists(os.path.join(first, "sweep.svg")))

    def test_sweep_with_empirical(self):
        out = self.out("sweep_emp")
        code, _, _ = self.run_cli(
            "sweep", "--case", "smib", "--out", out, "--zbar-grid", "1.0:1.2:0.2", "--bisect-tol", "0.01", "--horizon", "15"
        )
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(os.path.join(out, "empirical.csv"))
        self.assertEqual(list(frame.columns), ["zbar", "empirical_mu"])
        gap = utils.load_json(os.path.join(out, "gap.json"))
        self.assertTrue(gap["empirical_dominates"])

    def test_empty_grid_exits_2(self):
        code, _, _ = self.run_cli("sweep", "--case", "smib", "--out", self.out("s"), "--zbar-grid", "1.0:0.5:0.1", "--no-empirical")
        self.assertEqual(code, 2)

    def test_simulate_zero_disturbance(self):
        out = self.out("sim")
        code, _, _ = self.run_cli("simulate", "--case", "smib", "--out", out, "--horizon", "5")
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(os.path.join(out, "trajectory.csv"))
        self.assertEqual(list(frame.columns), ["t", "y:1", "z:1-2"])
        self.assertEqual(len(frame), 501)
        self.assertLess(frame["z:1-2"].abs().max(), 1e-9)
        summary = utils.load_json(os.path.join(out, "summary.json"))
        self.assertFalse(summary["synchronism_lost"])

    def test_simulate_scenario_file_with_slip(self):
        out = self.out("slip")
        scenario = self.out("step.json")
        utils.save_json(scenario, {"kind": "step", "bus_pattern": [0.7], "params": {"t0": 0.5}})
        code, _, stderr = self.run_cli("simulate", "--case", "smib", "--out", out, "--scenario", scenario)
        self.assertEqual(code, 3)
        self.assertIn("error: simulator:", stderr)
        summary = utils.load_json(os.path.join(out, "summary.json"))
        self.assertTrue(summary["synchronism_lost"])
        self.assertGreater(summary["time"], 0.5)

    def test_simulate_tripping(self):
        out = self.out("trip")
        code, _, _ = self.run_cli("simulate", "--case", "three_bus", "--out", out, "--scenario", "tripping", "--direction", "3=1", "--magnitude", "0.2", "--horizon", "10")
        self.assertEqual(code, EXIT_OK)
        summary = utils.load_json(os.path.join(out, "summary.json"))
        self.assertEqual(summary["scenario"]["bus_pattern"], [0.0, 0.0, 0.2])
        self.assertGreater(summary["max_peak_y"], 0.0)

    def test_simulate_rejects_bad_arguments(self):
        for argv in (("--horizon", "-1"), ("--scenario", "tripping", "--magnitude", "-0.5")):
            with self.subTest(argv=argv):
                code, _, stderr = self.run_cli("simulate", "--case", "smib", "--out", self.out("bad_sim"), *argv)
                self.assertEqual(code, 2)
                self.assertIn("error: cli:", stderr)
        code, _, _ = self.run_cli("sweep", "--case", "smib", "--out", self.out("bad_sweep"), "--bisect-tol", "0")
        self.assertEqual(code, 2)


if __name__ == '__main__':
    unittest.main()

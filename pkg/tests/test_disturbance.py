"""Tests for disturbance signals and scenario families."""

import os
import sys
import unittest
import logging

import numpy as np

logging.basicConfig(level=logging.DEBUG, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from grid_robustness.disturbance import (
    KINDS,
    NOISE,
    RAMP,
    SAMPLES,
    SINUSOID,
    STEP,
    Disturbance,
    random_family,
    step_family,
    tripping_scenario,
    wind_scenario,
)


class TestDisturbance(unittest.TestCase):
    """Test cases for Disturbance."""

    def test_step(self):
        d = Disturbance(STEP, [0.3, 0.1], {"t0": 1.0, "signs": [1.0, -1.0]})
        np.testing.assert_allclose(d(0.5), [0.0, 0.0])
        np.testing.assert_allclose(d(1.0), [0.3, -0.1])
        self.assertEqual(d.breakpoints(10.0), [1.0])
        self.assertEqual(d.breakpoints(0.5), [])

    def test_ramp(self):
        d = Disturbance(RAMP, [0.4], {"t0": 1.0, "rise": 2.0})
        np.testing.assert_allclose(d(0.0), [0.0])
        np.testing.assert_allclose(d(2.0), [0.2])
        np.testing.assert_allclose(d(5.0), [0.4])
        self.assertEqual(d.breakpoints(10.0), [1.0, 3.0])

    def test_sinusoid(self):
        d = Disturbance(SINUSOID, [0.5], {"omega": 2.0, "phase": np.pi / 2})
        np.testing.assert_allclose(d(0.0), [0.5])
        self.assertEqual(d.breakpoints(10.0), [])

    def test_custom_samples_are_clamped(self):
        d = Disturbance(SAMPLES, [0.2], {"times": [0.0, 1.0, 2.0], "values": [0.0, 0.5, -0.1]})
        np.testing.assert_allclose(d(0.2), [0.1])
        np.testing.assert_allclose(d(1.0), [0.2])
        np.testing.assert_allclose(d(2.0), [-0.1])
        self.assertEqual(d.breakpoints(5.0), [1.0, 2.0])

    def test_noise_is_seeded_and_spans_the_box(self):
        a = wind_scenario([0.3, 0.1], seed=4, horizon=20.0)
        b = wind_scenario([0.3, 0.1], seed=4, horizon=20.0)
        t = np.linspace(0.0, 20.0, 401)
        np.testing.assert_array_equal(a.sample(t), b.sample(t))
        samples = a.params["_samples"]
        np.testing.assert_allclose(np.max(np.abs(samples), axis=0), [1.0, 1.0])
        other = wind_scenario([0.3, 0.1], seed=5, horizon=20.0)
        self.assertFalse(np.allclose(a.sample(t), other.sample(t)))

    def test_with_pattern_keeps_the_shape(self):
        d = wind_scenario([1.0], seed=1, horizon=10.0)
        scaled = d.with_pattern([0.5])
        t = np.linspace(0.0, 10.0, 101)
        np.testing.assert_allclose(scaled.sample(t), 0.5 * d.sample(t))
        np.testing.assert_allclose(d.scaled(0.5).sample(t), scaled.sample(t))

    def test_dict_round_trip_drops_private_params(self):
        d = wind_scenario([0.2], seed=3, horizon=5.0)
        data = d.to_dict()
        self.assertNotIn("_samples", data["params"])
        restored = Disturbance.from_dict(data)
        t = np.linspace(0.0, 5.0, 51)
        np.testing.assert_allclose(restored.sample(t), d.sample(t))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            Disturbance("impulse", [1.0])
        with self.assertRaises(ValueError):
            Disturbance(STEP, [-1.0])
        with self.assertRaises(ValueError):
            Disturbance.from_dict({"kind": STEP})


class TestFamilies(unittest.TestCase):

    def test_step_family(self):
        family = step_family(np.array([0.2, 0.0]))
        self.assertEqual(len(family), 2)
        np.testing.assert_allclose(family[0](0.0), [0.2, 0.0])
        np.testing.assert_allclose(family[1](0.0), [-0.2, 0.0])

    def test_tripping(self):
        d = tripping_scenario(np.array([0.0, 0.5]), t0=2.0)
        np.testing.assert_allclose(d(1.0), [0.0, 0.0])
        np.testing.assert_allclose(d(3.0), [0.0, -0.5])

    def test_random_family_respects_the_box(self):
        """Every member of a random family stays inside |u_i| <= pattern_i."""
        pattern = np.array([0.3, 0.0, 0.1])
        family = random_family(pattern, count=50, seed=8, horizon=10.0)
        self.assertEqual(len(family), 50)
        self.assertLessEqual({d.kind for d in family}, set(KINDS))
        t = np.linspace(0.0, 10.0, 501)
        for d in family:
            self.assertTrue(np.all(np.abs(d.sample(t)) <= pattern + 1e-15))

    def test_random_family_kinds(self):
        family = random_family(np.ones(2), count=10, seed=1, kinds=[NOISE])
        self.assertTrue(all(d.kind == NOISE for d in family))


if __name__ == '__main__':
    unittest.main()

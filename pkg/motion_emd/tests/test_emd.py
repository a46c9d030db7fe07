import tempfile
import unittest
from pathlib import Path

import numpy as np
import pandas as pd

from motion_emd.emd_core import (SiftConfig, count_zero_crossings, cubic_envelope, decompose,
                                 feature_length, featurize, find_extrema, sift_one_imf,
                                 write_imf_csv)
from motion_emd.emd_core.envelope import end_anchors, mirror_extend, parabolic_position
from motion_emd.errors import InsufficientExtremaError, SignalError
from motion_emd.motion_traces import MotionTrace

SAMPLES = 64


def tone(cycles, phase=0.0, n=SAMPLES):
    t = np.arange(n, dtype=np.float64)
    return np.sin(2 * np.pi * cycles * t / n + phase)


def correlation(a, b):
    return float(np.corrcoef(a, b)[0, 1])


class TestExtrema(unittest.TestCase):
    """
    TestCase for find_extrema and count_zero_crossings
    """

    def test_single_peak(self):
        extrema = find_extrema([0, 1, 0])
        self.assertEqual(extrema.max_index.tolist(), [1])
        self.assertEqual(extrema.min_index.tolist(), [])

    def test_plateau_midpoint(self):
        extrema = find_extrema([0, 1, 1, 0])
        self.assertEqual(extrema.max_index.tolist(), [1])
        self.assertEqual(extrema.max_value.tolist(), [1.0])

    def test_monotone(self):
        self.assertEqual(find_extrema([0, 1, 2, 3]).count, 0)

    def test_plateau_touching_end(self):
        self.assertEqual(find_extrema([1, 1, 0, 2]).max_index.tolist(), [])

    def test_short_signal(self):
        with self.assertRaises(SignalError):
            find_extrema([0, 1])

    def test_zero_crossings(self):
        self.assertEqual(count_zero_crossings([1, -1, 0, 1]), 2)
        self.assertEqual(count_zero_crossings([0, 0, 0]), 0)


class TestEnvelope(unittest.TestCase):
    """
    TestCase for cubic_envelope
    """

    def test_equal_endpoints_give_constant(self):
        envelope = cubic_envelope(np.array([0, 9]), np.array([1.0, 1.0]), 10)
        np.testing.assert_allclose(envelope, np.ones(10), atol=1e-12)

    def test_interpolates_knots(self):
        envelope = cubic_envelope(np.array([0, 5, 10]), np.array([0.0, 5.0, 0.0]), 11)
        self.assertAlmostEqual(envelope[5], 5.0, places=12)

    def test_sinusoid_upper_envelope(self):
        signal = tone(3)
        extrema = find_extrema(signal)
        envelope = cubic_envelope(extrema.max_index, extrema.max_value, signal.size)
        first, last = extrema.max_index[0], extrema.max_index[-1]
        span = slice(first, last + 1)
        self.assertTrue(np.all(envelope[span] >= signal[span] - 1e-9))

    def test_needs_two_knots(self):
        with self.assertRaises(InsufficientExtremaError):
            cubic_envelope(np.array([3]), np.array([1.0]), 8, boundary='none')

    def test_unknown_boundary(self):
        with self.assertRaises(ValueError):
            cubic_envelope(np.array([0, 5]), np.array([1.0, 1.0]), 8, boundary='periodic')

    def test_parabolic_position(self):
        signal = tone(3)
        self.assertAlmostEqual(parabolic_position(signal, 5), 64 / 12, delta=0.02)
        self.assertEqual(parabolic_position(signal, 0), 0.0)
        self.assertEqual(parabolic_position(np.array([0.0, 1.0, 2.0]), 1), 1.0)

    def test_end_anchors_on_sinusoid(self):
        signal = tone(3)
        upper, lower = end_anchors(signal, find_extrema(signal))
        for value in upper:
            self.assertAlmostEqual(value, 1.0, delta=0.02)
        for value in lower:
            self.assertAlmostEqual(value, -1.0, delta=0.02)

    def test_end_anchors_need_three_extrema(self):
        signal = np.array([0.0, 1.0, 0.0, -1.0, 0.0])
        self.assertEqual(end_anchors(signal, find_extrema(signal)),
                         ((None, None), (None, None)))

    def test_anchored_mirror_knots(self):
        knots, values = mirror_extend(np.array([2, 6]), np.array([1.0, 3.0]), 9,
                                      anchors=(0.5, None))
        placed = dict(zip(knots.tolist(), values.tolist()))
        self.assertEqual(placed[0.0], 0.5)
        self.assertEqual(placed[-2.0], 0.0)
        self.assertNotIn(-6.0, placed)
        self.assertEqual(placed[10.0], 3.0)
        self.assertEqual(placed[14.0], 1.0)


class TestSifting(unittest.TestCase):
    """
    TestCase for sift_one_imf and decompose
    """

    def test_ramp_gives_zero_imf(self):
        imf, converged = sift_one_imf(np.linspace(0, 1, 32))
        np.testing.assert_array_equal(imf, np.zeros(32))
        self.assertFalse(converged)

    def test_pure_sinusoid(self):
        signal = tone(3)
        imf, _ = sift_one_imf(signal)
        self.assertGreater(correlation(imf, signal), 0.99)
        self.assertLess(np.max(np.abs(signal - imf)), 0.05)

    def test_constant_signal(self):
        signal = np.full(20, 2.5)
        result = decompose(signal)
        self.assertEqual(result.extracted_count, 0)
        np.testing.assert_array_equal(result.imfs, np.zeros((4, 20)))
        np.testing.assert_array_equal(result.residual, signal)

    def test_reconstruction(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(1000):
            signal = rng.normal(size=int(rng.integers(8, 257)))
            result = decompose(signal)
            worst = max(worst, float(np.max(np.abs(result.reconstruct() - signal))))
        self.assertLess(worst, 1e-9)

    def test_two_tone_recovery(self):
        # slow tones keep >= 2 full cycles so the residual still has 4 extrema
        rng = np.random.default_rng(1)
        recovered = 0
        for _ in range(100):
            slow_cycles = rng.uniform(2.2, 2.8)
            fast_cycles = slow_cycles * rng.uniform(4.0, 4.5)
            slow = tone(slow_cycles, rng.uniform(0, 2 * np.pi))
            fast = tone(fast_cycles, rng.uniform(0, 2 * np.pi))
            result = decompose(slow + fast)
            if result.extracted_count >= 2 and \
                    correlation(result.imfs[0], fast) > 0.95 and \
                    correlation(result.imfs[1], slow) > 0.9:
                recovered += 1
        self.assertGreaterEqual(recovered, 95)

    def test_modes_slow_down(self):
        rng = np.random.default_rng(6)
        checked = 0
        for _ in range(30):
            slow_cycles = rng.uniform(2.2, 2.8)
            signal = tone(slow_cycles, rng.uniform(0, 2 * np.pi)) + \
                tone(slow_cycles * rng.uniform(4.0, 4.5), rng.uniform(0, 2 * np.pi))
            result = decompose(signal)
            if result.extracted_count < 2:
                continue
            checked += 1
            self.assertGreater(count_zero_crossings(result.imfs[0]),
                               count_zero_crossings(result.imfs[1]))
        self.assertGreaterEqual(checked, 25)

    def test_amplitude_scaling(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            signal = rng.normal(size=64)
            base = decompose(signal)
            for k in (4.0, 0.25):
                scaled = decompose(k * signal)
                self.assertEqual(scaled.extracted_count, base.extracted_count)
                np.testing.assert_allclose(scaled.imfs, k * base.imfs, rtol=0, atol=1e-9 * k)
                np.testing.assert_allclose(scaled.residual, k * base.residual,
                                           rtol=0, atol=1e-9 * k)

    def test_slow_extrema_near_both_ends(self):
        # slow maxima 2.4 samples inside each end
        slow = tone(2.2, 1.0524)
        fast = tone(9.24)
        result = decompose(slow + fast)
        self.assertGreaterEqual(result.extracted_count, 2)
        self.assertGreater(correlation(result.imfs[0], fast), 0.95)
        self.assertGreater(correlation(result.imfs[1], slow), 0.9)

    def test_first_mode_is_imf(self):
        result = decompose(tone(3))
        self.assertGreaterEqual(result.extracted_count, 1)
        self.assertTrue(result.is_imf(0))

    def test_bad_signals(self):
        with self.assertRaises(SignalError):
            decompose([1.0, 2.0, 3.0])
        with self.assertRaises(SignalError):
            decompose([0.0, 1.0, np.nan, 1.0, 0.0])

    def test_config_validation(self):
        with self.assertRaises(ValueError):
            SiftConfig(n_modes=0)
        with self.assertRaises(ValueError):
            SiftConfig(boundary='wrap')


class TestFeatures(unittest.TestCase):
    """
    TestCase for featurize and the IMF CSV
    """

    def test_lengths(self):
        self.assertEqual([feature_length(n) for n in range(2, 7)], [16, 24, 32, 40, 48])
        rng = np.random.default_rng(4)
        trace = MotionTrace(rng.normal(size=(4, 15)))
        for n in range(2, 7):
            self.assertEqual(featurize(trace, SiftConfig(n_modes=n)).values.shape,
                             (feature_length(n),))

    def test_constant_trace(self):
        trace = MotionTrace(np.tile(np.array([[2.0], [0.1], [0.3], [0.5]]), (1, 15)))
        np.testing.assert_array_equal(featurize(trace).values, np.zeros(32))

    def test_block_layout(self):
        rng = np.random.default_rng(5)
        series = np.zeros((4, 15))
        series[2] = rng.normal(size=15)
        vector = featurize(MotionTrace(series))
        for k in (0, 1, 3):
            np.testing.assert_array_equal(vector.block(k), np.zeros(8))
        self.assertTrue(np.any(vector.block(2) != 0))

    def test_short_trace(self):
        with self.assertRaises(SignalError):
            featurize(MotionTrace(np.zeros((4, 3))))

    def test_imf_csv(self):
        result = decompose(tone(3) + tone(12))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'imfs.csv'
            write_imf_csv(result, path)
            table = pd.read_csv(path)
        self.assertEqual(list(table.columns), ['t', 'imf1', 'imf2', 'imf3', 'imf4', 'residual'])
        self.assertEqual(len(table), SAMPLES)


if __name__ == '__main__':
    unittest.main()

import math
import tempfile
import unittest
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from motion_emd.errors import DatasetError, DimensionMismatchError, InvalidFlowError
from motion_emd.flow_core import FlowField, GrayFrame
from motion_emd.motion_traces import (MotionTrace, build_trace, frame_descriptors,
                                      read_trace_csv, write_trace_csv)
from motion_emd.pipeline.dataset import clip_trace


def constant_flow(u, v, shape=(8, 8)):
    return FlowField(np.full(shape, float(u)), np.full(shape, float(v)))


def two_pass(values):
    """Mean, then population std around it, with plain loops"""
    total = 0.0
    for x in values:
        total += x
    mean = total / len(values)
    spread = 0.0
    for x in values:
        spread += (x - mean) ** 2
    return mean, math.sqrt(spread / len(values))


class TestFrameDescriptors(unittest.TestCase):
    """
    TestCase for frame_descriptors
    """

    def test_constant_field(self):
        self.assertEqual(frame_descriptors(constant_flow(1, 0)).as_tuple(), (1.0, 0.0, 0.0, 0.0))

    def test_half_and_half(self):
        u = np.zeros((4, 4))
        v = np.zeros((4, 4))
        u[:, :2] = 1.0
        v[:, 2:] = 1.0
        mu_m, sigma_m, mu_d, sigma_d = frame_descriptors(FlowField(u, v)).as_tuple()
        self.assertAlmostEqual(mu_m, 1.0, places=14)
        self.assertAlmostEqual(sigma_m, 0.0, places=14)
        self.assertAlmostEqual(mu_d, np.pi / 4, places=14)
        self.assertAlmostEqual(sigma_d, np.pi / 4, places=14)

    def test_matches_naive_two_pass(self):
        rng = np.random.default_rng(11)
        for trial in range(100):
            u, v = rng.normal(size=(32, 32)), rng.normal(size=(32, 32))
            got = frame_descriptors(FlowField(u, v)).as_tuple()
            pairs = list(zip(u.ravel().tolist(), v.ravel().tolist()))
            expected = two_pass([math.hypot(a, b) for a, b in pairs]) + \
                two_pass([math.atan2(b, a) for a, b in pairs])
            for g, e in zip(got, expected):
                self.assertLessEqual(abs(g - e), 1e-12 * max(1.0, abs(e)), msg=str(trial))

    def test_circular_statistics(self):
        u = np.array([[1.0, -1.0]])
        v = np.array([[1e-9, 1e-9]])
        arithmetic = frame_descriptors(FlowField(u, v))
        circular = frame_descriptors(FlowField(u, v), direction_stats='circular')
        self.assertAlmostEqual(arithmetic.mu_d, np.pi / 2, places=6)
        self.assertAlmostEqual(circular.mu_d, np.pi / 2, places=6)
        # opposite directions: resultant ~ 0, circular spread is large
        self.assertGreater(circular.sigma_d, 3.0)

    def test_unknown_direction_stats(self):
        with self.assertRaises(ValueError):
            frame_descriptors(constant_flow(1, 0), direction_stats='median')


class TestBuildTrace(unittest.TestCase):
    """
    TestCase for build_trace and the trace CSV
    """

    def test_constant_clip(self):
        trace = build_trace([constant_flow(2, 0)] * 15)
        self.assertEqual(trace.length, 15)
        np.testing.assert_array_equal(trace.named('mu_m'), np.full(15, 2.0))
        np.testing.assert_array_equal(trace.series[1:], np.zeros((3, 15)))

    def test_alternating(self):
        trace = build_trace([constant_flow(1 + 2 * (k % 2), 0) for k in range(6)])
        np.testing.assert_array_equal(trace.series[0], [1, 3, 1, 3, 1, 3])

    def test_errors(self):
        with self.assertRaises(InvalidFlowError):
            build_trace([constant_flow(1, 0)])
        with self.assertRaises(DimensionMismatchError):
            build_trace([constant_flow(1, 0), constant_flow(1, 0, shape=(8, 9))])

    def test_trace_validation(self):
        with self.assertRaises(ValueError):
            MotionTrace(np.zeros((3, 5)))
        with self.assertRaises(ValueError):
            MotionTrace(np.zeros((4, 1)))

    def test_csv(self):
        rng = np.random.default_rng(3)
        trace = MotionTrace(rng.normal(size=(4, 15)))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'trace.csv'
            write_trace_csv(trace, path)
            header = path.read_text().splitlines()[0]
            self.assertEqual(header, 'frame,mu_m,sigma_m,mu_d,sigma_d')
            np.testing.assert_array_equal(read_trace_csv(path).series, trace.series)

    def test_csv_errors(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'trace.csv'
            one_row = 'frame,mu_m,sigma_m,mu_d,sigma_d\n0,1,2,3,4\n'
            for content in ('', 'frame,a,b\n0,1,2\n', one_row):
                path.write_text(content)
                with self.assertRaises(DatasetError):
                    read_trace_csv(path)

    def test_rotated_flows(self):
        rng = np.random.default_rng(8)
        flows = [FlowField(*rng.normal(size=(2, 6, 7))) for _ in range(5)]
        for theta in rng.uniform(-np.pi, np.pi, size=4):
            turned = [FlowField(f.u * np.cos(theta) - f.v * np.sin(theta),
                                f.u * np.sin(theta) + f.v * np.cos(theta)) for f in flows]
            base = build_trace(flows, direction_stats='circular')
            rotated = build_trace(turned, direction_stats='circular')
            for name in ('mu_m', 'sigma_m', 'sigma_d'):
                np.testing.assert_allclose(rotated.named(name), base.named(name), atol=1e-9)
            offset = np.angle(np.exp(1j * (rotated.named('mu_d') - base.named('mu_d'))))
            np.testing.assert_allclose(offset, np.full(5, theta), atol=1e-9)

    def test_frame_intensity_scaling(self):
        rng = np.random.default_rng(9)
        texture = gaussian_filter(rng.normal(size=(48, 48)), 2.0, mode='wrap')
        texture = (texture - texture.min()) / np.ptp(texture)
        frames = [np.roll(texture, (k, 2 * k), axis=(0, 1)) for k in range(4)]
        base = clip_trace([GrayFrame(frame) for frame in frames])
        for k in (0.5, 0.25):
            scaled = clip_trace([GrayFrame(k * frame) for frame in frames])
            np.testing.assert_allclose(scaled.series, base.series, atol=1e-9)


if __name__ == '__main__':
    unittest.main()

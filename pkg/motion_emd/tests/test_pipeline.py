import tempfile
import unittest
from dataclasses import replace
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from motion_emd.emd_core import SiftConfig, feature_length
from motion_emd.errors import DatasetError, TrainingError
from motion_emd.flow_core import GrayFrame
from motion_emd.helpers import write_pgm
from motion_emd.motion_traces import MotionTrace
from motion_emd.nn_core import CongestionClassifier, ModelConfig, softmax
from motion_emd.pipeline import (BatchPaginator, ClipRecord, DESCRIPTOR_MASKS,
                                 SyntheticSceneConfig, TrainConfig, build_synthetic_dataset,
                                 compute_metrics, evaluate, extract_features,
                                 generate_synthetic_clip, load_manifest, parse_mask,
                                 sweep_descriptors, sweep_imfs, train, train_on_features,
                                 write_manifest, write_sweep_csv)
from motion_emd.pipeline.dataset import (check_scene_disjoint, clip_trace, ingest_frames,
                                         plan_synthetic_clips, sample_indices, trace_features)

SMALL_MODEL = ModelConfig(embed_hidden=16, embed_dim=16, head_hidden=(16, 8))


def mean_speed_trace(regime, seeds):
    """mu_M series of synthetic clips of one regime"""
    traces = []
    for seed in seeds:
        frames, _ = generate_synthetic_clip(SyntheticSceneConfig.for_regime(regime, seed=seed))
        traces.append(clip_trace(frames).named('mu_m'))
    return traces


class TestSyntheticClips(unittest.TestCase):
    """
    TestCase for the synthetic traffic generator
    """

    def test_determinism(self):
        cfg = SyntheticSceneConfig.for_regime('medium', seed=5, frame_size=32, n_frames=4)
        first, label = generate_synthetic_clip(cfg)
        second, _ = generate_synthetic_clip(cfg)
        self.assertEqual(label, 1)
        self.assertEqual(len(first), 4)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.data, b.data)

    def test_regime_motion(self):
        heavy = mean_speed_trace('heavy', (1, 2))
        light = mean_speed_trace('light', (1, 2))
        for series in heavy:
            self.assertGreater(series.std(), 0.3 * series.mean())
        self.assertGreaterEqual(np.mean(light), 3.0 * np.mean(heavy))

    def test_config_validation(self):
        with self.assertRaises(ValueError):
            SyntheticSceneConfig.for_regime('gridlock')
        with self.assertRaises(ValueError):
            SyntheticSceneConfig.for_regime('light', frame_size=8)


class TestIngestion(unittest.TestCase):
    """
    TestCase for frame ingestion, manifests and split discipline
    """

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def write_frames(self, count, name='clip'):
        frame_dir = self.root / name
        frame_dir.mkdir()
        for k in range(count):
            write_pgm(frame_dir / 'frame_{:03d}.pgm'.format(k), np.full((16, 16), k / 40.0))
        return frame_dir

    def test_sample_indices(self):
        self.assertEqual(sample_indices(16, 16).tolist(), list(range(16)))
        self.assertEqual(sample_indices(32, 16).tolist(), list(range(0, 32, 2)))

    def test_uses_every_frame(self):
        frames = ingest_frames(self.write_frames(16), 16, None)
        expected = [round(k / 40.0 * 255) / 255 for k in range(16)]
        self.assertEqual([frame.data[0, 0] for frame in frames], expected)

    def test_uniform_stride(self):
        frames = ingest_frames(self.write_frames(32), 16, None)
        expected = [round(k / 40.0 * 255) / 255 for k in range(0, 32, 2)]
        self.assertEqual([frame.data[0, 0] for frame in frames], expected)

    def test_resize(self):
        frames = ingest_frames(self.write_frames(4), 4, 24)
        self.assertEqual(frames[0].shape, (24, 24))

    def test_insufficient_frames(self):
        with self.assertRaisesRegex(DatasetError, 'insufficient frames'):
            ingest_frames(self.write_frames(10), 16, None)

    def test_corrupt_frame(self):
        frame_dir = self.write_frames(4)
        (frame_dir / 'frame_002.pgm').write_bytes(b'not an image')
        with self.assertRaisesRegex(DatasetError, 'frame_002.pgm'):
            ingest_frames(frame_dir, 4, None)

    def test_manifest_round_trip(self):
        records = [ClipRecord('s000_c000', self.root / 'clips' / 'a', 0, 'train'),
                   ClipRecord('s001_c001', self.root / 'clips' / 'b', 2, 'test')]
        write_manifest(records, self.root / 'manifest.csv')
        self.assertIn('clips/a', (self.root / 'manifest.csv').read_text())
        self.assertEqual(load_manifest(self.root / 'manifest.csv'), records)

    def test_named_labels(self):
        (self.root / 'manifest.csv').write_text(
            'clip_id,frame_dir,label,split\ns0_a,a,heavy,val\n')
        self.assertEqual(load_manifest(self.root / 'manifest.csv')[0].label, 2)

    def test_scene_leak(self):
        (self.root / 'manifest.csv').write_text(
            'clip_id,frame_dir,label,split\ns0_a,a,0,train\ns0_b,b,1,test\n')
        with self.assertRaisesRegex(DatasetError, 's0'):
            load_manifest(self.root / 'manifest.csv')

    def test_bad_rows(self):
        with self.assertRaises(DatasetError):
            ClipRecord('s0_a', self.root, 3, 'train')
        with self.assertRaises(DatasetError):
            ClipRecord('s0_a', self.root, 0, 'holdout')
        with self.assertRaises(DatasetError):
            load_manifest(self.root / 'missing.csv')

    def test_synthetic_plan_is_scene_disjoint(self):
        plan = plan_synthetic_clips(60, seed=3, frame_size=32, n_frames=4)
        records = [ClipRecord(clip_id, self.root, cfg.label, split)
                   for clip_id, split, cfg in plan]
        check_scene_disjoint(records)
        splits = [split for _, split, _ in plan]
        self.assertEqual((splits.count('train'), splits.count('val'), splits.count('test')),
                         (42, 6, 12))
        self.assertEqual([cfg.label for _, _, cfg in plan].count(0), 20)


class TestFeatureExtraction(unittest.TestCase):
    """
    TestCase for descriptor masks and clip features
    """

    def test_parse_mask(self):
        self.assertEqual(parse_mask('magnitude'), ('mu_m', 'sigma_m'))
        self.assertEqual(parse_mask('sigma_d, mu_m'), ('mu_m', 'sigma_d'))
        self.assertEqual(parse_mask(['mu_d']), ('mu_d',))
        with self.assertRaises(ValueError):
            parse_mask('speed')
        self.assertEqual(len(DESCRIPTOR_MASKS), 7)

    def test_masking(self):
        trace = MotionTrace(np.random.default_rng(0).normal(size=(4, 15)))
        full = trace_features(trace)
        magnitude_only = trace_features(trace, descriptor_mask=parse_mask('magnitude'))
        self.assertEqual(full.values.shape, (32,))
        np.testing.assert_array_equal(magnitude_only.values[16:], np.zeros(16))
        np.testing.assert_array_equal(magnitude_only.values[:16], full.values[:16])

    def test_static_clip(self):
        rng = np.random.default_rng(2)
        texture = gaussian_filter(rng.random((32, 32)), 1.5)
        frames = [GrayFrame(texture)] * 6
        np.testing.assert_allclose(extract_features(frames).values, np.zeros(32), atol=1e-9)


class TestBatchPaginator(unittest.TestCase):
    """
    TestCase for BatchPaginator
    """

    def test_pages(self):
        paginator = BatchPaginator(np.arange(10), 4)
        self.assertEqual(paginator.total_items(), 10)
        self.assertEqual(paginator.total_pages(), 3)
        self.assertEqual([page.tolist() for page in paginator],
                         [[0, 1, 2, 3], [4, 5, 6, 7], [8, 9]])
        self.assertEqual(paginator.jump_to_page(2).tolist(), [4, 5, 6, 7])

    def test_shuffled_cover(self):
        paginator = BatchPaginator(np.arange(3, 20), 5, np.random.default_rng(0))
        members = np.concatenate(list(paginator))
        self.assertEqual(sorted(members.tolist()), list(range(3, 20)))

    def test_out_of_range(self):
        paginator = BatchPaginator(np.arange(4), 2)
        with self.assertRaisesRegex(IndexError, "No page 3 in 2 pages"):
            paginator.jump_to_page(3)
        with self.assertRaises(IndexError):
            paginator.jump_to_page(0)


class TestTrainOnFeatures(unittest.TestCase):
    """
    TestCase for train_on_features
    """

    def setUp(self):
        rng = np.random.default_rng(0)
        self.labels = np.repeat([0, 1, 2], 6)
        self.features = rng.normal(size=(18, 32)) + self.labels[:, None]

    def test_smoke(self):
        features, labels = self.features[:2], np.array([0, 1])
        model, log = train_on_features(features, labels, [0, 1], None, SMALL_MODEL,
                                       TrainConfig(epochs=1), seed=4)
        initial = CongestionClassifier.build(SMALL_MODEL, np.random.default_rng(4))
        self.assertTrue(np.isfinite(log.final_loss))
        self.assertTrue(np.isnan(log.epochs[0].val_loss))
        self.assertTrue(any(np.any(a != b)
                            for a, b in zip(model.parameters(), initial.parameters())))

    def test_determinism(self):
        runs = [train_on_features(self.features, self.labels, np.arange(12), np.arange(12, 18),
                                  SMALL_MODEL, TrainConfig(epochs=3), seed=1)
                for _ in range(2)]
        self.assertEqual(runs[0][1].final_loss, runs[1][1].final_loss)
        self.assertTrue(runs[0][1].to_frame().equals(runs[1][1].to_frame()))
        np.testing.assert_array_equal(runs[0][0].predict(self.features),
                                      runs[1][0].predict(self.features))

    def test_learns_separable_data(self):
        model, log = train_on_features(self.features, self.labels, np.arange(18), None,
                                       SMALL_MODEL, TrainConfig(epochs=30, lr=1e-2), seed=0)
        self.assertLess(log.final_loss, log.epochs[0].loss)
        self.assertGreaterEqual(np.mean(model.predict(self.features) == self.labels), 0.9)

    def test_log_csv(self):
        _, log = train_on_features(self.features, self.labels, np.arange(18), None,
                                   SMALL_MODEL, TrainConfig(epochs=2), seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'log.csv'
            log.write_csv(path)
            header = path.read_text().splitlines()[0]
        self.assertEqual(header, 'epoch,loss,accuracy,lr,val_loss,val_accuracy')

    def test_bad_splits(self):
        with self.assertRaises(TrainingError):
            train_on_features(self.features, self.labels, [], None, SMALL_MODEL)
        with self.assertRaises(TrainingError):
            train_on_features(self.features, self.labels, [0, 1, 2], None, SMALL_MODEL)


class TestMetrics(unittest.TestCase):
    """
    TestCase for compute_metrics
    """

    def test_perfect(self):
        y = [0, 1, 2, 2]
        report = compute_metrics(y, y, np.eye(3)[y])
        self.assertEqual(report.accuracy, 1.0)
        self.assertEqual(report.confusion, [[1, 0, 0], [0, 1, 0], [0, 0, 2]])
        self.assertEqual(report.macro_f1, 1.0)
        self.assertEqual(report.undefined_classes, [])

    def test_single_class(self):
        y = [1, 1, 1]
        report = compute_metrics(y, y, np.full((3, 3), 1 / 3))
        self.assertEqual(report.f1[1], 1.0)
        self.assertEqual(report.undefined_classes, [0, 2])
        self.assertEqual(report.macro_f1, 1.0)
        self.assertAlmostEqual(report.loss, np.log(3))

    def test_brute_force_recount(self):
        rng = np.random.default_rng(8)
        y_true = rng.integers(0, 3, 60).tolist()
        y_pred = rng.integers(0, 3, 60).tolist()
        probabilities = softmax(rng.normal(size=(60, 3)))
        report = compute_metrics(y_true, y_pred, probabilities)
        pairs = list(zip(y_true, y_pred))
        self.assertAlmostEqual(report.accuracy, sum(t == p for t, p in pairs) / 60)
        f1s = []
        for k in range(3):
            tp = sum(t == k and p == k for t, p in pairs)
            fp = sum(t != k and p == k for t, p in pairs)
            fn = sum(t == k and p != k for t, p in pairs)
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / (tp + fn) if tp + fn else 0.0
            f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
            f1s.append(f1)
            self.assertAlmostEqual(report.precision[k], precision)
            self.assertAlmostEqual(report.recall[k], recall)
            self.assertAlmostEqual(report.f1[k], f1)
            self.assertEqual(report.support[k], tp + fn)
            for j in range(3):
                self.assertEqual(report.confusion[k][j], pairs.count((k, j)))
        self.assertAlmostEqual(report.macro_f1, sum(f1s) / 3)
        loss = -sum(np.log(probabilities[i, t]) for i, t in enumerate(y_true)) / 60
        self.assertAlmostEqual(report.loss, loss)

    def test_empty(self):
        with self.assertRaises(DatasetError):
            compute_metrics([], [], np.zeros((0, 3)))


class TestSyntheticPipeline(unittest.TestCase):
    """
    TestCase for training, evaluation and sweeps on a small synthetic dataset
    """

    @classmethod
    def setUpClass(cls):
        cls.dataset = build_synthetic_dataset(n_clips=18, seed=0, frame_size=32, n_frames=8)
        cls.train_cfg = TrainConfig(epochs=3)

    def test_dataset_layout(self):
        self.assertEqual(len(self.dataset), 18)
        self.assertEqual(self.dataset.traces[0].length, 7)
        for split in ('train', 'val', 'test'):
            self.assertEqual(self.dataset.split_indices(split).size, 6)
        self.assertEqual(self.dataset.features().shape, (18, 32))
        self.assertIs(self.dataset.features(), self.dataset.features())

    def test_train_and_evaluate(self):
        model, log = train(self.dataset, SMALL_MODEL, self.train_cfg, seed=2)
        self.assertEqual(len(log.epochs), 3)
        self.assertTrue(np.isfinite(log.epochs[-1].val_loss))
        report = evaluate(model, self.dataset, 'test')
        self.assertEqual(report.n_samples, 6)
        self.assertEqual(sum(report.support), 6)
        again = evaluate(train(self.dataset, SMALL_MODEL, self.train_cfg, seed=2)[0],
                         self.dataset, 'test')
        self.assertEqual(report.to_json(), again.to_json())

    def test_sweep_imfs(self):
        table = sweep_imfs(self.dataset, (2, 3), SMALL_MODEL, self.train_cfg)
        self.assertEqual(table['n_imfs'].tolist(), [2, 3])
        np.testing.assert_allclose(table['gap'], table['train_acc'] - table['test_acc'])
        self.assertEqual(self.dataset.features(SiftConfig(n_modes=3)).shape,
                         (18, feature_length(3)))

    def test_sweep_descriptors(self):
        table = sweep_descriptors(self.dataset, model_cfg=SMALL_MODEL, train_cfg=self.train_cfg)
        self.assertEqual(len(table), 7)
        self.assertEqual(table.loc[0, 'mask'], 'all')
        self.assertEqual(table.loc[0, 'delta'], 0.0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'desc.csv'
            write_sweep_csv(table, path)
            lines = path.read_text().splitlines()
        self.assertEqual(lines[0], 'mask,test_acc,delta')
        self.assertEqual(len(lines), 8)


if __name__ == '__main__':
    unittest.main()

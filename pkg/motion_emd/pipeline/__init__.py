from motion_emd.pipeline.synthetic import (REGIMES, SyntheticSceneConfig,
                                           generate_synthetic_clip, write_clip)
from motion_emd.pipeline.dataset import (ClipRecord, TraceDataset, DESCRIPTOR_MASKS,
                                         load_manifest, write_manifest, ingest_clip,
                                         extract_features, build_synthetic_dataset,
                                         write_synthetic_dataset, parse_mask)
from motion_emd.pipeline.batching import BatchPaginator
from motion_emd.pipeline.training import TrainConfig, TrainingLog, train, train_on_features
from motion_emd.pipeline.metrics import MetricsReport, compute_metrics, evaluate
from motion_emd.pipeline.sweeps import sweep_imfs, sweep_descriptors, write_sweep_csv

__all__ = ['REGIMES', 'SyntheticSceneConfig', 'generate_synthetic_clip', 'write_clip',
           'ClipRecord', 'TraceDataset', 'DESCRIPTOR_MASKS', 'load_manifest', 'write_manifest',
           'ingest_clip', 'extract_features', 'build_synthetic_dataset',
           'write_synthetic_dataset', 'parse_mask', 'BatchPaginator', 'TrainConfig',
           'TrainingLog', 'train', 'train_on_features', 'MetricsReport', 'compute_metrics',
           'evaluate', 'sweep_imfs', 'sweep_descriptors', 'write_sweep_csv']

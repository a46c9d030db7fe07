"""
Sensitivity sweeps over the number of IMFs and over descriptor subsets.
Both reuse the dataset's cached traces, so flow is computed once.
"""

import logging
from dataclasses import replace
from pathlib import Path
from typing import Sequence, Union

import pandas as pd

from motion_emd.emd_core import SiftConfig
from motion_emd.motion_traces import SERIES_NAMES
from motion_emd.nn_core import ModelConfig
from motion_emd.pipeline.dataset import DESCRIPTOR_MASKS, TraceDataset, parse_mask
from motion_emd.pipeline.metrics import evaluate
from motion_emd.pipeline.training import TrainConfig, train

logger = logging.getLogger(__name__)

DEFAULT_IMF_COUNTS = (2, 3, 4, 5, 6)
DEFAULT_MASKS = ('all', 'no_mu_m', 'no_sigma_m', 'no_mu_d', 'no_sigma_d', 'magnitude',
                 'direction')


def sweep_imfs(dataset: TraceDataset, n_list: Sequence[int] = DEFAULT_IMF_COUNTS,
               model_cfg: ModelConfig = ModelConfig(), train_cfg: TrainConfig = TrainConfig(),
               seed: int = 0, sift_cfg: SiftConfig = SiftConfig(),
               descriptor_mask: Sequence[str] = SERIES_NAMES, n_workers: int = 1
               ) -> pd.DataFrame:
    """One model per IMF count, same seed.
    :return: columns n_imfs, train_acc, test_acc, gap
    """
    rows = []
    for n_imfs in n_list:
        cfg = replace(sift_cfg, n_modes=int(n_imfs))
        model, _ = train(dataset, model_cfg, train_cfg, seed, cfg, descriptor_mask, n_workers)
        train_acc = evaluate(model, dataset, 'train', cfg, descriptor_mask).accuracy
        test_acc = evaluate(model, dataset, 'test', cfg, descriptor_mask).accuracy
        rows.append((int(n_imfs), train_acc, test_acc, train_acc - test_acc))
        logger.info("N={}: train {:.4f} test {:.4f}".format(n_imfs, train_acc, test_acc))
    return pd.DataFrame(rows, columns=['n_imfs', 'train_acc', 'test_acc', 'gap'])


def sweep_descriptors(dataset: TraceDataset, masks: Sequence[str] = DEFAULT_MASKS,
                      model_cfg: ModelConfig = ModelConfig(),
                      train_cfg: TrainConfig = TrainConfig(), seed: int = 0,
                      sift_cfg: SiftConfig = SiftConfig(), n_workers: int = 1) -> pd.DataFrame:
    """One model per descriptor mask; delta is test accuracy minus the full-mask accuracy.
    :param masks: DESCRIPTOR_MASKS keys or comma separated series names
    :return: columns mask, test_acc, delta
    """
    accuracies = {}

    def test_accuracy(names):
        if names not in accuracies:
            model, _ = train(dataset, model_cfg, train_cfg, seed, sift_cfg, names, n_workers)
            accuracies[names] = evaluate(model, dataset, 'test', sift_cfg, names).accuracy
        return accuracies[names]

    full = test_accuracy(DESCRIPTOR_MASKS['all'])
    rows = []
    for mask in masks:
        accuracy = test_accuracy(parse_mask(mask))
        rows.append((mask, accuracy, accuracy - full))
        logger.info("mask {}: test {:.4f}".format(mask, accuracy))
    return pd.DataFrame(rows, columns=['mask', 'test_acc', 'delta'])


def write_sweep_csv(table: pd.DataFrame, path: Union[str, Path]) -> None:
    table.to_csv(path, index=False, float_format='%.6f')

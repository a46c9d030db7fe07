"""
Joint training of the EMD embedding MLP and the classification head.
"""

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from motion_emd.emd_core import SiftConfig
from motion_emd.errors import TrainingError
from motion_emd.motion_traces import SERIES_NAMES
from motion_emd.nn_core import AdamState, CongestionClassifier, ModelConfig, adam_step, ce_loss
from motion_emd.nn_core.losses import smoothed_target_matrix
from motion_emd.pipeline.batching import BatchPaginator
from motion_emd.pipeline.dataset import TraceDataset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 4
    lr: float = 1e-3
    label_smoothing: float = 0.1
    clip_norm: float = 1.0
    lr_milestones: Tuple[int, ...] = (30, 60)
    lr_gamma: float = 0.1

    def __post_init__(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.lr <= 0 or self.clip_norm <= 0:
            raise ValueError("lr and clip_norm must be > 0")
        if not 0.0 <= self.label_smoothing < 1.0:
            raise ValueError("label_smoothing must lie in [0, 1)")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    lr: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainingLog:
    """Per-epoch training (smoothed) loss and accuracy plus validation metrics.
    Validation columns are NaN when the dataset has no val split.
    """
    epochs: List[EpochRecord] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].loss

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(record) for record in self.epochs],
                            columns=[f.name for f in fields(EpochRecord)])

    def write_csv(self, path: Union[str, Path]) -> None:
        self.to_frame().to_csv(path, index=False, float_format='%.17g')


def _unsmoothed_loss(model: CongestionClassifier, normalized: np.ndarray,
                     labels: np.ndarray) -> Tuple[float, float]:
    """Eval-mode loss and accuracy on already normalised features"""
    logits, _ = model.forward(normalized)
    one_hot = np.eye(model.n_classes)[labels]
    loss, _ = ce_loss(logits, one_hot)
    return loss, float(np.mean(np.argmax(logits, axis=1) == labels))


def train_on_features(features: np.ndarray, labels: np.ndarray, train_idx: np.ndarray,
                      val_idx: np.ndarray = None, model_cfg: ModelConfig = ModelConfig(),
                      train_cfg: TrainConfig = TrainConfig(), seed: int = 0
                      ) -> Tuple[CongestionClassifier, TrainingLog]:
    """
    Train on rows train_idx of a raw feature matrix.
    :param features: clips x D raw EMD statistics
    :param labels: class index per clip
    :param train_idx: rows used for fitting, including the scaler
    :param val_idx: rows evaluated after every epoch (may be empty)
    :param seed: drives initialisation, shuffling and dropout
    :return: (classifier in eval mode, log)
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    train_idx = np.asarray(train_idx, dtype=np.int64)
    val_idx = np.asarray([] if val_idx is None else val_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise TrainingError("The train split is empty")
    if np.unique(labels[train_idx]).size < 2:
        raise TrainingError("The train split holds a single class; need at least 2")
    if features.ndim != 2 or features.shape[0] != labels.size:
        raise TrainingError("Feature matrix {} does not match {} labels".format(
            features.shape, labels.size))

    rng = np.random.default_rng(seed)
    model_cfg = replace(model_cfg, input_dim=features.shape[1])
    model = CongestionClassifier.build(model_cfg, rng)
    model.fit_scaler(features[train_idx])
    normalized = model.transform(features)
    state = AdamState.for_parameters(model.parameters(), lr=train_cfg.lr,
                                     milestones=tuple(train_cfg.lr_milestones),
                                     gamma=train_cfg.lr_gamma, clip_norm=train_cfg.clip_norm)
    log = TrainingLog()
    for epoch in range(train_cfg.epochs):
        model.train()
        total_loss, correct = 0.0, 0
        for batch in BatchPaginator(train_idx, train_cfg.batch_size, rng):
            logits, caches = model.forward(normalized[batch], rng)
            targets = smoothed_target_matrix(labels[batch], model.n_classes,
                                             train_cfg.label_smoothing)
            loss, grad = ce_loss(logits, targets)
            if not np.isfinite(loss):
                raise TrainingError("Loss became {} in epoch {}".format(loss, epoch))
            adam_step(state, model.parameters(), model.backward(caches, grad), epoch)
            model.mark_updated()
            total_loss += loss * batch.size
            correct += int(np.sum(np.argmax(logits, axis=1) == labels[batch]))
        model.eval()
        val_loss = val_accuracy = float('nan')
        if val_idx.size:
            val_loss, val_accuracy = _unsmoothed_loss(model, normalized[val_idx],
                                                      labels[val_idx])
        record = EpochRecord(epoch, total_loss / train_idx.size, correct / train_idx.size,
                             state.scheduled_lr(epoch), val_loss, val_accuracy)
        log.epochs.append(record)
        if epoch % 10 == 0 or epoch == train_cfg.epochs - 1:
            logger.info("epoch {:3d}  loss {:.4f}  acc {:.3f}  val_loss {:.4f}  val_acc {:.3f}"
                        .format(epoch, record.loss, record.accuracy, val_loss, val_accuracy))
    return model.eval(), log


def train(dataset: TraceDataset, model_cfg: ModelConfig = ModelConfig(),
          train_cfg: TrainConfig = TrainConfig(), seed: int = 0,
          sift_cfg: SiftConfig = SiftConfig(), descriptor_mask: Sequence[str] = SERIES_NAMES,
          n_workers: int = 1) -> Tuple[CongestionClassifier, TrainingLog]:
    """Featurize the dataset's traces and train on its train split, validating on val"""
    features = dataset.features(sift_cfg, descriptor_mask, n_workers)
    return train_on_features(features, dataset.labels, dataset.split_indices('train'),
                             dataset.split_indices('val'), model_cfg, train_cfg, seed)

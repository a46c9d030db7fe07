"""
Classification metrics of a trained classifier on one split.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from typing import List, Sequence

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from motion_emd.emd_core import SiftConfig
from motion_emd.errors import DatasetError
from motion_emd.motion_traces import SERIES_NAMES
from motion_emd.nn_core import CongestionClassifier
from motion_emd.pipeline.dataset import TraceDataset

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    """
    Accuracy, per-class and aggregated precision/recall/F1, confusion matrix
    (rows true class, columns prediction) and mean unsmoothed cross-entropy.
    undefined_classes lists classes with neither support nor predictions;
    they report 0 and are left out of the macro averages.
    """
    accuracy: float
    precision: List[float]
    recall: List[float]
    f1: List[float]
    support: List[int]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion: List[List[int]]
    loss: float
    n_samples: int
    undefined_classes: List[int] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def compute_metrics(y_true: Sequence[int], y_pred: Sequence[int], probabilities: np.ndarray,
                    n_classes: int = 3) -> MetricsReport:
    """
    :param y_true: true class per sample
    :param y_pred: predicted class per sample
    :param probabilities: samples x n_classes, used for the loss
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise DatasetError("Cannot evaluate an empty split")
    labels = list(range(n_classes))
    confusion = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, average=None, zero_division=0)
    defined = (support > 0) | (confusion.sum(axis=0) > 0)
    undefined = [k for k in labels if not defined[k]]
    if undefined:
        logger.warning("Classes {} have no samples or predictions; reported as 0".format(
            undefined))
    weights = support / support.sum()
    picked = np.clip(probabilities[np.arange(y_true.size), y_true], 1e-300, None)
    return MetricsReport(
        accuracy=float(np.trace(confusion) / y_true.size),
        precision=[float(x) for x in precision],
        recall=[float(x) for x in recall],
        f1=[float(x) for x in f1],
        support=[int(x) for x in support],
        macro_precision=float(precision[defined].mean()),
        macro_recall=float(recall[defined].mean()),
        macro_f1=float(f1[defined].mean()),
        weighted_precision=float(np.sum(weights * precision)),
        weighted_recall=float(np.sum(weights * recall)),
        weighted_f1=float(np.sum(weights * f1)),
        confusion=confusion.tolist(),
        loss=float(-np.mean(np.log(picked))),
        n_samples=int(y_true.size),
        undefined_classes=undefined)


def evaluate(model: CongestionClassifier, dataset: TraceDataset, split: str = 'test',
             sift_cfg: SiftConfig = SiftConfig(), descriptor_mask: Sequence[str] = SERIES_NAMES,
             n_workers: int = 1) -> MetricsReport:
    """Eval-mode predictions on one split of the dataset"""
    indices = dataset.split_indices(split)
    if indices.size == 0:
        raise DatasetError("The {} split is empty".format(split))
    features = dataset.features(sift_cfg, descriptor_mask, n_workers)[indices]
    probabilities = model.predict_proba(features)
    return compute_metrics(dataset.labels[indices], np.argmax(probabilities, axis=1),
                           probabilities, model.n_classes)

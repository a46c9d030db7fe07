"""
Fixed-length EMD feature vectors from motion traces.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd

from motion_emd.emd_core.sifting import ImfDecomposition, SiftConfig, decompose
from motion_emd.errors import SignalError
from motion_emd.motion_traces import MotionTrace

STATISTICS = ('mean', 'std')


@dataclass(frozen=True)
class EmdFeatureVector:
    """Flat statistics, ordered descriptor-major, IMF-middle, statistic-minor"""
    values: np.ndarray
    n_modes: int

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (feature_length(self.n_modes),):
            raise ValueError("Expected {} features for N={}, got shape {}".format(
                feature_length(self.n_modes), self.n_modes, values.shape))
        if not np.all(np.isfinite(values)):
            raise ValueError("Feature vector holds non-finite values")
        object.__setattr__(self, 'values', values)

    def block(self, series: int) -> np.ndarray:
        """The 2*N values that belong to one descriptor series"""
        width = 2 * self.n_modes
        return self.values[series * width:(series + 1) * width]


def feature_length(n_modes: int) -> int:
    return 4 * n_modes * len(STATISTICS)


def feature_names(n_modes: int) -> List[str]:
    return ['f{}'.format(k) for k in range(feature_length(n_modes))]


def decompose_trace(trace: MotionTrace, cfg: SiftConfig = SiftConfig()) -> List[ImfDecomposition]:
    """Decompose the four series of a trace independently"""
    if trace.length < 4:
        raise SignalError("Featurizing needs traces of length >= 4, got {}".format(trace.length))
    return [decompose(series, cfg) for series in trace.series]


def featurize(trace: MotionTrace, cfg: SiftConfig = SiftConfig()) -> EmdFeatureVector:
    """Temporal mean and population std of every IMF of every series.
    Zero-padded modes contribute (0, 0).
    """
    blocks = []
    for decomposition in decompose_trace(trace, cfg):
        stats = np.stack([decomposition.imfs.mean(axis=1), decomposition.imfs.std(axis=1)],
                         axis=1)
        blocks.append(stats.ravel())
    return EmdFeatureVector(np.concatenate(blocks), cfg.n_modes)


def write_imf_csv(decomposition: ImfDecomposition, path: Union[str, Path]) -> None:
    """Columns t, imf1..imfN, residual"""
    table = pd.DataFrame(decomposition.imfs.T,
                         columns=['imf{}'.format(j + 1) for j in range(decomposition.n_modes)])
    table.insert(0, 't', np.arange(decomposition.residual.size))
    table['residual'] = decomposition.residual
    table.to_csv(path, index=False, float_format='%.17g')

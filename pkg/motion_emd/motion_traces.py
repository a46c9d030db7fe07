"""
Frame-level motion descriptors and clip-level motion traces.

Every flow field is reduced to four numbers: mean and population standard
deviation of the flow magnitude and of the flow direction. Stacking them
over a clip yields four time series of length T - 1.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

from motion_emd.errors import DatasetError, DimensionMismatchError, InvalidFlowError
from motion_emd.flow_core import FlowField, direction, magnitude

logger = logging.getLogger(__name__)

SERIES_NAMES = ('mu_m', 'sigma_m', 'mu_d', 'sigma_d')
DIRECTION_STATS = ('arithmetic', 'circular')


@dataclass(frozen=True)
class FrameDescriptors:
    """(mu_M, sigma_M, mu_D, sigma_D) of a single flow field"""
    mu_m: float
    sigma_m: float
    mu_d: float
    sigma_d: float

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.mu_m, self.sigma_m, self.mu_d, self.sigma_d)


@dataclass(frozen=True)
class MotionTrace:
    """Four descriptor series, shape (4, length), rows ordered as SERIES_NAMES"""
    series: np.ndarray

    def __post_init__(self) -> None:
        series = np.asarray(self.series, dtype=np.float64)
        if series.ndim != 2 or series.shape[0] != 4:
            raise ValueError("A motion trace holds exactly 4 series, got shape {}".format(
                series.shape))
        if series.shape[1] < 2:
            raise ValueError("A motion trace needs at least 2 steps")
        if not np.all(np.isfinite(series)):
            raise ValueError("Motion trace holds non-finite values")
        object.__setattr__(self, 'series', series)

    @property
    def length(self) -> int:
        return self.series.shape[1]

    def named(self, name: str) -> np.ndarray:
        """Series by descriptor name"""
        return self.series[SERIES_NAMES.index(name)]


def _circular_moments(angles: np.ndarray) -> Tuple[float, float]:
    mean_sin = float(np.mean(np.sin(angles)))
    mean_cos = float(np.mean(np.cos(angles)))
    resultant = min(np.hypot(mean_sin, mean_cos), 1.0)
    if resultant == 0.0:
        return 0.0, float(np.pi)
    return float(np.arctan2(mean_sin, mean_cos)), float(np.sqrt(-2.0 * np.log(resultant)))


def frame_descriptors(flow: FlowField, direction_stats: str = 'arithmetic') -> FrameDescriptors:
    """Spatial first and second moments of magnitude and direction.
    :param flow: dense flow field
    :param direction_stats: 'arithmetic' (mean/std of atan2 values) or 'circular'
    :return: FrameDescriptors with population standard deviations
    """
    if flow.u.size == 0:
        raise InvalidFlowError("Cannot describe an empty flow field")
    mag = magnitude(flow)
    ang = direction(flow)
    if direction_stats == 'arithmetic':
        mu_d, sigma_d = float(np.mean(ang)), float(np.std(ang))
    elif direction_stats == 'circular':
        mu_d, sigma_d = _circular_moments(ang)
    else:
        raise ValueError("direction_stats must be one of {}".format(DIRECTION_STATS))
    return FrameDescriptors(float(np.mean(mag)), float(np.std(mag)), mu_d, sigma_d)


def build_trace(flows: Sequence[FlowField], direction_stats: str = 'arithmetic') -> MotionTrace:
    """Assemble the clip-level trace in temporal order.
    :param flows: at least two flow fields of identical size
    :return: MotionTrace of length len(flows)
    """
    flows = list(flows)
    if len(flows) < 2:
        raise InvalidFlowError("A motion trace needs at least 2 flow fields, got {}".format(
            len(flows)))
    shape = flows[0].shape
    for index, flow in enumerate(flows):
        if flow.shape != shape:
            raise DimensionMismatchError(
                "Flow {} is {} but flow 0 is {}".format(index, flow.shape, shape))
    rows = [frame_descriptors(flow, direction_stats).as_tuple() for flow in flows]
    return MotionTrace(np.array(rows).T)


def write_trace_csv(trace: MotionTrace, path: Union[str, Path]) -> None:
    """Header frame,mu_m,sigma_m,mu_d,sigma_d; one row per flow step"""
    table = pd.DataFrame(trace.series.T, columns=list(SERIES_NAMES))
    table.insert(0, 'frame', np.arange(trace.length))
    table.to_csv(path, index=False, float_format='%.17g')


def read_trace_csv(path: Union[str, Path]) -> MotionTrace:
    """Inverse of write_trace_csv
    :raises DatasetError: unreadable CSV, missing columns or bad values
    """
    try:
        table = pd.read_csv(path, float_precision='round_trip')
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DatasetError("Cannot parse trace {}: {}".format(path, e)) from e
    missing = [name for name in SERIES_NAMES if name not in table.columns]
    if missing:
        raise DatasetError("{} lacks trace columns {}".format(path, missing))
    try:
        return MotionTrace(table[list(SERIES_NAMES)].to_numpy(dtype=np.float64).T)
    except ValueError as e:
        raise DatasetError("Bad trace {}: {}".format(path, e)) from e

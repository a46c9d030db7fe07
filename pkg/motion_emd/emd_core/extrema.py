"""
Local extrema and zero crossings of sampled signals.
"""

from typing import NamedTuple

import numpy as np

from motion_emd.errors import SignalError


class Extrema(NamedTuple):
    """Indices and values of local maxima and minima"""
    max_index: np.ndarray
    max_value: np.ndarray
    min_index: np.ndarray
    min_value: np.ndarray

    @property
    def count(self) -> int:
        return len(self.max_index) + len(self.min_index)


def find_extrema(signal: np.ndarray) -> Extrema:
    """Strict local maxima and minima.
    A flat run bounded on both sides by lower (higher) samples counts as one
    maximum (minimum) at its midpoint, floor on ties. Runs touching either end
    of the signal never count.
    :param signal: 1-D sequence, length >= 3
    :return: Extrema
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1 or signal.size < 3:
        raise SignalError("find_extrema needs a 1-D signal of length >= 3")
    # collapse equal-valued runs
    starts = np.concatenate(([0], np.flatnonzero(np.diff(signal)) + 1))
    ends = np.concatenate((starts[1:] - 1, [signal.size - 1]))
    values = signal[starts]
    left, middle, right = values[:-2], values[1:-1], values[2:]
    centres = (starts[1:-1] + ends[1:-1]) // 2
    is_max = (middle > left) & (middle > right)
    is_min = (middle < left) & (middle < right)
    max_index, min_index = centres[is_max], centres[is_min]
    return Extrema(max_index, signal[max_index], min_index, signal[min_index])


def count_zero_crossings(signal: np.ndarray) -> int:
    """Sign changes, ignoring exact zeros between samples of opposite sign"""
    signs = np.sign(np.asarray(signal, dtype=np.float64))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))

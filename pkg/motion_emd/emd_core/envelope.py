"""
Cubic spline envelopes through extrema.
"""

from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from motion_emd.emd_core.extrema import Extrema
from motion_emd.errors import InsufficientExtremaError

BOUNDARY_MODES = ('mirror', 'none')

Anchors = Tuple[Optional[float], Optional[float]]


def parabolic_position(signal: np.ndarray, i: int) -> float:
    """Vertex of the parabola through samples i-1, i, i+1"""
    if i <= 0 or i >= signal.size - 1:
        return float(i)
    before, peak, after = signal[i - 1], signal[i], signal[i + 1]
    curvature = before - 2 * peak + after
    if curvature == 0:
        return float(i)
    return i + float(np.clip(0.5 * (before - after) / curvature, -0.5, 0.5))


def _end_wave(signal: np.ndarray, index: np.ndarray, kind: np.ndarray, end: int,
              omega: float) -> Optional[Tuple[float, float]]:
    """
    Upper and lower envelope values at an end sample, read off the outermost wave.
    :param index: the three extrema nearest the end, nearest first
    :param kind: +1 for a maximum, -1 for a minimum
    :param end: 0 or the last sample index
    :param omega: angular frequency of the extrema, radians per sample
    :return: (upper, lower) or None when the extrema do not form one wave
    """
    if not (kind[0] == kind[2] == -kind[1]):
        return None
    value = signal[index]
    amplitude = kind[0] * ((value[0] + value[2]) / 2 - value[1]) / 2
    if amplitude <= 0:
        return None
    distance = abs(parabolic_position(signal, int(index[0])) - end)
    mean = signal[end] - kind[0] * amplitude * np.cos(omega * distance)
    return mean + amplitude, mean - amplitude


def end_anchors(signal: np.ndarray, extrema: Extrema) -> Tuple[Anchors, Anchors]:
    """
    Envelope values at both end samples for signals whose outermost
    extrema form a full wave; None marks an end without an anchor.
    The wave's frequency comes from the mean extrema spacing over the whole signal.
    :return: ((upper_left, upper_right), (lower_left, lower_right))
    """
    signal = np.asarray(signal, dtype=np.float64)
    index = np.concatenate((extrema.max_index, extrema.min_index)).astype(int)
    kind = np.concatenate((np.ones(len(extrema.max_index)), -np.ones(len(extrema.min_index))))
    if index.size < 3:
        return (None, None), (None, None)
    order = np.argsort(index, kind='stable')
    index, kind = index[order], kind[order]
    span = parabolic_position(signal, int(index[-1])) - parabolic_position(signal, int(index[0]))
    half_period = span / (index.size - 1)
    if half_period < 1:
        return (None, None), (None, None)
    omega = np.pi / half_period
    left = _end_wave(signal, index[:3], kind[:3], 0, omega)
    right = _end_wave(signal, index[::-1][:3], kind[::-1][:3], signal.size - 1, omega)
    upper = (left[0] if left else None, right[0] if right else None)
    lower = (left[1] if left else None, right[1] if right else None)
    return upper, lower


def mirror_extend(index: np.ndarray, value: np.ndarray, length: int,
                  n_mirror: int = 2, anchors: Anchors = (None, None)):
    """Reflect the first and last n_mirror extrema about both signal ends.
    Without an anchor the reflection is even about the end sample. With one,
    the anchor becomes a knot on the end sample and only the nearest extremum
    is mirrored through it, carrying the envelope's slope across the end.
    Points lying on an end are not duplicated.
    """
    index = np.asarray(index, dtype=np.float64)
    value = np.asarray(value, dtype=np.float64)
    last = length - 1
    head = index[index > 0][:n_mirror]
    head_values = value[index > 0][:n_mirror]
    tail = index[index < last][-n_mirror:] if n_mirror else index[:0]
    tail_values = value[index < last][-n_mirror:] if n_mirror else value[:0]
    left, right = anchors
    knots, knot_values = [index], [value]
    if left is None:
        knots.append(-head[::-1])
        knot_values.append(head_values[::-1])
    else:
        knots.append(np.concatenate((-head[:1], [0.0])))
        knot_values.append(np.concatenate((2 * left - head_values[:1], [left])))
    if right is None:
        knots.append(2 * last - tail[::-1])
        knot_values.append(tail_values[::-1])
    else:
        knots.append(np.concatenate(([float(last)], 2 * last - tail[-1:])))
        knot_values.append(np.concatenate(([right], 2 * right - tail_values[-1:])))
    return np.concatenate(knots), np.concatenate(knot_values)


def cubic_envelope(index: np.ndarray, value: np.ndarray, length: int,
                   boundary: str = 'mirror', n_mirror: int = 2,
                   anchors: Anchors = (None, None)) -> np.ndarray:
    """Natural cubic spline through the (extended) extrema.
    :param index: extrema positions
    :param value: extrema values
    :param length: number of samples to evaluate, at 0..length-1
    :param boundary: 'mirror' or 'none'
    :param anchors: optional envelope values at the first and last sample (mirror only)
    :return: envelope of the given length
    """
    if boundary == 'mirror':
        knots, knot_values = mirror_extend(index, value, length, n_mirror, anchors)
    elif boundary == 'none':
        knots = np.asarray(index, dtype=np.float64)
        knot_values = np.asarray(value, dtype=np.float64)
    else:
        raise ValueError("boundary must be one of {}".format(BOUNDARY_MODES))
    # real extrema come first, so they win over anchors on the same sample
    knots, unique = np.unique(knots, return_index=True)
    knot_values = knot_values[unique]
    if knots.size < 2:
        raise InsufficientExtremaError(
            "Envelope needs >= 2 extrema, got {}".format(knots.size))
    spline = CubicSpline(knots, knot_values, bc_type='natural')
    return spline(np.arange(length, dtype=np.float64))

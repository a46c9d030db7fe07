"""
Frames and dense displacement fields.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from motion_emd.errors import InvalidFrameError, InvalidFlowError

MIN_FRAME_SIDE = 16
# ITU-R BT.601 luma weights
BT601_WEIGHTS = (0.299, 0.587, 0.114)


def to_luminance(image: np.ndarray) -> np.ndarray:
    """Convert an image array to luminance in [0, 1].
    :param image: H x W (gray) or H x W x 3/4 (color) array, integer or float
    :return: float64 H x W array
    """
    data = np.asarray(image)
    if np.issubdtype(data.dtype, np.integer):
        scale = float(np.iinfo(data.dtype).max)
        data = data.astype(np.float64) / scale
    else:
        data = data.astype(np.float64)
    if data.ndim == 3:
        if data.shape[2] < 3:
            data = data[:, :, 0]
        else:
            data = np.tensordot(data[:, :, :3], np.asarray(BT601_WEIGHTS), axes=([2], [0]))
    if data.ndim != 2:
        raise InvalidFrameError(
            "Expected a 2-D or color image, got shape {}".format(data.shape))
    return data


@dataclass(frozen=True)
class GrayFrame:
    """Luminance frame, row-major, values in [0, 1]"""
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2:
            raise InvalidFrameError("Frame must be 2-D, got shape {}".format(data.shape))
        height, width = data.shape
        if width < MIN_FRAME_SIDE or height < MIN_FRAME_SIDE:
            raise InvalidFrameError(
                "Frame is {}x{}; both sides must be >= {}".format(
                    width, height, MIN_FRAME_SIDE))
        if not np.all(np.isfinite(data)):
            raise InvalidFrameError("Frame holds non-finite pixel values")
        if data.min() < 0.0 or data.max() > 1.0:
            raise InvalidFrameError("Frame values must lie in [0, 1]")
        object.__setattr__(self, 'data', data)

    @classmethod
    def from_array(cls, image: np.ndarray) -> 'GrayFrame':
        """Build a frame from a gray or color array, converting to luminance"""
        return cls(np.clip(to_luminance(image), 0.0, 1.0))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class FlowField:
    """Per-pixel displacement (u right, v down) in pixels/frame.
    border is the width of the frame margin whose estimates are unreliable.
    """
    u: np.ndarray
    v: np.ndarray
    border: int = 0

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        v = np.asarray(self.v, dtype=np.float64)
        if u.ndim != 2 or u.shape != v.shape:
            raise InvalidFlowError(
                "u and v must be 2-D arrays of equal shape, got {} and {}".format(
                    u.shape, v.shape))
        if u.size == 0:
            raise InvalidFlowError("Flow field is empty")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise InvalidFlowError("Flow field holds non-finite displacements")
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)

    @property
    def width(self) -> int:
        return self.u.shape[1]

    @property
    def height(self) -> int:
        return self.u.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.u.shape

    def interior(self, margin: int = None) -> 'FlowField':
        """Return the sub-field that excludes a margin on every side.
        :param margin: pixels to drop, defaults to the recorded border
        """
        margin = self.border if margin is None else int(margin)
        if margin == 0:
            return self
        if 2 * margin >= min(self.shape):
            raise InvalidFlowError(
                "Margin {} leaves no interior in a {}x{} field".format(
                    margin, self.width, self.height))
        window = (slice(margin, -margin), slice(margin, -margin))
        return FlowField(self.u[window], self.v[window])


def magnitude(flow: FlowField) -> np.ndarray:
    """M(x, y) = sqrt(u^2 + v^2)"""
    return np.hypot(flow.u, flow.v)


def direction(flow: FlowField) -> np.ndarray:
    """D(x, y) = atan2(v, u) folded into (-pi, pi], with D(0, 0) = 0"""
    angle = np.arctan2(flow.v, flow.u)
    # signed zeros make arctan2 return -pi for (-0, negative u)
    angle[angle <= -np.pi] = np.pi
    angle[(flow.u == 0) & (flow.v == 0)] = 0.0
    return angle

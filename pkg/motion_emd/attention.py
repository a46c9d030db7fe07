"""
Flow-guided channel and spatial attention on small feature maps.

Channel weights come from a shared MLP over the concatenated average- and
max-pooled RGB and flow descriptors. Spatial weights come from a KxK
convolution over the channel mean, the channel max and the normalised
flow-magnitude map of the channel-refined features. The refined map is
A_s * (A_c * X). Forward and backward are written out by hand so every
gradient can be checked against finite differences.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from motion_emd.errors import DimensionMismatchError
from motion_emd.flow_core import FarnebackParams, FlowField, GrayFrame, estimate_flow, magnitude
from motion_emd.helpers import resize_bilinear
from motion_emd.nn_core.gradcheck import check_gradients

logger = logging.getLogger(__name__)

SPATIAL_PLANES = 3


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class FeatureMap:
    """C x H x W activations"""
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DimensionMismatchError("A feature map is C x H x W, got shape {}".format(
                data.shape))
        if not np.all(np.isfinite(data)):
            raise ValueError("Feature map holds non-finite values")
        object.__setattr__(self, 'data', data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


MapLike = Union[FeatureMap, np.ndarray]


def _as_map(x: MapLike) -> FeatureMap:
    return x if isinstance(x, FeatureMap) else FeatureMap(x)


@dataclass
class ChannelAttentionParams:
    """align: C x C_flow 1x1 mixing; MLP 4C -> hidden -> C with relu in between"""
    align: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self) -> None:
        channels = self.align.shape[0]
        if self.w1.shape[1] != 4 * channels or self.w2.shape != (channels, self.w1.shape[0]):
            raise DimensionMismatchError(
                "Channel MLP must map {} pooled values back to {} channels".format(
                    4 * channels, channels))
        if self.b1.shape != (self.w1.shape[0],) or self.b2.shape != (channels,):
            raise DimensionMismatchError("Channel MLP biases do not match their layers")

    @classmethod
    def initialize(cls, channels: int, flow_channels: int, reduction: int,
                   rng: np.random.Generator) -> 'ChannelAttentionParams':
        hidden = max(1, channels // reduction)
        limit1 = np.sqrt(6.0 / (4 * channels))
        limit2 = np.sqrt(6.0 / hidden)
        return cls(align=rng.normal(0.0, 1.0 / np.sqrt(flow_channels), (channels, flow_channels)),
                   w1=rng.uniform(-limit1, limit1, (hidden, 4 * channels)),
                   b1=np.zeros(hidden),
                   w2=rng.uniform(-limit2, limit2, (channels, hidden)),
                   b2=np.zeros(channels))

    @property
    def channels(self) -> int:
        return self.align.shape[0]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]


@dataclass
class SpatialAttentionParams:
    """kernel: 3 x K x K (mean, max, flow-magnitude planes); bias: shape (1,)"""
    kernel: np.ndarray
    bias: np.ndarray

    def __post_init__(self) -> None:
        if (self.kernel.ndim != 3 or self.kernel.shape[0] != SPATIAL_PLANES
                or self.kernel.shape[1] != self.kernel.shape[2] or self.kernel.shape[1] % 2 == 0):
            raise DimensionMismatchError(
                "Spatial kernel must be 3 x K x K with odd K, got {}".format(self.kernel.shape))
        if self.bias.shape != (1,):
            raise DimensionMismatchError("Spatial bias must have shape (1,)")

    @classmethod
    def initialize(cls, kernel_size: int, rng: np.random.Generator) -> 'SpatialAttentionParams':
        limit = np.sqrt(6.0 / (SPATIAL_PLANES * kernel_size * kernel_size))
        return cls(kernel=rng.uniform(-limit, limit, (SPATIAL_PLANES, kernel_size, kernel_size)),
                   bias=np.zeros(1))

    @classmethod
    def zeros(cls, kernel_size: int = 7) -> 'SpatialAttentionParams':
        return cls(np.zeros((SPATIAL_PLANES, kernel_size, kernel_size)), np.zeros(1))

    @property
    def kernel_size(self) -> int:
        return self.kernel.shape[1]


def normalize_flow_magnitude(flow_mag: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Bilinear resize to shape, then min-max to [0, 1]; a constant map becomes zeros"""
    flow_mag = np.asarray(flow_mag, dtype=np.float64)
    if flow_mag.ndim != 2:
        raise DimensionMismatchError("Flow magnitude must be 2-D, got shape {}".format(
            flow_mag.shape))
    resized = resize_bilinear(flow_mag, shape)
    low, high = float(resized.min()), float(resized.max())
    if high - low <= np.finfo(np.float64).eps * max(1.0, abs(high)):
        return np.zeros(shape)
    return (resized - low) / (high - low)


def _pooled(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    return x.mean(axis=(1, 2)), x.max(axis=(1, 2))


def _align(x_flow: np.ndarray, align: np.ndarray) -> np.ndarray:
    if x_flow.shape[0] != align.shape[1]:
        raise DimensionMismatchError("Flow map has {} channels, alignment expects {}".format(
            x_flow.shape[0], align.shape[1]))
    return np.einsum('ck,khw->chw', align, x_flow)


def channel_attention(x_rgb: MapLike, x_flow: MapLike,
                      params: ChannelAttentionParams) -> np.ndarray:
    """Per-channel weights in (0, 1).
    :param x_rgb: C x H x W appearance features
    :param x_flow: C_flow x H x W motion features, mixed to C channels first
    :param params: alignment and shared MLP
    :return: vector of length C
    """
    x_rgb, x_flow = _as_map(x_rgb), _as_map(x_flow)
    if x_rgb.data.shape[1:] != x_flow.data.shape[1:]:
        raise DimensionMismatchError("RGB map is {}x{} but flow map is {}x{}".format(
            x_rgb.height, x_rgb.width, x_flow.height, x_flow.width))
    if x_rgb.channels != params.channels:
        raise DimensionMismatchError("RGB map has {} channels, parameters expect {}".format(
            x_rgb.channels, params.channels))
    aligned = _align(x_flow.data, params.align)
    pooled = np.concatenate(_pooled(x_rgb.data) + _pooled(aligned))
    hidden = np.maximum(params.w1 @ pooled + params.b1, 0.0)
    return _sigmoid(params.w2 @ hidden + params.b2)


def _spatial_planes(x: np.ndarray, flow_norm: np.ndarray) -> np.ndarray:
    return np.stack([x.mean(axis=0), x.max(axis=0), flow_norm])


def _conv_windows(planes: np.ndarray, kernel_size: int) -> np.ndarray:
    half = kernel_size // 2
    padded = np.pad(planes, ((0, 0), (half, half), (half, half)))
    return sliding_window_view(padded, (kernel_size, kernel_size), axis=(1, 2))


def spatial_attention(x_refined: MapLike, flow_mag: np.ndarray,
                      params: SpatialAttentionParams) -> np.ndarray:
    """Per-position weights in (0, 1) of shape H x W.
    :param x_refined: channel-refined features
    :param flow_mag: flow magnitude at any resolution, resized and normalised here
    """
    x_refined = _as_map(x_refined)
    flow_norm = normalize_flow_magnitude(flow_mag, x_refined.data.shape[1:])
    windows = _conv_windows(_spatial_planes(x_refined.data, flow_norm), params.kernel_size)
    return _sigmoid(np.einsum('phwij,pij->hw', windows, params.kernel) + params.bias[0])


def apply_attention(x_rgb: MapLike, a_c: np.ndarray, a_s: np.ndarray) -> FeatureMap:
    """A_s * (A_c * X), A_c broadcast over positions and A_s over channels"""
    x_rgb = _as_map(x_rgb)
    a_c = np.asarray(a_c, dtype=np.float64)
    a_s = np.asarray(a_s, dtype=np.float64)
    if a_c.shape != (x_rgb.channels,):
        raise DimensionMismatchError("A_c has shape {}, expected ({},)".format(
            a_c.shape, x_rgb.channels))
    if a_s.shape != x_rgb.data.shape[1:]:
        raise DimensionMismatchError("A_s has shape {}, expected {}".format(
            a_s.shape, x_rgb.data.shape[1:]))
    return FeatureMap(a_s[None, :, :] * (a_c[:, None, None] * x_rgb.data))


@dataclass
class AttentionCache:
    x_rgb: np.ndarray
    x_flow: np.ndarray
    aligned: np.ndarray
    pooled: np.ndarray
    hidden_pre: np.ndarray
    a_c: np.ndarray
    refined: np.ndarray
    windows: np.ndarray
    a_s: np.ndarray


def _max_pool_backward(x: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Route per-channel gradients of a global max to the arg-max positions"""
    channels = x.shape[0]
    flat = x.reshape(channels, -1)
    out = np.zeros_like(flat)
    out[np.arange(channels), flat.argmax(axis=1)] = grad
    return out.reshape(x.shape)


class FlowGuidedAttention:
    """Channel attention followed by spatial attention, with exact gradients"""

    def __init__(self, channel: ChannelAttentionParams, spatial: SpatialAttentionParams) -> None:
        self.channel = channel
        self.spatial = spatial

    @classmethod
    def initialize(cls, channels: int = 8, flow_channels: int = None, reduction: int = 4,
                   kernel_size: int = 7, rng: np.random.Generator = None
                   ) -> 'FlowGuidedAttention':
        rng = rng if rng is not None else np.random.default_rng(0)
        flow_channels = flow_channels or channels
        return cls(ChannelAttentionParams.initialize(channels, flow_channels, reduction, rng),
                   SpatialAttentionParams.initialize(kernel_size, rng))

    def parameters(self) -> Dict[str, np.ndarray]:
        return {'align': self.channel.align, 'w1': self.channel.w1, 'b1': self.channel.b1,
                'w2': self.channel.w2, 'b2': self.channel.b2,
                'kernel': self.spatial.kernel, 'bias': self.spatial.bias}

    def forward(self, x_rgb: MapLike, x_flow: MapLike, flow_mag: np.ndarray
                ) -> Tuple[np.ndarray, AttentionCache]:
        """Refined map X~ (C x H x W) and the intermediates backward needs"""
        rgb, flow = _as_map(x_rgb).data, _as_map(x_flow).data
        if rgb.shape[1:] != flow.shape[1:]:
            raise DimensionMismatchError("RGB map is {} but flow map is {}".format(
                rgb.shape, flow.shape))
        if rgb.shape[0] != self.channel.channels:
            raise DimensionMismatchError("RGB map has {} channels, parameters expect {}".format(
                rgb.shape[0], self.channel.channels))
        aligned = _align(flow, self.channel.align)
        pooled = np.concatenate(_pooled(rgb) + _pooled(aligned))
        hidden_pre = self.channel.w1 @ pooled + self.channel.b1
        a_c = _sigmoid(self.channel.w2 @ np.maximum(hidden_pre, 0.0) + self.channel.b2)
        refined = a_c[:, None, None] * rgb
        flow_norm = normalize_flow_magnitude(flow_mag, rgb.shape[1:])
        windows = _conv_windows(_spatial_planes(refined, flow_norm), self.spatial.kernel_size)
        a_s = _sigmoid(np.einsum('phwij,pij->hw', windows, self.spatial.kernel)
                       + self.spatial.bias[0])
        cache = AttentionCache(rgb, flow, aligned, pooled, hidden_pre, a_c, refined, windows, a_s)
        return a_s[None, :, :] * refined, cache

    def backward(self, cache: AttentionCache, grad_out: Optional[np.ndarray] = None
                 ) -> Dict[str, np.ndarray]:
        """Gradients of a scalar loss given dLoss/dX~ (ones, i.e. loss = sum(X~), by default).
        :return: gradients keyed like parameters() plus 'x_rgb' and 'x_flow'
        """
        channels, height, width = cache.refined.shape
        grad = np.ones_like(cache.refined) if grad_out is None else np.asarray(grad_out)
        if grad.shape != cache.refined.shape:
            raise DimensionMismatchError("grad_out {} does not match output {}".format(
                grad.shape, cache.refined.shape))
        half = self.spatial.kernel_size // 2

        # spatial branch
        grad_refined = grad * cache.a_s[None, :, :]
        grad_a_s = np.sum(grad * cache.refined, axis=0)
        grad_z_s = grad_a_s * cache.a_s * (1.0 - cache.a_s)
        grad_kernel = np.einsum('phwij,hw->pij', cache.windows, grad_z_s)
        grad_bias = np.array([grad_z_s.sum()])
        grad_padded = np.zeros((SPATIAL_PLANES, height + 2 * half, width + 2 * half))
        size = self.spatial.kernel_size
        for i in range(size):
            for j in range(size):
                grad_padded[:, i:i + height, j:j + width] += (
                    self.spatial.kernel[:, i, j, None, None] * grad_z_s)
        grad_planes = grad_padded[:, half:half + height, half:half + width]
        grad_refined += grad_planes[0][None, :, :] / channels
        argmax = cache.refined.argmax(axis=0)
        rows, cols = np.indices((height, width))
        grad_refined[argmax, rows, cols] += grad_planes[1]

        # channel branch
        grad_a_c = np.sum(grad_refined * cache.x_rgb, axis=(1, 2))
        grad_x_rgb = grad_refined * cache.a_c[:, None, None]
        grad_z_c = grad_a_c * cache.a_c * (1.0 - cache.a_c)
        hidden = np.maximum(cache.hidden_pre, 0.0)
        grad_w2 = np.outer(grad_z_c, hidden)
        grad_hidden = (self.channel.w2.T @ grad_z_c) * (cache.hidden_pre > 0)
        grad_w1 = np.outer(grad_hidden, cache.pooled)
        grad_pooled = self.channel.w1.T @ grad_hidden
        rgb_avg, rgb_max, flow_avg, flow_max = np.split(grad_pooled, 4)
        grad_x_rgb += rgb_avg[:, None, None] / (height * width)
        grad_x_rgb += _max_pool_backward(cache.x_rgb, rgb_max)
        grad_aligned = (np.broadcast_to(flow_avg[:, None, None] / (height * width),
                                        cache.aligned.shape)
                        + _max_pool_backward(cache.aligned, flow_max))
        return {'align': np.einsum('chw,khw->ck', grad_aligned, cache.x_flow),
                'w1': grad_w1, 'b1': grad_hidden,
                'w2': grad_w2, 'b2': grad_z_c,
                'kernel': grad_kernel, 'bias': grad_bias,
                'x_rgb': grad_x_rgb,
                'x_flow': np.einsum('ck,chw->khw', self.channel.align, grad_aligned)}

    def gradient_check(self, seed: int = 0, size: int = 8, step: float = 1e-5
                       ) -> Dict[str, float]:
        """Relative error of every analytic gradient of sum(X~) against central
        differences, on seeded random inputs.
        """
        rng = np.random.default_rng(seed)
        x_rgb = rng.normal(size=(self.channel.channels, size, size))
        x_flow = rng.normal(size=(self.channel.align.shape[1], size, size))
        flow_mag = rng.random((size, size))
        _, cache = self.forward(x_rgb, x_flow, flow_mag)
        analytic = self.backward(cache)
        arrays = dict(self.parameters(), x_rgb=x_rgb, x_flow=x_flow)
        errors = check_gradients(lambda: float(self.forward(x_rgb, x_flow, flow_mag)[0].sum()),
                                 arrays, analytic, step)
        logger.debug("attention gradient check: {}".format(errors))
        return errors


def toy_feature_map(planes: Sequence[np.ndarray], channels: int, size: int,
                    mixing: np.ndarray) -> FeatureMap:
    """Resize raw planes to size x size and mix them into channels.
    :param planes: 2-D arrays of identical shape (luminance, gradients, flow components)
    :param mixing: channels x len(planes) matrix
    """
    if mixing.shape != (channels, len(planes)):
        raise DimensionMismatchError("Mixing matrix must be {}x{}".format(channels, len(planes)))
    stacked = np.stack([resize_bilinear(plane, (size, size)) for plane in planes])
    return FeatureMap(np.tanh(np.einsum('cp,phw->chw', mixing, stacked)))


def _frame_planes(frame: GrayFrame) -> List[np.ndarray]:
    grad_y, grad_x = np.gradient(frame.data)
    return [frame.data, grad_x, grad_y]


def _flow_planes(flow: FlowField) -> List[np.ndarray]:
    return [flow.u, flow.v, magnitude(flow)]


def attention_sequence(frames: Sequence[GrayFrame], model: FlowGuidedAttention,
                       size: int = 16, flow_params: FarnebackParams = FarnebackParams(),
                       rng: np.random.Generator = None) -> List[np.ndarray]:
    """One spatial attention map per consecutive frame pair of a clip.
    Appearance features come from the first frame of each pair, motion
    features and the magnitude map from the estimated flow.
    :return: list of size x size maps with values in (0, 1)
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    channels = model.channel.channels
    flow_channels = model.channel.align.shape[1]
    rgb_mixing = rng.normal(size=(channels, 3))
    flow_mixing = rng.normal(size=(flow_channels, 3))
    maps = []
    for prev, nxt in zip(frames[:-1], frames[1:]):
        flow = estimate_flow(prev, nxt, flow_params)
        x_rgb = toy_feature_map(_frame_planes(prev), channels, size, rgb_mixing)
        x_flow = toy_feature_map(_flow_planes(flow), flow_channels, size, flow_mixing)
        _, cache = model.forward(x_rgb, x_flow, magnitude(flow))
        maps.append(cache.a_s)
    return maps

"""
Dense optical flow by polynomial expansion (Farneback), coarse-to-fine.

Each frame neighbourhood is approximated by a quadratic polynomial
f(x) ~ x^T A x + b^T x + c fitted by Gaussian-weighted least squares.
A displacement d turns b into b - 2 A d, so d follows from the change of
the linear coefficients, aggregated over a box window and refined over
pyramid levels and warping iterations.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.ndimage import correlate1d, gaussian_filter, map_coordinates, uniform_filter

from motion_emd.errors import DimensionMismatchError
from motion_emd.flow_core.fields import FlowField, GrayFrame
from motion_emd.helpers import resize_bilinear

logger = logging.getLogger(__name__)

# determinant floor, relative to the largest determinant of the level
_DET_FLOOR = 1e-9


@dataclass(frozen=True)
class FarnebackParams:
    """Estimator settings; defaults are the community-standard values"""
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def __post_init__(self) -> None:
        if self.pyramid_levels < 1:
            raise ValueError("pyramid_levels must be >= 1")
        if not 0.0 < self.pyramid_scale < 1.0:
            raise ValueError("pyramid_scale must lie in (0, 1)")
        if self.window_size < 5 or self.window_size % 2 == 0:
            raise ValueError("window_size must be odd and >= 5")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.poly_n not in (5, 7):
            raise ValueError("poly_n must be 5 or 7")
        if self.poly_sigma <= 0:
            raise ValueError("poly_sigma must be > 0")


def _applicability(poly_n: int, poly_sigma: float) -> Tuple[np.ndarray, np.ndarray]:
    half = poly_n // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    weights = np.exp(-offsets ** 2 / (2.0 * poly_sigma ** 2))
    return offsets, weights / weights.sum()


def _inverse_gram(offsets: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Inverse of the weighted Gram matrix of the basis {1, x, y, x^2, y^2, xy}"""
    xs, ys = np.meshgrid(offsets, offsets)
    basis = np.stack([np.ones_like(xs), xs, ys, xs ** 2, ys ** 2, xs * ys]).reshape(6, -1)
    applicability = np.outer(weights, weights).ravel()
    return np.linalg.inv((basis * applicability) @ basis.T)


def polynomial_expansion(image: np.ndarray, poly_n: int, poly_sigma: float) -> np.ndarray:
    """Per-pixel quadratic fit of an image.
    :param image: 2-D float array
    :param poly_n: neighbourhood side (odd)
    :param poly_sigma: width of the Gaussian applicability
    :return: array of shape (5, H, W) holding a11, a12, a22, bx, by
    """
    offsets, weights = _applicability(poly_n, poly_sigma)
    inv_gram = _inverse_gram(offsets, weights)
    along_x = [correlate1d(image, weights * offsets ** p, axis=1, mode='nearest')
               for p in range(3)]
    projections = np.stack([
        correlate1d(along_x[0], weights, axis=0, mode='nearest'),
        correlate1d(along_x[1], weights, axis=0, mode='nearest'),
        correlate1d(along_x[0], weights * offsets, axis=0, mode='nearest'),
        correlate1d(along_x[2], weights, axis=0, mode='nearest'),
        correlate1d(along_x[0], weights * offsets ** 2, axis=0, mode='nearest'),
        correlate1d(along_x[1], weights * offsets, axis=0, mode='nearest'),
    ])
    c = np.tensordot(inv_gram, projections, axes=1)
    return np.stack([c[3], 0.5 * c[5], c[4], c[1], c[2]])


def _pyramid(image: np.ndarray, params: FarnebackParams) -> List[np.ndarray]:
    levels = [image]
    sigma = (1.0 / params.pyramid_scale - 1.0) * 0.5
    for _ in range(1, params.pyramid_levels):
        previous = levels[-1]
        shape = tuple(int(round(side * params.pyramid_scale)) for side in previous.shape)
        if min(shape) < 2 * params.poly_n:
            break
        smoothed = gaussian_filter(previous, sigma, mode='nearest')
        levels.append(resize_bilinear(smoothed, shape))
    return levels


def _refine(exp1: np.ndarray, exp2: np.ndarray, u: np.ndarray, v: np.ndarray,
            window_size: int) -> Tuple[np.ndarray, np.ndarray]:
    """One warping iteration: solve the windowed 2x2 system for every pixel"""
    height, width = u.shape
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    coords = np.stack([rows + v, cols + u])
    warped = np.stack([map_coordinates(channel, coords, order=1, mode='nearest')
                       for channel in exp2])

    a11 = 0.5 * (exp1[0] + warped[0])
    a12 = 0.5 * (exp1[1] + warped[1])
    a22 = 0.5 * (exp1[2] + warped[2])
    db_x = -0.5 * (warped[3] - exp1[3]) + a11 * u + a12 * v
    db_y = -0.5 * (warped[4] - exp1[4]) + a12 * u + a22 * v

    # normal equations of A d = db, A symmetric
    terms = np.stack([
        a11 * a11 + a12 * a12,
        a11 * a12 + a12 * a22,
        a12 * a12 + a22 * a22,
        a11 * db_x + a12 * db_y,
        a12 * db_x + a22 * db_y,
    ])
    g11, g12, g22, h1, h2 = (uniform_filter(term, size=window_size, mode='nearest')
                             for term in terms)
    det = g11 * g22 - g12 * g12
    floor = _DET_FLOOR * max(float(det.max()), np.finfo(np.float64).tiny)
    solvable = det > floor
    safe_det = np.where(solvable, det, 1.0)
    new_u = np.where(solvable, (g22 * h1 - g12 * h2) / safe_det, u)
    new_v = np.where(solvable, (g11 * h2 - g12 * h1) / safe_det, v)
    return new_u, new_v


def estimate_flow(prev: GrayFrame, next: GrayFrame,
                  params: FarnebackParams = FarnebackParams()) -> FlowField:
    """Dense displacement from prev to next.
    :param prev: first frame
    :param next: second frame, same dimensions
    :param params: estimator settings
    :return: FlowField with border = poly_n // 2
    """
    if not isinstance(prev, GrayFrame):
        prev = GrayFrame(prev)
    if not isinstance(next, GrayFrame):
        next = GrayFrame(next)
    if prev.shape != next.shape:
        raise DimensionMismatchError(
            "Frames differ in size: {} vs {}".format(prev.shape, next.shape))

    pyramid1 = _pyramid(prev.data, params)
    pyramid2 = _pyramid(next.data, params)
    u = v = None
    for level in range(len(pyramid1) - 1, -1, -1):
        image1, image2 = pyramid1[level], pyramid2[level]
        if u is None:
            u = np.zeros(image1.shape)
            v = np.zeros(image1.shape)
        else:
            scale_y = image1.shape[0] / u.shape[0]
            scale_x = image1.shape[1] / u.shape[1]
            u = resize_bilinear(u, image1.shape) * scale_x
            v = resize_bilinear(v, image1.shape) * scale_y
        exp1 = polynomial_expansion(image1, params.poly_n, params.poly_sigma)
        exp2 = polynomial_expansion(image2, params.poly_n, params.poly_sigma)
        for _ in range(params.iterations):
            u, v = _refine(exp1, exp2, u, v, params.window_size)
        logger.debug("level {} ({}x{}): mean flow ({:.4f}, {:.4f})".format(
            level, image1.shape[1], image1.shape[0], u.mean(), v.mean()))
    return FlowField(u, v, border=params.poly_n // 2)

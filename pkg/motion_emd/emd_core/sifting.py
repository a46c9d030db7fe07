"""
Empirical Mode Decomposition by sifting.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from motion_emd.emd_core.envelope import BOUNDARY_MODES, cubic_envelope, end_anchors
from motion_emd.emd_core.extrema import count_zero_crossings, find_extrema
from motion_emd.errors import SignalError

logger = logging.getLogger(__name__)

MIN_SIGNAL_LENGTH = 4


@dataclass(frozen=True)
class SiftConfig:
    """Sifting settings; sd_threshold is the Cauchy stopping ratio"""
    n_modes: int = 4
    sd_threshold: float = 0.2
    max_sift_iters: int = 50
    boundary: str = 'mirror'
    n_mirror: int = 2

    def __post_init__(self) -> None:
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.sd_threshold <= 0:
            raise ValueError("sd_threshold must be > 0")
        if self.max_sift_iters < 1:
            raise ValueError("max_sift_iters must be >= 1")
        if self.boundary not in BOUNDARY_MODES:
            raise ValueError("boundary must be one of {}".format(BOUNDARY_MODES))
        if self.n_mirror < 0:
            raise ValueError("n_mirror must be >= 0")


@dataclass
class ImfDecomposition:
    """imfs has shape (n_modes, length); modes past extracted_count are zero"""
    imfs: np.ndarray
    residual: np.ndarray
    extracted_count: int
    converged: List[bool] = field(default_factory=list)
    iterations: List[int] = field(default_factory=list)

    @property
    def n_modes(self) -> int:
        return self.imfs.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residual

    def is_imf(self, j: int) -> bool:
        """Extrema and zero-crossing counts differ by at most one"""
        imf = self.imfs[j]
        n_extrema = find_extrema(imf).count if imf.size >= 3 else 0
        return abs(n_extrema - count_zero_crossings(imf)) <= 1


def _validate(signal: np.ndarray) -> np.ndarray:
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise SignalError("Expected a 1-D signal, got shape {}".format(signal.shape))
    if signal.size < MIN_SIGNAL_LENGTH:
        raise SignalError("Signal length {} is below the minimum {}".format(
            signal.size, MIN_SIGNAL_LENGTH))
    if not np.all(np.isfinite(signal)):
        raise SignalError("Signal holds non-finite values")
    return signal


def _sift(signal: np.ndarray, cfg: SiftConfig) -> Tuple[np.ndarray, bool, int]:
    h = signal.copy()
    eps = np.finfo(np.float64).eps
    for iteration in range(cfg.max_sift_iters):
        extrema = find_extrema(h)
        if len(extrema.max_index) < 2 or len(extrema.min_index) < 2:
            if iteration == 0:
                return np.zeros_like(signal), False, 0
            # oscillation vanished mid-sift; keep the last candidate
            return h, False, iteration
        upper_ends, lower_ends = end_anchors(h, extrema)
        upper = cubic_envelope(extrema.max_index, extrema.max_value, h.size,
                               cfg.boundary, cfg.n_mirror, upper_ends)
        lower = cubic_envelope(extrema.min_index, extrema.min_value, h.size,
                               cfg.boundary, cfg.n_mirror, lower_ends)
        h_next = h - 0.5 * (upper + lower)
        sd = np.sum((h - h_next) ** 2) / np.sum(h ** 2 + eps)
        logger.debug("sift iteration {}: sd={:.6g}".format(iteration + 1, sd))
        h = h_next
        if sd < cfg.sd_threshold:
            return h, True, iteration + 1
    return h, False, cfg.max_sift_iters


def sift_one_imf(signal: np.ndarray, cfg: SiftConfig = SiftConfig()) -> Tuple[np.ndarray, bool]:
    """Extract one candidate IMF.
    :param signal: 1-D signal, length >= 4
    :param cfg: sifting settings
    :return: (imf, converged); a zero IMF with converged=False when the signal
             has fewer than 2 maxima or 2 minima
    """
    imf, converged, _ = _sift(_validate(signal), cfg)
    return imf, converged


def decompose(signal: np.ndarray, cfg: SiftConfig = SiftConfig()) -> ImfDecomposition:
    """Split a signal into up to n_modes IMFs plus a residual.
    Extraction stops once the residual has fewer than 4 extrema; the
    remaining modes stay zero.
    """
    signal = _validate(signal)
    imfs = np.zeros((cfg.n_modes, signal.size))
    residual = signal.copy()
    converged, iterations = [], []
    count = 0
    while count < cfg.n_modes:
        if find_extrema(residual).count < 4:
            break
        imf, ok, n_iter = _sift(residual, cfg)
        if n_iter == 0:
            break
        if not ok:
            logger.debug("IMF {} did not converge in {} iterations".format(count + 1, n_iter))
        imfs[count] = imf
        residual = residual - imf
        converged.append(ok)
        iterations.append(n_iter)
        count += 1
    return ImfDecomposition(imfs, residual, count, converged, iterations)

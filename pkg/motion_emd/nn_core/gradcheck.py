"""
Central finite-difference gradient checking.
"""

from typing import Callable, Dict, Mapping

import numpy as np

DEFAULT_STEP = 1e-5


def numerical_gradient(loss_fn: Callable[[], float], array: np.ndarray,
                       step: float = DEFAULT_STEP) -> np.ndarray:
    """Perturb array in place, one element at a time, and restore it.
    :param loss_fn: closure computing the scalar loss from the current state
    :param array: parameter or input array read by loss_fn
    """
    grad = np.zeros_like(array, dtype=np.float64)
    flat = array.reshape(-1)
    flat_grad = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = loss_fn()
        flat[i] = original - step
        minus = loss_fn()
        flat[i] = original
        flat_grad[i] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / max(||a|| + ||n||, tiny); 0 when both vanish"""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if scale < 1e-14:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(loss_fn: Callable[[], float], arrays: Mapping[str, np.ndarray],
                    analytic: Mapping[str, np.ndarray],
                    step: float = DEFAULT_STEP) -> Dict[str, float]:
    """Relative error of every named analytic gradient"""
    return {name: relative_error(analytic[name], numerical_gradient(loss_fn, array, step))
            for name, array in arrays.items()}

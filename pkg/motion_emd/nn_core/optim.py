"""
Adam with global-norm clipping and a step-decay learning-rate schedule.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from motion_emd.errors import DimensionMismatchError, NonFiniteGradientError

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment accumulators and schedule of one optimizer"""
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    milestones: Tuple[int, ...] = (30, 60)
    gamma: float = 0.1
    clip_norm: float = 1.0
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be > 0")

    @classmethod
    def for_parameters(cls, params: Sequence[np.ndarray], **settings) -> 'AdamState':
        state = cls(**settings)
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
        return state

    def scheduled_lr(self, epoch: int) -> float:
        """Base lr multiplied by gamma for every milestone already reached"""
        passed = sum(1 for milestone in self.milestones if epoch >= milestone)
        return self.lr * self.gamma ** passed


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(grads: Sequence[np.ndarray], clip_norm: float) -> List[np.ndarray]:
    norm = global_norm(grads)
    if norm <= clip_norm:
        return [np.asarray(g, dtype=np.float64) for g in grads]
    scale = clip_norm / norm
    return [g * scale for g in grads]


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              epoch: int) -> Tuple[Sequence[np.ndarray], AdamState]:
    """Clip, then apply one bias-corrected Adam update in place.
    :param state: optimizer state, moments created on first use
    :param params: parameter arrays, modified in place
    :param grads: gradients in the same order
    :param epoch: zero-based epoch, drives the schedule
    :return: (params, state)
    """
    if len(params) != len(grads):
        raise DimensionMismatchError("{} parameters but {} gradients".format(
            len(params), len(grads)))
    for p, g in zip(params, grads):
        if np.shape(p) != np.shape(g):
            raise DimensionMismatchError("parameter {} vs gradient {}".format(
                np.shape(p), np.shape(g)))
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError("Non-finite gradient; optimizer step refused")
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]

    grads = clip_by_global_norm(grads, state.clip_norm)
    state.step += 1
    lr = state.scheduled_lr(epoch)
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return params, state

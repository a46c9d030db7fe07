from motion_emd.nn_core.layers import (DenseLayer, MlpModel, ForwardCache, Gradients,
                                       forward, backward)
from motion_emd.nn_core.losses import softmax, smoothed_targets, ce_loss
from motion_emd.nn_core.optim import AdamState, adam_step
from motion_emd.nn_core.gradcheck import numerical_gradient, relative_error, check_gradients
from motion_emd.nn_core.classifier import CongestionClassifier, ModelConfig

__all__ = ['DenseLayer', 'MlpModel', 'ForwardCache', 'Gradients', 'forward', 'backward',
           'softmax', 'smoothed_targets', 'ce_loss', 'AdamState', 'adam_step',
           'numerical_gradient', 'relative_error', 'check_gradients',
           'CongestionClassifier', 'ModelConfig']

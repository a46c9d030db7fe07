"""
Dense layers and multilayer perceptrons with explicit reverse-mode gradients.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from motion_emd.errors import DimensionMismatchError, StaleCacheError

ACTIVATIONS = ('relu', 'sigmoid', 'identity')
MODES = ('train', 'eval')


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == 'relu':
        return np.maximum(z, 0.0)
    if activation == 'sigmoid':
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    return z


def _activation_grad(z: np.ndarray, out: np.ndarray, activation: str) -> np.ndarray:
    if activation == 'relu':
        return (z > 0).astype(np.float64)
    if activation == 'sigmoid':
        return out * (1.0 - out)
    return np.ones_like(z)


@dataclass
class DenseLayer:
    """out = activation(W @ dropout(x) + b); dropout acts on the layer input"""
    weights: np.ndarray
    bias: np.ndarray
    activation: str = 'relu'
    dropout_rate: float = 0.0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise DimensionMismatchError("weights {} and bias {} do not match".format(
                self.weights.shape, self.bias.shape))
        if self.activation not in ACTIVATIONS:
            raise ValueError("activation must be one of {}".format(ACTIVATIONS))
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("Layer parameters must be finite")

    @classmethod
    def initialize(cls, in_dim: int, out_dim: int, activation: str = 'relu',
                   dropout_rate: float = 0.0,
                   rng: Optional[np.random.Generator] = None) -> 'DenseLayer':
        """Uniform initialisation with zero bias: He (fan-in) for relu layers,
        Glorot (fan-in plus fan-out) for sigmoid and identity layers
        """
        rng = rng if rng is not None else np.random.default_rng(0)
        fan = in_dim if activation == 'relu' else in_dim + out_dim
        limit = np.sqrt(6.0 / fan)
        weights = rng.uniform(-limit, limit, size=(out_dim, in_dim))
        return cls(weights, np.zeros(out_dim), activation, dropout_rate)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


class MlpModel:
    """Ordered dense layers with a train/eval switch.
    version increases on every parameter update so caches can be checked.
    """

    def __init__(self, layers: Sequence[DenseLayer]) -> None:
        """Initialize the model
        :param layers: layers whose dimensions chain
        """
        self.layers = list(layers)
        if not self.layers:
            raise ValueError("An MLP needs at least one layer")
        for k in range(len(self.layers) - 1):
            if self.layers[k].out_dim != self.layers[k + 1].in_dim:
                raise DimensionMismatchError(
                    "Layer {} outputs {} values but layer {} expects {}".format(
                        k, self.layers[k].out_dim, k + 1, self.layers[k + 1].in_dim))
        self.mode = 'train'
        self.version = 0

    @classmethod
    def build(cls, dims: Sequence[int], activations: Sequence[str],
              dropout_rates: Sequence[float], rng: np.random.Generator) -> 'MlpModel':
        """Create a freshly initialised model.
        :param dims: widths, input first: [in, hidden..., out]
        :param activations: one per layer
        :param dropout_rates: one per layer (applied to that layer's input)
        """
        if not len(dims) - 1 == len(activations) == len(dropout_rates):
            raise ValueError("dims, activations and dropout_rates disagree in length")
        return cls([DenseLayer.initialize(dims[k], dims[k + 1], activations[k],
                                          dropout_rates[k], rng)
                    for k in range(len(dims) - 1)])

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def train(self) -> 'MlpModel':
        self.mode = 'train'
        return self

    def eval(self) -> 'MlpModel':
        self.mode = 'eval'
        return self

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in order W0, b0, W1, b1, ...; updates happen in place"""
        params = []
        for layer in self.layers:
            params.extend([layer.weights, layer.bias])
        return params

    def named_parameters(self, prefix: str = '') -> Dict[str, np.ndarray]:
        named = {}
        for k, layer in enumerate(self.layers):
            named['{}{}.weights'.format(prefix, k)] = layer.weights
            named['{}{}.bias'.format(prefix, k)] = layer.bias
        return named

    def mark_updated(self) -> None:
        self.version += 1


@dataclass
class ForwardCache:
    """Intermediates of one forward pass"""
    model_id: int
    version: int
    batched: bool
    inputs: List[np.ndarray] = field(default_factory=list)
    masks: List[Optional[np.ndarray]] = field(default_factory=list)
    pre_activations: List[np.ndarray] = field(default_factory=list)
    outputs: List[np.ndarray] = field(default_factory=list)


@dataclass
class Gradients:
    """Per-layer weight and bias gradients plus the gradient wrt the input"""
    weights: List[np.ndarray]
    biases: List[np.ndarray]
    inputs: np.ndarray

    def as_list(self) -> List[np.ndarray]:
        """Same order as MlpModel.parameters()"""
        grads = []
        for dw, db in zip(self.weights, self.biases):
            grads.extend([dw, db])
        return grads


def forward(model: MlpModel, x: np.ndarray,
            rng: Optional[np.random.Generator] = None) -> Tuple[np.ndarray, ForwardCache]:
    """Run the model on one vector or a batch of row vectors.
    :param model: the MLP
    :param x: shape (in_dim,) or (batch, in_dim)
    :param rng: seeded stream for dropout masks, required in train mode
    :return: (logits, cache)
    """
    x = np.asarray(x, dtype=np.float64)
    batched = x.ndim == 2
    activations = np.atleast_2d(x)
    if activations.ndim != 2 or activations.shape[1] != model.in_dim:
        raise DimensionMismatchError("Input of shape {} does not fit in_dim {}".format(
            x.shape, model.in_dim))
    if not np.all(np.isfinite(activations)):
        raise ValueError("Model input holds non-finite values")
    cache = ForwardCache(id(model), model.version, batched)
    for layer in model.layers:
        mask = None
        if model.mode == 'train' and layer.dropout_rate > 0.0:
            if rng is None:
                raise ValueError("Dropout in train mode needs a seeded rng")
            keep = 1.0 - layer.dropout_rate
            mask = (rng.random(activations.shape) < keep) / keep
            activations = activations * mask
        z = activations @ layer.weights.T + layer.bias
        out = _activate(z, layer.activation)
        cache.inputs.append(activations)
        cache.masks.append(mask)
        cache.pre_activations.append(z)
        cache.outputs.append(out)
        activations = out
    return (activations if batched else activations[0]), cache


def backward(model: MlpModel, cache: ForwardCache, grad_logits: np.ndarray) -> Gradients:
    """Exact gradients of a scalar loss given dLoss/dlogits.
    Dropout masks recorded by forward are honoured.
    """
    if cache.model_id != id(model) or cache.version != model.version:
        raise StaleCacheError("Cache does not belong to the current model parameters")
    grad = np.atleast_2d(np.asarray(grad_logits, dtype=np.float64))
    if grad.shape != cache.outputs[-1].shape:
        raise DimensionMismatchError("grad_logits shape {} does not match logits {}".format(
            np.shape(grad_logits), cache.outputs[-1].shape))
    n_layers = len(model.layers)
    grad_w, grad_b = [None] * n_layers, [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        layer = model.layers[k]
        grad = grad * _activation_grad(cache.pre_activations[k], cache.outputs[k],
                                       layer.activation)
        grad_w[k] = grad.T @ cache.inputs[k]
        grad_b[k] = grad.sum(axis=0)
        grad = grad @ layer.weights
        if cache.masks[k] is not None:
            grad = grad * cache.masks[k]
    return Gradients(grad_w, grad_b, grad if cache.batched else grad[0])

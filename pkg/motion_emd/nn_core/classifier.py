"""
EMD embedding MLP followed by the classification head, trained jointly.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from sklearn.preprocessing import StandardScaler

from motion_emd.nn_core.layers import DenseLayer, ForwardCache, MlpModel, backward, forward
from motion_emd.nn_core.losses import softmax
from motion_emd.nn_core.serialization import load_parameters, save_parameters

EMBEDDING_ACTIVATIONS = ('relu', 'identity')


@dataclass(frozen=True)
class ModelConfig:
    """Widths of the embedding MLP (input -> hidden -> embed) and of the head
    (embed -> head_hidden... -> n_classes). head_dropout has one rate per head
    layer.
    """
    input_dim: int = 32
    embed_hidden: int = 64
    embed_dim: int = 128
    head_hidden: Tuple[int, ...] = (512, 256)
    head_dropout: Tuple[float, ...] = (0.5, 0.3, 0.3)
    n_classes: int = 3

    def __post_init__(self) -> None:
        if len(self.head_dropout) != len(self.head_hidden) + 1:
            raise ValueError("head_dropout needs one rate per head layer ({})".format(
                len(self.head_hidden) + 1))
        if min((self.input_dim, self.embed_hidden, self.embed_dim, self.n_classes)
               + tuple(self.head_hidden)) < 1:
            raise ValueError("All widths must be >= 1")

    @property
    def head_dims(self) -> List[int]:
        return [self.embed_dim, *self.head_hidden, self.n_classes]

    @property
    def head_activations(self) -> List[str]:
        return ['relu'] * len(self.head_hidden) + ['identity']


class CongestionClassifier:
    """Feature scaler, embedding MLP and head"""

    def __init__(self, embedding: MlpModel, head: MlpModel,
                 scaler: Optional[StandardScaler] = None) -> None:
        """Initialize the classifier
        :param embedding: MLP mapping features to the embedding
        :param head: MLP mapping the embedding to logits
        :param scaler: z-score statistics fitted on the training split
        """
        if embedding.out_dim != head.in_dim:
            raise ValueError("Embedding width {} does not feed head input {}".format(
                embedding.out_dim, head.in_dim))
        self.embedding = embedding
        self.head = head
        self.scaler = scaler

    @classmethod
    def build(cls, cfg: ModelConfig, rng: np.random.Generator) -> 'CongestionClassifier':
        embedding = MlpModel.build([cfg.input_dim, cfg.embed_hidden, cfg.embed_dim],
                                   EMBEDDING_ACTIVATIONS, (0.0, 0.0), rng)
        head = MlpModel.build(cfg.head_dims, cfg.head_activations, cfg.head_dropout, rng)
        return cls(embedding, head)

    @property
    def n_classes(self) -> int:
        return self.head.out_dim

    def train(self) -> 'CongestionClassifier':
        self.embedding.train()
        self.head.train()
        return self

    def eval(self) -> 'CongestionClassifier':
        self.embedding.eval()
        self.head.eval()
        return self

    def parameters(self) -> List[np.ndarray]:
        return self.embedding.parameters() + self.head.parameters()

    def mark_updated(self) -> None:
        self.embedding.mark_updated()
        self.head.mark_updated()

    def fit_scaler(self, features: np.ndarray) -> None:
        self.scaler = StandardScaler().fit(features)

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.atleast_2d(np.asarray(features, dtype=np.float64))
        return features if self.scaler is None else self.scaler.transform(features)

    def forward(self, x: np.ndarray, rng: Optional[np.random.Generator] = None
                ) -> Tuple[np.ndarray, Tuple[ForwardCache, ForwardCache]]:
        """Logits for already normalised features"""
        embedded, embed_cache = forward(self.embedding, x, rng)
        logits, head_cache = forward(self.head, embedded, rng)
        return logits, (embed_cache, head_cache)

    def backward(self, caches: Tuple[ForwardCache, ForwardCache],
                 grad_logits: np.ndarray) -> List[np.ndarray]:
        """Gradients in the order of parameters()"""
        embed_cache, head_cache = caches
        head_grads = backward(self.head, head_cache, grad_logits)
        embed_grads = backward(self.embedding, embed_cache, head_grads.inputs)
        return embed_grads.as_list() + head_grads.as_list()

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        """Class probabilities in eval mode for raw (unscaled) features"""
        mode = self.head.mode
        self.eval()
        logits, _ = self.forward(self.transform(features))
        if mode == 'train':
            self.train()
        return softmax(logits)

    def logits(self, features: np.ndarray) -> np.ndarray:
        mode = self.head.mode
        self.eval()
        logits, _ = self.forward(self.transform(features))
        if mode == 'train':
            self.train()
        return logits

    def predict(self, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(features), axis=1)

    def named_tensors(self) -> Dict[str, np.ndarray]:
        tensors = {}
        tensors.update(self.embedding.named_parameters('embedding.'))
        tensors.update(self.head.named_parameters('head.'))
        if self.scaler is not None:
            tensors['scaler.mean'] = self.scaler.mean_[None, :]
            tensors['scaler.scale'] = self.scaler.scale_[None, :]
        return tensors

    def save(self, path: Union[str, Path], meta: Mapping[str, str] = None) -> None:
        save_parameters(path, self.named_tensors(), meta)

    @classmethod
    def load(cls, path: Union[str, Path], cfg: ModelConfig = ModelConfig()
             ) -> Tuple['CongestionClassifier', Dict[str, str]]:
        """Rebuild a classifier; layer widths come from the file, activations
        and dropout rates from cfg.
        """
        tensors, meta = load_parameters(path)
        embedding = _restore(tensors, 'embedding.', EMBEDDING_ACTIVATIONS, (0.0, 0.0))
        head = _restore(tensors, 'head.', cfg.head_activations, cfg.head_dropout)
        scaler = None
        if 'scaler.mean' in tensors:
            scaler = StandardScaler()
            scaler.mean_ = tensors['scaler.mean'].ravel()
            scaler.scale_ = tensors['scaler.scale'].ravel()
            scaler.var_ = scaler.scale_ ** 2
            scaler.n_features_in_ = scaler.mean_.size
            scaler.n_samples_seen_ = 0
        return cls(embedding, head, scaler).eval(), meta


def _restore(tensors: Mapping[str, np.ndarray], prefix: str, activations, dropout_rates
             ) -> MlpModel:
    layers = []
    for k, (activation, rate) in enumerate(zip(activations, dropout_rates)):
        key = '{}{}'.format(prefix, k)
        if key + '.weights' not in tensors:
            raise ValueError("Parameter file lacks {}.weights".format(key))
        layers.append(DenseLayer(tensors[key + '.weights'], tensors[key + '.bias'].ravel(),
                                 activation, rate))
    return MlpModel(layers)

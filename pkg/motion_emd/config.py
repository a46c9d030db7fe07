"""
Flat ``key = value`` pipeline configuration.

Files have no sections, ``#`` starts a comment and tuples are comma
separated. Precedence: defaults < config file < command-line flags.
"""

import configparser
import logging
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping, Union

from motion_emd.emd_core import SiftConfig, feature_length
from motion_emd.errors import ConfigError
from motion_emd.flow_core import FarnebackParams
from motion_emd.nn_core import ModelConfig
from motion_emd.pipeline.dataset import parse_mask
from motion_emd.pipeline.training import TrainConfig

logger = logging.getLogger(__name__)

_SECTION = 'pipeline'


@dataclass(frozen=True)
class PipelineConfig:
    # dataset
    n_frames: int = 16
    frame_size: int = 224
    n_workers: int = 1
    # optical flow
    pyramid_levels: int = 3
    pyramid_scale: float = 0.5
    window_size: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    # motion traces
    direction_stats: str = 'arithmetic'
    # EMD
    n_imfs: int = 4
    sd_threshold: float = 0.2
    max_sift_iters: int = 50
    boundary: str = 'mirror'
    n_mirror: int = 2
    descriptor_mask: str = 'all'
    # model
    embed_hidden: int = 64
    embed_dim: int = 128
    head_hidden: tuple = (512, 256)
    head_dropout: tuple = (0.5, 0.3, 0.3)
    n_classes: int = 3
    # training
    epochs: int = 100
    batch_size: int = 4
    lr: float = 1e-3
    label_smoothing: float = 0.1
    clip_norm: float = 1.0
    lr_milestones: tuple = (30, 60)
    lr_gamma: float = 0.1
    # attention demo
    attn_channels: int = 8
    attn_reduction: int = 4
    attn_kernel: int = 7
    attn_size: int = 16

    def flow_params(self) -> FarnebackParams:
        return FarnebackParams(self.pyramid_levels, self.pyramid_scale, self.window_size,
                               self.iterations, self.poly_n, self.poly_sigma)

    def sift_config(self) -> SiftConfig:
        return SiftConfig(self.n_imfs, self.sd_threshold, self.max_sift_iters, self.boundary,
                          self.n_mirror)

    def model_config(self) -> ModelConfig:
        return ModelConfig(feature_length(self.n_imfs), self.embed_hidden, self.embed_dim,
                           tuple(self.head_hidden), tuple(self.head_dropout), self.n_classes)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.lr, self.label_smoothing,
                           self.clip_norm, tuple(self.lr_milestones), self.lr_gamma)

    def mask(self) -> tuple:
        return parse_mask(self.descriptor_mask)

    def validate(self) -> 'PipelineConfig':
        """Build every derived settings object so bad values fail early"""
        try:
            self.flow_params()
            self.sift_config()
            self.model_config()
            self.train_config()
            self.mask()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self

    def override(self, **values) -> 'PipelineConfig':
        """Copy with the given non-None values replaced"""
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def to_text(self) -> str:
        lines = []
        for item in fields(self):
            value = getattr(self, item.name)
            if isinstance(value, tuple):
                value = ', '.join(str(v) for v in value)
            lines.append('{} = {}'.format(item.name, value))
        return '\n'.join(lines) + '\n'

    @classmethod
    def load(cls, path: Union[str, Path], base: 'PipelineConfig' = None) -> 'PipelineConfig':
        """
        Read a config file on top of base (defaults when None).
        :raises ConfigError: unreadable file, unknown key or bad value; the message names the path
        """
        path = Path(path)
        base = base if base is not None else cls()
        try:
            text = path.read_text(encoding='utf-8')
        except OSError as e:
            raise ConfigError("Cannot read config {}: {}".format(path, e)) from e
        parser = configparser.ConfigParser(comment_prefixes=('#',), inline_comment_prefixes=('#',),
                                           delimiters=('=',))
        parser.optionxform = str
        try:
            parser.read_string('[{}]\n{}'.format(_SECTION, text), source=str(path))
        except configparser.Error as e:
            raise ConfigError("Malformed config {}: {}".format(path, e)) from e
        logger.debug("Loaded settings from {}".format(path))
        return cls.from_values(dict(parser.items(_SECTION)), base, str(path))

    @classmethod
    def from_values(cls, raw_values: Mapping[str, str], base: 'PipelineConfig' = None,
                    source: str = '<values>') -> 'PipelineConfig':
        """Apply textual key -> value settings (as found in config or model files) to base"""
        base = base if base is not None else cls()
        defaults = {item.name: getattr(base, item.name) for item in fields(cls)}
        values = {}
        for key, raw in raw_values.items():
            if key not in defaults:
                raise ConfigError("{}: unknown key {!r}".format(source, key))
            try:
                values[key] = _convert(str(raw), defaults[key])
            except ValueError as e:
                raise ConfigError("{}: bad value for {}: {}".format(source, key, e)) from e
        try:
            return replace(base, **values).validate()
        except ConfigError as e:
            raise ConfigError("{}: {}".format(source, e)) from e


def _convert(raw: str, default: Any) -> Any:
    raw = raw.strip()
    if isinstance(default, tuple):
        kind = type(default[0]) if default else float
        return tuple(kind(part.strip()) for part in raw.split(',') if part.strip())
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw

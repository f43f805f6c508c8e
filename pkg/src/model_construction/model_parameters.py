from dataclasses import dataclass, field, fields

import numpy as np

import src.config_model as m_config
from src.exceptions import ConfigError
from src.model_construction.utilities import STREAM_INIT, make_generator

FUSION_NAMES = ('ours', 'add', 'mul')
SUPERVISION_NAMES = ('flow', 'semantic', 'semantic_dilated', 'event_raw', 'event_gt', 'event_gt_dilated')


@dataclass
class ModelConfig:
    """
    Size and variant of the segmentation network.

    ``expansion_channels`` and ``rank`` given as 0 resolve to 2C and C/4.
    """
    frames: int = 2
    height: int = 64
    width: int = 64
    channels: int = 32
    expansion_channels: int = 0
    rank: int = 0
    lambda_st: float = 1.0
    scales: tuple = (0.75, 1.0, 1.25)
    seed: int = 0
    with_prior: bool = True
    fusion: str = 'ours'
    dtype: str = 'float32'

    def __post_init__(self):
        if self.expansion_channels == 0:
            self.expansion_channels = 2 * self.channels
        if self.rank == 0:
            self.rank = max(1, self.channels // 4)
        self.scales = tuple(float(s) for s in self.scales)
        if self.frames < 1:
            raise ConfigError('clip length must be at least 1, got ' + str(self.frames))
        if self.channels < 2 or self.channels % 2:
            raise ConfigError('channels must be an even number >= 2, got ' + str(self.channels))
        if not 1 <= self.rank < self.channels:
            raise ConfigError('rank must satisfy 1 <= r < C, got r=' + str(self.rank) + ', C=' + str(self.channels))
        if self.expansion_channels < 1:
            raise ConfigError('expansion channels must be positive')
        if self.height < 4 or self.width < 4 or self.height % 4 or self.width % 4:
            raise ConfigError('input size must be a multiple of 4, got ' + str((self.height, self.width)))
        if 1.0 not in self.scales or any(s <= 0 for s in self.scales):
            raise ConfigError('inference scales must be positive and contain 1.0, got ' + str(self.scales))
        if self.lambda_st < 0:
            raise ConfigError('lambda_st must be non-negative')
        if self.fusion not in FUSION_NAMES:
            raise ConfigError('unknown fusion variant ' + str(self.fusion) + '; choose from ' + ', '.join(FUSION_NAMES))
        if self.dtype not in ('float32', 'float64'):
            raise ConfigError('model dtype must be float32 or float64')

    @property
    def feature_size(self):
        return self.height // 4, self.width // 4

    @classmethod
    def from_run_config(cls, config):
        """
        Builds the model config from a run config (the groups of :mod:`src.config_model`).
        """
        return cls(frames=config.scene.frames, height=config.scene.height, width=config.scene.width,
                   channels=config.model.channels, expansion_channels=config.model.expansion_channels,
                   rank=config.model.rank, lambda_st=config.training.lambda_st, scales=config.model.scales,
                   seed=config.run.seed, with_prior=config.model.with_prior, fusion=config.model.fusion)

    def to_dict(self):
        return {item.name: getattr(self, item.name) for item in fields(self)}


@dataclass
class TrainingConfig:
    steps: int = 2000
    batch_size: int = 4
    lr: float = 1e-3
    lr_schedule: str = 'poly'
    lr_power: float = 0.9
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    sup_source: str = 'event_gt_dilated'
    augment_flip: bool = False
    augment_scale: bool = False
    log_interval: int = 1

    def __post_init__(self):
        if self.steps < 0 or self.batch_size < 1 or self.log_interval < 1:
            raise ConfigError('steps must be >= 0, batch size and log interval >= 1')
        if self.lr <= 0:
            raise ConfigError('learning rate must be positive')
        if self.lr_schedule not in ('poly', 'constant'):
            raise ConfigError('learning rate schedule must be poly or constant, got ' + str(self.lr_schedule))
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1) or self.eps <= 0 or self.weight_decay < 0:
            raise ConfigError('invalid AdamW hyperparameters')
        if self.sup_source not in SUPERVISION_NAMES:
            raise ConfigError('unknown supervision source ' + str(self.sup_source))

    @classmethod
    def from_run_config(cls, config):
        training = config.training
        return cls(**{item.name: getattr(training, item.name) for item in fields(cls)})


def parameter_shapes(config):
    """
    Names and shapes of all parameters of a model, in initialization order.

    The prior branches exist only with ``with_prior``; the low-rank fusion weights only for ``fusion == 'ours'``.

    :param ModelConfig config: model configuration
    :return: dict name -> shape
    """
    c = config.channels
    half = c // 2
    expanded = config.expansion_channels
    r = config.rank
    shapes = {
        'encoder.conv1.weight': (half, 3, 3, 3),
        'encoder.conv1.bias': (half,),
        'encoder.conv2.weight': (c, half, 3, 3),
        'encoder.conv2.bias': (c,),
    }
    if config.with_prior:
        shapes.update({
            'prior_generation.expand.weight': (expanded, c),
            'prior_generation.expand.bias': (expanded,),
            'prior_generation.depthwise.weight': (expanded, 3, 3),
            'prior_generation.project.weight': (c, expanded),
            'prior_generation.project.bias': (c,),
            'prior_prediction.weight': (1, c),
            'prior_prediction.bias': (1,),
        })
        if config.fusion == 'ours':
            shapes.update({
                'prior_fusion.rgb_proj.weight': (r, c),
                'prior_fusion.rgb_proj.bias': (r,),
                'prior_fusion.motion_proj.weight': (r, c),
                'prior_fusion.motion_proj.bias': (r,),
                'prior_fusion.correlation.weight': (r, 2 * r),
                'prior_fusion.correlation.bias': (r,),
                'prior_fusion.output.weight': (c, 2 * r),
                'prior_fusion.output.bias': (c,),
            })
    shapes.update({
        'decoder.conv1.weight': (half, c, 3, 3),
        'decoder.conv1.bias': (half,),
        'decoder.conv2.weight': (half, half, 3, 3),
        'decoder.conv2.bias': (half,),
        'decoder.head.weight': (1, half),
        'decoder.head.bias': (1,),
    })
    return shapes


@dataclass
class ModelParams:
    """
    Named parameters of a model plus the AdamW state (first and second moments, step count).
    """
    config: ModelConfig
    values: dict
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def __post_init__(self):
        expected = parameter_shapes(self.config)
        if set(expected) != set(self.values):
            raise ConfigError('parameter names do not match the model configuration')
        dtype = np.dtype(self.config.dtype)
        for name, shape in expected.items():
            self.values[name] = np.ascontiguousarray(self.values[name], dtype=dtype)
            if self.values[name].shape != shape:
                raise ConfigError('parameter ' + name + ' has shape ' + str(self.values[name].shape) +
                                  ', expected ' + str(shape))
            self.m.setdefault(name, np.zeros(shape, dtype=dtype))
            self.v.setdefault(name, np.zeros(shape, dtype=dtype))

    def names(self):
        return list(self.values)

    def __getitem__(self, name):
        return self.values[name]

    def copy(self):
        return ModelParams(self.config, {k: a.copy() for k, a in self.values.items()},
                           {k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()},
                           self.step)

    def count(self):
        return int(sum(a.size for a in self.values.values()))


def initialize_parameters(config, seed=None):
    """
    He-uniform initialization of all weights (bound sqrt(6 / fan_in)) and zero biases.

    Draws come from the initialization substream of ``seed`` (``config.seed`` if not given) in the order of
    :func:`parameter_shapes`, so equal seeds give identical parameters.

    :param ModelConfig config: model configuration
    :param int seed: optional seed overriding the config
    :return: ModelParams with zero optimizer state
    """
    if seed is None:
        seed = config.seed
    generator = make_generator(seed, STREAM_INIT)
    values = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith('.bias'):
            values[name] = np.zeros(shape, dtype=config.dtype)
        else:
            fan_in = int(np.prod(shape[1:]))
            bound = np.sqrt(6.0 / fan_in)
            values[name] = generator.uniform(-bound, bound, size=shape).astype(config.dtype)
    return ModelParams(config, values)


def default_model_config():
    """
    Model config from the defaults in :mod:`src.config_model`.
    """
    return ModelConfig.from_run_config(m_config)

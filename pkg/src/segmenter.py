import time

import dill as pickle
import numpy as np

import src.model_construction as mc
from src.data_management.supervision import downsample_target
from src.model_construction.utilities import STREAM_INIT, make_generator
from src.tensor_core.gradient_check import finite_diff_errors


class Segmenter:
    """
    Class to construct, train and apply the event-prior supervised segmentation network.

    The network is composed of

    - an encoder producing RGB features at stride 4
    - a prior generation branch estimating a motion feature from the RGB feature
    - a prior prediction head producing one-channel logits of the motion feature (training only)
    - a prior fusion merging the RGB and the motion feature
    - a decoder producing the semantic logits from the fused feature

    Events only enter training through the supervision of :math:`p_m`; inference reads frames only.
    """
    def __init__(self, model_config, training_config=None):
        """
        Constructor of the Segmenter class.

        :param ModelConfig model_config: network size and variant
        :param TrainingConfig training_config: optimizer and schedule, defaults if not given
        """
        self.config = model_config
        self.training = training_config if training_config is not None else mc.TrainingConfig()
        self.params = None
        self.loss_log = None
        self.error = None

    def construct_model(self, seed=None):
        """
        Initializes all parameters (He-uniform weights, zero biases) from the seed of the config.
        """
        print('Constructing Model...')
        start = time.time()
        self.params = mc.initialize_parameters(self.config, seed)
        print('Constructing Model completed in ' + str(round(time.time() - start, 2)) + ' s')
        return self

    def forward(self, clip):
        return mc.forward(clip, self.params, self.config.with_prior, self.config.fusion)

    def train(self, data, seed=None, progress=True):
        """
        Trains the model on the train split of a DataHandle.

        The supervision maps of ``training.sup_source`` must have been read into the handle for models with prior.
        If a non-finite loss occurs, training stops and the last finite parameters are kept (``self.error`` holds
        the error).

        :param DataHandle data: dataset with sequences (and supervision maps) read
        :param int seed: batch seed, the seed of the config if not given
        :param bool progress: show a progress bar
        :return: self
        """
        if seed is None:
            seed = self.config.seed
        training = self.training
        scales = self.config.scales if training.augment_scale else None

        def sample_batch(step):
            return data.sample_batch(step, training.batch_size, seed, with_supervision=self.config.with_prior,
                                     flip=training.augment_flip, scales=scales)

        print('Training Model...')
        start = time.time()
        result = mc.train_model(self.params, sample_batch, training, progress)
        self.params = result.params
        self.loss_log = result.log
        self.error = result.error
        print('Training Model completed in ' + str(round(time.time() - start, 2)) + ' s')
        return self

    def infer(self, clip, multi_scale=False, threshold=0.5):
        """
        Binary masks [T, H, W] from frames [T, 3, H, W]; no event input.
        """
        return mc.infer(clip, self.params, multi_scale, threshold=threshold)

    def predict_logits(self, clip, multi_scale=False):
        return mc.predict_logits(clip, self.params, multi_scale)

    def save_checkpoint(self, path):
        """
        Saves the parameters and the optimizer state to an EMOC checkpoint.
        """
        mc.save_checkpoint(self.params, path)

    def save_model(self, file_path, file_name):
        """
        Saves the Segmenter instance (using dill). It can be loaded with :func:`load_segmenter_instance`.

        :param file_path: path to save
        :param file_name: filename
        :return: None
        """
        with open(file_path + '/' + file_name, mode='wb') as file:
            pickle.dump(self, file)

    def print_topology(self):
        print('----- MODEL -----')
        print('\t input: ' + str(self.config.frames) + ' x 3 x ' + str(self.config.height) + ' x ' +
              str(self.config.width))
        print('\t prior: ' + ('on, fusion ' + self.config.fusion if self.config.with_prior else 'off'))
        print('----- PARAMETERS -----')
        shapes = mc.parameter_shapes(self.config)
        groups = {}
        for name, shape in shapes.items():
            groups.setdefault(name.split('.')[0], []).append((name, shape))
        for group, entries in groups.items():
            print('\t -----------------------------------------------------')
            print('\t ' + group + ': ' + str(sum(int(np.prod(shape)) for _, shape in entries)) + ' values')
            for name, shape in entries:
                print('\t\t - ' + name + ' ' + str(list(shape)))


def load_checkpoint(path, training_config=None, expected_config=None):
    """
    Creates a Segmenter from an EMOC checkpoint.

    :param str path: checkpoint file
    :param TrainingConfig training_config: training settings for further training
    :param ModelConfig expected_config: raise ConfigMismatchError if the stored sizes differ
    :return: Segmenter
    """
    params = mc.load_checkpoint(path, expected_config)
    model = Segmenter(params.config, training_config)
    model.params = params
    return model


def load_segmenter_instance(load_path):
    """
    Loads a Segmenter instance saved with :func:`~Segmenter.save_model`.

    :param str load_path: path to load from
    :return: instance of :class:`~Segmenter`
    """
    with open(load_path, mode='rb') as file:
        model = pickle.load(file)
    return model


def gradient_check_problem(settings, seed):
    """
    Float64 toy problem for the gradient check: model, one random clip with mask and supervision map, and the
    loss as a function of the parameter tensors.

    Biases are drawn from [0.2, 0.6] so that few activations sit at a ReLU kink.

    :param settings: gradcheck group of a run config (channels, rank, frames, size)
    :param int seed: seed of the problem
    :return: (loss function, dict of parameter arrays)
    """
    config = mc.ModelConfig(frames=settings.frames, height=settings.size, width=settings.size,
                            channels=settings.channels, rank=settings.rank, seed=seed, dtype='float64',
                            scales=(1.0,))
    params = mc.initialize_parameters(config)
    generator = make_generator(seed, STREAM_INIT, 1)
    values = dict(params.values)
    for name in values:
        if name.endswith('.bias'):
            values[name] = generator.uniform(0.2, 0.6, size=values[name].shape)
    shape = (settings.frames, settings.size, settings.size)
    clip = generator.random((settings.frames, 3, settings.size, settings.size))
    masks = (generator.random(shape) < 0.3).astype(np.float64)
    targets = downsample_target((generator.random(shape) < 0.3).astype(np.float64), *config.feature_size)

    def loss(tensors):
        out = mc.forward(clip, tensors, config.with_prior, config.fusion)
        return mc.joint_loss(out, masks, targets, config.lambda_st).tensor

    return loss, values


def gradient_check(settings, seed=0):
    """
    Maximum relative error between tape gradients and central finite differences of the full joint loss, per
    parameter.

    :param settings: gradcheck group of a run config
    :param int seed: seed of the problem
    :return: pandas Series
    """
    loss, values = gradient_check_problem(settings, seed)
    return finite_diff_errors(loss, values, settings.eps)

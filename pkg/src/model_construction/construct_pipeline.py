from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.special import expit
from tqdm import tqdm

from src.data_management.supervision import downsample_target
from src.exceptions import DimensionError, NumericError
from src.model_construction.construct_decoder import decode
from src.model_construction.construct_encoder import encode
from src.model_construction.construct_fusion import prior_fuse
from src.model_construction.construct_losses import joint_loss
from src.model_construction.construct_prior import prior_generate, prior_predict
from src.model_construction.model_parameters import ModelParams
from src.model_construction.optimizer import adamw_update, learning_rate
from src.tensor_core import operations as ops
from src.tensor_core.tensor import GradTape, Tensor


@dataclass
class ForwardOutput:
    """
    Result of a forward pass.

    - ``P``: semantic logits [..., 1, H, W]
    - ``p_m``: prior prediction logits [..., 1, H/4, W/4], None without prior
    - ``f_rgb``, ``f_m``, ``f_s``: encoder, motion and fused features (``f_m`` is None without prior)
    """
    P: Tensor
    p_m: Tensor
    f_rgb: Tensor
    f_m: Tensor
    f_s: Tensor


@dataclass
class TrainingBatch:
    """
    Clips [B, T, 3, H, W] in [0, 1], binary masks [B, T, H, W] and full resolution supervision maps [B, T, H, W]
    (None for a model without prior).
    """
    clips: np.ndarray
    masks: np.ndarray
    st_targets: np.ndarray = None


@dataclass
class TrainingResult:
    params: ModelParams
    log: pd.DataFrame
    error: NumericError = None


def _tensors(params):
    if isinstance(params, ModelParams):
        params = params.values
    return {name: value if isinstance(value, Tensor) else Tensor(value) for name, value in params.items()}


def _clip_tensor(clip, dtype):
    values = clip.data if isinstance(clip, Tensor) else np.asarray(clip)
    if values.ndim < 3 or values.shape[-3] != 3:
        raise DimensionError('frames must be [..., 3, H, W], got ' + str(values.shape))
    if values.dtype == np.uint8:
        values = values / 255.0
    if np.any(values < 0) or np.any(values > 1):
        raise DimensionError('frame values must lie in [0, 1]')
    return Tensor(values.astype(dtype))


def forward(clip, params, with_prior=True, fusion='ours'):
    """
    Forward pass of the segmentation network.

    With prior: ``P = decode(fuse(F, G(F)))`` and ``p_m = predict(G(F))`` with ``F = encode(clip)``. Without prior
    (baseline): ``P = decode(F)`` and no prior prediction.

    :param clip: frames [..., 3, H, W] (Tensor or array)
    :param params: parameter name -> Tensor (tracked or not), or ModelParams
    :param bool with_prior: whether the prior generation and fusion branches are used
    :param str fusion: fusion variant, 'ours', 'add' or 'mul'
    :return: ForwardOutput
    """
    tensors = _tensors(params)
    if not isinstance(clip, Tensor):
        clip = Tensor(np.asarray(clip))
    f_rgb = encode(clip, tensors)
    if not with_prior:
        return ForwardOutput(P=decode(f_rgb, tensors), p_m=None, f_rgb=f_rgb, f_m=None, f_s=f_rgb)
    f_m = prior_generate(f_rgb, tensors)
    p_m = prior_predict(f_m, tensors)
    f_s = prior_fuse(f_rgb, f_m, tensors, fusion)
    return ForwardOutput(P=decode(f_s, tensors), p_m=p_m, f_rgb=f_rgb, f_m=f_m, f_s=f_s)


def batch_loss(params, batch, config, tracked=None):
    """
    Joint loss of a training batch.

    :param ModelParams params: parameters (config gives variant and loss weight)
    :param TrainingBatch batch: batch to evaluate
    :param ModelConfig config: model configuration
    :param dict tracked: parameter tensors to use instead of ``params`` (e.g. watched on a tape)
    :return: LossBreakdown
    """
    clips = _clip_tensor(batch.clips, config.dtype)
    sizes = {(scaled_size(config.height, factor), scaled_size(config.width, factor)) for factor in config.scales}
    if clips.shape[-2:] not in sizes:
        raise DimensionError('clip size ' + str(clips.shape[-2:]) + ' does not match the model size ' +
                             str((config.height, config.width)) + ' at any of the scales ' + str(config.scales))
    out = forward(clips, tracked if tracked is not None else params, config.with_prior, config.fusion)
    targets = None
    if config.with_prior:
        if batch.st_targets is None:
            raise DimensionError('a model with prior needs supervision maps in the batch')
        targets = downsample_target(batch.st_targets, *out.p_m.shape[-2:])
    return joint_loss(out, batch.masks, targets, config.lambda_st)


def train_step(params, batch, training):
    """
    One optimization step: forward pass on the batch, backward pass and AdamW update.

    A non-finite loss or gradient raises NumericError before any parameter is changed.

    :param ModelParams params: parameters and optimizer state
    :param TrainingBatch batch: training batch
    :param TrainingConfig training: hyperparameters
    :return: (updated ModelParams, LossBreakdown)
    """
    with GradTape() as tape:
        tracked = {name: tape.watch(value, name) for name, value in params.values.items()}
        losses = batch_loss(params, batch, params.config, tracked)
    gradients = tape.backward(losses.tensor)
    return adamw_update(params, gradients, training), losses


def train_model(params, sample_batch, training, progress=True):
    """
    Runs ``training.steps`` optimization steps.

    A NumericError stops training; the result then carries the last parameters with finite loss and the error.

    :param ModelParams params: initial parameters
    :param sample_batch: function mapping the step index to a TrainingBatch
    :param TrainingConfig training: hyperparameters
    :param bool progress: show a progress bar
    :return: TrainingResult with the loss log (step, lr, L_sem, L_ST, total)
    """
    rows = []
    error = None
    for step in tqdm(range(params.step, training.steps), disable=not progress, desc='Training'):
        lr = learning_rate(training, params.step)
        try:
            new_params, losses = train_step(params, sample_batch(step), training)
        except NumericError as err:
            error = err
            break
        params = new_params
        if step % training.log_interval == 0 or step == training.steps - 1:
            rows.append({'step': step, 'lr': lr, **losses.to_dict()})
    log = pd.DataFrame(rows, columns=['step', 'lr', 'L_sem', 'L_ST', 'total'])
    return TrainingResult(params, log, error)


def scaled_size(size, factor):
    """
    Input size at a scale factor, rounded to a multiple of 4 (at least 4).
    """
    return max(4, 4 * int(round(size * factor / 4)))


def predict_logits(clip, params, multi_scale=False, scales=None):
    """
    Semantic logits [..., 1, H, W] from frames only.

    Multi-scale: the clip is resized to every scale, the logits are resized back to H x W and averaged in the order
    of ``scales``.

    :param clip: frames [..., 3, H, W] in [0, 1] (or uint8)
    :param ModelParams params: trained parameters
    :param bool multi_scale: average over ``scales``
    :param tuple scales: scale factors, ``params.config.scales`` if not given
    :return: numpy array of logits
    """
    config = params.config
    clip = _clip_tensor(clip, config.dtype)
    height, width = clip.shape[-2:]
    if not multi_scale:
        return forward(clip, params, config.with_prior, config.fusion).P.data
    if scales is None:
        scales = config.scales
    total = None
    for factor in scales:
        resized = ops.bilinear_resize(clip, scaled_size(height, factor), scaled_size(width, factor))
        logits = forward(resized, params, config.with_prior, config.fusion).P
        logits = ops.bilinear_resize(logits, height, width).data
        total = logits if total is None else total + logits
    return total / len(scales)


def infer(clip, params, multi_scale=False, scales=None, threshold=0.5):
    """
    Event-free inference: binary masks from RGB frames only.

    :param clip: frames [T, 3, H, W] in [0, 1] (or uint8)
    :param ModelParams params: trained parameters
    :param bool multi_scale: multi-scale inference over ``scales``
    :param tuple scales: scale factors, ``params.config.scales`` if not given
    :param float threshold: a pixel is foreground if sigmoid(logit) >= threshold
    :return: uint8 masks [T, H, W]
    """
    logits = predict_logits(clip, params, multi_scale, scales)
    return (expit(logits[..., 0, :, :]) >= threshold).astype(np.uint8)

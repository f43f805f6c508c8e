from dataclasses import dataclass, field

import numpy as np

from src.exceptions import DimensionError, NumericError
from src.tensor_core import operations as ops
from src.tensor_core.tensor import Tensor


@dataclass
class LossBreakdown:
    """
    Components of the joint objective, total = l_sem + lambda_st * l_st.

    ``tensor`` is the tracked total loss the gradients are computed from.
    """
    l_sem: float
    l_st: float
    total: float
    tensor: Tensor = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ('l_sem', 'l_st', 'total'):
            value = getattr(self, name)
            if not np.isfinite(value):
                raise NumericError('loss component ' + name + ' is not finite (' + str(value) + ')')

    def to_dict(self):
        return {'L_sem': self.l_sem, 'L_ST': self.l_st, 'total': self.total}


def _target_like(target, reference, name):
    values = target.data if isinstance(target, Tensor) else np.asarray(target)
    if values.size != reference.data.size:
        raise DimensionError(name + ' of shape ' + str(values.shape) + ' do not fit ' + str(reference.shape))
    return Tensor(values.reshape(reference.shape).astype(reference.data.dtype))


def joint_loss(out, masks, st_targets, lambda_st=1.0):
    r"""
    Joint training objective.

    .. math::
        L = L_{sem}(\{P_t\}; \{M_t\}) + \lambda_{ST} L_{ST}(\{p_m\}_t; \{M_{ST}\}_t)

    with the pixelwise binary cross-entropy on the semantic logits and the mean squared error between
    ``sigmoid(p_m)`` and the spatio-temporal targets at feature resolution. Without a prior prediction
    (baseline model) L_ST is 0.

    :param ForwardOutput out: output of :func:`~src.model_construction.construct_pipeline.forward`
    :param masks: ground truth masks matching P (``[..., 1, H, W]`` or ``[..., H, W]``)
    :param st_targets: supervision targets downsampled to h x w (see
        :func:`~src.data_management.supervision.downsample_target`); ignored without prior
    :param float lambda_st: weight of the auxiliary loss
    :return: LossBreakdown
    """
    l_sem = ops.bce_with_logits(out.P, _target_like(masks, out.P, 'masks'))
    if out.p_m is None:
        value = l_sem.item()
        return LossBreakdown(value, 0.0, value, l_sem)
    if st_targets is None:
        raise DimensionError('a model with prior prediction needs supervision targets')
    l_st = ops.mse(ops.sigmoid(out.p_m), _target_like(st_targets, out.p_m, 'supervision targets'))
    total = ops.add(l_sem, ops.scale(l_st, lambda_st))
    return LossBreakdown(l_sem.item(), l_st.item(), total.item(), total)

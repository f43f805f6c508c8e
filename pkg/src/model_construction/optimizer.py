import numpy as np

from src.exceptions import NumericError
from src.model_construction.model_parameters import ModelParams


def learning_rate(training, step):
    r"""
    Learning rate of an update step (0-based).

    With the ``poly`` schedule

    .. math::
        lr_k = lr \cdot (1 - k / K)^{p}

    with K the number of training steps and p = ``training.lr_power``; ``constant`` keeps ``training.lr``.

    :param TrainingConfig training: training hyperparameters
    :param int step: index of the update
    :return: float
    """
    if training.lr_schedule == 'constant' or training.steps == 0:
        return training.lr
    progress = min(step, training.steps) / training.steps
    return training.lr * (1.0 - progress) ** training.lr_power


def adamw_update(params, gradients, training, lr=None):
    r"""
    One AdamW update with decoupled weight decay.

    .. math::
        m \leftarrow \beta_1 m + (1 - \beta_1) g, \quad v \leftarrow \beta_2 v + (1 - \beta_2) g^2

    .. math::
        \theta \leftarrow \theta - lr \left( \frac{\hat{m}}{\sqrt{\hat{v}} + \epsilon} + \lambda \theta \right)

    with bias corrected moments :math:`\hat{m} = m / (1 - \beta_1^k)`, :math:`\hat{v} = v / (1 - \beta_2^k)`. A
    parameter with zero gradient therefore only shrinks by the weight decay term.

    Parameters are updated in sorted name order; the input is left unchanged.

    :param ModelParams params: parameters and optimizer state
    :param dict gradients: parameter name -> gradient
    :param TrainingConfig training: hyperparameters (betas, eps, weight decay)
    :param float lr: learning rate, :func:`learning_rate` of the current step if not given
    :return: new ModelParams with step count + 1
    """
    if lr is None:
        lr = learning_rate(training, params.step)
    for name in sorted(gradients):
        if not np.all(np.isfinite(gradients[name])):
            raise NumericError('gradient of ' + name + ' is not finite at step ' + str(params.step))

    step = params.step + 1
    updated = params.copy()
    updated.step = step
    correction1 = 1.0 - training.beta1 ** step
    correction2 = 1.0 - training.beta2 ** step
    for name in sorted(params.values):
        value = params.values[name]
        dtype = value.dtype.type
        grad = gradients.get(name)
        if grad is None:
            grad = np.zeros_like(value)
        m = dtype(training.beta1) * params.m[name] + dtype(1 - training.beta1) * grad
        v = dtype(training.beta2) * params.v[name] + dtype(1 - training.beta2) * grad * grad
        m_hat = m / dtype(correction1)
        v_hat = v / dtype(correction2)
        step_size = m_hat / (np.sqrt(v_hat) + dtype(training.eps)) + dtype(training.weight_decay) * value
        updated.values[name] = (value - dtype(lr) * step_size).astype(value.dtype)
        updated.m[name] = m.astype(value.dtype)
        updated.v[name] = v.astype(value.dtype)
    return updated

import numpy as np
import pandas as pd

from src.exceptions import ConfigError
from src.tensor_core.tensor import GradTape, Tensor


def _evaluate(f, params):
    return float(f({name: Tensor(value, name=name) for name, value in params.items()}).item())


def finite_diff_errors(f, params, eps=1e-4):
    r"""
    Compares the gradients of the tape against central finite differences, per parameter.

    For every element the relative error is

    .. math::
        \frac{|g_{analytic} - g_{fd}|}{\max(|g_{analytic}|, |g_{fd}|, 10^{-8})}, \quad
        g_{fd} = \frac{f(p + \epsilon) - f(p - \epsilon)}{2 \epsilon}

    :param f: function mapping a dict of parameter tensors to a scalar tensor
    :param dict params: parameter name -> numpy array (float64 recommended)
    :param float eps: finite difference step (> 0)
    :return: pandas Series, max relative error per parameter name
    """
    if eps <= 0:
        raise ConfigError('eps must be positive, got ' + str(eps))
    with GradTape() as tape:
        tracked = {name: tape.watch(value, name) for name, value in params.items()}
        loss = f(tracked)
    analytic = tape.backward(loss)

    errors = {}
    for name in params:
        base = {key: np.array(value, copy=True) for key, value in params.items()}
        values = base[name].reshape(-1)
        worst = 0.0
        for index in range(values.size):
            original = values[index]
            values[index] = original + eps
            upper = _evaluate(f, base)
            values[index] = original - eps
            lower = _evaluate(f, base)
            values[index] = original
            numeric = (upper - lower) / (2 * eps)
            exact = float(analytic[name].reshape(-1)[index])
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            worst = max(worst, error)
        errors[name] = worst
    return pd.Series(errors, name='max_relative_error', dtype=float)


def finite_diff_check(f, params, eps=1e-4):
    """
    Maximum relative error between analytic and central difference gradients over all parameters.

    See :func:`finite_diff_errors`.
    """
    errors = finite_diff_errors(f, params, eps)
    if errors.empty:
        return 0.0
    return float(errors.max())

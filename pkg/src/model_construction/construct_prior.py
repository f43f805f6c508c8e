from src.tensor_core import operations as ops


def prior_generate(f_rgb, params):
    r"""
    Estimates a high dynamic motion feature from the RGB feature alone.

    The feature is expanded into a deeper latent space, filtered spatially per channel and projected back:

    .. math::
        F_m = Conv_{1 \times 1}(ReLU(DSConv_{3 \times 3}(ReLU(Conv_{1 \times 1}(F_{rgb})))))

    with C -> C' channels in the first and C' -> C channels in the last pointwise convolution.

    :param Tensor f_rgb: RGB feature [..., C, h, w]
    :param dict params: parameter name -> Tensor
    :return: motion feature F_m [..., C, h, w]
    """
    expanded = ops.relu(ops.conv1x1(f_rgb, params['prior_generation.expand.weight'],
                                    params['prior_generation.expand.bias']))
    filtered = ops.relu(ops.depthwise_conv3x3(expanded, params['prior_generation.depthwise.weight']))
    return ops.conv1x1(filtered, params['prior_generation.project.weight'], params['prior_generation.project.bias'])


def prior_predict(f_m, params):
    """
    One-channel prediction logits of the motion feature. Only the auxiliary loss consumes them.

    :param Tensor f_m: motion feature [..., C, h, w]
    :param dict params: parameter name -> Tensor
    :return: logits p_m [..., 1, h, w]
    """
    return ops.conv1x1(f_m, params['prior_prediction.weight'], params['prior_prediction.bias'])

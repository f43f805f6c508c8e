from src.exceptions import DimensionError
from src.tensor_core import operations as ops


def encode(clip, params):
    r"""
    Per-frame convolutional encoder with output stride 4.

    Two stages of 3x3 convolution (stride 2, zero padding 1) followed by ReLU, mapping 3 -> C/2 -> C channels:

    .. math::
        F_t = ReLU(Conv_{3 \times 3}^{s=2}(ReLU(Conv_{3 \times 3}^{s=2}(I_t))))

    :param Tensor clip: frames [..., 3, H, W] with H and W multiples of 4
    :param dict params: parameter name -> Tensor
    :return: Tensor [..., C, H/4, W/4]
    """
    if clip.data.ndim < 3 or clip.shape[-3] != 3:
        raise DimensionError('encoder needs RGB frames [..., 3, H, W], got ' + str(clip.shape))
    height, width = clip.shape[-2:]
    if height % 4 or width % 4:
        raise DimensionError('encoder needs H and W divisible by 4, got ' + str((height, width)))
    features = ops.relu(ops.conv3x3(clip, params['encoder.conv1.weight'], params['encoder.conv1.bias'], stride=2))
    features = ops.relu(ops.conv3x3(features, params['encoder.conv2.weight'], params['encoder.conv2.bias'],
                                    stride=2))
    return features

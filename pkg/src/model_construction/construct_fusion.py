from src.exceptions import ConfigError, DimensionError
from src.tensor_core import operations as ops


def fuse_low_rank(f_rgb, f_m, params):
    r"""
    Low-rank attention fusion of the RGB and the motion feature.

    Both features are projected into an r-dimensional subspace, a correlation map is formed from the projections and
    normalized over all spatial positions, and the attention-weighted RGB projection is merged with the motion
    projection:

    .. math::
        f_{rgb} = Conv_{1 \times 1}(F_{rgb}), \quad f_m = Conv_{1 \times 1}(F_m)

    .. math::
        f_c = Conv_{1 \times 1}([f_{rgb}, f_m]), \quad Att = Softmax(f_c)

    .. math::
        F_s = Conv_{1 \times 1}([f_{rgb} \circ Att, f_m])

    :param Tensor f_rgb: RGB feature [..., C, h, w]
    :param Tensor f_m: motion feature [..., C, h, w]
    :param dict params: parameter name -> Tensor
    :return: fused feature F_s [..., C, h, w]
    """
    f_rgb_low = ops.conv1x1(f_rgb, params['prior_fusion.rgb_proj.weight'], params['prior_fusion.rgb_proj.bias'])
    f_m_low = ops.conv1x1(f_m, params['prior_fusion.motion_proj.weight'], params['prior_fusion.motion_proj.bias'])
    correlation = ops.conv1x1(ops.concat_channels(f_rgb_low, f_m_low), params['prior_fusion.correlation.weight'],
                              params['prior_fusion.correlation.bias'])
    attention = ops.softmax_spatial(correlation)
    enhanced = ops.hadamard(f_rgb_low, attention)
    return ops.conv1x1(ops.concat_channels(enhanced, f_m_low), params['prior_fusion.output.weight'],
                       params['prior_fusion.output.bias'])


def fuse_add(f_rgb, f_m, params):
    """
    Fusion by elementwise addition, F_s = F_rgb + F_m.
    """
    return ops.add(f_rgb, f_m)


def fuse_mul(f_rgb, f_m, params):
    """
    Fusion by elementwise multiplication, F_s = F_rgb * F_m.
    """
    return ops.hadamard(f_rgb, f_m)


FUSION_VARIANTS = {
    'ours': fuse_low_rank,
    'add': fuse_add,
    'mul': fuse_mul,
}


def prior_fuse(f_rgb, f_m, params, variant='ours'):
    """
    Merges the RGB and the motion feature with the chosen fusion variant (see ``FUSION_VARIANTS``).

    :param Tensor f_rgb: RGB feature [..., C, h, w]
    :param Tensor f_m: motion feature [..., C, h, w]
    :param dict params: parameter name -> Tensor
    :param str variant: 'ours' (low-rank attention), 'add' or 'mul'
    :return: fused feature [..., C, h, w]
    """
    if f_rgb.shape != f_m.shape:
        raise DimensionError('fusion inputs differ: ' + str(f_rgb.shape) + ' vs ' + str(f_m.shape))
    if variant not in FUSION_VARIANTS:
        raise ConfigError('unknown fusion variant ' + str(variant))
    return FUSION_VARIANTS[variant](f_rgb, f_m, params)

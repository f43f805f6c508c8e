r"""
Differentiable operations of the toy segmentation network.

All spatial operations act on the trailing three axes ``[C, H, W]``; any leading axes are treated as a batch
(a clip ``[T, C, H, W]`` is simply T independent frames). Every operation checks that its floating point result is
finite and records its backward rule on the active :class:`~src.tensor_core.tensor.GradTape`.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from src.exceptions import DimensionError
from src.tensor_core.tensor import Tensor, checked, record_operation


def _split_batch(values, op_name):
    if values.ndim < 3:
        raise DimensionError(op_name + ' needs a [..., C, H, W] tensor, got shape ' + str(values.shape))
    return values.shape[:-3], values.reshape((-1,) + values.shape[-3:])


def _pad_spatial(values):
    return np.pad(values, [(0, 0)] * (values.ndim - 2) + [(1, 1), (1, 1)])


def _same_shape(a, b, op_name):
    if a.shape != b.shape:
        raise DimensionError(op_name + ': shape mismatch ' + str(a.shape) + ' vs ' + str(b.shape))


def conv1x1(x, w, b):
    r"""
    Pointwise convolution.

    .. math::
        out_{o,i,j} = b_o + \sum_c w_{o,c} x_{c,i,j}

    :param Tensor x: input [..., C_in, H, W]
    :param Tensor w: weights [C_out, C_in]
    :param Tensor b: bias [C_out]
    :return: Tensor [..., C_out, H, W]
    """
    lead, xb = _split_batch(x.data, 'conv1x1')
    if w.data.ndim != 2 or w.shape[1] != xb.shape[1] or b.shape != (w.shape[0],):
        raise DimensionError('conv1x1: weights ' + str(w.shape) + ' / bias ' + str(b.shape) +
                             ' do not fit input ' + str(x.shape))
    out = np.tensordot(w.data, xb, axes=([1], [1])).transpose(1, 0, 2, 3) + b.data[None, :, None, None]
    out = checked(out, 'conv1x1')

    def backward_fn(grad):
        g = grad.reshape((-1,) + grad.shape[-3:])
        grad_x = np.tensordot(w.data, g, axes=([0], [1])).transpose(1, 0, 2, 3).reshape(x.shape)
        grad_w = np.tensordot(g, xb, axes=([0, 2, 3], [0, 2, 3]))
        grad_b = g.sum(axis=(0, 2, 3))
        return [grad_x, grad_w, grad_b]

    return record_operation(Tensor(out.reshape(lead + out.shape[1:])), [x, w, b], backward_fn)


def depthwise_conv3x3(x, w):
    """
    Depthwise 3x3 convolution, zero padding 1, stride 1. Channel c is convolved only with kernel c.

    The kernel is applied as a cross-correlation: ``out[c,i,j] = sum_uv w[c,u,v] * x[c,i+u-1,j+v-1]``.

    :param Tensor x: input [..., C, H, W]
    :param Tensor w: kernels [C, 3, 3]
    :return: Tensor [..., C, H, W]
    """
    lead, xb = _split_batch(x.data, 'depthwise_conv3x3')
    if w.data.ndim != 3 or w.shape[1:] != (3, 3):
        raise DimensionError('depthwise_conv3x3 needs [C, 3, 3] kernels, got ' + str(w.shape))
    if w.shape[0] != xb.shape[1]:
        raise DimensionError('depthwise_conv3x3: ' + str(w.shape[0]) + ' kernels for ' + str(xb.shape[1]) +
                             ' channels')
    height, width = xb.shape[2:]
    xp = _pad_spatial(xb)
    out = np.zeros_like(xb)
    for u in range(3):
        for v in range(3):
            out += w.data[None, :, u, v, None, None] * xp[:, :, u:u + height, v:v + width]
    out = checked(out, 'depthwise_conv3x3')

    def backward_fn(grad):
        g = grad.reshape(xb.shape)
        grad_xp = np.zeros_like(xp)
        grad_w = np.zeros_like(w.data)
        for u in range(3):
            for v in range(3):
                grad_xp[:, :, u:u + height, v:v + width] += w.data[None, :, u, v, None, None] * g
                grad_w[:, u, v] = (g * xp[:, :, u:u + height, v:v + width]).sum(axis=(0, 2, 3))
        return [grad_xp[:, :, 1:-1, 1:-1].reshape(x.shape), grad_w]

    return record_operation(Tensor(out.reshape(x.shape)), [x, w], backward_fn)


def conv3x3(x, w, b, stride=1):
    """
    Full 3x3 convolution with zero padding 1, used by the encoder (stride 2) and the decoder (stride 1).

    :param Tensor x: input [..., C_in, H, W]
    :param Tensor w: weights [C_out, C_in, 3, 3]
    :param Tensor b: bias [C_out]
    :param int stride: 1 or 2
    :return: Tensor [..., C_out, (H-1)//stride+1, (W-1)//stride+1]
    """
    lead, xb = _split_batch(x.data, 'conv3x3')
    if w.data.ndim != 4 or w.shape[1] != xb.shape[1] or w.shape[2:] != (3, 3) or b.shape != (w.shape[0],):
        raise DimensionError('conv3x3: weights ' + str(w.shape) + ' / bias ' + str(b.shape) +
                             ' do not fit input ' + str(x.shape))
    height, width = xb.shape[2:]
    out_h = (height - 1) // stride + 1
    out_w = (width - 1) // stride + 1
    xp = _pad_spatial(xb)
    windows = sliding_window_view(xp, (3, 3), axis=(2, 3))[:, :, ::stride, ::stride]
    out = np.tensordot(windows, w.data, axes=([1, 4, 5], [1, 2, 3])).transpose(0, 3, 1, 2) + \
        b.data[None, :, None, None]
    out = checked(np.ascontiguousarray(out), 'conv3x3')

    def backward_fn(grad):
        g = grad.reshape(out.shape)
        grad_xp = np.zeros_like(xp)
        for u in range(3):
            for v in range(3):
                contribution = np.tensordot(w.data[:, :, u, v], g, axes=([0], [1])).transpose(1, 0, 2, 3)
                grad_xp[:, :, u:u + stride * (out_h - 1) + 1:stride, v:v + stride * (out_w - 1) + 1:stride] += \
                    contribution
        grad_w = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        grad_b = g.sum(axis=(0, 2, 3))
        return [grad_xp[:, :, 1:-1, 1:-1].reshape(x.shape), grad_w, grad_b]

    return record_operation(Tensor(out.reshape(lead + out.shape[1:])), [x, w, b], backward_fn)


def relu(x):
    out = checked(np.maximum(x.data, 0), 'relu')

    def backward_fn(grad):
        return [grad * (x.data > 0)]

    return record_operation(Tensor(out), [x], backward_fn)


def sigmoid(x):
    out = checked(expit(x.data), 'sigmoid')

    def backward_fn(grad):
        return [grad * out * (1 - out)]

    return record_operation(Tensor(out), [x], backward_fn)


def add(a, b):
    _same_shape(a, b, 'add')
    out = checked(a.data + b.data, 'add')

    def backward_fn(grad):
        return [grad, grad]

    return record_operation(Tensor(out), [a, b], backward_fn)


def hadamard(a, b):
    """
    Elementwise product of two tensors of identical shape.
    """
    _same_shape(a, b, 'hadamard')
    out = checked(a.data * b.data, 'hadamard')

    def backward_fn(grad):
        return [grad * b.data, grad * a.data]

    return record_operation(Tensor(out), [a, b], backward_fn)


def scale(x, factor):
    """
    Multiplies a tensor by a constant.
    """
    out = checked(x.data * x.data.dtype.type(factor), 'scale')

    def backward_fn(grad):
        return [grad * grad.dtype.type(factor)]

    return record_operation(Tensor(out), [x], backward_fn)


def concat_channels(a, b):
    """
    Concatenates along the channel axis: ``a`` occupies channels [0, C1), ``b`` occupies [C1, C1+C2).
    """
    if a.data.ndim < 3 or a.shape[:-3] != b.shape[:-3] or a.shape[-2:] != b.shape[-2:]:
        raise DimensionError('concat_channels: spatial mismatch ' + str(a.shape) + ' vs ' + str(b.shape))
    split = a.shape[-3]
    out = np.concatenate([a.data, b.data], axis=-3)

    def backward_fn(grad):
        return [grad[..., :split, :, :], grad[..., split:, :, :]]

    return record_operation(Tensor(out), [a, b], backward_fn)


def softmax_spatial(x):
    """
    Softmax over all H*W positions of every channel, stabilized by subtracting the channel maximum.

    Each output channel sums to one.
    """
    if x.data.ndim < 2:
        raise DimensionError('softmax_spatial needs [..., H, W], got ' + str(x.shape))
    shifted = x.data - x.data.max(axis=(-2, -1), keepdims=True)
    exponent = np.exp(shifted)
    out = checked(exponent / exponent.sum(axis=(-2, -1), keepdims=True), 'softmax_spatial')

    def backward_fn(grad):
        inner = (grad * out).sum(axis=(-2, -1), keepdims=True)
        return [out * (grad - inner)]

    return record_operation(Tensor(out), [x], backward_fn)


def interpolation_matrix(src_size, dst_size, dtype=np.float64):
    """
    Linear interpolation weights [dst_size, src_size] under the half-pixel-center convention.

    The source coordinate of destination index d is ``(d + 0.5) * src_size / dst_size - 0.5``, clamped to
    ``[0, src_size - 1]``.
    """
    coords = (np.arange(dst_size, dtype=np.float64) + 0.5) * (src_size / dst_size) - 0.5
    coords = np.clip(coords, 0, src_size - 1)
    lower = np.floor(coords).astype(int)
    upper = np.minimum(lower + 1, src_size - 1)
    frac = coords - lower
    matrix = np.zeros((dst_size, src_size), dtype=np.float64)
    rows = np.arange(dst_size)
    np.add.at(matrix, (rows, lower), 1 - frac)
    np.add.at(matrix, (rows, upper), frac)
    return matrix.astype(dtype)


def bilinear_resize(x, height, width):
    """
    Bilinear resize of the two trailing axes. Sizes that already match return an identical copy.

    :param Tensor x: input [..., H, W]
    :param int height: target height (>= 1)
    :param int width: target width (>= 1)
    :return: Tensor [..., height, width]
    """
    if height < 1 or width < 1:
        raise DimensionError('bilinear_resize needs a positive target size, got ' + str((height, width)))
    src_h, src_w = x.shape[-2:]
    if (src_h, src_w) == (height, width):
        def identity_backward(grad):
            return [grad]
        return record_operation(Tensor(x.data.copy()), [x], identity_backward)

    rows = interpolation_matrix(src_h, height, x.data.dtype)
    cols = interpolation_matrix(src_w, width, x.data.dtype)
    out = checked(np.matmul(np.matmul(rows, x.data), cols.T), 'bilinear_resize')

    def backward_fn(grad):
        return [np.matmul(np.matmul(rows.T, grad), cols)]

    return record_operation(Tensor(out), [x], backward_fn)


def maxpool_to(x, height, width):
    """
    Max pooling to a target size with window (H/height, W/width).

    The backward pass routes the gradient to the first maximum of every window in row-major scan order.
    """
    lead, xb = _split_batch(x.data, 'maxpool_to')
    n, channels, src_h, src_w = xb.shape
    if height < 1 or width < 1 or src_h % height or src_w % width:
        raise DimensionError('maxpool_to: ' + str((src_h, src_w)) + ' is not divisible into ' +
                             str((height, width)))
    kh, kw = src_h // height, src_w // width
    blocks = xb.reshape(n, channels, height, kh, width, kw).transpose(0, 1, 2, 4, 3, 5)
    blocks = blocks.reshape(n, channels, height, width, kh * kw)
    index = blocks.argmax(axis=-1)[..., None]
    out = np.take_along_axis(blocks, index, axis=-1)[..., 0]

    def backward_fn(grad):
        g = grad.reshape(out.shape)
        routed = np.zeros(out.shape + (kh * kw,), dtype=g.dtype)
        np.put_along_axis(routed, index, g[..., None], axis=-1)
        routed = routed.reshape(n, channels, height, width, kh, kw).transpose(0, 1, 2, 4, 3, 5)
        return [routed.reshape(x.shape)]

    return record_operation(Tensor(out.reshape(lead + out.shape[1:])), [x], backward_fn)


def mse(a, b):
    """
    Mean of the squared differences over all elements.
    """
    _same_shape(a, b, 'mse')
    diff = a.data - b.data
    out = checked(np.asarray(np.mean(diff * diff), dtype=a.data.dtype), 'mse')

    def backward_fn(grad):
        g = grad * 2 * diff / diff.size
        return [g, -g]

    return record_operation(Tensor(out), [a, b], backward_fn)


def bce_with_logits(logits, targets):
    """
    Binary cross-entropy on logits, averaged over all elements, in the stable form
    ``max(z, 0) - z * t + log(1 + exp(-|z|))``.

    :param Tensor logits: logits z
    :param Tensor targets: targets t in [0, 1], same shape
    """
    _same_shape(logits, targets, 'bce_with_logits')
    z = logits.data
    t = targets.data.astype(z.dtype)
    if np.any(t < 0) or np.any(t > 1):
        raise DimensionError('bce_with_logits: targets must lie in [0, 1]')
    elementwise = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    out = checked(np.asarray(np.mean(elementwise), dtype=z.dtype), 'bce_with_logits')

    def backward_fn(grad):
        return [grad * (expit(z) - t) / z.size, None]

    return record_operation(Tensor(out), [logits, targets], backward_fn)

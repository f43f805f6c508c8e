from src.tensor_core import operations as ops


def decode(f_s, params):
    """
    Upsampling decoder from stride 4 features to full resolution logits.

    Two stages of (3x3 convolution, ReLU, bilinear upsampling by 2), C -> C/2 -> C/2 channels, and a pointwise head
    C/2 -> 1.

    :param Tensor f_s: features [..., C, h, w]
    :param dict params: parameter name -> Tensor
    :return: semantic logits [..., 1, 4h, 4w]
    """
    height, width = f_s.shape[-2:]
    x = ops.relu(ops.conv3x3(f_s, params['decoder.conv1.weight'], params['decoder.conv1.bias']))
    x = ops.bilinear_resize(x, 2 * height, 2 * width)
    x = ops.relu(ops.conv3x3(x, params['decoder.conv2.weight'], params['decoder.conv2.bias']))
    x = ops.bilinear_resize(x, 4 * height, 4 * width)
    return ops.conv1x1(x, params['decoder.head.weight'], params['decoder.head.bias'])

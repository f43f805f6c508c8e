import struct

import numpy as np

from src.exceptions import DataIntegrityError
from src.tensor_core.tensor import Tensor

# EMOT tensor file: magic, version, dtype code, rank (uint32), dims (uint64 each), row-major payload.
# All integers and payload values are little-endian.
MAGIC = b'EMOT'
VERSION = 1
_DTYPE_CODES = {'float32': 0, 'float64': 1, 'uint8': 2}
_CODE_DTYPES = {0: np.dtype('<f4'), 1: np.dtype('<f8'), 2: np.dtype('u1')}


def encode_tensor(value):
    """
    Encodes an array (or Tensor) as EMOT bytes.

    :param value: numpy array or Tensor of dtype float32, float64 or uint8
    :return: bytes
    """
    array = value.data if isinstance(value, Tensor) else np.asarray(value)
    if array.dtype.name not in _DTYPE_CODES:
        raise DataIntegrityError('EMOT cannot store dtype ' + array.dtype.name)
    code = _DTYPE_CODES[array.dtype.name]
    header = MAGIC + struct.pack('<BBI', VERSION, code, array.ndim)
    header += struct.pack('<' + 'Q' * array.ndim, *array.shape)
    return header + np.ascontiguousarray(array, dtype=_CODE_DTYPES[code]).tobytes()


def decode_tensor(buffer, offset=0):
    """
    Decodes one EMOT tensor from a bytes buffer.

    :param bytes buffer: buffer holding the encoded tensor
    :param int offset: position of the magic bytes
    :return: (numpy array in native byte order, offset after the tensor)
    """
    if buffer[offset:offset + 4] != MAGIC:
        raise DataIntegrityError('invalid tensor format (bad EMOT magic)')
    if len(buffer) < offset + 10:
        raise DataIntegrityError('truncated EMOT header')
    version, code, rank = struct.unpack_from('<BBI', buffer, offset + 4)
    if version != VERSION:
        raise DataIntegrityError('unsupported EMOT version ' + str(version))
    if code not in _CODE_DTYPES:
        raise DataIntegrityError('unknown EMOT dtype code ' + str(code))
    offset += 10
    if len(buffer) < offset + 8 * rank:
        raise DataIntegrityError('truncated EMOT shape')
    shape = struct.unpack_from('<' + 'Q' * rank, buffer, offset)
    offset += 8 * rank
    dtype = _CODE_DTYPES[code]
    count = int(np.prod(shape, dtype=np.int64))
    end = offset + count * dtype.itemsize
    if len(buffer) < end:
        raise DataIntegrityError('truncated EMOT payload')
    array = np.frombuffer(buffer, dtype=dtype, count=count, offset=offset).reshape(shape)
    return array.astype(dtype.newbyteorder('='), copy=True), end


def write_tensor(path, value):
    """
    Writes an array to an EMOT file.
    """
    with open(path, mode='wb') as file:
        file.write(encode_tensor(value))


def read_tensor(path):
    """
    Reads an array from an EMOT file.
    """
    try:
        with open(path, mode='rb') as file:
            buffer = file.read()
    except FileNotFoundError:
        raise DataIntegrityError('missing tensor file ' + str(path))
    array, end = decode_tensor(buffer)
    if end != len(buffer):
        raise DataIntegrityError('trailing bytes after tensor in ' + str(path))
    return array

import os
import struct
from dataclasses import fields

from src.data_management.create_templates import format_value, parse_value
from src.exceptions import ConfigMismatchError, DataIntegrityError
from src.model_construction.model_parameters import ModelConfig, ModelParams, parameter_shapes
from src.tensor_core.serialization import decode_tensor, encode_tensor

# EMOC checkpoint: magic, version byte, config block (uint32 length + sorted key=value lines), then records of
# (uint32 name length, name, EMOT tensor): parameters in sorted name order, then adam.m/<name>, then adam.v/<name>.
MAGIC = b'EMOC'
VERSION = 1

# Config keys that fix the parameter shapes or the input size
_SHAPE_KEYS = ('channels', 'expansion_channels', 'rank', 'height', 'width', 'with_prior', 'fusion')


def _config_block(params):
    entries = {'model.' + key: value for key, value in params.config.to_dict().items()}
    entries['optimizer.step'] = params.step
    lines = ''.join(key + '=' + format_value(entries[key]) + '\n' for key in sorted(entries))
    return lines.encode('utf-8')


def _record(name, value):
    encoded = name.encode('utf-8')
    return struct.pack('<I', len(encoded)) + encoded + encode_tensor(value)


def encode_checkpoint(params):
    """
    EMOC bytes of a set of parameters including the optimizer state.
    """
    block = _config_block(params)
    parts = [MAGIC, struct.pack('<BI', VERSION, len(block)), block]
    names = sorted(params.values)
    parts += [_record(name, params.values[name]) for name in names]
    parts += [_record('adam.m/' + name, params.m[name]) for name in names]
    parts += [_record('adam.v/' + name, params.v[name]) for name in names]
    return b''.join(parts)


def save_checkpoint(params, path):
    """
    Writes parameters, optimizer state and the model config to an EMOC file.

    The file is written to ``path + '.tmp'`` first and then renamed.

    :param ModelParams params: parameters to save
    :param str path: target file
    """
    tmp_path = str(path) + '.tmp'
    with open(tmp_path, mode='wb') as file:
        file.write(encode_checkpoint(params))
    os.replace(tmp_path, path)


def _parse_config_block(block):
    entries = {}
    for line in block.decode('utf-8').splitlines():
        if '=' not in line:
            raise DataIntegrityError('corrupt checkpoint config line: ' + line)
        key, text = line.split('=', 1)
        entries[key] = text
    defaults = ModelConfig()
    arguments = {}
    for item in fields(ModelConfig):
        key = 'model.' + item.name
        if key not in entries:
            raise DataIntegrityError('checkpoint config misses ' + key)
        arguments[item.name] = parse_value(entries[key], getattr(defaults, item.name), key)
    if 'optimizer.step' not in entries:
        raise DataIntegrityError('checkpoint config misses optimizer.step')
    return ModelConfig(**arguments), int(entries['optimizer.step'])


def decode_checkpoint(buffer):
    """
    Parses EMOC bytes. See :func:`load_checkpoint`.
    """
    if buffer[:4] != MAGIC:
        raise DataIntegrityError('invalid checkpoint (bad EMOC magic)')
    if len(buffer) < 9:
        raise DataIntegrityError('truncated checkpoint header')
    version, length = struct.unpack_from('<BI', buffer, 4)
    if version != VERSION:
        raise DataIntegrityError('unsupported checkpoint version ' + str(version))
    offset = 9
    if len(buffer) < offset + length:
        raise DataIntegrityError('truncated checkpoint config block')
    config, step = _parse_config_block(buffer[offset:offset + length])
    offset += length

    tensors = {}
    while offset < len(buffer):
        if len(buffer) < offset + 4:
            raise DataIntegrityError('truncated checkpoint record')
        (name_length,) = struct.unpack_from('<I', buffer, offset)
        offset += 4
        name = buffer[offset:offset + name_length].decode('utf-8')
        offset += name_length
        tensors[name], offset = decode_tensor(buffer, offset)

    shapes = parameter_shapes(config)
    values, m, v = {}, {}, {}
    for name, shape in shapes.items():
        for prefix, target in (('', values), ('adam.m/', m), ('adam.v/', v)):
            key = prefix + name
            if key not in tensors:
                raise DataIntegrityError('checkpoint misses tensor ' + key)
            if tensors[key].shape != shape:
                raise ConfigMismatchError('checkpoint tensor ' + key + ' has shape ' + str(tensors[key].shape) +
                                          ', the stored config implies ' + str(shape))
            target[name] = tensors[key]
    extra = set(tensors) - set(shapes) - {'adam.m/' + n for n in shapes} - {'adam.v/' + n for n in shapes}
    if extra:
        raise DataIntegrityError('checkpoint holds unknown tensors: ' + ', '.join(sorted(extra)))
    return ModelParams(config, values, m, v, step)


def check_config(stored, expected):
    """
    Raises ConfigMismatchError if two model configs disagree on a shape defining key.
    """
    for key in _SHAPE_KEYS:
        if getattr(stored, key) != getattr(expected, key):
            raise ConfigMismatchError('checkpoint has ' + key + '=' + str(getattr(stored, key)) +
                                      ' but ' + str(getattr(expected, key)) + ' is required')


def load_checkpoint(path, expected_config=None):
    """
    Reads an EMOC checkpoint.

    :param str path: checkpoint file
    :param ModelConfig expected_config: if given, the stored config must agree on channels, rank, input size and
        variant, otherwise ConfigMismatchError is raised
    :return: ModelParams
    """
    try:
        with open(path, mode='rb') as file:
            buffer = file.read()
    except FileNotFoundError:
        raise DataIntegrityError('checkpoint ' + str(path) + ' does not exist')
    params = decode_checkpoint(buffer)
    if expected_config is not None:
        check_config(params.config, expected_config)
    return params

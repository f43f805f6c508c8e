import copy
from types import SimpleNamespace

import src.config_model as m_config
from src.exceptions import ConfigError

CONFIG_GROUPS = ('scene', 'model', 'training', 'evaluation', 'data', 'run', 'gradcheck')


def create_default_run_config():
    """
    Creates a run config holding the defaults of :mod:`src.config_model`.

    The returned object is a deep copy; changing it leaves the defaults untouched.

    :return: SimpleNamespace with one SimpleNamespace per group (scene, model, training, evaluation, data, run,
        gradcheck)
    """
    config = SimpleNamespace()
    for group in CONFIG_GROUPS:
        setattr(config, group, copy.deepcopy(getattr(m_config, group)))
    return config


def format_value(value):
    """
    Text form of a config value: booleans as true/false, tuples comma separated, floats in repr form.
    """
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (tuple, list)):
        return ','.join(format_value(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(text, default, key='value'):
    """
    Parses the text form of a config value to the type of its default.

    :param str text: value as written in the file
    :param default: default value of the key, defines the type
    :param str key: key name used in error messages
    :return: parsed value
    """
    text = text.strip()
    try:
        if isinstance(default, bool):
            if text.lower() not in ('true', 'false'):
                raise ValueError(text)
            return text.lower() == 'true'
        if isinstance(default, tuple):
            return tuple(parse_value(item, default[0] if default else 0.0, key) for item in text.split(',') if item)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigError('cannot read ' + key + ' = ' + text + ' as ' + type(default).__name__)
    return text


def set_value(config, key, text):
    """
    Sets ``group.key`` of a run config from its text form. Unknown groups and keys raise ConfigError.
    """
    if key.count('.') != 1:
        raise ConfigError('config keys have the form group.key, got ' + key)
    group_name, name = key.split('.')
    group = getattr(config, group_name, None)
    if group_name not in CONFIG_GROUPS or group is None:
        raise ConfigError('unknown config group ' + group_name + ' in ' + key)
    if not hasattr(group, name):
        raise ConfigError('unknown config key ' + key)
    setattr(group, name, parse_value(text, getattr(group, name), key))


def read_run_config(path):
    """
    Reads a run config file of ``group.key = value`` lines on top of the defaults.

    Blank lines and text after ``#`` are ignored.

    :param str path: path to the config file
    :return: run config (see :func:`create_default_run_config`)
    """
    config = create_default_run_config()
    try:
        with open(path, mode='r') as file:
            lines = file.readlines()
    except FileNotFoundError:
        raise ConfigError('config file ' + str(path) + ' does not exist')
    for number, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(str(path) + ', line ' + str(number) + ': expected group.key = value')
        key, text = line.split('=', 1)
        set_value(config, key.strip(), text)
    return config


def config_to_dict(config):
    """
    Flat dict ``group.key -> value`` of a run config, sorted by key.
    """
    flat = {}
    for group in CONFIG_GROUPS:
        for name, value in vars(getattr(config, group)).items():
            flat[group + '.' + name] = value
    return dict(sorted(flat.items()))


def config_to_text(config):
    return ''.join(key + ' = ' + format_value(value) + '\n' for key, value in config_to_dict(config).items())


def write_run_config(config, path):
    """
    Writes the fully resolved run config with sorted keys, readable by :func:`read_run_config`.
    """
    with open(path, mode='w') as file:
        file.write(config_to_text(config))

"""
On-disk layout of a dataset.

::

    <root>/train.txt, test.txt          sequence directory names, one per line
    <root>/seq_000000/frames/000000.ppm binary P6 RGB frames
    <root>/seq_000000/events/000000.pgm binary event maps (0 / 255)
    <root>/seq_000000/events/stream.emot raw event stream (optional, float64 [N, 4]: t, x, y, p)
    <root>/seq_000000/events/stream.txt  external event recording (optional, t x y p text), read if no .emot
    <root>/seq_000000/masks/000000.pgm  moving object masks (0 / 255)
    <root>/seq_000000/flow/000000.emot  float32 [2, H, W] flow (dx, dy)
    <root>/sup_<source>/seq_000000/000000.pgm  supervision maps written by build-sup
"""
import os

import numpy as np
from PIL import Image

from src.data_management.import_data import import_event_stream
from src.data_management.synthetic_scenes import SceneSample
from src.exceptions import DataIntegrityError
from src.tensor_core.serialization import read_tensor, write_tensor

SPLITS = ('train', 'test')
STREAM_FILE = 'stream.emot'
STREAM_FILES = (STREAM_FILE, 'stream.txt')


def frame_name(index, extension):
    return '%06d' % index + '.' + extension


def sequence_name(index):
    return 'seq_%06d' % index


def write_ppm(path, frame):
    """
    Writes a [3, H, W] frame with values in [0, 1] as binary 8-bit PPM.
    """
    values = np.clip(np.rint(np.asarray(frame) * 255), 0, 255).astype(np.uint8)
    Image.fromarray(np.ascontiguousarray(values.transpose(1, 2, 0))).save(path, format='PPM')


def write_pgm(path, values):
    """
    Writes a [H, W] map with values in [0, 1] as binary 8-bit PGM (binary maps become 0 / 255).
    """
    values = np.clip(np.rint(np.asarray(values, dtype=np.float64) * 255), 0, 255).astype(np.uint8)
    Image.fromarray(values).save(path, format='PPM')


def _open(path, mode, description):
    try:
        with Image.open(path) as image:
            if image.mode != mode:
                raise DataIntegrityError(description + ' ' + str(path) + ' is not a ' + mode + ' image')
            return np.asarray(image)
    except FileNotFoundError:
        raise DataIntegrityError('missing ' + description + ' file ' + str(path))
    except OSError as error:
        raise DataIntegrityError('cannot read ' + description + ' file ' + str(path) + ': ' + str(error))


def read_ppm(path):
    """
    Reads a frame as float32 [3, H, W] in [0, 1].
    """
    return (_open(path, 'RGB', 'frame').transpose(2, 0, 1) / 255.0).astype(np.float32)


def read_pgm(path, description='map'):
    """
    Reads an 8-bit PGM as uint8 [H, W] (raw values 0..255).
    """
    return _open(path, 'L', description)


def read_binary_pgm(path, description='mask'):
    """
    Reads a binary map (0 / 255) as uint8 [H, W] with values 0 and 1.
    """
    return (read_pgm(path, description) > 127).astype(np.uint8)


def write_sample(directory, sample, write_stream=False):
    """
    Writes a SceneSample to a sequence directory.

    :param str directory: sequence directory (created if missing)
    :param SceneSample sample: sample to write
    :param bool write_stream: also store the raw event stream
    """
    for sub in ('frames', 'events', 'masks', 'flow'):
        os.makedirs(os.path.join(directory, sub), exist_ok=True)
    for i in range(len(sample)):
        write_ppm(os.path.join(directory, 'frames', frame_name(i, 'ppm')), sample.frames[i])
        write_pgm(os.path.join(directory, 'events', frame_name(i, 'pgm')), sample.events[i])
        write_pgm(os.path.join(directory, 'masks', frame_name(i, 'pgm')), sample.masks[i])
        write_tensor(os.path.join(directory, 'flow', frame_name(i, 'emot')), sample.flow[i].astype(np.float32))
    if write_stream and sample.stream is not None:
        write_tensor(os.path.join(directory, 'events', STREAM_FILE), sample.stream.to_array())


def list_frames(directory):
    """
    Number of frames of a sequence directory; the frame files must be numbered 000000, 000001, ...

    :param str directory: sequence or frames directory
    :return: frame count
    """
    frames_dir = os.path.join(directory, 'frames')
    if not os.path.isdir(frames_dir):
        frames_dir = directory
    if not os.path.isdir(frames_dir):
        raise DataIntegrityError('missing frames directory ' + str(frames_dir))
    names = sorted(name for name in os.listdir(frames_dir) if name.endswith('.ppm'))
    for i, name in enumerate(names):
        if name != frame_name(i, 'ppm'):
            raise DataIntegrityError('frame files in ' + frames_dir + ' are not numbered consecutively (' + name +
                                     ' at position ' + str(i) + ')')
    return len(names)


def read_frames(directory):
    """
    Reads all frames of a sequence (or of a plain frames directory) as float32 [T, 3, H, W].
    """
    frames_dir = os.path.join(directory, 'frames')
    if not os.path.isdir(frames_dir):
        frames_dir = directory
    count = list_frames(frames_dir)
    if count == 0:
        raise DataIntegrityError('no frames in ' + str(frames_dir))
    frames = [read_ppm(os.path.join(frames_dir, frame_name(i, 'ppm'))) for i in range(count)]
    for i, frame in enumerate(frames):
        if frame.shape != frames[0].shape:
            raise DataIntegrityError('frame ' + frame_name(i, 'ppm') + ' has size ' + str(frame.shape[1:]) +
                                     ', expected ' + str(frames[0].shape[1:]))
    return np.stack(frames)


def _read_stack(directory, sub, extension, count, size, reader):
    values = []
    for i in range(count):
        name = frame_name(i, extension)
        path = os.path.join(directory, sub, name)
        if not os.path.isfile(path):
            raise DataIntegrityError('missing ' + sub + ' file for frame ' + name + ' in ' + str(directory))
        value = reader(path)
        if value.shape[-2:] != size:
            raise DataIntegrityError(sub + ' of frame ' + name + ' has size ' + str(value.shape[-2:]) +
                                     ', frames have ' + str(size))
        values.append(value)
    return np.stack(values)


def read_stream(directory, height, width):
    """
    Raw event stream of a sequence, None if none was stored.

    ``events/stream.emot`` (written by ``gen``) is preferred; an event recording placed as ``events/stream.txt``
    with one ``t x y p`` record per line is read otherwise.
    """
    for name in STREAM_FILES:
        path = os.path.join(directory, 'events', name)
        if os.path.isfile(path):
            return import_event_stream(path, height, width)
    return None


def read_sample(directory, include_events=True, include_flow=True, include_stream=False):
    """
    Reads a sequence directory written by :func:`write_sample`.

    Frames and masks are always read. Events and flow are only touched when requested, so evaluation and inference
    never open the events directory.

    :param str directory: sequence directory
    :param bool include_events: read the binary event maps
    :param bool include_flow: read the flow fields
    :param bool include_stream: read the raw event stream if present
    :return: SceneSample (skipped streams are None)
    """
    frames = read_frames(directory)
    count, size = frames.shape[0], frames.shape[2:]
    masks = _read_stack(directory, 'masks', 'pgm', count, size, read_binary_pgm)
    events = None
    flow = None
    stream = None
    if include_events:
        events = _read_stack(directory, 'events', 'pgm', count, size, read_binary_pgm)
    if include_flow:
        flow = _read_stack(directory, 'flow', 'emot', count, size, read_tensor).astype(np.float32)
    if include_stream:
        stream = read_stream(directory, *size)
    return SceneSample(frames, events, flow, masks, stream)


def write_split(root, split, names):
    with open(os.path.join(root, split + '.txt'), mode='w') as file:
        file.write(''.join(name + '\n' for name in names))


def read_split(root, split):
    """
    Sequence directory names listed in ``<root>/<split>.txt``.
    """
    path = os.path.join(root, split + '.txt')
    if not os.path.isfile(path):
        raise DataIntegrityError('missing split manifest ' + str(path))
    with open(path, mode='r') as file:
        return [line.strip() for line in file if line.strip()]


def supervision_dir(root, source):
    return os.path.join(root, 'sup_' + source)


def write_supervision_map(root, source, sequence, index, values):
    directory = os.path.join(supervision_dir(root, source), sequence)
    os.makedirs(directory, exist_ok=True)
    write_pgm(os.path.join(directory, frame_name(index, 'pgm')), values)


def read_supervision_maps(root, source, sequence, count, size):
    """
    Supervision maps of one sequence as float32 [T, H, W] in [0, 1].
    """
    directory = os.path.join(supervision_dir(root, source), sequence)
    if not os.path.isdir(directory):
        raise DataIntegrityError('missing supervision maps ' + str(directory) + '; run build-sup first')
    maps = _read_stack(os.path.dirname(directory), sequence, 'pgm', count, size,
                       lambda path: read_pgm(path, 'supervision map'))
    return (maps / 255.0).astype(np.float32)

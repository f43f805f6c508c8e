r"""
Spatio-temporal dense supervision targets.

The central target is

.. math::
    M_{ST} = (M \oplus D) \circ E

with :math:`M` the ground truth mask of the moving objects, :math:`D` a 3x3 all-ones structuring element,
:math:`\oplus` the morphological dilation, :math:`E` the binary event map of the frame and :math:`\circ` the
Hadamard product. :func:`build_supervision` additionally provides the ablation variants (flow, semantic, raw
event, ...).
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from src.exceptions import ConfigError, DataIntegrityError, DimensionError
from src.tensor_core import operations as ops
from src.tensor_core.tensor import Tensor

SUPERVISION_SOURCES = ('flow', 'semantic', 'semantic_dilated', 'event_raw', 'event_gt', 'event_gt_dilated')

# Variant used when dilation is switched off
_UNDILATED = {'semantic_dilated': 'semantic', 'event_gt_dilated': 'event_gt'}

DEFAULT_STRUCTURING_ELEMENT = np.ones((3, 3), dtype=np.uint8)


@dataclass
class EventStream:
    """
    Asynchronous event camera output: one record (t, x, y, p) per event.

    :param int height: sensor height
    :param int width: sensor width
    :param t: timestamps in microseconds, non-decreasing
    :param x: column of each event
    :param y: row of each event
    :param p: polarity of each event, +1 or -1
    """
    height: int
    width: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.p = np.asarray(self.p, dtype=np.int8)
        if not (self.t.shape == self.x.shape == self.y.shape == self.p.shape) or self.t.ndim != 1:
            raise DataIntegrityError('event stream fields differ in length')
        if np.any(np.diff(self.t) < 0):
            raise DataIntegrityError('event timestamps must be non-decreasing')
        if np.any((self.p != 1) & (self.p != -1)):
            raise DataIntegrityError('event polarity must be +1 or -1')

    def __len__(self):
        return self.t.size

    def to_array(self):
        """
        Events as a float64 [N, 4] array with columns t, x, y, p.
        """
        return np.stack([self.t, self.x, self.y, self.p], axis=1).astype(np.float64)

    @classmethod
    def from_array(cls, array, height, width):
        array = np.asarray(array, dtype=np.float64).reshape(-1, 4)
        return cls(height, width, array[:, 0], array[:, 1], array[:, 2], array[:, 3])

    @classmethod
    def empty(cls, height, width):
        return cls(height, width, np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0))


def _binary(values, name):
    values = np.asarray(values)
    if values.ndim != 2:
        raise DimensionError(name + ' must be a 2D map, got shape ' + str(values.shape))
    if np.any((values != 0) & (values != 1)):
        raise DimensionError(name + ' must hold only 0 and 1')
    return values.astype(np.uint8)


def binarize_events(stream, frame_time, window=50000):
    """
    Binary event map of one frame: a pixel is 1 iff at least one event of either polarity has a timestamp in
    ``[frame_time - window, frame_time)``.

    :param EventStream stream: events of the sequence
    :param int frame_time: time stamp of the frame in microseconds
    :param int window: length of the trailing window in microseconds (> 0)
    :return: uint8 [H, W] event map
    """
    if window <= 0:
        raise ConfigError('event window must be positive, got ' + str(window))
    outside = (stream.x < 0) | (stream.x >= stream.width) | (stream.y < 0) | (stream.y >= stream.height)
    if np.any(outside):
        raise DimensionError('event coordinates outside the ' + str((stream.height, stream.width)) + ' sensor')
    event_map = np.zeros((stream.height, stream.width), dtype=np.uint8)
    selected = (stream.t >= frame_time - window) & (stream.t < frame_time)
    event_map[stream.y[selected], stream.x[selected]] = 1
    return event_map


def dilate(mask, structuring_element=None):
    """
    Binary dilation: ``out[i,j] = 1`` iff ``mask[i+di, j+dj] = 1`` for any offset (di, dj) where the (centered)
    structuring element is 1. Pixels beyond the border count as 0.

    :param mask: binary [H, W] map
    :param structuring_element: binary 3x3 grid, all-ones by default
    :return: uint8 [H, W] map
    """
    mask = _binary(mask, 'mask')
    if structuring_element is None:
        structuring_element = DEFAULT_STRUCTURING_ELEMENT
    structuring_element = np.asarray(structuring_element)
    if structuring_element.shape != (3, 3):
        raise DimensionError('structuring element must be 3x3, got ' + str(structuring_element.shape))
    # ndimage reflects the structure; flip it so offsets read as out[i,j] <- mask[i+di, j+dj]
    structure = structuring_element[::-1, ::-1].astype(bool)
    return ndimage.binary_dilation(mask.astype(bool), structure=structure, border_value=0).astype(np.uint8)


def build_st_map(mask, event_map, structuring_element=None):
    """
    Spatio-temporal map: dilated mask multiplied elementwise with the event map.

    :param mask: binary ground truth mask M [H, W]
    :param event_map: binary event map E [H, W]
    :param structuring_element: binary 3x3 grid D, all-ones by default
    :return: uint8 [H, W] map with values 0 and 1
    """
    mask = _binary(mask, 'mask')
    event_map = _binary(event_map, 'event map')
    if mask.shape != event_map.shape:
        raise DimensionError('mask ' + str(mask.shape) + ' and event map ' + str(event_map.shape) + ' differ')
    return dilate(mask, structuring_element) * event_map


def resolve_source(source, dilation=True):
    """
    Name of the supervision variant that is actually built, given the dilation switch.
    """
    if source not in SUPERVISION_SOURCES:
        raise ConfigError('unknown supervision source ' + str(source) + '; choose from ' +
                         ', '.join(SUPERVISION_SOURCES))
    if not dilation:
        return _UNDILATED.get(source, source)
    return source


def flow_magnitude(flow):
    """
    Per-pixel magnitude of a [2, H, W] (or [T, 2, H, W]) flow field.
    """
    flow = np.asarray(flow, dtype=np.float64)
    return np.sqrt(flow[..., 0, :, :] ** 2 + flow[..., 1, :, :] ** 2)


def build_supervision(source, mask, event_map, flow=None, flow_scale=None):
    """
    Auxiliary supervision target of one frame for the different supervision strategies.

    - ``flow``: flow magnitude divided by ``flow_scale`` (the clip maximum; the frame maximum if not given)
    - ``semantic``: the mask itself
    - ``semantic_dilated``: the dilated mask
    - ``event_raw``: the event map
    - ``event_gt``: mask times event map
    - ``event_gt_dilated``: dilated mask times event map (:func:`build_st_map`)

    :param str source: one of ``SUPERVISION_SOURCES``
    :param mask: binary mask [H, W]
    :param event_map: binary event map [H, W]
    :param flow: [2, H, W] flow field, required for ``source == 'flow'``
    :param float flow_scale: normalization of the flow magnitude
    :return: float32 [H, W] map in [0, 1]
    """
    resolve_source(source)
    mask = _binary(mask, 'mask')
    event_map = _binary(event_map, 'event map')
    if mask.shape != event_map.shape:
        raise DimensionError('mask ' + str(mask.shape) + ' and event map ' + str(event_map.shape) + ' differ')

    if source == 'flow':
        if flow is None:
            raise DataIntegrityError('supervision source flow needs a flow field')
        magnitude = flow_magnitude(flow)
        if magnitude.shape != mask.shape:
            raise DimensionError('flow ' + str(np.shape(flow)) + ' does not fit mask ' + str(mask.shape))
        if flow_scale is None:
            flow_scale = magnitude.max()
        if flow_scale <= 0:
            return np.zeros(mask.shape, dtype=np.float32)
        return np.clip(magnitude / flow_scale, 0, 1).astype(np.float32)
    elif source == 'semantic':
        target = mask
    elif source == 'semantic_dilated':
        target = dilate(mask)
    elif source == 'event_raw':
        target = event_map
    elif source == 'event_gt':
        target = mask * event_map
    else:
        target = build_st_map(mask, event_map)
    return target.astype(np.float32)


def downsample_target(target, height, width):
    """
    Max-pools a supervision map to the feature resolution of the prior prediction.

    :param target: [..., H, W] map
    :param int height: feature height h (divides H)
    :param int width: feature width w (divides W)
    :return: Tensor [..., 1, h, w]
    """
    target = np.asarray(target, dtype=np.float32)[..., None, :, :]
    return ops.maxpool_to(Tensor(target), height, width)

r"""
Synthetic ego-motion clips with paired frames, events, ground truth flow and moving object masks.

The camera moves over a smooth random texture; the background therefore shifts by the ego velocity every frame and
fires events wherever the texture or a static object edge passes. Movers carry an additional scene-relative
velocity and are the only objects in the masks.

Events follow the contrast threshold camera model: every pixel keeps a reference log intensity
:math:`L_{ref} = \log(I + 1/255)` and fires when

.. math::
    |\log(I(t) + 1/255) - L_{ref}| > \theta_e

after which the reference is reset to the current log intensity. Each frame interval is rendered at S substeps.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from src.data_management.supervision import EventStream, binarize_events
from src.exceptions import ConfigError, DataIntegrityError
from src.model_construction.utilities import STREAM_SCENE, make_generator

LOG_EPSILON = 1.0 / 255

# Object intensities avoid the band of the background texture
_DARK_RANGE = (0.05, 0.25)
_BRIGHT_RANGE = (0.75, 0.95)


@dataclass
class SceneConfig:
    """
    Parameters of the scene generator. Velocities are in pixels per frame, times in microseconds.
    """
    height: int = 64
    width: int = 64
    frames: int = 2
    n_moving: int = 1
    n_static: int = 2
    ego_velocity_min: float = -2.0
    ego_velocity_max: float = 2.0
    mover_speed_min: float = 0.5
    mover_speed_max: float = 3.0
    object_size_min: int = 8
    object_size_max: int = 20
    contrast_threshold: float = 0.15
    substeps: int = 8
    texture_smoothness: float = 2.0
    texture_contrast: float = 0.4
    frame_interval_us: int = 50000

    def __post_init__(self):
        if self.height < 4 or self.width < 4 or self.frames < 1 or self.substeps < 1:
            raise ConfigError('scene needs H, W >= 4, at least one frame and one substep')
        if self.n_moving < 0 or self.n_static < 0:
            raise ConfigError('object counts must be non-negative')
        if self.mover_speed_min < 0.5:
            raise ConfigError('movers need a relative speed of at least 0.5 px/frame, got ' +
                              str(self.mover_speed_min))
        if self.mover_speed_max < self.mover_speed_min or self.ego_velocity_max < self.ego_velocity_min:
            raise ConfigError('velocity ranges must satisfy min <= max')
        if self.object_size_min < 1 or self.object_size_max < self.object_size_min:
            raise ConfigError('object sizes must satisfy 1 <= min <= max')
        if self.object_size_max + self.max_travel() > min(self.height, self.width) - 1:
            raise ConfigError('objects of size ' + str(self.object_size_max) + ' travelling ' +
                              str(self.max_travel()) + ' px do not fit into the ' +
                              str((self.height, self.width)) + ' viewport')
        if self.contrast_threshold <= 0 or not 0 <= self.texture_contrast <= 1 or self.texture_smoothness < 0:
            raise ConfigError('invalid contrast threshold or texture parameters')
        if self.frame_interval_us < 2 * self.substeps:
            raise ConfigError('frame interval too short for the number of substeps')

    def max_travel(self):
        """
        Largest displacement of an object along one axis over the rendered time span (one frame before the clip
        start up to the last frame).
        """
        ego = max(abs(self.ego_velocity_min), abs(self.ego_velocity_max))
        return (ego + self.mover_speed_max) * self.frames

    @classmethod
    def from_run_config(cls, config):
        scene = config.scene
        return cls(**{name: getattr(scene, name) for name in cls.__dataclass_fields__})


@dataclass
class SceneObject:
    """
    A filled rectangle or ellipse moving with constant image-plane velocity (vx, vy).
    """
    moving: bool
    shape: str
    center: np.ndarray
    size: np.ndarray
    velocity: np.ndarray
    intensity: float

    def position(self, tau):
        return self.center + self.velocity * tau

    def footprint(self, tau, height, width):
        """
        Binary footprint at time ``tau`` (in frames), evaluated at pixel centers.
        """
        cx, cy = self.position(tau)
        half_w, half_h = self.size / 2.0
        y, x = np.mgrid[0:height, 0:width]
        if self.shape == 'rectangle':
            return (np.abs(x - cx) <= half_w) & (np.abs(y - cy) <= half_h)
        return ((x - cx) / half_w) ** 2 + ((y - cy) / half_h) ** 2 <= 1.0


@dataclass
class SceneSample:
    """
    One generated clip: frames [T, 3, H, W] in [0, 1], binary event maps [T, H, W], flow [T, 2, H, W] (dx, dy),
    binary masks [T, H, W] and optionally the raw event stream and object descriptions.
    """
    frames: np.ndarray
    events: np.ndarray
    flow: np.ndarray
    masks: np.ndarray
    stream: EventStream = None
    objects: list = field(default_factory=list)
    ego_velocity: np.ndarray = None

    def __post_init__(self):
        if self.frames is None or self.frames.ndim != 4 or self.frames.shape[1] != 3:
            raise DataIntegrityError('frames must be [T, 3, H, W]')
        count = self.frames.shape[0]
        size = self.frames.shape[2:]
        for name in ('events', 'masks'):
            values = getattr(self, name)
            if values is not None and values.shape != (count,) + size:
                raise DataIntegrityError(name + ' ' + str(values.shape) + ' do not match frames ' +
                                         str(self.frames.shape))
        if self.flow is not None and self.flow.shape != (count, 2) + size:
            raise DataIntegrityError('flow ' + str(self.flow.shape) + ' does not match frames ' +
                                     str(self.frames.shape))

    def __len__(self):
        return self.frames.shape[0]

    @property
    def size(self):
        return self.frames.shape[2:]


def _texture(generator, cfg, margin):
    shape = (cfg.height + 2 * margin, cfg.width + 2 * margin)
    noise = ndimage.gaussian_filter(generator.random(shape), sigma=cfg.texture_smoothness, mode='wrap')
    span = noise.max() - noise.min()
    normalized = (noise - noise.min()) / span if span > 0 else np.zeros(shape)
    return 0.5 - cfg.texture_contrast / 2 + cfg.texture_contrast * normalized


def _draw_object(generator, cfg, moving, ego):
    size = generator.uniform(cfg.object_size_min, cfg.object_size_max, size=2)
    shape = 'rectangle' if generator.random() < 0.5 else 'ellipse'
    if moving:
        angle = generator.uniform(0, 2 * np.pi)
        speed = generator.uniform(cfg.mover_speed_min, cfg.mover_speed_max)
        velocity = ego + speed * np.array([np.cos(angle), np.sin(angle)])
    else:
        velocity = ego.copy()
    band = _DARK_RANGE if generator.random() < 0.5 else _BRIGHT_RANGE
    intensity = generator.uniform(*band)

    # Keep the footprint inside the viewport for tau in [-1, T-1]
    center = np.zeros(2)
    for axis, extent in enumerate((cfg.width, cfg.height)):
        half = size[axis] / 2.0
        shifts = velocity[axis] * np.array([-1.0, cfg.frames - 1.0])
        low = half - shifts.min()
        high = extent - 1 - half - shifts.max()
        if high < low:
            raise ConfigError('object trajectory does not fit into the viewport')
        center[axis] = generator.uniform(low, high)
    return SceneObject(moving, shape, center, size, velocity, intensity)


def _render(texture, objects, ego, tau, cfg, margin):
    """
    Intensity image at time ``tau``; later objects occlude earlier ones.
    """
    y, x = np.mgrid[0:cfg.height, 0:cfg.width].astype(np.float64)
    # Background content is displaced by ego * tau
    coords = np.stack([y - ego[1] * tau + margin, x - ego[0] * tau + margin])
    image = ndimage.map_coordinates(texture, coords, order=1, mode='nearest')
    owner = np.full((cfg.height, cfg.width), -1)
    for index, obj in enumerate(objects):
        covered = obj.footprint(tau, cfg.height, cfg.width)
        image[covered] = obj.intensity
        owner[covered] = index
    return image, owner


def generate(cfg, seed, index=0, with_stream=True):
    """
    Generates one synthetic clip.

    The background is a smoothed random grayscale texture on an extended canvas whose viewport shifts by the ego
    velocity every frame. Static distractors move with the background; movers carry an additional relative velocity
    of at least ``mover_speed_min``. Frame i is rendered at time i (in frames), the substeps of its interval at
    ``i - 1 + k / S``; the events of those substeps are stamped inside ``[i * interval, (i + 1) * interval)`` and
    the frame time stamp is ``(i + 1) * interval``.

    :param SceneConfig cfg: generator configuration
    :param int seed: run seed
    :param int index: sequence index; (seed, index) selects an independent random substream
    :param bool with_stream: keep the raw event stream and the object list in the sample
    :return: SceneSample
    """
    generator = make_generator(seed, STREAM_SCENE, index)
    ego = generator.uniform(cfg.ego_velocity_min, cfg.ego_velocity_max, size=2)
    margin = int(np.ceil(np.abs(ego).max() * (cfg.frames + 1))) + 2
    texture = _texture(generator, cfg, margin)
    tint = generator.uniform(0.8, 1.0, size=3)

    # Distractors first so movers are drawn on top
    objects = [_draw_object(generator, cfg, False, ego) for _ in range(cfg.n_static)]
    objects += [_draw_object(generator, cfg, True, ego) for _ in range(cfg.n_moving)]

    interval = cfg.frame_interval_us
    image, _ = _render(texture, objects, ego, -1.0, cfg, margin)
    reference = np.log(image + LOG_EPSILON)

    frames = np.zeros((cfg.frames, 3, cfg.height, cfg.width), dtype=np.float32)
    flow = np.zeros((cfg.frames, 2, cfg.height, cfg.width), dtype=np.float32)
    masks = np.zeros((cfg.frames, cfg.height, cfg.width), dtype=np.uint8)
    records = []
    for i in range(cfg.frames):
        for k in range(1, cfg.substeps + 1):
            tau = i - 1 + k / cfg.substeps
            image, owner = _render(texture, objects, ego, tau, cfg, margin)
            level = np.log(image + LOG_EPSILON)
            change = level - reference
            fired = np.abs(change) > cfg.contrast_threshold
            ys, xs = np.nonzero(fired)
            if ys.size:
                stamp = i * interval + ((2 * k - 1) * interval) // (2 * cfg.substeps)
                polarity = np.where(change[ys, xs] > 0, 1, -1)
                records.append(np.stack([np.full(ys.size, stamp), xs, ys, polarity], axis=1))
                reference[fired] = level[fired]

        frames[i] = np.clip(image[None] * tint[:, None, None], 0, 1)
        flow[i, 0] = ego[0]
        flow[i, 1] = ego[1]
        for index_obj, obj in enumerate(objects):
            visible = owner == index_obj
            flow[i, 0][visible] = obj.velocity[0]
            flow[i, 1][visible] = obj.velocity[1]
            if obj.moving:
                masks[i][obj.footprint(i, cfg.height, cfg.width)] = 1

    if records:
        stream = EventStream.from_array(np.concatenate(records).astype(np.float64), cfg.height, cfg.width)
    else:
        stream = EventStream.empty(cfg.height, cfg.width)
    events = np.stack([binarize_events(stream, (i + 1) * interval, interval) for i in range(cfg.frames)])

    if not with_stream:
        return SceneSample(frames, events, flow, masks, ego_velocity=ego)
    return SceneSample(frames, events, flow, masks, stream, objects, ego)

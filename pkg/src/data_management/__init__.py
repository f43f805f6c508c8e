from .create_templates import *
from .supervision import *
from .synthetic_scenes import SceneConfig, SceneObject, SceneSample, generate
from .image_io import write_sample, read_sample, read_frames, read_split, write_split
from .import_data import import_event_stream
from .data_handling import DataHandle, load_data_handle
from .result_handling import ResultsHandle, write_manifest

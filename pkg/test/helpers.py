import os

from src.commands import main

TOY_CONFIG = """
# 16 x 16 scenes, tiny network
run.seed = 3
scene.height = 16
scene.width = 16
scene.frames = 2
scene.object_size_min = 3
scene.object_size_max = 5
scene.ego_velocity_min = -1.0
scene.ego_velocity_max = 1.0
scene.mover_speed_max = 1.5
model.channels = 4
training.steps = 3
training.batch_size = 2
data.test_fraction = 0.5
data.write_event_streams = true
"""


def write_config(path, text=TOY_CONFIG, extra=''):
    with open(path, mode='w') as file:
        file.write(text + extra)
    return str(path)


def run_cli(*args):
    return main([str(arg) for arg in args])


def read_bytes(path):
    with open(path, mode='rb') as file:
        return file.read()


def tree_bytes(root):
    """
    Relative path -> file content of every file below root.
    """
    contents = {}
    for directory, _, files in os.walk(root):
        for name in files:
            path = os.path.join(directory, name)
            contents[os.path.relpath(path, root)] = read_bytes(path)
    return contents

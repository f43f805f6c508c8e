from types import SimpleNamespace

# Defaults of a run. Every key can be overwritten in a run config file as group.key = value
# (see src.data_management.create_templates.read_run_config).

scene = SimpleNamespace()
scene.height = 64
scene.width = 64
scene.frames = 2
scene.n_moving = 1
scene.n_static = 2
scene.ego_velocity_min = -2.0  # px/frame, both axes
scene.ego_velocity_max = 2.0
scene.mover_speed_min = 0.5  # px/frame, relative to the scene
scene.mover_speed_max = 3.0
scene.object_size_min = 8
scene.object_size_max = 20
scene.contrast_threshold = 0.15
scene.substeps = 8
scene.texture_smoothness = 2.0
scene.texture_contrast = 0.4
scene.frame_interval_us = 50000

model = SimpleNamespace()
model.channels = 32
model.expansion_channels = 0  # 0: 2 * channels
model.rank = 0  # 0: channels // 4
model.with_prior = True
model.fusion = 'ours'
model.scales = (0.75, 1.0, 1.25)

training = SimpleNamespace()
training.steps = 2000
training.batch_size = 4
training.lr = 1e-3
training.lr_schedule = 'poly'
training.lr_power = 0.9
training.weight_decay = 1e-4
training.beta1 = 0.9
training.beta2 = 0.999
training.eps = 1e-8
training.lambda_st = 1.0
training.sup_source = 'event_gt_dilated'
training.augment_flip = False
training.augment_scale = False  # multi-scale training over model.scales
training.log_interval = 1

evaluation = SimpleNamespace()
evaluation.multi_scale = False
evaluation.threshold = 0.5

data = SimpleNamespace()
data.test_fraction = 0.2
data.write_event_streams = False
data.event_window_us = 50000

run = SimpleNamespace()
run.seed = 0

gradcheck = SimpleNamespace()
gradcheck.channels = 4
gradcheck.rank = 2
gradcheck.frames = 1
gradcheck.size = 8
gradcheck.eps = 1e-4
gradcheck.tolerance = 1e-5

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import src.model_construction as mc
import src.model_construction.construct_pipeline as pipeline
from src.data_management.create_templates import create_default_run_config
from src.segmenter import Segmenter, gradient_check, load_segmenter_instance
from src.exceptions import ConfigError, ConfigMismatchError, DataIntegrityError, DimensionError, NumericError
from src.model_construction.utilities import make_generator
from src.tensor_core import operations as ops
from src.tensor_core.gradient_check import finite_diff_check
from src.tensor_core.tensor import GradTape, Tensor, record_operation


def tensors(values):
    return {name: Tensor(np.asarray(value, dtype=np.float64)) for name, value in values.items()}


def zero_params(config, **overrides):
    values = {name: np.zeros(shape) for name, shape in mc.parameter_shapes(config).items()}
    for name, value in overrides.items():
        values[name.replace('__', '.')] = np.full(values[name.replace('__', '.')].shape, value)
    return mc.ModelParams(config, values)


def random_batch(config, batch_size=2, seed=0):
    generator = np.random.default_rng(seed)
    shape = (batch_size, config.frames, config.height, config.width)
    return mc.TrainingBatch(clips=generator.random((batch_size, config.frames, 3, config.height, config.width)),
                            masks=(generator.random(shape) < 0.3).astype(np.uint8),
                            st_targets=(generator.random(shape) < 0.2).astype(np.float32))


def positive_bias_params(config, seed=0):
    params = mc.initialize_parameters(config, seed)
    generator = np.random.default_rng(seed)
    return {name: generator.uniform(0.2, 0.6, size=value.shape) if name.endswith('.bias') else value
            for name, value in params.values.items()}


def pointwise(weight, bias, x):
    return np.einsum('oc,...chw->...ohw', weight, x) + bias[:, None, None]


class TestModelConfig:
    def test_derived_sizes(self):
        config = mc.ModelConfig(channels=8)
        assert config.expansion_channels == 16
        assert config.rank == 2
        assert config.feature_size == (16, 16)

    def test_rank_must_be_below_channels(self):
        with pytest.raises(ConfigError):
            mc.ModelConfig(channels=4, rank=4)

    def test_scales_must_contain_one(self):
        with pytest.raises(ConfigError):
            mc.ModelConfig(scales=(0.5, 2.0))

    def test_size_multiple_of_four(self):
        with pytest.raises(ConfigError):
            mc.ModelConfig(height=30)

    def test_unknown_fusion(self):
        with pytest.raises(ConfigError):
            mc.ModelConfig(fusion='concat')

    def test_from_run_config(self):
        config = create_default_run_config()
        config.model.channels = 8
        config.training.lambda_st = 0.5
        model = mc.ModelConfig.from_run_config(config)
        assert model.channels == 8 and model.lambda_st == 0.5 and model.height == config.scene.height

    def test_variant_parameter_names(self):
        names = set(mc.parameter_shapes(mc.ModelConfig(channels=4)))
        assert 'prior_fusion.correlation.weight' in names
        baseline = set(mc.parameter_shapes(mc.ModelConfig(channels=4, with_prior=False)))
        assert not any(name.startswith('prior') for name in baseline)
        added = set(mc.parameter_shapes(mc.ModelConfig(channels=4, fusion='add')))
        assert 'prior_generation.expand.weight' in added
        assert not any(name.startswith('prior_fusion') for name in added)


class TestInitialization:
    def test_he_uniform_and_zero_biases(self, tiny_config):
        params = mc.initialize_parameters(tiny_config)
        for name, value in params.values.items():
            assert value.dtype == np.float32
            if name.endswith('.bias'):
                assert not value.any()
            else:
                bound = np.sqrt(6.0 / np.prod(value.shape[1:]))
                assert np.all(np.abs(value) <= bound)

    def test_same_seed_same_values(self, tiny_config):
        first = mc.initialize_parameters(tiny_config, 11)
        second = mc.initialize_parameters(tiny_config, 11)
        other = mc.initialize_parameters(tiny_config, 12)
        for name in first.names():
            assert_array_equal(first[name], second[name])
        assert any(not np.array_equal(first[name], other[name]) for name in first.names())

    def test_wrong_shape_rejected(self, tiny_config):
        values = dict(mc.initialize_parameters(tiny_config).values)
        values['decoder.head.bias'] = np.zeros(2)
        with pytest.raises(ConfigError):
            mc.ModelParams(tiny_config, values)


class TestEncoder:
    def test_zero_clip_zero_biases(self, tiny_config):
        params = mc.initialize_parameters(tiny_config)
        features = mc.encode(Tensor(np.zeros((2, 3, 16, 16), dtype=np.float32)), pipeline._tensors(params))
        assert features.shape == (2, 4, 4, 4)
        assert not features.data.any()

    def test_size_must_be_multiple_of_four(self, tiny_config):
        params = pipeline._tensors(mc.initialize_parameters(tiny_config))
        with pytest.raises(DimensionError):
            mc.encode(Tensor(np.zeros((1, 3, 10, 12), dtype=np.float32)), params)

    def test_needs_rgb(self, tiny_config):
        params = pipeline._tensors(mc.initialize_parameters(tiny_config))
        with pytest.raises(DimensionError):
            mc.encode(Tensor(np.zeros((1, 1, 16, 16), dtype=np.float32)), params)

    def test_gradient(self, rng):
        config = mc.ModelConfig(frames=1, height=8, width=8, channels=4, dtype='float64')
        values = positive_bias_params(config)
        clip = Tensor(rng.random((1, 3, 8, 8)))
        target = Tensor(rng.random((1, 4, 2, 2)))
        names = [name for name in values if name.startswith('encoder')]

        def f(p):
            return ops.mse(mc.encode(clip, p), target)

        assert finite_diff_check(f, {name: values[name] for name in names}) < 1e-5


class TestPriorGeneration:
    def test_identity_composition(self, rng):
        c = 3
        kernel = np.zeros((c, 3, 3))
        kernel[:, 1, 1] = 1
        params = tensors({
            'prior_generation.expand.weight': np.eye(c), 'prior_generation.expand.bias': np.zeros(c),
            'prior_generation.depthwise.weight': kernel,
            'prior_generation.project.weight': np.eye(c), 'prior_generation.project.bias': np.zeros(c),
        })
        f_rgb = rng.random((c, 4, 4))
        assert_allclose(mc.prior_generate(Tensor(f_rgb), params).data, f_rgb, rtol=1e-12)

    def test_zero_parameters(self, rng):
        params = tensors({
            'prior_generation.expand.weight': np.zeros((4, 2)), 'prior_generation.expand.bias': np.zeros(4),
            'prior_generation.depthwise.weight': np.zeros((4, 3, 3)),
            'prior_generation.project.weight': np.zeros((2, 4)), 'prior_generation.project.bias': np.zeros(2),
        })
        assert not mc.prior_generate(Tensor(rng.random((2, 4, 4))), params).data.any()

    def test_matches_composition(self, rng):
        values = {
            'prior_generation.expand.weight': rng.standard_normal((4, 2)),
            'prior_generation.expand.bias': rng.standard_normal(4),
            'prior_generation.depthwise.weight': rng.standard_normal((4, 3, 3)),
            'prior_generation.project.weight': rng.standard_normal((2, 4)),
            'prior_generation.project.bias': rng.standard_normal(2),
        }
        x = rng.standard_normal((2, 4, 4))
        expanded = np.maximum(pointwise(values['prior_generation.expand.weight'],
                                        values['prior_generation.expand.bias'], x), 0)
        filtered = np.zeros_like(expanded)
        kernel = values['prior_generation.depthwise.weight']
        for c in range(4):
            for i in range(4):
                for j in range(4):
                    for u in range(3):
                        for v in range(3):
                            y, x_ = i + u - 1, j + v - 1
                            if 0 <= y < 4 and 0 <= x_ < 4:
                                filtered[c, i, j] += kernel[c, u, v] * expanded[c, y, x_]
        filtered = np.maximum(filtered, 0)
        expected = pointwise(values['prior_generation.project.weight'], values['prior_generation.project.bias'],
                             filtered)
        assert_allclose(mc.prior_generate(Tensor(x), tensors(values)).data, expected, rtol=1e-10, atol=1e-12)

    def test_prediction_constant_plane(self, rng):
        params = tensors({'prior_prediction.weight': np.zeros((1, 3)), 'prior_prediction.bias': [-0.7]})
        out = mc.prior_predict(Tensor(rng.random((2, 3, 4, 4))), params)
        assert out.shape == (2, 1, 4, 4)
        assert np.all(out.data == -0.7)


def fusion_values(rng, c=4, r=2):
    return {
        'prior_fusion.rgb_proj.weight': rng.standard_normal((r, c)),
        'prior_fusion.rgb_proj.bias': rng.standard_normal(r),
        'prior_fusion.motion_proj.weight': rng.standard_normal((r, c)),
        'prior_fusion.motion_proj.bias': rng.standard_normal(r),
        'prior_fusion.correlation.weight': rng.standard_normal((r, 2 * r)),
        'prior_fusion.correlation.bias': rng.standard_normal(r),
        'prior_fusion.output.weight': rng.standard_normal((c, 2 * r)),
        'prior_fusion.output.bias': rng.standard_normal(c),
    }


class TestPriorFusion:
    def test_matches_step_by_step(self, rng):
        values = fusion_values(rng)
        f_rgb = rng.standard_normal((4, 4, 4))
        f_m = rng.standard_normal((4, 4, 4))
        low_rgb = pointwise(values['prior_fusion.rgb_proj.weight'], values['prior_fusion.rgb_proj.bias'], f_rgb)
        low_m = pointwise(values['prior_fusion.motion_proj.weight'], values['prior_fusion.motion_proj.bias'], f_m)
        correlation = pointwise(values['prior_fusion.correlation.weight'], values['prior_fusion.correlation.bias'],
                                np.concatenate([low_rgb, low_m]))
        attention = np.exp(correlation) / np.exp(correlation).sum(axis=(1, 2), keepdims=True)
        expected = pointwise(values['prior_fusion.output.weight'], values['prior_fusion.output.bias'],
                             np.concatenate([low_rgb * attention, low_m]))
        out = mc.prior_fuse(Tensor(f_rgb), Tensor(f_m), tensors(values), 'ours')
        assert_allclose(out.data, expected, rtol=1e-10, atol=1e-12)

    def test_constant_correlation_gives_uniform_attention(self, rng):
        values = fusion_values(rng)
        values['prior_fusion.correlation.weight'] = np.zeros((2, 4))
        f_rgb = rng.standard_normal((4, 4, 4))
        f_m = rng.standard_normal((4, 4, 4))
        low_rgb = pointwise(values['prior_fusion.rgb_proj.weight'], values['prior_fusion.rgb_proj.bias'], f_rgb)
        low_m = pointwise(values['prior_fusion.motion_proj.weight'], values['prior_fusion.motion_proj.bias'], f_m)
        expected = pointwise(values['prior_fusion.output.weight'], values['prior_fusion.output.bias'],
                             np.concatenate([low_rgb / 16, low_m]))
        out = mc.prior_fuse(Tensor(f_rgb), Tensor(f_m), tensors(values), 'ours')
        assert_allclose(out.data, expected, rtol=1e-10, atol=1e-12)

    def test_single_position_is_a_pointwise_merge(self, rng):
        values = fusion_values(rng)
        f_rgb = rng.standard_normal((3, 4, 1, 1))
        f_m = rng.standard_normal((3, 4, 1, 1))
        low_rgb = pointwise(values['prior_fusion.rgb_proj.weight'], values['prior_fusion.rgb_proj.bias'], f_rgb)
        low_m = pointwise(values['prior_fusion.motion_proj.weight'], values['prior_fusion.motion_proj.bias'], f_m)
        expected = pointwise(values['prior_fusion.output.weight'], values['prior_fusion.output.bias'],
                             np.concatenate([low_rgb, low_m], axis=1))
        out = mc.prior_fuse(Tensor(f_rgb), Tensor(f_m), tensors(values), 'ours')
        assert_allclose(out.data, expected, rtol=1e-10, atol=1e-12)

    def test_addition_and_multiplication(self, rng):
        f_rgb = rng.standard_normal((2, 3, 3))
        f_m = rng.standard_normal((2, 3, 3))
        assert_allclose(mc.prior_fuse(Tensor(f_rgb), Tensor(f_m), {}, 'add').data, f_rgb + f_m)
        assert_allclose(mc.prior_fuse(Tensor(f_rgb), Tensor(f_m), {}, 'mul').data, f_rgb * f_m)

    def test_shape_mismatch(self, rng):
        with pytest.raises(DimensionError):
            mc.prior_fuse(Tensor(np.zeros((2, 3, 3))), Tensor(np.zeros((2, 4, 3))), {}, 'add')

    def test_unknown_variant(self):
        with pytest.raises(ConfigError):
            mc.prior_fuse(Tensor(np.zeros((2, 3, 3))), Tensor(np.zeros((2, 3, 3))), {}, 'concat')

    def test_gradient(self, rng):
        f_rgb = Tensor(rng.standard_normal((4, 4, 4)))
        f_m = Tensor(rng.standard_normal((4, 4, 4)))
        target = Tensor(rng.standard_normal((4, 4, 4)))

        def f(p):
            return ops.mse(mc.prior_fuse(f_rgb, f_m, p, 'ours'), target)

        assert finite_diff_check(f, fusion_values(rng)) < 1e-5


class TestDecoder:
    def test_zero_parameters_give_zero_logits(self, tiny_config):
        params = zero_params(tiny_config)
        logits = mc.decode(Tensor(np.ones((2, 4, 4, 4), dtype=np.float32)), pipeline._tensors(params))
        assert logits.shape == (2, 1, 16, 16)
        assert not logits.data.any()

    def test_gradient(self, rng):
        config = mc.ModelConfig(frames=1, height=8, width=8, channels=4, dtype='float64')
        values = positive_bias_params(config, seed=3)
        features = Tensor(rng.random((4, 2, 2)))
        target = Tensor(rng.standard_normal((1, 8, 8)))
        names = [name for name in values if name.startswith('decoder')]

        def f(p):
            return ops.mse(mc.decode(features, p), target)

        assert finite_diff_check(f, {name: values[name] for name in names}) < 1e-5


class TestForward:
    @pytest.mark.parametrize('fusion', ['ours', 'add', 'mul'])
    def test_matches_composition(self, rng, fusion):
        config = mc.ModelConfig(frames=2, height=8, width=8, channels=4, fusion=fusion, dtype='float64')
        params = tensors(positive_bias_params(config, seed=2))
        clip = rng.random((2, 3, 8, 8))
        out = mc.forward(clip, params, with_prior=True, fusion=fusion)
        f_rgb = mc.encode(Tensor(clip), params)
        f_m = mc.prior_generate(f_rgb, params)
        assert_allclose(out.P.data, mc.decode(mc.prior_fuse(f_rgb, f_m, params, fusion), params).data, rtol=1e-12)
        assert_allclose(out.p_m.data, mc.prior_predict(f_m, params).data, rtol=1e-12)

    def test_baseline_decodes_the_rgb_feature(self, rng):
        config = mc.ModelConfig(frames=1, height=8, width=8, channels=4, with_prior=False, dtype='float64')
        params = tensors(positive_bias_params(config, seed=4))
        clip = rng.random((1, 3, 8, 8))
        out = mc.forward(clip, params, with_prior=False)
        assert out.p_m is None
        assert_allclose(out.P.data, mc.decode(mc.encode(Tensor(clip), params), params).data, rtol=1e-12)


def output(p_logits, p_m=None):
    return pipeline.ForwardOutput(P=Tensor(np.asarray(p_logits, dtype=np.float64)),
                                  p_m=None if p_m is None else Tensor(np.asarray(p_m, dtype=np.float64)),
                                  f_rgb=None, f_m=None, f_s=None)


class TestJointLoss:
    def test_single_pixel(self):
        losses = mc.joint_loss(output([[[0.0]]], [[[0.0]]]), np.ones((1, 1)), np.ones((1, 1, 1)))
        assert losses.l_sem == pytest.approx(np.log(2), rel=1e-12)
        assert losses.l_st == pytest.approx(0.25, rel=1e-12)
        assert losses.total == pytest.approx(np.log(2) + 0.25, rel=1e-12)

    def test_matching_prior_gives_zero_auxiliary_loss(self, rng):
        losses = mc.joint_loss(output(rng.standard_normal((1, 4, 4)), np.zeros((1, 2, 2))),
                               np.zeros((4, 4)), np.full((1, 2, 2), 0.5))
        assert losses.l_st == 0.0

    def test_zero_weight_is_the_baseline_objective(self, rng):
        losses = mc.joint_loss(output(rng.standard_normal((1, 4, 4)), rng.standard_normal((1, 2, 2))),
                               (rng.random((4, 4)) < 0.5), rng.random((1, 2, 2)), lambda_st=0.0)
        assert losses.total == losses.l_sem
        assert losses.l_st > 0

    def test_without_prior(self, rng):
        losses = mc.joint_loss(output(rng.standard_normal((1, 4, 4))), np.zeros((4, 4)), None)
        assert losses.l_st == 0.0 and losses.total == losses.l_sem

    def test_prior_needs_targets(self, rng):
        with pytest.raises(DimensionError):
            mc.joint_loss(output(np.zeros((1, 4, 4)), np.zeros((1, 2, 2))), np.zeros((4, 4)), None)

    def test_non_finite_component(self):
        with pytest.raises(NumericError):
            mc.LossBreakdown(float('nan'), 0.0, 0.0)

    def test_to_dict(self):
        assert mc.LossBreakdown(1.0, 0.5, 1.5).to_dict() == {'L_sem': 1.0, 'L_ST': 0.5, 'total': 1.5}

    def test_zero_weight_gives_zero_prediction_gradient(self):
        config = mc.ModelConfig(frames=2, height=16, width=16, channels=4, lambda_st=0.0)
        params = mc.initialize_parameters(config)
        with GradTape() as tape:
            tracked = {name: tape.watch(value, name) for name, value in params.values.items()}
            losses = mc.batch_loss(params, random_batch(config), config, tracked)
        gradients = tape.backward(losses.tensor)
        assert not gradients['prior_prediction.weight'].any()
        assert not gradients['prior_prediction.bias'].any()
        assert gradients['decoder.head.weight'].any()


class TestOptimizer:
    def test_poly_schedule(self):
        training = mc.TrainingConfig(steps=100, lr=1e-3)
        assert mc.learning_rate(training, 0) == pytest.approx(1e-3)
        assert mc.learning_rate(training, 50) == pytest.approx(1e-3 * 0.5 ** 0.9)
        assert mc.learning_rate(training, 100) == 0.0
        constant = mc.TrainingConfig(steps=100, lr=1e-3, lr_schedule='constant')
        assert mc.learning_rate(constant, 70) == 1e-3

    def test_zero_gradient_only_decays(self):
        config = mc.ModelConfig(frames=1, height=8, width=8, channels=4, dtype='float64')
        params = mc.initialize_parameters(config)
        training = mc.TrainingConfig(lr=1e-2, weight_decay=0.1)
        gradients = {name: np.zeros_like(value) for name, value in params.values.items()}
        updated = mc.adamw_update(params, gradients, training)
        for name, value in params.values.items():
            assert_allclose(updated[name], value * (1 - 1e-2 * 0.1), rtol=1e-12)
        assert updated.step == 1

    def test_input_unchanged(self, tiny_config):
        params = mc.initialize_parameters(tiny_config)
        before = params.copy()
        gradients = {name: np.ones_like(value) for name, value in params.values.items()}
        mc.adamw_update(params, gradients, mc.TrainingConfig())
        for name in params.names():
            assert_array_equal(params[name], before[name])
            assert not params.m[name].any()

    def test_first_step_size_is_the_learning_rate(self):
        config = mc.ModelConfig(frames=1, height=8, width=8, channels=4, dtype='float64')
        params = mc.initialize_parameters(config)
        training = mc.TrainingConfig(lr=1e-3, weight_decay=0.0)
        gradients = {name: np.full(value.shape, 2.0) for name, value in params.values.items()}
        updated = mc.adamw_update(params, gradients, training)
        name = 'decoder.head.weight'
        assert_allclose(params[name] - updated[name], 1e-3, rtol=1e-6)

    def test_non_finite_gradient(self, tiny_config):
        params = mc.initialize_parameters(tiny_config)
        gradients = {name: np.zeros_like(value) for name, value in params.values.items()}
        gradients['decoder.head.bias'] = np.array([np.inf], dtype=np.float32)
        with pytest.raises(NumericError):
            mc.adamw_update(params, gradients, mc.TrainingConfig())


class TestTraining:
    def test_same_seed_same_trajectory(self, tiny_config):
        training = mc.TrainingConfig(steps=3, batch_size=2)
        batch = random_batch(tiny_config)
        runs = [mc.train_model(mc.initialize_parameters(tiny_config), lambda step: batch, training, progress=False)
                for _ in range(2)]
        for name in runs[0].params.names():
            assert_array_equal(runs[0].params[name], runs[1].params[name])
        assert runs[0].log.equals(runs[1].log)
        assert list(runs[0].log.columns) == ['step', 'lr', 'L_sem', 'L_ST', 'total']

    def test_overfit_single_batch(self, tiny_config):
        training = mc.TrainingConfig(steps=50, batch_size=1, lr=1e-2, lr_schedule='constant')
        batch = random_batch(tiny_config, batch_size=1, seed=4)
        result = mc.train_model(mc.initialize_parameters(tiny_config), lambda step: batch, training, progress=False)
        assert result.error is None
        assert len(result.log) == 50
        assert result.log['total'].iloc[-1] < result.log['total'].iloc[0]

    def test_batches_at_inference_scales(self, tiny_config):
        sizes = [mc.ModelConfig(frames=2, height=h, width=h, channels=4) for h in (12, 16, 20)]
        batches = [random_batch(config, seed=i) for i, config in enumerate(sizes)]
        result = mc.train_model(mc.initialize_parameters(tiny_config), lambda step: batches[step % 3],
                                mc.TrainingConfig(steps=3), progress=False)
        assert result.error is None
        assert len(result.log) == 3

    def test_baseline_logs_zero_auxiliary_loss(self):
        config = mc.ModelConfig(frames=2, height=16, width=16, channels=4, with_prior=False)
        batch = random_batch(config)
        batch.st_targets = None
        result = mc.train_model(mc.initialize_parameters(config), lambda step: batch,
                                mc.TrainingConfig(steps=3), progress=False)
        assert (result.log['L_ST'] == 0).all()
        assert (result.log['total'] == result.log['L_sem']).all()

    def test_numeric_failure_keeps_last_good_parameters(self, tiny_config, monkeypatch):
        real_step = pipeline.train_step

        def failing_step(params, batch, training):
            if params.step == 2:
                raise NumericError('loss component total is not finite (nan)')
            return real_step(params, batch, training)

        monkeypatch.setattr(pipeline, 'train_step', failing_step)
        batch = random_batch(tiny_config)
        result = mc.train_model(mc.initialize_parameters(tiny_config), lambda step: batch,
                                mc.TrainingConfig(steps=5), progress=False)
        assert isinstance(result.error, NumericError)
        assert result.params.step == 2
        assert list(result.log['step']) == [0, 1]

    def test_size_mismatch(self, tiny_config):
        params = mc.initialize_parameters(tiny_config)
        batch = random_batch(mc.ModelConfig(frames=2, height=8, width=8, channels=4))
        with pytest.raises(DimensionError):
            mc.batch_loss(params, batch, tiny_config)


class TestCheckpoint:
    def test_save_load_save_is_byte_identical(self, tiny_config, tmp_path):
        batch = random_batch(tiny_config)
        params = mc.train_model(mc.initialize_parameters(tiny_config), lambda step: batch,
                                mc.TrainingConfig(steps=2), progress=False).params
        mc.save_checkpoint(params, tmp_path / 'a.emoc')
        loaded = mc.load_checkpoint(tmp_path / 'a.emoc')
        mc.save_checkpoint(loaded, tmp_path / 'b.emoc')
        assert (tmp_path / 'a.emoc').read_bytes() == (tmp_path / 'b.emoc').read_bytes()
        assert loaded.config == tiny_config
        assert loaded.step == 2
        for name in params.names():
            assert_array_equal(loaded.m[name], params.m[name])
            assert_array_equal(loaded.v[name], params.v[name])

    def test_wrong_channels(self, tiny_config, tmp_path):
        mc.save_checkpoint(mc.initialize_parameters(tiny_config), tmp_path / 'a.emoc')
        with pytest.raises(ConfigMismatchError):
            mc.load_checkpoint(tmp_path / 'a.emoc', mc.ModelConfig(frames=2, height=16, width=16, channels=8))

    def test_bad_magic(self, tmp_path):
        (tmp_path / 'a.emoc').write_bytes(b'NOPE' + bytes(20))
        with pytest.raises(DataIntegrityError):
            mc.load_checkpoint(tmp_path / 'a.emoc')

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIntegrityError):
            mc.load_checkpoint(tmp_path / 'absent.emoc')

    def test_no_temporary_file_left(self, tiny_config, tmp_path):
        mc.save_checkpoint(mc.initialize_parameters(tiny_config), tmp_path / 'a.emoc')
        assert sorted(path.name for path in tmp_path.iterdir()) == ['a.emoc']


class TestInference:
    def test_scaled_sizes(self):
        assert mc.scaled_size(64, 0.75) == 48
        assert mc.scaled_size(64, 1.25) == 80
        assert mc.scaled_size(16, 0.1) == 4

    def test_negative_logits_give_empty_masks(self, tiny_config, rng):
        params = zero_params(tiny_config, decoder__head__bias=-10.0)
        clip = rng.random((2, 3, 16, 16))
        for multi_scale in (False, True):
            masks = mc.infer(clip, params, multi_scale)
            assert masks.shape == (2, 16, 16) and masks.dtype == np.uint8
            assert not masks.any()

    def test_constant_logits_agree_across_scales(self, tiny_config, rng):
        params = zero_params(tiny_config, decoder__head__bias=3.0)
        clip = rng.random((2, 3, 16, 16))
        single = mc.predict_logits(clip, params)
        multi = mc.predict_logits(clip, params, multi_scale=True)
        assert_allclose(multi, single, rtol=1e-5)
        assert_array_equal(mc.infer(clip, params, True), mc.infer(clip, params, False))

    def test_square_fixture(self, tiny_config, monkeypatch):
        logits = np.full((2, 1, 16, 16), -10.0, dtype=np.float32)
        logits[:, :, 4:9, 6:12] = 10.0

        def fixed_forward(clip, params, with_prior=True, fusion='ours'):
            return pipeline.ForwardOutput(P=Tensor(logits), p_m=None, f_rgb=None, f_m=None, f_s=None)

        monkeypatch.setattr(pipeline, 'forward', fixed_forward)
        masks = mc.infer(np.zeros((2, 3, 16, 16)), zero_params(tiny_config))
        assert_array_equal(masks, (logits[:, 0] > 0).astype(np.uint8))

    def test_uint8_frames(self, tiny_config):
        params = mc.initialize_parameters(tiny_config)
        frames = np.full((2, 3, 16, 16), 255, dtype=np.uint8)
        assert_array_equal(mc.predict_logits(frames, params), mc.predict_logits(np.ones((2, 3, 16, 16)), params))

    def test_frames_outside_unit_interval(self, tiny_config):
        with pytest.raises(DimensionError):
            mc.infer(np.full((2, 3, 16, 16), 2.0), mc.initialize_parameters(tiny_config))


class TestGradientCheck:
    def test_default_settings_pass(self):
        settings = create_default_run_config().gradcheck
        errors = gradient_check(settings, seed=0)
        assert errors.max() < 1e-5
        assert 'prior_fusion.correlation.weight' in errors.index

    def test_repeatable(self):
        settings = create_default_run_config().gradcheck
        settings.channels = 2
        settings.rank = 1
        first = gradient_check(settings, seed=4)
        second = gradient_check(settings, seed=4)
        assert first.equals(second)

    def test_corrupted_backward_rule_fails(self, monkeypatch):
        def corrupted_relu(x):
            out = np.maximum(x.data, 0)

            def backward_fn(grad):
                return [1.5 * grad * (x.data > 0)]

            return record_operation(Tensor(out), [x], backward_fn)

        monkeypatch.setattr(ops, 'relu', corrupted_relu)
        errors = gradient_check(create_default_run_config().gradcheck, seed=0)
        assert errors.max() >= 1e-5


class TestSegmenter:
    def test_construct_forward_and_topology(self, tiny_config, capsys):
        model = Segmenter(tiny_config).construct_model()
        out = model.forward(np.zeros((2, 3, 16, 16), dtype=np.float32))
        assert out.P.shape == (2, 1, 16, 16)
        assert out.p_m.shape == (2, 1, 4, 4)
        model.print_topology()
        assert 'prior_fusion' in capsys.readouterr().out

    def test_dill_round_trip(self, tiny_config, tmp_path):
        model = Segmenter(tiny_config).construct_model()
        model.save_model(str(tmp_path), 'model.pkl')
        loaded = load_segmenter_instance(str(tmp_path / 'model.pkl'))
        assert loaded.config == tiny_config
        assert_array_equal(loaded.params['decoder.head.weight'], model.params['decoder.head.weight'])

    def test_checkpoint_loader(self, tiny_config, tmp_path):
        from src.segmenter import load_checkpoint
        model = Segmenter(tiny_config).construct_model(seed=9)
        model.save_checkpoint(tmp_path / 'a.emoc')
        loaded = load_checkpoint(tmp_path / 'a.emoc')
        clip = np.random.default_rng(0).random((2, 3, 16, 16))
        assert_array_equal(loaded.infer(clip), model.infer(clip))


def test_generator_substreams_are_independent():
    first = make_generator(3, 1, 0).random(4)
    assert_array_equal(first, make_generator(3, 1, 0).random(4))
    assert not np.array_equal(first, make_generator(3, 1, 1).random(4))
    with pytest.raises(ConfigError):
        make_generator(-1)

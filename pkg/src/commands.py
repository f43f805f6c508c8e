"""
Command line interface: gen, build-sup, train, eval, infer and gradcheck.

Exit codes: 0 success, 1 usage or configuration error, 2 data integrity error, 3 numeric failure.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np
from tqdm import tqdm

import src.data_management as dm
import src.data_management.image_io as io
import src.model_construction as mc
from src.segmenter import Segmenter, gradient_check, load_checkpoint
from src.evaluation.metrics import score_frame
from src.exceptions import ConfigError, ConfigMismatchError, DataIntegrityError, EmosegError, NumericError

VERSION = '0.1.0'


class ArgumentParser(argparse.ArgumentParser):
    """
    Argument parser exiting with code 1 on usage errors.
    """
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, self.prog + ': error: ' + message + '\n')


def version_string():
    """
    ``git describe`` of the repository, the package version if git is not available.
    """
    try:
        result = subprocess.run(['git', 'describe', '--always', '--dirty', '--tags'], capture_output=True, text=True,
                                cwd=os.path.dirname(os.path.abspath(__file__)), timeout=10)
    except (OSError, subprocess.SubprocessError):
        return 'v' + VERSION
    if result.returncode != 0 or not result.stdout.strip():
        return 'v' + VERSION
    return result.stdout.strip()


def load_config(path, seed=None):
    config = dm.read_run_config(path) if path else dm.create_default_run_config()
    if seed is not None:
        config.run.seed = seed
    return config


def evaluation_settings(args):
    """
    Multi-scale switch and foreground threshold of eval and infer: ``--ms`` or ``evaluation.multi_scale`` of the
    run config, and ``evaluation.threshold``.
    """
    config = load_config(args.config)
    threshold = config.evaluation.threshold
    if not 0 < threshold <= 1:
        raise ConfigError('evaluation.threshold must lie in (0, 1], got ' + str(threshold))
    return args.ms or config.evaluation.multi_scale, threshold


def _json_ready(values):
    return {key: list(value) if isinstance(value, tuple) else value for key, value in values.items()}


def cmd_gen(args):
    """
    Generates ``count`` sequences plus split manifests; the last round(count * test_fraction) sequences form the
    test split.
    """
    config = load_config(args.config, args.seed)
    if args.count < 0:
        raise ConfigError('--count must be non-negative')
    scene = dm.SceneConfig.from_run_config(config)
    try:
        os.makedirs(args.out, exist_ok=True)
    except OSError as error:
        raise DataIntegrityError('cannot create ' + str(args.out) + ': ' + str(error))

    names = [io.sequence_name(i) for i in range(args.count)]
    with mc.timed('Generating dataset'):
        for i in tqdm(range(args.count), desc='Sequences'):
            sample = dm.generate(scene, config.run.seed, i)
            io.write_sample(os.path.join(args.out, names[i]), sample, config.data.write_event_streams)
    n_test = int(round(args.count * config.data.test_fraction))
    io.write_split(args.out, 'train', names[:args.count - n_test])
    io.write_split(args.out, 'test', names[args.count - n_test:])
    dm.write_run_config(config, os.path.join(args.out, 'config.txt'))
    print('Generated ' + str(args.count) + ' sequences (' + str(n_test) + ' test) in ' + args.out)
    return 0


def cmd_build_sup(args):
    """
    Writes one supervision map per frame under ``<out>/sup_<source>/<sequence>/``.
    """
    config = load_config(args.config)
    source = dm.resolve_source(args.source, dilation=not args.no_dilate)
    out = args.out if args.out else args.data
    interval = config.scene.frame_interval_us
    sequences = [name for split in io.SPLITS for name in io.read_split(args.data, split)]
    for sequence in tqdm(sequences, desc='Building ' + source + ' supervision'):
        directory = os.path.join(args.data, sequence)
        sample = dm.read_sample(directory, include_events=not args.from_stream, include_flow=source == 'flow')
        events = sample.events
        if args.from_stream:
            stream = io.read_stream(directory, *sample.size)
            if stream is None:
                raise DataIntegrityError('no event stream stored for ' + sequence + '; generate with '
                                         'data.write_event_streams = true or add events/stream.txt')
            events = np.stack([dm.binarize_events(stream, (i + 1) * interval, config.data.event_window_us)
                               for i in range(len(sample))])
        flow_scale = None
        if source == 'flow':
            if sample.flow is None:
                raise DataIntegrityError('supervision source flow needs flow fields in ' + sequence)
            flow_scale = float(dm.flow_magnitude(sample.flow).max())
        for i in range(len(sample)):
            values = dm.build_supervision(source, sample.masks[i], events[i],
                                          sample.flow[i] if sample.flow is not None else None, flow_scale)
            io.write_supervision_map(out, source, sequence, i, values)
    print('Supervision maps written to ' + io.supervision_dir(out, source))
    return 0


def cmd_train(args):
    """
    Trains a model and writes checkpoint.emoc, loss.csv, loss.png, config.txt and manifest.json to ``--out``.
    """
    start = time.time()
    config = load_config(args.config, args.seed)
    if args.no_prior:
        config.model.with_prior = False
    if args.sup_source:
        config.training.sup_source = args.sup_source
    if args.fusion:
        config.model.fusion = args.fusion
    if args.steps is not None:
        config.training.steps = args.steps
    model_config = mc.ModelConfig.from_run_config(config)
    training = mc.TrainingConfig.from_run_config(config)
    os.makedirs(args.out, exist_ok=True)
    dm.write_run_config(config, os.path.join(args.out, 'config.txt'))

    data = dm.DataHandle(args.data)
    data.read_sequences('train')
    data.pprint()
    for name in data.splits['train']:
        size = data.samples[name].size
        if size != (model_config.height, model_config.width):
            raise ConfigMismatchError('sequence ' + name + ' has size ' + str(size) + ' but the config expects ' +
                                      str((model_config.height, model_config.width)))
    if model_config.with_prior:
        data.read_supervision(training.sup_source)

    model = Segmenter(model_config, training).construct_model()
    model.train(data, progress=not args.quiet)

    model.save_checkpoint(os.path.join(args.out, 'checkpoint.emoc'))
    results = dm.ResultsHandle().read_loss_log(model.loss_log)
    results.write_loss_csv(os.path.join(args.out, 'loss.csv'))
    if not model.loss_log.empty:
        results.plot_loss(os.path.join(args.out, 'loss.png'))

    final = model.loss_log.iloc[-1][['L_sem', 'L_ST', 'total']].to_dict() if not model.loss_log.empty else {}
    dm.write_manifest(os.path.join(args.out, 'manifest.json'), {
        'command': 'train',
        'version': version_string(),
        'seed': config.run.seed,
        'wall_clock_s': round(time.time() - start, 3),
        'config': _json_ready(dm.config_to_dict(config)),
        'final_loss': final,
        'report': None,
        'status': 'ok' if model.error is None else 'aborted: ' + str(model.error),
    })
    if model.error is not None:
        raise NumericError(str(model.error) + '; the last finite parameters were saved to checkpoint.emoc')
    return 0


def cmd_eval(args):
    """
    Scores the test split and writes report.txt and frames.csv (results.xlsx with ``--excel``) to ``--report``.

    Only frames and masks of the test sequences are read.
    """
    multi_scale, threshold = evaluation_settings(args)
    test = io.read_split(args.data, 'test')
    if not test:
        raise DataIntegrityError('the test split of ' + str(args.data) + ' is empty')
    model = None
    if not args.oracle:
        if not args.ckpt:
            raise ConfigError('eval needs --ckpt (or --oracle)')
        model = load_checkpoint(args.ckpt)

    scores = []
    for sequence in tqdm(test, desc='Evaluating'):
        sample = dm.read_sample(os.path.join(args.data, sequence), include_events=False, include_flow=False)
        if model is None:
            predictions = sample.masks
        else:
            if sample.size != (model.config.height, model.config.width):
                raise ConfigMismatchError('checkpoint expects ' + str((model.config.height, model.config.width)) +
                                          ' frames, ' + sequence + ' has ' + str(sample.size))
            predictions = model.infer(sample.frames, multi_scale=multi_scale, threshold=threshold)
        for i in range(len(sample)):
            scores.append(score_frame(predictions[i], sample.masks[i], sequence + '/' + '%06d' % i))

    results = dm.ResultsHandle().read_scores(scores)
    results.write_evaluation(args.report, excel=args.excel)
    print(results.report.to_text(), end='')
    return 0


def cmd_infer(args):
    """
    Writes one predicted mask per input frame to ``--out``. Only frames are read.
    """
    multi_scale, threshold = evaluation_settings(args)
    model = load_checkpoint(args.ckpt)
    frames = io.read_frames(args.frames)
    if frames.shape[2:] != (model.config.height, model.config.width):
        raise ConfigMismatchError('checkpoint expects ' + str((model.config.height, model.config.width)) +
                                  ' frames, got ' + str(frames.shape[2:]))
    masks = model.infer(frames, multi_scale=multi_scale, threshold=threshold)
    os.makedirs(args.out, exist_ok=True)
    for i, mask in enumerate(masks):
        io.write_pgm(os.path.join(args.out, io.frame_name(i, 'pgm')), mask)
    print('Wrote ' + str(len(masks)) + ' masks to ' + args.out)
    return 0


def cmd_gradcheck(args):
    """
    Compares tape gradients of the float64 toy model with central finite differences.
    """
    config = load_config(args.config, args.seed)
    settings = config.gradcheck
    errors = gradient_check(settings, config.run.seed)
    worst = float(errors.max()) if not errors.empty else 0.0
    print(errors.to_string())
    print('max relative error ' + '%.3e' % worst)
    if not worst < settings.tolerance:
        raise NumericError('gradient check failed: max relative error ' + '%.3e' % worst + ' >= ' +
                           str(settings.tolerance))
    print('gradient check passed')
    return 0


def build_parser():
    parser = ArgumentParser(prog='emoseg', description='Event-prior supervised moving object segmentation')
    sub = parser.add_subparsers(dest='command', required=True, parser_class=ArgumentParser)

    gen = sub.add_parser('gen', help='generate a synthetic dataset')
    gen.add_argument('--config', type=str, default=None, help='run config file')
    gen.add_argument('--out', type=str, required=True, help='dataset root to write')
    gen.add_argument('--seed', type=int, default=None, help='run seed')
    gen.add_argument('--count', type=int, required=True, help='number of sequences')
    gen.set_defaults(func=cmd_gen)

    sup = sub.add_parser('build-sup', help='build auxiliary supervision maps')
    sup.add_argument('--data', type=str, required=True, help='dataset root')
    sup.add_argument('--source', type=str, required=True, choices=dm.SUPERVISION_SOURCES)
    sup.add_argument('--no-dilate', action='store_true', help='skip the dilation of the mask')
    sup.add_argument('--out', type=str, default=None, help='output root, the dataset root by default')
    sup.add_argument('--from-stream', action='store_true',
                     help='binarize events from the stored event stream (events/stream.emot or stream.txt)')
    sup.add_argument('--config', type=str, default=None, help='run config (frame interval, event window)')
    sup.set_defaults(func=cmd_build_sup)

    train = sub.add_parser('train', help='train a model')
    train.add_argument('--data', type=str, required=True, help='dataset root')
    train.add_argument('--config', type=str, default=None, help='run config file')
    train.add_argument('--out', type=str, required=True, help='output directory')
    train.add_argument('--no-prior', action='store_true', help='baseline without prior generation and fusion')
    train.add_argument('--sup-source', type=str, default=None, choices=dm.SUPERVISION_SOURCES)
    train.add_argument('--fusion', type=str, default=None, choices=list(mc.FUSION_VARIANTS))
    train.add_argument('--seed', type=int, default=None, help='run seed')
    train.add_argument('--steps', type=int, default=None, help='number of training steps')
    train.add_argument('--quiet', action='store_true', help='no progress bar')
    train.set_defaults(func=cmd_train)

    evaluate = sub.add_parser('eval', help='evaluate a checkpoint on the test split')
    evaluate.add_argument('--data', type=str, required=True, help='dataset root')
    evaluate.add_argument('--ckpt', type=str, default=None, help='checkpoint file')
    evaluate.add_argument('--ms', action='store_true', help='multi-scale inference')
    evaluate.add_argument('--report', type=str, required=True, help='output directory of the report')
    evaluate.add_argument('--oracle', action='store_true', help='score the ground truth masks against themselves')
    evaluate.add_argument('--excel', action='store_true', help='also write results.xlsx')
    evaluate.add_argument('--config', type=str, default=None, help='run config file (evaluation group)')
    evaluate.set_defaults(func=cmd_eval)

    infer = sub.add_parser('infer', help='predict masks from frames')
    infer.add_argument('--frames', type=str, required=True, help='directory of %%06d.ppm frames')
    infer.add_argument('--ckpt', type=str, required=True, help='checkpoint file')
    infer.add_argument('--ms', action='store_true', help='multi-scale inference')
    infer.add_argument('--out', type=str, required=True, help='output directory of the masks')
    infer.add_argument('--config', type=str, default=None, help='run config file (evaluation group)')
    infer.set_defaults(func=cmd_infer)

    check = sub.add_parser('gradcheck', help='check the gradients against finite differences')
    check.add_argument('--seed', type=int, default=None, help='seed of the check problem')
    check.add_argument('--config', type=str, default=None, help='run config file (gradcheck group)')
    check.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None):
    """
    Runs a command; returns the exit code.
    """
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EmosegError as error:
        print('error: ' + str(error), file=sys.stderr)
        return error.exit_code

import os
import time

import dill as pickle
import numpy as np

import src.data_management.image_io as io
from src.exceptions import DataIntegrityError
from src.model_construction.construct_pipeline import TrainingBatch, scaled_size
from src.model_construction.utilities import STREAM_BATCH, make_generator
from src.tensor_core import operations as ops
from src.tensor_core.tensor import Tensor


def _resize(values, height, width):
    return ops.bilinear_resize(Tensor(np.asarray(values, dtype=np.float32)), height, width).data


class DataHandle:
    """
    Data Handle for loading and serving a generated dataset.

    The constructor reads the split manifests ``train.txt`` and ``test.txt`` of a dataset root (as written by the
    ``gen`` command). Sequences are read lazily with :func:`read_sequences`; supervision maps written by
    ``build-sup`` are read with :func:`read_supervision`.
    """
    def __init__(self, root):
        """
        Constructor

        :param str root: dataset root holding ``train.txt``, ``test.txt`` and the sequence directories
        """
        self.root = str(root)
        self.splits = {split: io.read_split(self.root, split) for split in io.SPLITS}
        self.samples = {}
        self.supervision = {}

    def sequence_dir(self, sequence):
        return os.path.join(self.root, sequence)

    def read_sequences(self, split, include_events=False, include_flow=False):
        """
        Reads all sequences of a split.

        :param str split: 'train' or 'test'
        :param bool include_events: also read the binary event maps
        :param bool include_flow: also read the flow fields
        :return: self at ``self.samples[sequence]``
        """
        print('Reading in ' + split + ' data...')
        start = time.time()
        for sequence in self.splits[split]:
            self.samples[sequence] = io.read_sample(self.sequence_dir(sequence), include_events=include_events,
                                                    include_flow=include_flow)
        print('Reading in ' + split + ' data completed in ' + str(round(time.time() - start, 2)) + ' s')
        return self

    def read_supervision(self, source, split='train'):
        """
        Reads the supervision maps of a source for all sequences of a split.

        :param str source: supervision source (directory ``sup_<source>`` under the root)
        :param str split: 'train' or 'test'
        :return: self at ``self.supervision[sequence]``
        """
        for sequence in self.splits[split]:
            if sequence not in self.samples:
                self.samples[sequence] = io.read_sample(self.sequence_dir(sequence), include_events=False,
                                                        include_flow=False)
            sample = self.samples[sequence]
            self.supervision[sequence] = io.read_supervision_maps(self.root, source, sequence, len(sample),
                                                                  sample.size)
        return self

    def sample_batch(self, step, batch_size, seed, with_supervision=True, flip=False, scales=None):
        """
        Draws a training batch.

        Sequences (with replacement), flips and the scale factor come from the batch substream of (seed, step), so
        a run is reproducible independently of the order in which batches are requested.

        With ``scales`` one factor is drawn per batch; frames and supervision maps are resized bilinearly to
        :func:`~src.model_construction.construct_pipeline.scaled_size` and masks are resized and thresholded at 0.5.

        :param int step: training step
        :param int batch_size: number of clips
        :param int seed: run seed
        :param bool with_supervision: include the supervision maps (read with :func:`read_supervision`)
        :param bool flip: flip clips horizontally with probability 0.5
        :param tuple scales: scale factors of multi-scale training, None for the stored size
        :return: TrainingBatch
        """
        names = self.splits['train']
        if not names:
            raise DataIntegrityError('the train split of ' + self.root + ' is empty')
        missing = [name for name in names if name not in self.samples or
                   (with_supervision and name not in self.supervision)]
        if missing:
            raise DataIntegrityError('sequence ' + missing[0] + ' has not been read')
        generator = make_generator(seed, STREAM_BATCH, step)
        picks = generator.integers(0, len(names), size=batch_size)
        flips = generator.random(batch_size) < 0.5
        clips, masks, targets = [], [], []
        for pick, flipped in zip(picks, flips):
            sample = self.samples[names[pick]]
            clip, mask = sample.frames, sample.masks
            target = self.supervision[names[pick]] if with_supervision else None
            if flip and flipped:
                clip, mask = clip[..., ::-1], mask[..., ::-1]
                target = target[..., ::-1] if target is not None else None
            clips.append(clip)
            masks.append(mask)
            targets.append(target)
        shapes = {clip.shape for clip in clips}
        if len(shapes) > 1:
            raise DataIntegrityError('training sequences differ in length or size: ' + str(sorted(shapes)))
        clips, masks = np.stack(clips), np.stack(masks)
        targets = np.stack(targets) if with_supervision else None
        if scales:
            # Drawn after the flips so that a batch without scaling keeps its picks and flips
            factor = scales[generator.integers(0, len(scales))]
            height, width = scaled_size(clips.shape[-2], factor), scaled_size(clips.shape[-1], factor)
            if (height, width) != clips.shape[-2:]:
                clips = np.clip(_resize(clips, height, width), 0, 1)
                masks = (_resize(masks, height, width) >= 0.5).astype(np.uint8)
                targets = np.clip(_resize(targets, height, width), 0, 1) if targets is not None else None
        return TrainingBatch(clips, masks, targets)

    def statistics(self, split):
        """
        Per sequence fraction of moving pixels (and of event pixels, if events were read).

        :return: dict with arrays 'moving' and 'events' (None without events)
        """
        samples = [self.samples[name] for name in self.splits[split] if name in self.samples]
        moving = np.array([sample.masks.mean() for sample in samples])
        with_events = [sample for sample in samples if sample.events is not None]
        events = np.array([sample.events.mean() for sample in with_events]) if with_events else None
        return {'sequences': len(self.splits[split]), 'frames': int(sum(len(s) for s in samples)),
                'moving': moving, 'events': events}

    def pprint(self):
        """
        Prints a summary of the data read so far

        :return: None
        """
        for split in io.SPLITS:
            stats = self.statistics(split)
            print('----- SPLIT ' + split + ' -----')
            print('\t sequences: ' + str(stats['sequences']) + ', frames read: ' + str(stats['frames']))
            print('\t\t' + f"{'':<15}{'Mean':>10}{'Min':>10}{'Max':>10}")
            for name in ('moving', 'events'):
                values = stats[name]
                if values is None or values.size == 0:
                    continue
                print('\t\t' + f"{name:<15}"
                               f"{str(round(values.mean(), 4)):>10}"
                               f"{str(round(values.min(), 4)):>10}"
                               f"{str(round(values.max(), 4)):>10}")

    def save(self, path):
        """
        Saves instance of DataHandle to path.

        The instance can later be loaded with :func:`load_data_handle`

        :param str path: path to save to
        :return: None
        """
        with open(path, 'wb') as handle:
            pickle.dump(self, handle, protocol=pickle.HIGHEST_PROTOCOL)


def load_data_handle(path):
    """
    Loads instance of DataHandle from path.

    :param str path: path to load from
    :return: instance of :class:`~DataHandle`
    """
    with open(path, 'rb') as handle:
        data = pickle.load(handle)

    return data

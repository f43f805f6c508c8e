r"""
Video object segmentation metrics: region similarity J, contour accuracy F, their means and recalls and J&F.

.. math::
    J = \frac{|P \cap G|}{|P \cup G|}, \quad F = \frac{2 \cdot precision \cdot recall}{precision + recall}

Boundary precision and recall are measured with a tolerance of :math:`\lceil 0.008 \sqrt{H^2 + W^2} \rceil`
pixels (Euclidean).
"""
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from src.exceptions import DataIntegrityError, DimensionError, NumericError

BOUNDARY_TOLERANCE = 0.008
RECALL_THRESHOLD = 0.5

REPORT_KEYS = ('J_mean', 'J_recall', 'F_mean', 'F_recall', 'JandF')

_FOUR_NEIGHBORS = ndimage.generate_binary_structure(2, 1)


@dataclass
class FrameScore:
    j: float
    f: float
    frame_id: str = ''

    def __post_init__(self):
        if not (0.0 <= self.j <= 1.0 and 0.0 <= self.f <= 1.0):
            raise NumericError('frame scores must lie in [0, 1], got j=' + str(self.j) + ', f=' + str(self.f))


@dataclass
class Report:
    """
    Aggregate scores in percent.
    """
    j_mean: float
    j_recall: float
    f_mean: float
    f_recall: float
    j_and_f: float

    def to_dict(self):
        return dict(zip(REPORT_KEYS, (self.j_mean, self.j_recall, self.f_mean, self.f_recall, self.j_and_f)))

    def to_text(self):
        """
        Plain text report, one ``key value`` line per score with one decimal.
        """
        return ''.join(key + ' ' + f'{value:.1f}' + '\n' for key, value in self.to_dict().items())


def _binary_pair(pred, gt):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape or pred.ndim != 2:
        raise DimensionError('masks differ in size: ' + str(pred.shape) + ' vs ' + str(gt.shape))
    return pred.astype(bool), gt.astype(bool)


def jaccard(pred, gt):
    """
    Region similarity: intersection over union of two binary masks, 1 if both are empty.

    :param pred: predicted mask [H, W]
    :param gt: ground truth mask [H, W]
    :return: float in [0, 1]
    """
    pred, gt = _binary_pair(pred, gt)
    union = np.count_nonzero(pred | gt)
    if union == 0:
        return 1.0
    return np.count_nonzero(pred & gt) / union


def boundary_map(mask):
    """
    Boundary pixels of a binary mask: foreground pixels with a 4-neighbor in the background or on the image edge.
    """
    mask = np.asarray(mask).astype(bool)
    interior = ndimage.binary_erosion(mask, structure=_FOUR_NEIGHBORS, border_value=0)
    return mask & ~interior


def tolerance_radius(height, width):
    return int(np.ceil(BOUNDARY_TOLERANCE * np.sqrt(height ** 2 + width ** 2)))


def disc(radius):
    """
    Euclidean disc structuring element of the given radius, shape [2r+1, 2r+1].
    """
    y, x = np.mgrid[-radius:radius + 1, -radius:radius + 1]
    return x ** 2 + y ** 2 <= radius ** 2


def boundary_f(pred, gt):
    """
    Contour accuracy: F-measure of boundary precision and recall.

    A predicted boundary pixel is correct if a ground truth boundary pixel lies within the tolerance radius (and vice
    versa for recall). Both boundaries empty gives 1, precision + recall = 0 gives 0.

    :param pred: predicted mask [H, W]
    :param gt: ground truth mask [H, W]
    :return: float in [0, 1]
    """
    pred, gt = _binary_pair(pred, gt)
    pred_boundary = boundary_map(pred)
    gt_boundary = boundary_map(gt)
    pred_count = np.count_nonzero(pred_boundary)
    gt_count = np.count_nonzero(gt_boundary)
    if pred_count == 0 and gt_count == 0:
        return 1.0
    if pred_count == 0 or gt_count == 0:
        return 0.0

    structure = disc(tolerance_radius(*pred.shape))
    gt_zone = ndimage.binary_dilation(gt_boundary, structure=structure)
    pred_zone = ndimage.binary_dilation(pred_boundary, structure=structure)
    precision = np.count_nonzero(pred_boundary & gt_zone) / pred_count
    recall = np.count_nonzero(gt_boundary & pred_zone) / gt_count
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def score_frame(pred, gt, frame_id=''):
    return FrameScore(jaccard(pred, gt), boundary_f(pred, gt), frame_id)


def combine_j_and_f(j_mean, f_mean):
    """
    Overall score J&F, the mean of J mean and F mean.
    """
    return (j_mean + f_mean) / 2


def aggregate(scores):
    """
    Aggregates per frame scores to a Report (percent).

    Means are scaled by 100; recalls are 100 times the fraction of frames with a score strictly above 0.5.

    :param list scores: FrameScore per frame (non-empty)
    :return: Report
    """
    if len(scores) == 0:
        raise DataIntegrityError('cannot aggregate an empty list of frame scores')
    j = np.array([score.j for score in scores], dtype=np.float64)
    f = np.array([score.f for score in scores], dtype=np.float64)
    j_mean = 100 * float(np.mean(j))
    f_mean = 100 * float(np.mean(f))
    return Report(j_mean=j_mean,
                  j_recall=100 * float(np.mean(j > RECALL_THRESHOLD)),
                  f_mean=f_mean,
                  f_recall=100 * float(np.mean(f > RECALL_THRESHOLD)),
                  j_and_f=combine_j_and_f(j_mean, f_mean))

import json
import os

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import pandas as pd

from src.evaluation.metrics import REPORT_KEYS, aggregate


class ResultsHandle:
    """
    Class to handle training and evaluation results
    """
    def __init__(self):
        self.frames = pd.DataFrame(columns=['frame_id', 'J', 'F'])
        self.report = None
        self.summary = pd.DataFrame(columns=list(REPORT_KEYS))
        self.loss_log = pd.DataFrame(columns=['step', 'lr', 'L_sem', 'L_ST', 'total'])

    def read_scores(self, scores):
        """
        Reads per frame scores and aggregates them to a report

        :param list scores: FrameScore per evaluated frame
        :return: self
        """
        self.frames = pd.DataFrame({'frame_id': [score.frame_id for score in scores],
                                    'J': [score.j for score in scores],
                                    'F': [score.f for score in scores]})
        self.report = aggregate(scores)
        self.summary = pd.DataFrame([self.report.to_dict()], columns=list(REPORT_KEYS))
        return self

    def read_loss_log(self, log):
        """
        Reads the loss log of a training run (columns step, lr, L_sem, L_ST, total)
        """
        self.loss_log = log.copy()
        return self

    def write_report(self, path):
        """
        Writes the aggregate report as ``key value`` lines with one decimal
        """
        with open(path, mode='w') as file:
            file.write(self.report.to_text())

    def write_frames_csv(self, path):
        self.frames.to_csv(path, index=False, float_format='%.6f')

    def write_loss_csv(self, path):
        self.loss_log.to_csv(path, index=False, float_format='%.8e')

    def write_excel(self, path):
        """
        Writes results to excel table

        :param str path: path to write excel to (without extension)
        """
        file_name = path + '.xlsx'

        with pd.ExcelWriter(file_name) as writer:
            self.summary.to_excel(writer, sheet_name='Report', index=False)
            self.frames.to_excel(writer, sheet_name='Frames', index=False)
            if not self.loss_log.empty:
                self.loss_log.to_excel(writer, sheet_name='Loss', index=False)

    def write_evaluation(self, directory, excel=False):
        """
        Writes ``report.txt`` and ``frames.csv`` (and ``results.xlsx`` if requested) to a directory.

        The workbook carries a save timestamp; the text files are byte-identical across runs.
        """
        os.makedirs(directory, exist_ok=True)
        self.write_report(os.path.join(directory, 'report.txt'))
        self.write_frames_csv(os.path.join(directory, 'frames.csv'))
        if excel:
            self.write_excel(os.path.join(directory, 'results'))

    def plot_loss(self, path):
        """
        Plots the loss components over the training steps to an image file
        """
        figure, axis = plt.subplots(figsize=(6, 4))
        for column in ('L_sem', 'L_ST', 'total'):
            axis.plot(self.loss_log['step'], self.loss_log[column], label=column)
        axis.set_xlabel('step')
        axis.set_ylabel('loss')
        axis.legend()
        figure.tight_layout()
        figure.savefig(path, metadata={'Software': None})
        plt.close(figure)


def write_manifest(path, manifest):
    """
    Writes a run manifest as JSON; the file is written to ``path + '.tmp'`` and then renamed.

    :param str path: target file
    :param dict manifest: JSON serializable content
    """
    tmp_path = str(path) + '.tmp'
    with open(tmp_path, mode='w') as file:
        json.dump(manifest, file, indent=2, sort_keys=True)
        file.write('\n')
    os.replace(tmp_path, path)

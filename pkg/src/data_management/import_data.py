import numpy as np
import pandas as pd

from src.data_management.supervision import EventStream
from src.exceptions import DataIntegrityError
from src.tensor_core.serialization import read_tensor

EVENT_COLUMNS = ['t', 'x', 'y', 'p']


def import_event_stream(path, height, width):
    """
    Reads an event stream from file.

    Two formats are understood: an EMOT tensor (float64 [N, 4], as written by ``gen`` with
    ``data.write_event_streams``) and a text file with one ``t x y p`` record per line (separated by whitespace or
    commas, lines starting with ``#`` are skipped). Polarity 0 in text files is read as -1. Events are sorted by
    timestamp (stable, so equal timestamps keep their file order).

    :param str path: path to the ``.emot`` or text file
    :param int height: sensor height
    :param int width: sensor width
    :return: EventStream
    """
    if str(path).endswith('.emot'):
        return EventStream.from_array(read_tensor(path), height, width)

    try:
        table = pd.read_csv(path, sep=r'[\s,]+', comment='#', header=None, names=EVENT_COLUMNS, engine='python')
    except FileNotFoundError:
        raise DataIntegrityError('event file ' + str(path) + ' does not exist')
    except pd.errors.EmptyDataError:
        return EventStream.empty(height, width)
    if table.isnull().values.any():
        raise DataIntegrityError('event file ' + str(path) + ' has incomplete records')
    table['p'] = np.where(table['p'] > 0, 1, -1)
    table = table.sort_values('t', kind='stable')
    return EventStream(height, width, table['t'].to_numpy(), table['x'].to_numpy(), table['y'].to_numpy(),
                       table['p'].to_numpy())

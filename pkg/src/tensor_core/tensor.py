import numpy as np

from src.exceptions import DimensionError, NumericError, TapeError

DTYPES = {'float32': np.float32, 'float64': np.float64, 'uint8': np.uint8}

# Tapes entered with ``with GradTape() as tape:``; operations record on the innermost one.
_active_tapes = []


class Tensor:
    """
    Dense row-major array with optional gradient tracking.

    The values are held in a contiguous numpy array of dtype float32, float64 or uint8. A tensor created by
    :meth:`GradTape.watch` (or produced by an operation on such a tensor while the tape is active) is tracked,
    i.e. its gradient is computed by :meth:`GradTape.backward`.

    :param data: array-like holding the values
    :param bool requires_grad: whether the tensor is tracked
    :param str name: optional parameter path (only used for watched leaves)
    """
    def __init__(self, data, requires_grad=False, name=None):
        data = np.asarray(data)
        if not data.flags.c_contiguous:
            data = np.ascontiguousarray(data)
        if data.dtype.name not in DTYPES:
            raise DimensionError('Unsupported tensor dtype ' + data.dtype.name)
        self.data = data
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype.name

    def item(self):
        if self.data.size != 1:
            raise DimensionError('item() needs a single element tensor, got shape ' + str(self.shape))
        return self.data.reshape(-1)[0].item()

    def numpy(self):
        return self.data

    def __repr__(self):
        return 'Tensor(shape=' + str(list(self.shape)) + ', dtype=' + self.dtype + \
               (', name=' + self.name if self.name else '') + ')'


class GradTape:
    """
    Ordered record of the operations applied to tracked tensors.

    Usage::

        with GradTape() as tape:
            params = {name: tape.watch(value, name) for name, value in arrays.items()}
            loss = f(params)
        gradients = tape.backward(loss)

    A tape can be run backward once; a new forward pass needs a new tape.
    """
    def __init__(self):
        self.records = []
        self.watched = {}
        self._consumed = False

    def __enter__(self):
        _active_tapes.append(self)
        return self

    def __exit__(self, exc_type, exc_value, tb):
        _active_tapes.remove(self)

    def watch(self, value, name):
        """
        Creates a tracked leaf tensor (a parameter) on this tape.

        :param value: numpy array or Tensor
        :param str name: unique parameter path
        :return: tracked Tensor
        """
        if name in self.watched:
            raise DimensionError('Parameter ' + name + ' is watched twice')
        data = value.data if isinstance(value, Tensor) else value
        tensor = Tensor(np.array(data, copy=True), requires_grad=True, name=name)
        self.watched[name] = tensor
        return tensor

    def record(self, output, inputs, backward_fn):
        output.requires_grad = True
        self.records.append((output, inputs, backward_fn))

    def backward(self, loss):
        """
        Propagates the gradient of a scalar loss back through all recorded operations.

        :param Tensor loss: single element tensor produced by a tracked forward pass
        :return: dict mapping every watched parameter name to its gradient (same shape as the parameter)
        """
        if self._consumed:
            raise TapeError('backward was already run on this tape; run a new forward pass first')
        if loss.data.size != 1:
            raise DimensionError('backward needs a scalar loss, got shape ' + str(loss.shape))
        self._consumed = True

        loss.grad = np.ones_like(loss.data)
        for output, inputs, backward_fn in reversed(self.records):
            if output.grad is None:
                continue
            input_grads = backward_fn(output.grad)
            for tensor, grad in zip(inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.grad is None:
                    tensor.grad = grad
                else:
                    tensor.grad = tensor.grad + grad

        gradients = {}
        for name, tensor in self.watched.items():
            if tensor.grad is None:
                gradients[name] = np.zeros_like(tensor.data)
            else:
                gradients[name] = np.ascontiguousarray(tensor.grad, dtype=tensor.data.dtype)
        return gradients


def backward(loss, tape):
    """
    Gradients of ``loss`` for all parameters watched on ``tape``. See :meth:`GradTape.backward`.
    """
    return tape.backward(loss)


def record_operation(output, inputs, backward_fn):
    """
    Records an operation on the innermost active tape if any of its inputs is tracked.

    :param Tensor output: result of the operation
    :param list inputs: input tensors, in the order ``backward_fn`` returns their gradients
    :param backward_fn: maps the gradient of ``output`` to a list of input gradients (None for untracked inputs)
    :return: output
    """
    if _active_tapes and any(tensor.requires_grad for tensor in inputs):
        _active_tapes[-1].record(output, inputs, backward_fn)
    return output


def checked(values, op_name):
    """
    Raises :class:`NumericError` if a floating point result holds NaN or Inf values.
    """
    if values.dtype.kind == 'f' and not np.all(np.isfinite(values)):
        raise NumericError(op_name + ' produced non-finite values')
    return values


def as_tensor(value, dtype=None):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=dtype))

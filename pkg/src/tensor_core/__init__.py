from .tensor import Tensor, GradTape, backward
from .operations import *
from .gradient_check import finite_diff_check, finite_diff_errors
from .serialization import encode_tensor, decode_tensor, write_tensor, read_tensor

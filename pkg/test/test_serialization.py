import struct

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from src.exceptions import DataIntegrityError
from src.tensor_core.serialization import decode_tensor, encode_tensor, read_tensor, write_tensor
from src.tensor_core.tensor import Tensor


class TestEmotFormat:
    def test_byte_layout(self):
        encoded = encode_tensor(np.array([[1, 2, 3]], dtype=np.uint8))
        expected = b'EMOT' + struct.pack('<BBI', 1, 2, 2) + struct.pack('<QQ', 1, 3) + bytes([1, 2, 3])
        assert encoded == expected

    def test_float_payload_is_little_endian(self):
        encoded = encode_tensor(np.array([1.5], dtype='>f8'))
        assert encoded[-8:] == struct.pack('<d', 1.5)

    @pytest.mark.parametrize('dtype', ['float32', 'float64', 'uint8'])
    def test_values_and_dtype_survive(self, rng, dtype):
        values = (rng.random((2, 3, 4)) * 200).astype(dtype)
        decoded, end = decode_tensor(encode_tensor(values))
        assert decoded.dtype == values.dtype
        assert end == len(encode_tensor(values))
        assert_array_equal(decoded, values)

    def test_scalar_and_empty(self):
        scalar, _ = decode_tensor(encode_tensor(np.array(2.5)))
        assert scalar.shape == () and scalar == 2.5
        empty, _ = decode_tensor(encode_tensor(np.zeros((0, 4))))
        assert empty.shape == (0, 4)

    def test_tensor_input(self):
        assert encode_tensor(Tensor(np.ones(3))) == encode_tensor(np.ones(3))

    def test_offset_reads_consecutive_tensors(self):
        buffer = encode_tensor(np.arange(3, dtype=np.float32)) + encode_tensor(np.ones((2, 2)))
        first, offset = decode_tensor(buffer)
        second, end = decode_tensor(buffer, offset)
        assert_array_equal(first, [0, 1, 2])
        assert second.shape == (2, 2) and end == len(buffer)

    def test_unsupported_dtype(self):
        with pytest.raises(DataIntegrityError):
            encode_tensor(np.zeros(2, dtype=np.int32))

    def test_bad_magic(self):
        with pytest.raises(DataIntegrityError, match='magic'):
            decode_tensor(b'XXXX' + encode_tensor(np.ones(2))[4:])

    def test_bad_version(self):
        encoded = bytearray(encode_tensor(np.ones(2)))
        encoded[4] = 9
        with pytest.raises(DataIntegrityError, match='version'):
            decode_tensor(bytes(encoded))

    def test_truncated_payload(self):
        with pytest.raises(DataIntegrityError, match='truncated'):
            decode_tensor(encode_tensor(np.ones(4))[:-3])

    def test_file_round_trip(self, tmp_path):
        values = np.linspace(0, 1, 12, dtype=np.float32).reshape(3, 4)
        write_tensor(tmp_path / 'x.emot', values)
        assert_array_equal(read_tensor(tmp_path / 'x.emot'), values)

    def test_trailing_bytes(self, tmp_path):
        with open(tmp_path / 'x.emot', mode='wb') as file:
            file.write(encode_tensor(np.ones(2)) + b'\x00')
        with pytest.raises(DataIntegrityError, match='trailing'):
            read_tensor(tmp_path / 'x.emot')

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIntegrityError, match='missing'):
            read_tensor(tmp_path / 'absent.emot')

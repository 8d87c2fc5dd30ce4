from dataclasses import replace

import numpy as np
import pytest

from cmr.algebra import FieldSpec
from cmr.errors import MissingDataError, ParameterError, PayloadFormatError
from cmr.files import (
    HEADER_SIZE,
    CodeKind,
    NodeFileManager,
    PayloadHeader,
    SecretHeader,
    bytes_to_symbols,
    pack_elements,
    symbols_to_bytes,
    unpack_elements,
)


@pytest.fixture
def header():
    return PayloadHeader(CodeKind.ZIGZAG, FieldSpec.binary(8), 6, 3, 0, 0, 2, 42, 27, 1, 9)


@pytest.fixture
def share_header():
    secret = SecretHeader("mbmr-bivariate", 3, 1, 1, 2, (1,))
    return PayloadHeader(CodeKind.SECRET, FieldSpec.prime(5), 4, 2, 2, 1, 0, 7, 1, 4, 4, secret=secret)


def test_header_pack_unpack(header, share_header):
    data = header.pack()
    assert data[:4] == b"CMR1"
    assert len(data) == HEADER_SIZE
    assert PayloadHeader.unpack(data) == (header, HEADER_SIZE)
    parsed, offset = PayloadHeader.unpack(share_header.pack() + b"\x00")
    assert parsed == share_header
    assert offset == len(share_header.pack())


def test_bad_magic(header):
    data = b"XXXX" + header.pack()[4:]
    with pytest.raises(PayloadFormatError, match="magic"):
        PayloadHeader.unpack(data)


def test_truncated_headers(header, share_header):
    with pytest.raises(PayloadFormatError, match="truncated"):
        PayloadHeader.unpack(header.pack()[:10])
    with pytest.raises(PayloadFormatError, match="truncated"):
        PayloadHeader.unpack(share_header.pack()[:-1])


def test_unknown_code_kind(header):
    data = bytearray(header.pack())
    data[4] = 9
    with pytest.raises(PayloadFormatError):
        PayloadHeader.unpack(bytes(data))


def test_secret_header_required():
    header = PayloadHeader(CodeKind.SECRET, FieldSpec.prime(5), 4, 2, 2, 1, 0, 7, 1, 4, 4)
    with pytest.raises(ParameterError):
        header.pack()


def test_same_code_ignores_index(header):
    assert header.same_code(replace(header, index=5))
    assert not header.same_code(replace(header, seed=1))


def test_element_packing_widths():
    gf16 = FieldSpec.binary(16)
    values = gf16.array([0, 1, 0x1234, 0xFFFF])
    data = pack_elements(values, gf16)
    assert data == bytes([0, 0, 1, 0, 0x34, 0x12, 0xFF, 0xFF])
    assert np.array_equal(unpack_elements(data, gf16), values)


def test_unpack_rejects_out_of_field_values():
    gf13 = FieldSpec.prime(13)
    with pytest.raises(PayloadFormatError, match="outside"):
        unpack_elements(bytes([3, 13]), gf13)
    with pytest.raises(PayloadFormatError, match="multiple"):
        unpack_elements(bytes([1, 2, 3]), FieldSpec.binary(16))


@pytest.mark.parametrize("spec", [FieldSpec.binary(8), FieldSpec.prime(13), FieldSpec.prime(257), FieldSpec.binary(16)])
def test_symbol_packing(spec):
    data = bytes(range(37))
    symbols = bytes_to_symbols(data, spec, 5)
    assert symbols.shape[1] == 5
    assert symbols.max() < 2**spec.data_bits
    assert symbols_to_bytes(symbols, spec, len(data)) == data


def test_symbol_packing_pads_to_whole_stripes():
    gf13 = FieldSpec.prime(13)
    # 8 bits at 3 bits per symbol fill 3 symbols; one stripe of 4
    symbols = bytes_to_symbols(b"\xff", gf13, 4)
    assert symbols.tolist() == [[7, 7, 6, 0]]
    assert bytes_to_symbols(b"", gf13, 4).shape == (1, 4)


def test_symbols_to_bytes_rejects_short_input():
    with pytest.raises(PayloadFormatError):
        symbols_to_bytes(np.zeros(2, dtype=int), FieldSpec.binary(8), 3)


def test_manager_round_trip(tmp_path, header):
    manager = NodeFileManager(tmp_path)
    payload = header.field.array(np.arange(9).reshape(1, 9))
    path = manager.write(header, payload)
    assert path.name == "node_2.cmr"
    parsed, read_back = manager.read(path)
    assert parsed == header
    assert np.array_equal(read_back, payload)
    assert manager.discover() == "node"
    assert list(manager.read_all()) == [2]


def test_manager_rejects_bad_shapes_and_mixed_codes(tmp_path, header):
    manager = NodeFileManager(tmp_path)
    with pytest.raises(ParameterError):
        manager.write(header, header.field.array(np.zeros((2, 9), dtype=int)))
    payload = header.field.array(np.zeros((1, 9), dtype=int))
    manager.write(header, payload)
    manager.write(replace(header, index=3, seed=1), payload)
    with pytest.raises(PayloadFormatError, match="different code"):
        manager.read_all()


def test_manager_truncated_payload(tmp_path, header):
    manager = NodeFileManager(tmp_path)
    path = manager.write(header, header.field.array(np.zeros((1, 9), dtype=int)))
    path.write_bytes(path.read_bytes()[:-1])
    with pytest.raises(PayloadFormatError):
        manager.read(path)


def test_manager_missing_files(tmp_path):
    manager = NodeFileManager(tmp_path)
    with pytest.raises(MissingDataError):
        manager.discover()
    with pytest.raises(MissingDataError):
        manager.read(tmp_path / "node_0.cmr")


def test_manager_default_directory(config_dir):
    assert NodeFileManager().base_path.name == "cmr-out"

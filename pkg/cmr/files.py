import os
import struct
import tempfile
from enum import IntEnum
from pathlib import Path
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import galois
import numpy as np

from cmr.log import Log
from cmr.config import Config
from cmr.algebra import FieldKind, FieldSpec, plain
from cmr.errors import MissingDataError, ParameterError, PayloadFormatError

MAGIC = b"CMR1"
# magic, code kind, field kind, modulus, order, n, k, d, t, index, seed, length, stripes, alpha
HEADER_FORMAT = "<4sBBQQHHHHHQQII"
SECRET_FORMAT = "<BHHHIB"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)
SECRET_SIZE = struct.calcsize(SECRET_FORMAT)

FIELD_KIND_BYTES = {FieldKind.PRIME: 1, FieldKind.BINARY: 2}
SCHEME_KIND_BYTES = {"msmr-zigzag": 1, "mbmr-bivariate": 2}


class CodeKind(IntEnum):
    ZIGZAG = 1
    MBCR = 2
    RLNC = 3
    SECRET = 4


@dataclass(frozen=True)
class SecretHeader:
    kind: str
    N: int
    z: int
    t: int
    secret_size: int
    punctured: Tuple[int, ...]


@dataclass(frozen=True)
class PayloadHeader:
    """
    Everything needed to rebuild the code a payload belongs to

    For secret shares n, k, d, t describe the base code and index is the
    share index.
    """

    code_kind: CodeKind
    field: FieldSpec
    n: int
    k: int
    d: int
    t: int
    index: int
    seed: int
    length: int
    stripes: int
    alpha: int
    secret: Optional[SecretHeader] = None

    def pack(self) -> bytes:
        data = struct.pack(
            HEADER_FORMAT,
            MAGIC,
            int(self.code_kind),
            FIELD_KIND_BYTES[self.field.kind],
            self.field.modulus,
            self.field.order,
            self.n,
            self.k,
            self.d,
            self.t,
            self.index,
            self.seed,
            self.length,
            self.stripes,
            self.alpha,
        )
        if self.code_kind is CodeKind.SECRET:
            if self.secret is None:
                raise ParameterError("secret share headers need the scheme extension")
            s = self.secret
            data += struct.pack(
                SECRET_FORMAT, SCHEME_KIND_BYTES[s.kind], s.N, s.z, s.t, s.secret_size, len(s.punctured)
            )
            data += struct.pack(f"<{len(s.punctured)}H", *s.punctured)
        return data

    @classmethod
    def unpack(cls, data: bytes) -> Tuple["PayloadHeader", int]:
        """(header, payload offset)"""
        if len(data) < HEADER_SIZE:
            raise PayloadFormatError(f"truncated header: {len(data)} of {HEADER_SIZE} bytes")
        fields = struct.unpack_from(HEADER_FORMAT, data)
        magic, code_kind, field_kind, modulus, order = fields[:5]
        if magic != MAGIC:
            raise PayloadFormatError(f"bad magic {magic!r}")
        try:
            code_kind = CodeKind(code_kind)
            kind = {byte: kind for kind, byte in FIELD_KIND_BYTES.items()}[field_kind]
            field = FieldSpec(kind, modulus, order)
        except (ValueError, KeyError) as e:
            raise PayloadFormatError(f"unreadable code or field description: {e}") from e
        offset = HEADER_SIZE
        secret = None
        if code_kind is CodeKind.SECRET:
            if len(data) < offset + SECRET_SIZE:
                raise PayloadFormatError("truncated secret scheme header")
            kind_byte, N, z, t, secret_size, count = struct.unpack_from(SECRET_FORMAT, data, offset)
            offset += SECRET_SIZE
            if len(data) < offset + 2 * count:
                raise PayloadFormatError("truncated punctured node list")
            punctured = struct.unpack_from(f"<{count}H", data, offset)
            offset += 2 * count
            scheme_kind = {byte: name for name, byte in SCHEME_KIND_BYTES.items()}.get(kind_byte)
            if scheme_kind is None:
                raise PayloadFormatError(f"unknown secret scheme byte {kind_byte}")
            secret = SecretHeader(scheme_kind, N, z, t, secret_size, tuple(punctured))
        header = cls(code_kind, field, *fields[5:], secret=secret)
        return header, offset

    def same_code(self, other: "PayloadHeader") -> bool:
        return (
            self.code_kind,
            self.field,
            self.n,
            self.k,
            self.d,
            self.t,
            self.seed,
            self.length,
            self.stripes,
            self.alpha,
            self.secret,
        ) == (
            other.code_kind,
            other.field,
            other.n,
            other.k,
            other.d,
            other.t,
            other.seed,
            other.length,
            other.stripes,
            other.alpha,
            other.secret,
        )


def pack_elements(values: galois.FieldArray, field: FieldSpec) -> bytes:
    """Little-endian, field.width bytes per element"""
    raw = np.ascontiguousarray(plain(values).reshape(-1).astype("<u8"))
    return raw.view(np.uint8).reshape(-1, 8)[:, : field.width].tobytes()


def unpack_elements(data: bytes, field: FieldSpec) -> galois.FieldArray:
    width = field.width
    if len(data) % width:
        raise PayloadFormatError(f"{len(data)} payload bytes is not a multiple of the element width {width}")
    raw = np.frombuffer(data, dtype=np.uint8).reshape(-1, width)
    padded = np.zeros((raw.shape[0], 8), dtype=np.uint8)
    padded[:, :width] = raw
    values = padded.view("<u8").reshape(-1)
    if np.any(values >= field.order):
        raise PayloadFormatError(f"payload holds values outside {field.label}")
    return field.gf(values.astype(np.int64))


def bytes_to_symbols(data: bytes, field: FieldSpec, stripe_size: int) -> np.ndarray:
    """
    Packs data into field.data_bits-bit symbols, zero padded to whole stripes

    Returns:
        ndarray: stripes × stripe_size symbol values, at least one stripe
    """
    bits_per_symbol = field.data_bits
    if bits_per_symbol < 1:
        raise ParameterError(f"{field.label} cannot carry data bits")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    count = -(-bits.size // bits_per_symbol)
    stripes = max(1, -(-count // stripe_size))
    padded = np.zeros(stripes * stripe_size * bits_per_symbol, dtype=np.int64)
    padded[: bits.size] = bits
    weights = 1 << np.arange(bits_per_symbol - 1, -1, -1, dtype=np.int64)
    return (padded.reshape(-1, bits_per_symbol) @ weights).reshape(stripes, stripe_size)


def symbols_to_bytes(symbols, field: FieldSpec, length: int) -> bytes:
    bits_per_symbol = field.data_bits
    values = np.asarray(plain(symbols) if isinstance(symbols, galois.FieldArray) else symbols, dtype=np.int64)
    if np.any(values >> bits_per_symbol):
        raise PayloadFormatError(f"symbols exceed {bits_per_symbol} data bits; not produced by this packer")
    shifts = np.arange(bits_per_symbol - 1, -1, -1, dtype=np.int64)
    bits = ((values.reshape(-1, 1) >> shifts) & 1).astype(np.uint8).reshape(-1)
    if bits.size < 8 * length:
        raise PayloadFormatError(f"{bits.size // 8} bytes of symbols for a {length}-byte input")
    return np.packbits(bits[: 8 * length]).tobytes()


def write_atomic(target: Path, data: bytes) -> Path:
    """Writes through a temp file in the target directory and renames it into place"""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(dir=target.parent, prefix=f".{target.name}.", delete=False) as f:
        f.write(data)
        temp_name = f.name
    os.replace(temp_name, target)
    return target


class NodeFileManager:
    def __init__(self, base_path=None):
        self.logger = Log()
        if base_path:
            self.base_path = Path(base_path)
        else:
            self.base_path = Path(Config().get("CMR_OUTPUT_DIR"))

    def path(self, index: int, prefix: str = "node") -> Path:
        return self.base_path / f"{prefix}_{index}.cmr"

    @staticmethod
    def prefix_for(header: PayloadHeader) -> str:
        return "share" if header.code_kind is CodeKind.SECRET else "node"

    def write(self, header: PayloadHeader, payload: galois.FieldArray) -> Path:
        """Writes header and stripes × alpha payload through a temp file and rename"""
        if payload.shape != (header.stripes, header.alpha):
            raise ParameterError(f"payload shape {payload.shape} does not match the header")
        target = self.path(header.index, self.prefix_for(header))
        data = header.pack() + pack_elements(payload, header.field)
        write_atomic(target, data)
        self.logger.debug(f"wrote {target.name} ({len(data)} bytes)")
        return target

    def read(self, path: Path) -> Tuple[PayloadHeader, galois.FieldArray]:
        path = Path(path)
        if not path.is_file():
            raise MissingDataError(f"{path.name} not found")
        data = path.read_bytes()
        header, offset = PayloadHeader.unpack(data)
        payload = unpack_elements(data[offset:], header.field)
        if payload.size != header.stripes * header.alpha:
            raise PayloadFormatError(
                f"{path.name}: {payload.size} elements, header promises {header.stripes}×{header.alpha}"
            )
        return header, payload.reshape(header.stripes, header.alpha)

    def discover(self) -> str:
        """'node' or 'share', whichever kind of file the directory holds"""
        for prefix in ("node", "share"):
            if any(self.base_path.glob(f"{prefix}_*.cmr")):
                return prefix
        raise MissingDataError(f"no node or share files in {self.base_path.name or self.base_path}")

    def read_all(self, prefix: Optional[str] = None) -> Dict[int, Tuple[PayloadHeader, galois.FieldArray]]:
        """Every readable file of one kind, keyed by index; headers must agree"""
        prefix = prefix or self.discover()
        found = {}
        for path in sorted(self.base_path.glob(f"{prefix}_*.cmr")):
            header, payload = self.read(path)
            if path.name != self.path(header.index, prefix).name:
                raise PayloadFormatError(f"{path.name} holds index {header.index}")
            found[header.index] = (header, payload)
        if not found:
            raise MissingDataError(f"no {prefix} files in {self.base_path.name}")
        first = next(iter(found.values()))[0]
        for index, (header, _) in found.items():
            if not header.same_code(first):
                raise PayloadFormatError(f"{prefix}_{index}.cmr belongs to a different code")
        return found

"""Fixed 53-byte signalling cell format.

Every signalling cell (connection request, connection accept, release)
occupies exactly one 53-byte cell. The VC number of a signalling cell is
always 0; data cells use VC numbers 1-255. Layout, big-endian:

    byte  0      VC number (0 on signalling cells)
    byte  1      packet type (1=CREQ, 2=CACC, 3=REL)
    byte  2      CDM (accumulated route-difficulty metric)
    bytes 3-4    source address
    byte  5      connection number
    bytes 6-7    destination address
    bytes 8-9    QoS bandwidth, kbit/s (CREQ: requested; CACC: granted)
    bytes 10-11  QoS max delay, ms
    bytes 12-51  zero padding
    byte  52     checksum: XOR of bytes 0..51

The XOR checksum is what lets a receiver reject a cell whose metric byte
was corrupted in transit, which is the one way a routing loop could form.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

CELL_SIZE = 53

_HEADER_FMT = "!BBBHBHHH"  # vc, type, cdm, src, conn, dst, bw, delay
_HEADER_SIZE = struct.calcsize(_HEADER_FMT)
_PAD = CELL_SIZE - _HEADER_SIZE - 1  # zero bytes between header and checksum


class PacketType(IntEnum):
    CREQ = 1
    CACC = 2
    REL = 3


class WireError(Exception):
    """Base class for cell encoding/decoding failures."""


class ChecksumMismatch(WireError):
    """Cell checksum does not match its contents; receiver must drop it."""


class UnknownPacketType(WireError):
    """Packet-type byte is outside the known enum range."""


class CellSizeError(WireError):
    """Raw image is not exactly CELL_SIZE bytes."""


class FieldRangeError(WireError):
    """A cell field does not fit its wire width."""


@dataclass(frozen=True)
class QosSpec:
    """Requested or granted quality of service."""

    bandwidth: int  # kbit/s, 16-bit
    max_delay: int = 0  # ms, 16-bit


@dataclass(frozen=True)
class FloodKey:
    """(source, destination, connection number): identifies one flood."""

    source: int  # 16-bit address, 0 reserved
    destination: int  # 16-bit address, 0 reserved
    connection_no: int  # 8-bit, chosen by the source per attempt


@dataclass(frozen=True)
class SignallingCell:
    packet_type: PacketType
    key: FloodKey
    cdm: int = 0
    qos: QosSpec = field(default_factory=lambda: QosSpec(0, 0))
    vc_number: int = 0


def xor_checksum(data: bytes) -> int:
    """XOR of all bytes in *data*."""
    acc = 0
    for b in data:
        acc ^= b
    return acc


def _check_range(name: str, value: int, limit: int) -> None:
    if not 0 <= value <= limit:
        raise FieldRangeError(f"{name}={value} exceeds {limit}")


def encode_cell(cell: SignallingCell) -> bytes:
    """Serialize *cell* into its 53-byte wire image."""
    _check_range("vc_number", cell.vc_number, 0xFF)
    _check_range("cdm", cell.cdm, 0xFF)
    _check_range("source", cell.key.source, 0xFFFF)
    _check_range("destination", cell.key.destination, 0xFFFF)
    _check_range("connection_no", cell.key.connection_no, 0xFF)
    _check_range("bandwidth", cell.qos.bandwidth, 0xFFFF)
    _check_range("max_delay", cell.qos.max_delay, 0xFFFF)
    body = struct.pack(
        _HEADER_FMT,
        cell.vc_number,
        int(cell.packet_type),
        cell.cdm,
        cell.key.source,
        cell.key.connection_no,
        cell.key.destination,
        cell.qos.bandwidth,
        cell.qos.max_delay,
    ) + b"\x00" * _PAD
    return body + bytes([xor_checksum(body)])


def decode_cell(raw: bytes) -> SignallingCell:
    """Parse a 53-byte image, verifying length and checksum."""
    if len(raw) != CELL_SIZE:
        raise CellSizeError(f"expected {CELL_SIZE} bytes, got {len(raw)}")
    if xor_checksum(raw[:-1]) != raw[-1]:
        raise ChecksumMismatch("checksum does not match cell contents")
    vc, ptype, cdm, src, conn, dst, bw, delay = struct.unpack_from(_HEADER_FMT, raw)
    try:
        packet_type = PacketType(ptype)
    except ValueError:
        raise UnknownPacketType(f"packet type byte 0x{ptype:02x}") from None
    return SignallingCell(
        packet_type=packet_type,
        key=FloodKey(source=src, destination=dst, connection_no=conn),
        cdm=cdm,
        qos=QosSpec(bandwidth=bw, max_delay=delay),
        vc_number=vc,
    )

"""Classic pcap reading/writing and Ethernet/IPv4/TCP/UDP header decoding.

Only the classic tcpdump format is handled (24-byte global header, 16-byte
record headers, linktype 1 = Ethernet). The writer always emits little-endian
microsecond files; the reader accepts either byte order. Decoding degrades
instead of failing: whatever cannot be parsed is reported at the most
specific layer that was reached.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

from .errors import BadMagic, FrameTooLarge, TruncatedRecord, UnsupportedLinkType
from .ioutil import atomic_write

MAGIC_USEC = 0xA1B2C3D4
MAGIC_USEC_SWAPPED = 0xD4C3B2A1
SNAPLEN = 65535
LINKTYPE_ETHERNET = 1
MAX_FRAME_LEN = 65535
PAYLOAD_PREFIX_LEN = 8

ETHERTYPE_IPV4 = 0x0800
PROTO_TCP = 6
PROTO_UDP = 17

_GLOBAL_LE = struct.Struct("<IHHiIII")
_RECORD_LE = struct.Struct("<IIII")


class LinkProtocol(Enum):
    IPV4 = "ipv4"
    OTHER = "other"


class Transport(Enum):
    TCP = "tcp"
    UDP = "udp"
    OTHER_IP = "other_ip"
    NON_IP = "non_ip"


@dataclass(frozen=True)
class TcpFlags:
    syn: bool = False
    ack: bool = False
    fin: bool = False
    rst: bool = False
    psh: bool = False
    urg: bool = False

    @classmethod
    def from_byte(cls, b: int) -> "TcpFlags":
        # Low six bits of the TCP flags octet: FIN SYN RST PSH ACK URG.
        return cls(
            fin=bool(b & 0x01),
            syn=bool(b & 0x02),
            rst=bool(b & 0x04),
            psh=bool(b & 0x08),
            ack=bool(b & 0x10),
            urg=bool(b & 0x20),
        )


NO_FLAGS = TcpFlags()


@dataclass(frozen=True)
class Frame:
    """A raw captured frame: timestamp plus link-layer bytes."""

    ts_sec: int
    ts_usec: int
    data: bytes

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6


@dataclass
class PacketMeta:
    """Decoded per-packet metadata used by feature extraction."""

    ts_sec: int
    ts_usec: int
    captured_len: int
    original_len: int
    link: LinkProtocol = LinkProtocol.OTHER
    transport: Transport = Transport.NON_IP
    src_ip: int | None = None
    dst_ip: int | None = None
    src_port: int | None = None
    dst_port: int | None = None
    tcp_flags: TcpFlags = NO_FLAGS
    ttl: int | None = None
    payload_len: int = 0
    payload_prefix: bytes = b""

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1e6


def decode_frame(data: bytes, ts_sec: int = 0, ts_usec: int = 0, original_len: int | None = None) -> PacketMeta:
    """Decode one Ethernet frame; never raises, degrades to the layer reached."""
    meta = PacketMeta(
        ts_sec=ts_sec,
        ts_usec=ts_usec,
        captured_len=len(data),
        original_len=len(data) if original_len is None else original_len,
    )
    if len(data) < 14:
        return meta
    if int.from_bytes(data[12:14], "big") != ETHERTYPE_IPV4:
        return meta

    ip = data[14:]
    if len(ip) < 20:
        return meta
    version = ip[0] >> 4
    ihl = (ip[0] & 0x0F) * 4
    if version != 4 or ihl < 20 or len(ip) < ihl:
        return meta

    total_len = int.from_bytes(ip[2:4], "big")
    meta.link = LinkProtocol.IPV4
    meta.transport = Transport.OTHER_IP
    meta.ttl = ip[8]
    meta.src_ip = int.from_bytes(ip[12:16], "big")
    meta.dst_ip = int.from_bytes(ip[16:20], "big")
    meta.payload_len = max(0, total_len - ihl)

    # Non-first fragments carry no transport header.
    if int.from_bytes(ip[6:8], "big") & 0x1FFF:
        return meta

    proto = ip[9]
    body = ip[ihl : max(ihl, total_len)]
    if proto == PROTO_TCP:
        if len(body) < 14:
            return meta
        data_off = (body[12] >> 4) * 4
        if data_off < 20:
            return meta
        meta.transport = Transport.TCP
        meta.src_port = int.from_bytes(body[0:2], "big")
        meta.dst_port = int.from_bytes(body[2:4], "big")
        meta.tcp_flags = TcpFlags.from_byte(body[13])
        meta.payload_len = max(0, total_len - ihl - data_off)
        meta.payload_prefix = bytes(body[data_off : data_off + PAYLOAD_PREFIX_LEN])
    elif proto == PROTO_UDP:
        if len(body) < 8:
            return meta
        meta.transport = Transport.UDP
        meta.src_port = int.from_bytes(body[0:2], "big")
        meta.dst_port = int.from_bytes(body[2:4], "big")
        udp_len = int.from_bytes(body[4:6], "big")
        meta.payload_len = max(0, udp_len - 8)
        end = min(len(body), 8 + meta.payload_len, 8 + PAYLOAD_PREFIX_LEN)
        meta.payload_prefix = bytes(body[8:end])
    return meta


def _iter_records(path) -> Iterator[tuple[int, int, int, bytes]]:
    with open(path, "rb") as fh:
        head = fh.read(24)
        if len(head) < 4:
            raise BadMagic(f"{path}: too short to be a pcap file")
        magic = struct.unpack("<I", head[:4])[0]
        if magic == MAGIC_USEC:
            endian = "<"
        elif magic == MAGIC_USEC_SWAPPED:
            endian = ">"
        else:
            raise BadMagic(f"{path}: unknown magic 0x{magic:08x}")
        if len(head) < 24:
            raise TruncatedRecord(f"{path}: incomplete global header")
        linktype = struct.unpack(endian + "IHHiIII", head)[6]
        if linktype != LINKTYPE_ETHERNET:
            raise UnsupportedLinkType(f"{path}: linktype {linktype} (only Ethernet is supported)")
        record = struct.Struct(endian + "IIII")
        while True:
            header = fh.read(16)
            if not header:
                return
            if len(header) < 16:
                raise TruncatedRecord(f"{path}: incomplete record header")
            ts_sec, ts_usec, incl_len, orig_len = record.unpack(header)
            data = fh.read(incl_len)
            if len(data) < incl_len:
                raise TruncatedRecord(
                    f"{path}: record claims {incl_len} bytes, only {len(data)} remain"
                )
            yield ts_sec, ts_usec, orig_len, data


def read_pcap(path) -> list[PacketMeta]:
    """Decode every record of a pcap file into packet metadata, in file order."""
    return [
        decode_frame(data, ts_sec, ts_usec, original_len=orig_len)
        for ts_sec, ts_usec, orig_len, data in _iter_records(path)
    ]


def read_frames(path) -> list[Frame]:
    """Read raw frames plus timestamps; the exact inverse of write_pcap."""
    return [Frame(ts_sec, ts_usec, data) for ts_sec, ts_usec, _, data in _iter_records(path)]


def write_pcap(path, frames: Iterable[Frame]) -> None:
    """Write frames as a little-endian microsecond pcap file."""
    with atomic_write(path, "wb") as fh:
        fh.write(_GLOBAL_LE.pack(MAGIC_USEC, 2, 4, 0, 0, SNAPLEN, LINKTYPE_ETHERNET))
        for frame in frames:
            if len(frame.data) > MAX_FRAME_LEN:
                raise FrameTooLarge(f"frame of {len(frame.data)} bytes exceeds {MAX_FRAME_LEN}")
            fh.write(_RECORD_LE.pack(frame.ts_sec, frame.ts_usec, len(frame.data), len(frame.data)))
            fh.write(frame.data)

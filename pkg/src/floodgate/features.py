"""Fixed-length time windows over a packet stream and the 24-feature schema.

Schema v1, in input-layer order:

    f01  packet_count            packets in the window
    f02  byte_count              sum of original frame lengths
    f03  mean_packet_size        bytes
    f04  std_packet_size         population std, bytes
    f05  tcp_ratio               TCP packets / f01
    f06  udp_ratio               UDP packets / f01
    f07  other_ratio             everything else / f01 (f05+f06+f07 = 1)
    f08  syn_count               TCP with SYN=1, ACK=0
    f09  syn_ratio               f08 / f01
    f10  pure_ack_count          TCP with ACK=1, SYN=0 and empty payload
    f11  pure_ack_ratio          f10 / f01
    f12  finrst_ratio            TCP with FIN or RST, over f01
    f13  synack_count            TCP with SYN=1 and ACK=1
    f14  unique_src_ips          distinct IPv4 source addresses
    f15  unique_dst_ports        distinct TCP/UDP destination ports
    f16  dst_port_entropy        Shannon entropy (base 2) of packets per port
    f17  src_ip_entropy          Shannon entropy (base 2) of packets per source
    f18  mean_interarrival       seconds between consecutive packets (0 if <2)
    f19  std_interarrival        population std of the gaps (0 if <2)
    f20  http_request_count      TCP to port 80/8080 whose payload starts with
                                 "GET ", "POST", "HEAD" or "PUT "
    f21  http_request_ratio      f20 / f01
    f22  small_udp_ratio         UDP with payload <= 64 bytes, over f01
    f23  mean_ttl                over IPv4 packets (0 if none)
    f24  unique_five_tuples      distinct (src, dst, sport, dport, transport)

Windows are half-open [k*len, (k+1)*len) slices computed in integer
microseconds, so a packet exactly on a boundary belongs to the later window.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .dataset import LabeledRecord, TrafficClass, encode_label
from .errors import EmptyWindow, MalformedRow, OverlappingTruth, UnsortedInput
from .ioutil import atomic_write
from .pcapio import PacketMeta, Transport

SCHEMA_VERSION = 1

FEATURE_NAMES = (
    "packet_count",
    "byte_count",
    "mean_packet_size",
    "std_packet_size",
    "tcp_ratio",
    "udp_ratio",
    "other_ratio",
    "syn_count",
    "syn_ratio",
    "pure_ack_count",
    "pure_ack_ratio",
    "finrst_ratio",
    "synack_count",
    "unique_src_ips",
    "unique_dst_ports",
    "dst_port_entropy",
    "src_ip_entropy",
    "mean_interarrival",
    "std_interarrival",
    "http_request_count",
    "http_request_ratio",
    "small_udp_ratio",
    "mean_ttl",
    "unique_five_tuples",
)

HTTP_PORTS = (80, 8080)
HTTP_METHODS = (b"GET ", b"POST", b"HEAD", b"PUT ")
SMALL_UDP_MAX_PAYLOAD = 64

TRUTH_HEADER = ("start_ts", "end_ts", "label")


@dataclass
class Window:
    """A half-open [start_ts, end_ts) slice of the packet stream."""

    start_ts: float
    end_ts: float
    packets: list[PacketMeta] = field(default_factory=list)


def window_packets(packets: Sequence[PacketMeta], window_len: float) -> list[Window]:
    """Tile the stream into consecutive windows of `window_len` seconds.

    Empty windows between the first and last packet are kept (callers skip
    them); every packet lands in exactly one window.
    """
    if window_len <= 0:
        raise ValueError("window_len must be positive")
    len_us = round(window_len * 1e6)
    if len_us <= 0:
        raise ValueError("window_len must be at least one microsecond")

    pkts = list(packets)
    if not pkts:
        return []
    stamps = [p.ts_sec * 1_000_000 + p.ts_usec for p in pkts]
    for i in range(1, len(stamps)):
        if stamps[i] < stamps[i - 1]:
            raise UnsortedInput(f"packet {i} is earlier than its predecessor")

    first = stamps[0] // len_us
    last = stamps[-1] // len_us
    windows = [
        Window(start_ts=(w * len_us) / 1e6, end_ts=((w + 1) * len_us) / 1e6)
        for w in range(first, last + 1)
    ]
    for pkt, us in zip(pkts, stamps):
        windows[us // len_us - first].packets.append(pkt)
    return windows


def _entropy(counts) -> float:
    total = sum(counts)
    if total == 0:
        return 0.0
    h = 0.0
    for c in counts:
        p = c / total
        h -= p * math.log2(p)
    return h + 0.0


def extract_features(window: Window) -> np.ndarray:
    """Compute the 24 schema-v1 features for one non-empty window."""
    pkts = window.packets
    n = len(pkts)
    if n == 0:
        raise EmptyWindow(f"window [{window.start_ts}, {window.end_ts}) has no packets")

    byte_count = 0
    byte_sq = 0
    tcp = udp = 0
    syn = pure_ack = finrst = synack = 0
    http_req = small_udp = 0
    ttl_sum = 0
    ipv4_count = 0
    src_counts: dict[int, int] = {}
    port_counts: dict[int, int] = {}
    five_tuples = set()

    for p in pkts:
        size = p.original_len
        byte_count += size
        byte_sq += size * size
        if p.transport is Transport.TCP:
            tcp += 1
            f = p.tcp_flags
            if f.syn and not f.ack:
                syn += 1
            elif f.syn and f.ack:
                synack += 1
            elif f.ack and p.payload_len == 0:
                pure_ack += 1
            if f.fin or f.rst:
                finrst += 1
            if p.dst_port in HTTP_PORTS and p.payload_prefix[:4] in HTTP_METHODS:
                http_req += 1
        elif p.transport is Transport.UDP:
            udp += 1
            if p.payload_len <= SMALL_UDP_MAX_PAYLOAD:
                small_udp += 1
        if p.src_ip is not None:
            src_counts[p.src_ip] = src_counts.get(p.src_ip, 0) + 1
            ipv4_count += 1
            ttl_sum += p.ttl
        if p.transport in (Transport.TCP, Transport.UDP):
            port_counts[p.dst_port] = port_counts.get(p.dst_port, 0) + 1
            five_tuples.add((p.src_ip, p.dst_ip, p.src_port, p.dst_port, p.transport))

    mean_size = byte_count / n
    var_size = max(byte_sq / n - mean_size * mean_size, 0.0)

    if n >= 2:
        stamps = [p.timestamp for p in pkts]
        gaps = [b - a for a, b in zip(stamps, stamps[1:])]
        mean_gap = sum(gaps) / len(gaps)
        var_gap = sum((g - mean_gap) ** 2 for g in gaps) / len(gaps)
        std_gap = math.sqrt(var_gap)
    else:
        mean_gap = std_gap = 0.0

    return np.array(
        [
            float(n),
            float(byte_count),
            mean_size,
            math.sqrt(var_size),
            tcp / n,
            udp / n,
            (n - tcp - udp) / n,
            float(syn),
            syn / n,
            float(pure_ack),
            pure_ack / n,
            finrst / n,
            float(synack),
            float(len(src_counts)),
            float(len(port_counts)),
            _entropy(port_counts.values()),
            _entropy(src_counts.values()),
            mean_gap,
            std_gap,
            float(http_req),
            http_req / n,
            small_udp / n,
            (ttl_sum / ipv4_count) if ipv4_count else 0.0,
            float(len(five_tuples)),
        ],
        dtype=np.float64,
    )


TruthInterval = tuple[float, float, TrafficClass]


def label_windows(
    windows: Iterable[Window], truth: Sequence[TruthInterval]
) -> list[LabeledRecord]:
    """Extract features from non-empty windows and label them by midpoint.

    A window gets the class of the truth interval covering its midpoint;
    uncovered windows default to normal traffic.
    """
    intervals = sorted(truth, key=lambda iv: (iv[0], iv[1]))
    for (s1, e1, _), (s2, _, _) in zip(intervals, intervals[1:]):
        if s2 < e1:
            raise OverlappingTruth(f"interval starting at {s2} overlaps one ending at {e1}")

    records = []
    for w in windows:
        if not w.packets:
            continue
        mid = (w.start_ts + w.end_ts) / 2.0
        label = TrafficClass.NORMAL
        for start, end, cls in intervals:
            if start <= mid < end:
                label = cls
                break
        records.append(LabeledRecord(extract_features(w), label))
    return records


def write_truth(path, intervals: Sequence[TruthInterval]) -> None:
    """Write ground-truth label intervals as `start_ts,end_ts,label` CSV."""
    with atomic_write(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRUTH_HEADER)
        for start, end, cls in intervals:
            writer.writerow([repr(float(start)), repr(float(end)), TrafficClass(cls).alias])


def read_truth(path) -> list[TruthInterval]:
    """Read a ground-truth CSV written by write_truth (or shaped like it)."""
    out: list[TruthInterval] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TRUTH_HEADER:
            raise MalformedRow(f"{path}: header does not match start_ts,end_ts,label")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedRow(f"{path}:{lineno}: expected 3 columns, got {len(row)}")
            try:
                start, end = float(row[0]), float(row[1])
            except ValueError:
                raise MalformedRow(f"{path}:{lineno}: non-numeric interval bound") from None
            if not (math.isfinite(start) and math.isfinite(end)) or end <= start:
                raise MalformedRow(f"{path}:{lineno}: invalid interval [{row[0]}, {row[1]}]")
            out.append((start, end, encode_label(row[2])))
    return out

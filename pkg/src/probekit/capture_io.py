"""Classic pcap reading/writing and probe request extraction."""
from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import BinaryIO, Iterable, Iterator, Optional

from .frame_model import (
    CTL_TYPE, DATA_TYPE, FCS_LEN, HEADER_LEN, MGMT_TYPE, ST_PROBE_REQ,
    ST_PROBE_RESP, FrameError, ProbeRequestRecord, decode_probe_request,
)

logger = logging.getLogger(__name__)

LINKTYPE_IEEE802_11 = 105
LINKTYPE_RADIOTAP = 127
SUPPORTED_LINK_TYPES = (LINKTYPE_IEEE802_11, LINKTYPE_RADIOTAP)

MAGIC_USEC = 0xA1B2C3D4
MAGIC_NSEC = 0xA1B23C4D
GLOBAL_HEADER_LEN = 24
RECORD_HEADER_LEN = 16
DEFAULT_SNAPLEN = 262144

RADIOTAP_FLAGS_FCS = 0x10
RADIOTAP_FLAGS_BAD_FCS = 0x40

# (alignment, size) of the radiotap fields preceding Channel, by present bit
_RADIOTAP_FIELDS = ((8, 8), (1, 1), (1, 1), (2, 4))

# Diagnostics for unparseable frames are sampled to keep logs readable
_LOG_FIRST_N = 5


class CaptureError(Exception):
    pass


class BadMagic(CaptureError):
    pass


class TruncatedRecord(CaptureError):
    pass


class UnsupportedLinkType(CaptureError):
    pass


class RadiotapTooShort(CaptureError):
    pass


class RadiotapLengthOverrun(CaptureError):
    pass


class IoFailure(CaptureError):
    pass


@dataclass(frozen=True)
class CaptureRecord:
    timestamp_ns: int
    link_type: int
    payload: bytes
    orig_len: Optional[int] = field(default=None, compare=False)

    @property
    def timestamp(self) -> float:
        return self.timestamp_ns / 1e9


@dataclass(frozen=True)
class RadiotapInfo:
    header_length: int
    flags_fcs_present: bool = False
    flags: Optional[int] = None
    channel_mhz: Optional[int] = None

    @property
    def bad_fcs(self) -> bool:
        return bool(self.flags is not None and self.flags & RADIOTAP_FLAGS_BAD_FCS)


class PcapReader:
    """Lazy reader over a classic pcap stream.

    The global header is parsed on construction, so BadMagic and
    UnsupportedLinkType surface immediately. With ``strict=False`` a
    truncated final record is logged and iteration just stops.
    """

    def __init__(self, source: BinaryIO, strict: bool = True):
        self._src = source
        self.strict = strict
        head = _read_exact(source, GLOBAL_HEADER_LEN)
        if len(head) < 4:
            raise BadMagic("file too short for a pcap header")
        magic_le = struct.unpack("<I", head[:4])[0]
        magic_be = struct.unpack(">I", head[:4])[0]
        if magic_le in (MAGIC_USEC, MAGIC_NSEC):
            self.endian, magic = "<", magic_le
        elif magic_be in (MAGIC_USEC, MAGIC_NSEC):
            self.endian, magic = ">", magic_be
        else:
            raise BadMagic(f"unknown pcap magic {head[:4].hex()}")
        if len(head) < GLOBAL_HEADER_LEN:
            raise TruncatedRecord("pcap global header is truncated")
        self.nanosecond = magic == MAGIC_NSEC
        (self.version_major, self.version_minor, _tz, _sigfigs, self.snaplen,
         self.link_type) = struct.unpack(self.endian + "HHiIII", head[4:])
        self.link_type &= 0x0FFFFFFF  # upper bits may carry FCS-length hints
        if self.link_type not in SUPPORTED_LINK_TYPES:
            raise UnsupportedLinkType(f"link type {self.link_type} is not 802.11")
        self._rec = struct.Struct(self.endian + "IIII")

    def __iter__(self) -> Iterator[CaptureRecord]:
        frac_scale = 1 if self.nanosecond else 1000
        index = 0
        while True:
            head = _read_exact(self._src, RECORD_HEADER_LEN)
            if not head:
                return
            if len(head) < RECORD_HEADER_LEN:
                yield from self._truncated(index, "record header")
                return
            sec, frac, incl_len, orig_len = self._rec.unpack(head)
            payload = _read_exact(self._src, incl_len)
            if len(payload) < incl_len:
                yield from self._truncated(index, "record body")
                return
            yield CaptureRecord(sec * 1_000_000_000 + frac * frac_scale,
                                self.link_type, payload, orig_len)
            index += 1

    def _truncated(self, index: int, what: str):
        msg = f"record {index}: {what} truncated"
        if self.strict:
            raise TruncatedRecord(msg)
        logger.warning("%s; ignoring the remainder of the capture", msg)
        return
        yield


def _read_exact(src: BinaryIO, n: int) -> bytes:
    first = src.read(n)
    if len(first) == n or not first:
        return first
    chunks = [first]
    n -= len(first)
    while n > 0:
        chunk = src.read(n)
        if not chunk:
            break
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def read_capture(source: BinaryIO, strict: bool = True) -> PcapReader:
    return PcapReader(source, strict=strict)


def write_capture(records: Iterable[CaptureRecord], link_type: int, sink: BinaryIO,
                  snaplen: int = DEFAULT_SNAPLEN) -> None:
    """Write microsecond, little-endian classic pcap."""
    rec = struct.Struct("<IIII")
    try:
        sink.write(struct.pack("<IHHiIII", MAGIC_USEC, 2, 4, 0, 0, snaplen, link_type))
        for r in records:
            if r.link_type != link_type:
                raise ValueError(f"record link type {r.link_type} != file link type {link_type}")
            sec, ns = divmod(r.timestamp_ns, 1_000_000_000)
            orig = r.orig_len if r.orig_len is not None else len(r.payload)
            sink.write(rec.pack(sec, ns // 1000, len(r.payload), orig))
            sink.write(r.payload)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc


def strip_radiotap(payload: bytes) -> tuple[int, RadiotapInfo]:
    """Locate the 802.11 frame behind a radiotap header.

    Only Flags and Channel are decoded; everything else is skipped by
    the header length.
    """
    if len(payload) < 8:
        raise RadiotapTooShort(f"payload of {len(payload)} bytes")
    length = struct.unpack_from("<H", payload, 2)[0]
    if length < 8:
        raise RadiotapTooShort(f"declared radiotap length {length}")
    if length > len(payload):
        raise RadiotapLengthOverrun(f"radiotap length {length} > payload {len(payload)}")

    present = struct.unpack_from("<I", payload, 4)[0]
    pos = 8
    word = present
    while word & 0x80000000:
        if pos + 4 > length:
            raise RadiotapLengthOverrun("present bitmask chain runs past header")
        word = struct.unpack_from("<I", payload, pos)[0]
        pos += 4

    flags_pos, channel_pos = _radiotap_layout(present, pos, length)
    flags = None if flags_pos is None else payload[flags_pos]
    channel = None if channel_pos is None else struct.unpack_from("<H", payload, channel_pos)[0]
    return length, RadiotapInfo(length, bool(flags is not None and flags & RADIOTAP_FLAGS_FCS),
                                flags, channel)


@lru_cache(maxsize=256)
def _radiotap_layout(present: int, pos: int, length: int) -> tuple:
    """Offsets of the Flags and Channel fields, or None when absent."""
    offsets = [None] * len(_RADIOTAP_FIELDS)
    for bit, (align, size) in enumerate(_RADIOTAP_FIELDS):
        if not present & (1 << bit):
            continue
        pos = (pos + align - 1) & ~(align - 1)
        if pos + size > length:
            raise RadiotapLengthOverrun(f"radiotap field {bit} runs past header")
        offsets[bit] = pos
        pos += size
    return offsets[1], offsets[3]


def frame_of(record: CaptureRecord, assume_fcs: bool = False) -> tuple[bytes, bool]:
    """Return the bare 802.11 frame (FCS removed) and whether an FCS was present."""
    payload = record.payload
    fcs = assume_fcs
    if record.link_type == LINKTYPE_RADIOTAP:
        offset, info = strip_radiotap(payload)
        payload = payload[offset:]
        if info.flags is not None:
            fcs = info.flags_fcs_present
    elif record.link_type != LINKTYPE_IEEE802_11:
        raise UnsupportedLinkType(f"link type {record.link_type}")
    if fcs:
        if len(payload) < FCS_LEN:
            raise FrameError("frame shorter than its FCS")
        payload = payload[:-FCS_LEN]
    return payload, fcs


@dataclass
class ParseStats:
    total: int = 0
    probe_requests: int = 0
    probe_responses: int = 0
    data_frames: int = 0
    other: int = 0
    unparseable: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def extract_probe_requests(records: Iterable[CaptureRecord], assume_fcs: bool = False
                           ) -> tuple[list[ProbeRequestRecord], ParseStats]:
    """Decode every probe request in ``records``; results are time-sorted.

    ``assume_fcs`` applies only when the capture carries no radiotap Flags.
    """
    stats = ParseStats()
    out = []
    for index, rec in enumerate(records):
        stats.total += 1
        try:
            frame, fcs = frame_of(rec, assume_fcs)
            if len(frame) < HEADER_LEN:
                ftype = (frame[0] >> 2) & 0x3 if frame else None
                if ftype == CTL_TYPE:
                    stats.other += 1
                    continue
                raise FrameError(f"{len(frame)}-byte frame")
            ftype = (frame[0] >> 2) & 0x3
            subtype = frame[0] >> 4
            if ftype == MGMT_TYPE and subtype == ST_PROBE_REQ:
                probe = decode_probe_request(frame, rec.timestamp_ns)
                if fcs:
                    probe = replace(probe, fcs_present=True)
                out.append((probe, index))
                stats.probe_requests += 1
            elif ftype == MGMT_TYPE and subtype == ST_PROBE_RESP:
                stats.probe_responses += 1
            elif ftype == DATA_TYPE:
                stats.data_frames += 1
            else:
                stats.other += 1
        except (FrameError, CaptureError) as exc:
            stats.unparseable += 1
            if stats.unparseable <= _LOG_FIRST_N:
                logger.info("record %d unparseable: %s", index, exc)
            elif stats.unparseable == _LOG_FIRST_N + 1:
                logger.info("further unparseable records not logged")
    out.sort(key=lambda pair: (pair[0].timestamp_ns, pair[1]))
    return [p for p, _ in out], stats

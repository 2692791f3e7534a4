"""Byte-level model of 802.11 management frames, MAC addresses and IEs."""
from __future__ import annotations

import random
import struct
import zlib
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, NamedTuple, Optional, Sequence, Union

# Frame types (frame_control byte 0, bits 2-3)
MGMT_TYPE = 0
CTL_TYPE = 1
DATA_TYPE = 2

# Management subtypes
ST_ASSOC_REQ = 0
ST_ASSOC_RESP = 1
ST_REASSOC_REQ = 2
ST_REASSOC_RESP = 3
ST_PROBE_REQ = 4
ST_PROBE_RESP = 5
ST_BEACON = 8
ST_AUTH = 11

FC_PROBE_REQ = 0x40
FC_PROBE_RESP = 0x50
FC_BEACON = 0x80
FC_AUTH = 0xB0
FC_ASSOC_REQ = 0x00

HEADER_LEN = 24
FCS_LEN = 4

TAG_SSID = 0
TAG_RATES = 1
TAG_DS_PARAMS = 3
TAG_HT_CAPS = 45
TAG_EXT_RATES = 50
TAG_INTERWORKING = 107
TAG_EXT_CAPS = 127
TAG_VHT_CAPS = 191
TAG_VENDOR = 221
TAG_EXTENSION = 255

TAG_NAMES = {
    TAG_SSID: "SSID",
    TAG_RATES: "Supported Rates",
    TAG_DS_PARAMS: "DS Parameter Set",
    TAG_HT_CAPS: "HT Capabilities",
    TAG_EXT_RATES: "Extended Supported Rates",
    TAG_INTERWORKING: "Interworking",
    TAG_EXT_CAPS: "Extended Capabilities",
    TAG_VHT_CAPS: "VHT Capabilities",
    TAG_VENDOR: "Vendor Specific",
    TAG_EXTENSION: "Element Extension",
}

# Element ID Extension values seen in probe requests
EXTENSION_NAMES = {
    35: "HE Capabilities",
    59: "Supported Operating Classes",
    108: "EHT Capabilities",
}

_header = struct.Struct("<2sH6s6s6sH")


class FrameError(ValueError):
    """Base class for frame codec failures."""


class TruncatedElement(FrameError):
    """An element's declared length runs past the end of the buffer.

    ``elements`` holds whatever decoded cleanly before ``offset``.
    """

    def __init__(self, offset: int, elements: Sequence["InformationElement"] = ()):
        super().__init__(f"truncated information element at offset {offset}")
        self.offset = offset
        self.elements = list(elements)


class OversizedElement(FrameError):
    pass


class FrameTooShort(FrameError):
    pass


class Unparseable(FrameError):
    """Frame is too short or of the wrong kind to decode as requested."""


@dataclass(frozen=True, order=True)
class MacAddress:
    octets: bytes

    def __post_init__(self):
        if not isinstance(self.octets, (bytes, bytearray)) or len(self.octets) != 6:
            raise ValueError(f"MAC address needs exactly 6 bytes, got {self.octets!r}")
        if isinstance(self.octets, bytearray):
            object.__setattr__(self, "octets", bytes(self.octets))

    @classmethod
    def parse(cls, text: str) -> "MacAddress":
        parts = text.strip().replace("-", ":").split(":")
        if len(parts) != 6 or not all(len(p) == 2 for p in parts):
            raise ValueError(f"not a MAC address: {text!r}")
        try:
            return cls(bytes(int(p, 16) for p in parts))
        except ValueError:
            raise ValueError(f"not a MAC address: {text!r}") from None

    def __str__(self) -> str:
        return ":".join(f"{b:02x}" for b in self.octets)

    def __repr__(self) -> str:
        return f"MacAddress('{self}')"

    @property
    def is_locally_administered(self) -> bool:
        return bool(self.octets[0] & 0x02)

    @property
    def is_group(self) -> bool:
        return bool(self.octets[0] & 0x01)

    @property
    def oui(self) -> bytes:
        return self.octets[:3]


BROADCAST = MacAddress(b"\xff" * 6)


@lru_cache(maxsize=1 << 16)
def _mac(octets: bytes) -> MacAddress:
    # captures repeat a small set of addresses; reuse the objects
    return MacAddress(octets)


def is_locally_administered(mac: MacAddress) -> bool:
    """Same test as the capture filter ``wlan.sa[0] & 0x02``."""
    return mac.is_locally_administered


def random_laa(rng: Union[random.Random, int, None] = None) -> MacAddress:
    """Draw a unicast, locally administered address.

    ``rng`` may be a :class:`random.Random` or a seed for a fresh one.
    """
    if not isinstance(rng, random.Random):
        rng = random.Random(rng)
    raw = bytearray(rng.getrandbits(48).to_bytes(6, "big"))
    raw[0] = (raw[0] & 0xFC) | 0x02
    return MacAddress(bytes(raw))


class _Element(NamedTuple):
    tag_id: int
    body: bytes = b""


class InformationElement(_Element):
    """One TLV element. A tuple underneath, so hashing and ordering are cheap."""

    __slots__ = ()

    def __new__(cls, tag_id: int, body: bytes = b""):
        if not 0 <= tag_id <= 255:
            raise ValueError(f"tag id out of range: {tag_id}")
        return super().__new__(cls, tag_id, bytes(body))

    @property
    def extension_id(self) -> Optional[int]:
        if self.tag_id == TAG_EXTENSION and self.body:
            return self.body[0]
        return None

    @property
    def name(self) -> str:
        ext = self.extension_id
        if ext is not None and ext in EXTENSION_NAMES:
            return EXTENSION_NAMES[ext]
        return TAG_NAMES.get(self.tag_id, f"Unknown({self.tag_id})")

    def encode(self) -> bytes:
        if len(self.body) > 255:
            raise OversizedElement(
                f"element {self.tag_id} body is {len(self.body)} bytes (max 255)")
        return bytes((self.tag_id, len(self.body))) + self.body

    def __repr__(self) -> str:
        return f"IE({self.tag_id}, {self.body.hex()})"


@dataclass(frozen=True)
class SupportedRates:
    """Rate bytes in 500 kbit/s units; the high bit flags a basic rate."""

    rates: bytes = b"\x02\x04\x0b\x16"

    @property
    def mbps(self) -> list[float]:
        return [rate_mbps(r) for r in self.rates]

    @property
    def basic(self) -> list[bool]:
        return [bool(r & 0x80) for r in self.rates]

    def elements(self) -> list[InformationElement]:
        """Split into Supported Rates (first 8) and Extended Supported Rates."""
        out = [InformationElement(TAG_RATES, self.rates[:8])]
        if len(self.rates) > 8:
            out.append(InformationElement(TAG_EXT_RATES, self.rates[8:]))
        return out


def rate_mbps(rate_byte: int) -> float:
    return (rate_byte & 0x7F) / 2


class ManagementHeader(NamedTuple):
    frame_control: bytes = bytes((FC_PROBE_REQ, 0))
    duration: int = 0
    addr1: MacAddress = BROADCAST
    addr2: MacAddress = BROADCAST
    addr3: MacAddress = BROADCAST
    sequence_control: int = 0

    @classmethod
    def decode(cls, frame: bytes) -> "ManagementHeader":
        if len(frame) < HEADER_LEN:
            raise Unparseable(f"frame of {len(frame)} bytes is shorter than a header")
        fc, dur, a1, a2, a3, sc = _header.unpack_from(frame)
        return tuple.__new__(cls, (fc, dur, _mac(a1), _mac(a2), _mac(a3), sc))

    def encode(self) -> bytes:
        return _header.pack(self.frame_control, self.duration, self.addr1.octets,
                            self.addr2.octets, self.addr3.octets, self.sequence_control)

    @property
    def type(self) -> int:
        return (self.frame_control[0] >> 2) & 0x3

    @property
    def subtype(self) -> int:
        return self.frame_control[0] >> 4

    @property
    def flags(self) -> int:
        return self.frame_control[1]

    @property
    def da(self) -> MacAddress:
        return self.addr1

    @property
    def sa(self) -> MacAddress:
        return self.addr2

    @property
    def bssid(self) -> MacAddress:
        return self.addr3

    @property
    def sequence_number(self) -> int:
        return self.sequence_control >> 4

    @property
    def fragment_number(self) -> int:
        return self.sequence_control & 0xF

    @property
    def is_probe_request(self) -> bool:
        return self.type == MGMT_TYPE and self.subtype == ST_PROBE_REQ


def sequence_control(number: int, fragment: int = 0) -> int:
    return ((number & 0xFFF) << 4) | (fragment & 0xF)


@dataclass(frozen=True)
class ProbeRequestRecord:
    timestamp_ns: int = 0
    header: ManagementHeader = field(default_factory=ManagementHeader)
    ies: tuple = ()
    fcs_present: bool = False

    def __post_init__(self):
        if not isinstance(self.ies, tuple):
            object.__setattr__(self, "ies", tuple(self.ies))

    @property
    def timestamp(self) -> float:
        return self.timestamp_ns / 1e9

    @property
    def sa(self) -> MacAddress:
        return self.header.addr2

    @property
    def sequence_number(self) -> int:
        return self.header.sequence_number

    @property
    def frame_length(self) -> int:
        """802.11 frame size without radiotap or FCS."""
        return HEADER_LEN + sum(2 + len(ie.body) for ie in self.ies)

    def element(self, tag_id: int) -> Optional[InformationElement]:
        for ie in self.ies:
            if ie.tag_id == tag_id:
                return ie
        return None

    def ssid(self) -> Optional[bytes]:
        ie = self.element(TAG_SSID)
        return None if ie is None else ie.body

    @property
    def is_undirected(self) -> bool:
        return not self.ssid()

    @property
    def channel_hint(self) -> Optional[int]:
        ie = self.element(TAG_DS_PARAMS)
        if ie is None or not ie.body:
            return None
        return ie.body[0]


def decode_ies(body: bytes) -> list[InformationElement]:
    """Walk a TLV element list, keeping order and duplicates.

    Raises TruncatedElement (carrying the elements decoded so far) when a
    declared length overruns the buffer.
    """
    return list(_decode_ies(bytes(body)))


@lru_cache(maxsize=1 << 14)
def _decode_ies(body: bytes) -> tuple:
    out = []
    pos = 0
    end = len(body)
    new = _Element.__new__
    while pos < end:
        if pos + 2 > end:
            raise TruncatedElement(pos, out)
        tag = body[pos]
        length = body[pos + 1]
        if pos + 2 + length > end:
            raise TruncatedElement(pos, out)
        # tag is a byte, so the range check in __new__ can be skipped
        out.append(new(InformationElement, tag, body[pos + 2:pos + 2 + length]))
        pos += 2 + length
    return tuple(out)


def encode_ies(ies: Iterable[InformationElement]) -> bytes:
    return b"".join(ie.encode() for ie in ies)


def crc32(data: bytes) -> int:
    """IEEE 802.3 CRC-32 as used for the 802.11 FCS."""
    return zlib.crc32(data) & 0xFFFFFFFF


def append_fcs(frame: bytes) -> bytes:
    return frame + struct.pack("<I", crc32(frame))


def fcs_verify(frame: bytes) -> bool:
    if len(frame) < FCS_LEN + 1:
        raise FrameTooShort(f"{len(frame)} bytes cannot carry an FCS")
    return struct.unpack("<I", frame[-FCS_LEN:])[0] == crc32(frame[:-FCS_LEN])


def encode_probe_request(record: ProbeRequestRecord) -> bytes:
    if not record.header.is_probe_request:
        raise FrameError("header is not a probe request")
    frame = record.header.encode() + encode_ies(record.ies)
    if record.fcs_present:
        frame = append_fcs(frame)
    return frame


def decode_probe_request(frame: bytes, timestamp_ns: int = 0,
                         fcs_present: bool = False) -> ProbeRequestRecord:
    """Inverse of :func:`encode_probe_request`.

    With ``fcs_present`` the trailing 4 bytes are stripped (not verified).
    """
    if fcs_present:
        if len(frame) < HEADER_LEN + FCS_LEN:
            raise Unparseable("frame too short to carry header and FCS")
        frame = frame[:-FCS_LEN]
    header = ManagementHeader.decode(frame)
    if not header.is_probe_request:
        raise Unparseable(f"frame control {header.frame_control.hex()} is not a probe request")
    ies = _decode_ies(bytes(frame[HEADER_LEN:]))
    return ProbeRequestRecord(timestamp_ns, header, ies, fcs_present)

"""Generic probe requests: empty SSID plus Supported Rates, nothing else."""
from __future__ import annotations

import random
import struct
from dataclasses import dataclass
from typing import Optional, Union

from .capture_io import LINKTYPE_IEEE802_11, LINKTYPE_RADIOTAP, CaptureRecord
from .frame_model import (
    BROADCAST, FC_PROBE_REQ, TAG_RATES, TAG_SSID, InformationElement, MacAddress,
    ManagementHeader, ProbeRequestRecord, encode_probe_request, random_laa,
    sequence_control,
)

DEFAULT_RATES = b"\x02\x04\x0b\x16"
DEFAULT_GAP_NS = 20_000_000
MAX_SSID_LEN = 32
MAX_RATES = 8

# version 0, pad, length 8, no present fields
MINIMAL_RADIOTAP = struct.pack("<BBHI", 0, 0, 8, 0)
# same plus a Flags field announcing the trailing FCS
FCS_RADIOTAP = struct.pack("<BBHIB", 0, 0, 9, 0x2, 0x10)


class InvalidSpec(ValueError):
    pass


@dataclass(frozen=True)
class ProbeSpec:
    """Recipe for a burst of generic probe requests.

    ``source=None`` draws one random LAA per burst from ``seed``;
    ``seq_start=None`` draws a random sequence number per frame.
    """

    source: Optional[MacAddress] = None
    seed: Optional[int] = None
    ssid: Union[str, bytes, None] = None
    rates: bytes = DEFAULT_RATES
    seq_start: Optional[int] = 0
    burst_size: int = 1
    gap_ns: int = DEFAULT_GAP_NS
    start_ns: int = 0
    fcs: bool = False

    @property
    def ssid_bytes(self) -> bytes:
        if self.ssid is None:
            return b""
        if isinstance(self.ssid, str):
            return self.ssid.encode("utf-8")
        return bytes(self.ssid)

    def validate(self) -> None:
        if not self.rates:
            raise InvalidSpec("at least one supported rate is required")
        if len(self.rates) > MAX_RATES:
            raise InvalidSpec(f"{len(self.rates)} rates given, the element holds at most {MAX_RATES}")
        if len(self.ssid_bytes) > MAX_SSID_LEN:
            raise InvalidSpec(f"SSID is {len(self.ssid_bytes)} bytes (max {MAX_SSID_LEN})")
        if self.burst_size < 1:
            raise InvalidSpec("burst size must be at least 1")
        if self.gap_ns < 0:
            raise InvalidSpec("burst gap must not be negative")
        if self.seq_start is not None and not 0 <= self.seq_start < 4096:
            raise InvalidSpec("sequence number must be in 0..4095")


def _draws(spec: ProbeSpec) -> tuple[MacAddress, list[int]]:
    # one RNG stream per burst: address first, then per-frame sequence numbers
    rng = random.Random(spec.seed)
    source = spec.source if spec.source is not None else random_laa(rng)
    if spec.seq_start is None:
        seqs = [rng.getrandbits(12) for _ in range(spec.burst_size)]
    else:
        seqs = [(spec.seq_start + i) % 4096 for i in range(spec.burst_size)]
    return source, seqs


def _probe(spec: ProbeSpec, source: MacAddress, seq: int, index: int) -> ProbeRequestRecord:
    header = ManagementHeader(bytes((FC_PROBE_REQ, 0)), 0, BROADCAST, source, BROADCAST,
                              sequence_control(seq))
    ies = (InformationElement(TAG_SSID, spec.ssid_bytes),
           InformationElement(TAG_RATES, bytes(spec.rates)))
    return ProbeRequestRecord(spec.start_ns + index * spec.gap_ns, header, ies, spec.fcs)


def build_generic_probe(spec: ProbeSpec, index: int = 0) -> ProbeRequestRecord:
    spec.validate()
    if not 0 <= index < spec.burst_size:
        raise InvalidSpec(f"index {index} outside burst of {spec.burst_size}")
    source, seqs = _draws(spec)
    return _probe(spec, source, seqs[index], index)


def build_burst(spec: ProbeSpec, radiotap: bool = False) -> list[CaptureRecord]:
    spec.validate()
    source, seqs = _draws(spec)
    link_type = LINKTYPE_RADIOTAP if radiotap else LINKTYPE_IEEE802_11
    prefix = b""
    if radiotap:
        prefix = FCS_RADIOTAP if spec.fcs else MINIMAL_RADIOTAP
    out = []
    for i, seq in enumerate(seqs):
        probe = _probe(spec, source, seq, i)
        out.append(CaptureRecord(probe.timestamp_ns, link_type,
                                 prefix + encode_probe_request(probe)))
    return out

"""Time-to-Traffic: last probe response to a randomised address until first data.

Per AP and station the frames exchanged between the two are split into
attempts wherever the conversation goes quiet for longer than
``min_gap_ns``. An attempt that contains authentication or association
ends at its first data frame after that exchange. Its start is the
latest probe response from the AP to some *other* locally administered
address within the lookback window before the attempt's first frame,
i.e. the response that ended the randomised scanning phase. Without
one, the latest probe response to the station itself is used and the
measurement is flagged degraded.
"""
from __future__ import annotations

import logging
import math
import statistics
from bisect import bisect_left, bisect_right
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

from .capture_io import CaptureError, CaptureRecord, frame_of
from .frame_model import (
    DATA_TYPE, HEADER_LEN, MGMT_TYPE, ST_ASSOC_REQ, ST_ASSOC_RESP, ST_AUTH, ST_PROBE_REQ,
    ST_PROBE_RESP, ST_REASSOC_REQ, ST_REASSOC_RESP, FrameError, MacAddress,
)

logger = logging.getLogger(__name__)

NS = 1_000_000_000


class Kind(str, Enum):
    PROBE_REQ = "ProbeReq"
    PROBE_RESP = "ProbeResp"
    AUTH = "Auth"
    ASSOC_REQ = "AssocReq"
    ASSOC_RESP = "AssocResp"
    DATA = "Data"
    OTHER = "Other"


HANDSHAKE = frozenset({Kind.AUTH, Kind.ASSOC_REQ, Kind.ASSOC_RESP})

_MGMT_KINDS = {
    ST_PROBE_REQ: Kind.PROBE_REQ,
    ST_PROBE_RESP: Kind.PROBE_RESP,
    ST_AUTH: Kind.AUTH,
    ST_ASSOC_REQ: Kind.ASSOC_REQ,
    ST_REASSOC_REQ: Kind.ASSOC_REQ,
    ST_ASSOC_RESP: Kind.ASSOC_RESP,
    ST_REASSOC_RESP: Kind.ASSOC_RESP,
}


class NoDataFrame(Exception):
    pass


class NoStart(Exception):
    pass


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class LinkEvent:
    index: int
    timestamp_ns: int
    kind: Kind
    addr1: Optional[MacAddress] = None  # receiver
    addr2: Optional[MacAddress] = None  # transmitter
    sa: Optional[MacAddress] = None
    da: Optional[MacAddress] = None
    bssid: Optional[MacAddress] = None
    null_data: bool = False
    retry: bool = False

    @property
    def sa_is_laa(self) -> bool:
        return self.sa is not None and self.sa.is_locally_administered


def classify_frame(frame: bytes, index: int = 0, timestamp_ns: int = 0) -> LinkEvent:
    """Build an event from a bare 802.11 frame (no radiotap, no FCS)."""
    if len(frame) < HEADER_LEN:
        return LinkEvent(index, timestamp_ns, Kind.OTHER)
    fc0, fc1 = frame[0], frame[1]
    ftype = (fc0 >> 2) & 0x3
    subtype = fc0 >> 4
    if fc0 & 0x3 or ftype not in (MGMT_TYPE, DATA_TYPE):
        return LinkEvent(index, timestamp_ns, Kind.OTHER)
    a1 = MacAddress(frame[4:10])
    a2 = MacAddress(frame[10:16])
    a3 = MacAddress(frame[16:22])
    retry = bool(fc1 & 0x08)
    if ftype == MGMT_TYPE:
        kind = _MGMT_KINDS.get(subtype, Kind.OTHER)
        return LinkEvent(index, timestamp_ns, kind, a1, a2, a2, a1, a3, retry=retry)

    to_ds, from_ds = fc1 & 0x1, fc1 & 0x2
    if to_ds and from_ds:
        sa, da, bssid = None, a3, None  # WDS: SA sits in the fourth address
    elif to_ds:
        sa, da, bssid = a2, a3, a1
    elif from_ds:
        sa, da, bssid = a3, a1, a2
    else:
        sa, da, bssid = a2, a1, a3
    # subtypes with bit 2 set (Null, CF-Ack/Poll, QoS Null ...) carry no payload
    return LinkEvent(index, timestamp_ns, Kind.DATA, a1, a2, sa, da, bssid,
                     null_data=bool(subtype & 0x4), retry=retry)


def classify(records: Iterable[CaptureRecord], assume_fcs: bool = False) -> list[LinkEvent]:
    events = []
    for index, rec in enumerate(records):
        try:
            frame, _ = frame_of(rec, assume_fcs)
        except (CaptureError, FrameError):
            events.append(LinkEvent(index, rec.timestamp_ns, Kind.OTHER))
            continue
        events.append(classify_frame(frame, index, rec.timestamp_ns))
    return events


@dataclass(frozen=True)
class TtTConfig:
    ap_filter: Optional[MacAddress] = None
    lookback_ns: int = 30 * NS
    min_gap_ns: int = 10 * NS
    include_null_data: bool = False

    def __post_init__(self):
        if self.lookback_ns <= 0:
            raise ValueError("lookback window must be positive")
        if self.min_gap_ns <= 0:
            raise ValueError("attempt gap must be positive")


@dataclass(frozen=True)
class TtTMeasurement:
    station_mac: MacAddress
    ap: MacAddress
    start_ns: int
    end_ns: int
    start_frame_ref: int
    end_frame_ref: int
    degraded: bool = False

    @property
    def duration(self) -> float:
        return (self.end_ns - self.start_ns) / NS


def _station(ev: LinkEvent, ap: MacAddress) -> Optional[MacAddress]:
    """The station on the other end of ``ev`` if it is a frame between it and ``ap``."""
    kind = ev.kind
    if kind == Kind.PROBE_RESP:
        other = ev.addr1 if ev.addr2 == ap else None
    elif kind == Kind.PROBE_REQ:
        other = ev.addr2 if ev.addr1 == ap else None
    elif kind in HANDSHAKE:
        if ev.bssid != ap:
            return None
        other = ev.addr1 if ev.addr2 == ap else ev.addr2
    elif kind == Kind.DATA:
        if ev.addr2 == ap:
            other = ev.addr1
        elif ev.addr1 == ap:
            other = ev.addr2
        else:
            return None
    else:
        return None
    if other is None or other == ap or other.is_group:
        return None
    return other


def _attempts(events: list, gap_ns: int):
    chunk = [events[0]]
    for ev in events[1:]:
        if ev.timestamp_ns - chunk[-1].timestamp_ns > gap_ns:
            yield chunk
            chunk = []
        chunk.append(ev)
    yield chunk


def access_points(events: Iterable[LinkEvent]) -> list[MacAddress]:
    """BSSIDs that took part in an authentication or association exchange."""
    aps = {ev.bssid for ev in events
           if ev.kind in HANDSHAKE and ev.bssid is not None and not ev.bssid.is_group}
    return sorted(aps)


def measure(events: Sequence[LinkEvent], config: TtTConfig = TtTConfig(),
            skipped: Optional[list] = None) -> list[TtTMeasurement]:
    """Find one measurement per connection attempt.

    Attempts that cannot be measured are logged, and the NoDataFrame /
    NoStart explaining why is appended to ``skipped`` when given.
    """
    events = sorted(events, key=lambda e: (e.timestamp_ns, e.index))
    aps = [config.ap_filter] if config.ap_filter is not None else access_points(events)
    out = []
    for ap in aps:
        conversations = defaultdict(list)
        responses = []
        for ev in events:
            if ev.kind == Kind.PROBE_RESP and ev.addr2 == ap:
                responses.append(ev)
            station = _station(ev, ap)
            if station is not None:
                conversations[station].append(ev)
        resp_ts = [ev.timestamp_ns for ev in responses]

        for station in sorted(conversations):
            for attempt in _attempts(conversations[station], config.min_gap_ns):
                result = _measure_attempt(station, ap, attempt, responses, resp_ts, config)
                if isinstance(result, Exception):
                    logger.info("%s", result)
                    if skipped is not None:
                        skipped.append(result)
                elif result is not None:
                    out.append(result)
    out.sort(key=lambda m: (m.start_ns, m.station_mac, m.ap))
    return out


def _measure_attempt(station, ap, attempt, responses, resp_ts, config):
    hs = next((i for i, ev in enumerate(attempt) if ev.kind in HANDSHAKE), None)
    if hs is None:
        return None  # ongoing traffic or probing only, not a connection attempt
    end = next((ev for ev in attempt[hs + 1:]
                if ev.kind == Kind.DATA and (config.include_null_data or not ev.null_data)),
               None)
    if end is None:
        return NoDataFrame(f"station {station} / AP {ap}: no data frame after handshake "
                           f"at frame {attempt[hs].index}")

    first_ts = attempt[0].timestamp_ns
    lo = bisect_left(resp_ts, first_ts - config.lookback_ns)
    hi = bisect_right(resp_ts, first_ts)
    for ev in reversed(responses[lo:hi]):
        target = ev.addr1
        if target.is_locally_administered and not target.is_group and target != station:
            return TtTMeasurement(station, ap, ev.timestamp_ns, end.timestamp_ns,
                                  ev.index, end.index, degraded=False)

    hs_ts = attempt[hs].timestamp_ns
    hi = bisect_right(resp_ts, hs_ts)
    for ev in reversed(responses[lo:hi]):
        if ev.addr1 == station:
            return TtTMeasurement(station, ap, ev.timestamp_ns, end.timestamp_ns,
                                  ev.index, end.index, degraded=True)
    return NoStart(f"station {station} / AP {ap}: no probe response before handshake "
                   f"at frame {attempt[hs].index}")


@dataclass(frozen=True)
class TtTStats:
    n: int
    mean: float
    median: float
    stddev: float


def stats(durations: Sequence[float], population: bool = False) -> TtTStats:
    """Mean, median and standard deviation (n-1 denominator unless ``population``)."""
    xs = list(durations)
    if not xs:
        raise EmptyInput("no durations")
    if population:
        sd = statistics.pstdev(xs)
    else:
        sd = statistics.stdev(xs) if len(xs) > 1 else math.nan
    return TtTStats(len(xs), statistics.fmean(xs), statistics.median(xs), sd)

"""Anonymity sets: devices that share a fingerprint key."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .fingerprint import DeviceRecord, FieldSelector, describe_key
from .frame_model import MacAddress


@dataclass(frozen=True)
class AnonymitySet:
    key: bytes
    device_count: int
    request_count: int
    members: tuple = ()


@dataclass(frozen=True)
class AnonymityPartition:
    selector: FieldSelector
    sets: tuple

    @property
    def total_devices(self) -> int:
        return sum(s.device_count for s in self.sets)

    @property
    def total_requests(self) -> int:
        return sum(s.request_count for s in self.sets)


@dataclass(frozen=True)
class AnonymityReport:
    selector: str
    set_count: int
    total_devices: int
    largest_set_devices: int
    largest_set_requests: int
    largest_key: Optional[bytes]
    histogram: tuple

    @property
    def largest_fraction(self) -> float:
        if not self.total_devices:
            return 0.0
        return self.largest_set_devices / self.total_devices

    def as_dict(self) -> dict:
        return {
            "selector": self.selector,
            "set_count": self.set_count,
            "total_devices": self.total_devices,
            "largest_set_devices": self.largest_set_devices,
            "largest_set_requests": self.largest_set_requests,
            "largest_fraction": self.largest_fraction,
            "largest_key_hex": None if self.largest_key is None else self.largest_key.hex(),
            "histogram": [list(pair) for pair in self.histogram],
        }


def partition(devices: Sequence[DeviceRecord], selector: FieldSelector,
              keep_members: bool = True) -> AnonymityPartition:
    """Group devices by key; sets ordered by device count desc, then key bytes.

    Devices keyed under another selector are re-keyed from their stored IE
    variants. A MAC counts once per set it lands in (only the per-variant
    policy puts one MAC into several sets).
    """
    groups: dict = {}
    for dev in devices:
        for key, n in dev.split(selector):
            members = groups.setdefault(key, {})
            members[dev.mac] = members.get(dev.mac, 0) + n
    sets = []
    for key, members in groups.items():
        macs = tuple(sorted(members)) if keep_members else ()
        sets.append(AnonymitySet(key, len(members), sum(members.values()), macs))
    sets.sort(key=lambda s: (-s.device_count, s.key))
    return AnonymityPartition(selector, tuple(sets))


def report(p: AnonymityPartition, total_devices: Optional[int] = None) -> AnonymityReport:
    """Summarise a partition; the histogram is (request_count, device_count) per set."""
    part_devices = p.total_devices
    if total_devices is None:
        total_devices = part_devices
    elif total_devices < part_devices:
        raise ValueError(f"total_devices {total_devices} < partition size {part_devices}")
    largest = p.sets[0] if p.sets else None
    histogram = tuple(sorted((s.request_count, s.device_count) for s in p.sets))
    return AnonymityReport(
        selector=p.selector.name,
        set_count=len(p.sets),
        total_devices=total_devices,
        largest_set_devices=largest.device_count if largest else 0,
        largest_set_requests=largest.request_count if largest else 0,
        largest_key=largest.key if largest else None,
        histogram=histogram,
    )


@dataclass(frozen=True)
class ComparisonRow:
    selector: FieldSelector
    partition: AnonymityPartition
    report: AnonymityReport
    dominant: Optional[dict]


def compare_selectors(devices: Sequence[DeviceRecord], selectors: Sequence[FieldSelector],
                      keep_members: bool = False) -> list[ComparisonRow]:
    if not selectors:
        raise ValueError("need at least one selector")
    rows = []
    for sel in selectors:
        p = partition(devices, sel, keep_members=keep_members)
        rep = report(p)
        dominant = describe_key(rep.largest_key, sel) if rep.largest_key is not None else None
        rows.append(ComparisonRow(sel, p, rep, dominant))
    return rows


def summary_line(rep: AnonymityReport) -> str:
    return f"{rep.set_count} sets, largest {100 * rep.largest_fraction:.2f}%"


def set_members(p: AnonymityPartition, mac: MacAddress) -> list[AnonymitySet]:
    return [s for s in p.sets if mac in s.members]

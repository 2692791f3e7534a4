"""IE fingerprints under field selectors, and per-MAC device aggregation.

A fingerprint key is a byte string. For each selected tag it holds either
``00`` (tag absent) or ``01`` + 2-byte big-endian length + the bodies of
every occurrence of that tag in frame order. Each segment is
self-delimiting, so equal keys under a larger selector imply equal keys
under any subset of its tags.
"""
from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass, field
from operator import attrgetter
from typing import Iterable, Optional, Sequence, Union

from .frame_model import (
    TAG_DS_PARAMS, TAG_EXT_CAPS, TAG_EXT_RATES, TAG_EXTENSION, TAG_HT_CAPS,
    TAG_INTERWORKING, TAG_NAMES, TAG_RATES, TAG_SSID, TAG_VENDOR, TAG_VHT_CAPS,
    InformationElement, MacAddress, ProbeRequestRecord,
)

# A selector item: a plain tag id, or (255, extension id)
TagRef = Union[int, tuple]

ABSENT = b"\x00"
PRESENT = b"\x01"
_len16 = struct.Struct(">H").pack

# BSS membership selectors ride in the rate elements with the basic bit set
BSS_MEMBERSHIP_SELECTORS = frozenset({121, 122, 123, 124, 125, 126, 127})

POLICIES = ("mode", "first", "per-variant")


@dataclass(frozen=True)
class FieldSelector:
    name: str
    tags: tuple = ()
    include_ssid: bool = False
    full: bool = False
    ordered: bool = True
    bss_membership: bool = False

    def __post_init__(self):
        tags = tuple(tuple(t) if isinstance(t, list) else t for t in self.tags)
        if self.include_ssid and TAG_SSID not in tags:
            tags = (TAG_SSID,) + tags
        if len(set(tags)) != len(tags):
            raise ValueError(f"selector {self.name!r} repeats a tag: {tags}")
        object.__setattr__(self, "tags", tags)

    def tag_set(self) -> Optional[frozenset]:
        """Selected tags, or None for the full-IE selectors."""
        return None if self.full else frozenset(self.tags)

    def describe(self) -> str:
        if self.full:
            return "all elements" + (" + order" if self.ordered else "")
        parts = [_ref_name(t) for t in self.tags]
        if self.bss_membership:
            parts.append("BSS membership")
        return ", ".join(parts)


def _ref_name(ref: TagRef) -> str:
    if isinstance(ref, tuple):
        return f"Extension {ref[1]}"
    return TAG_NAMES.get(ref, f"Tag {ref}")


RATES_ONLY = FieldSelector("RATES_ONLY", (TAG_RATES,))
RATES_DS = FieldSelector("RATES_DS", (TAG_RATES, TAG_DS_PARAMS))
RATES_DS_HT = FieldSelector("RATES_DS_HT", (TAG_RATES, TAG_DS_PARAMS, TAG_HT_CAPS))
FULL_IE = FieldSelector("FULL_IE", full=True)

# Field sets used by published IE fingerprinting attacks
VANHOEF_2016 = FieldSelector("VANHOEF_2016", full=True, include_ssid=True)
ROBYNS_2017 = FieldSelector("ROBYNS_2017", full=True, include_ssid=True, ordered=False)
GU_2020 = FieldSelector("GU_2020", (TAG_RATES, TAG_EXT_RATES, TAG_DS_PARAMS, TAG_HT_CAPS,
                                    TAG_VHT_CAPS, TAG_EXT_CAPS))
URAS_2020 = FieldSelector("URAS_2020", (TAG_EXT_RATES, TAG_DS_PARAMS, TAG_HT_CAPS,
                                        TAG_VHT_CAPS, TAG_EXT_CAPS), bss_membership=True)
TAN_2021 = FieldSelector("TAN_2021", full=True, include_ssid=True, ordered=False)
PINTOR_2022 = FieldSelector("PINTOR_2022", (TAG_HT_CAPS, TAG_EXT_CAPS, TAG_VENDOR))
HE_2023 = FieldSelector("HE_2023", full=True, include_ssid=True)

PRESETS = {s.name: s for s in (RATES_ONLY, RATES_DS, RATES_DS_HT, FULL_IE, VANHOEF_2016,
                               ROBYNS_2017, GU_2020, URAS_2020, TAN_2021, PINTOR_2022,
                               HE_2023)}

DEFAULT_CHAIN = (RATES_ONLY, RATES_DS, RATES_DS_HT)

TAG_ALIASES = {
    "ssid": TAG_SSID,
    "rates": TAG_RATES,
    "ds": TAG_DS_PARAMS,
    "ht": TAG_HT_CAPS,
    "erates": TAG_EXT_RATES,
    "ext-rates": TAG_EXT_RATES,
    "interworking": TAG_INTERWORKING,
    "extcap": TAG_EXT_CAPS,
    "vht": TAG_VHT_CAPS,
    "vendor": TAG_VENDOR,
    "he": (TAG_EXTENSION, 35),
}


def parse_selector(text: str) -> FieldSelector:
    """Resolve a preset name, or a comma list of tag aliases / ids.

    Extension elements are written ``255.<ext id>``, e.g. ``255.35``.
    """
    text = text.strip()
    preset = PRESETS.get(text.upper().replace("-", "_"))
    if preset is not None:
        return preset
    if text.lower() in ("full", "all"):
        return FULL_IE
    tags = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        if part in TAG_ALIASES:
            tags.append(TAG_ALIASES[part])
        elif "." in part:
            tag, ext = part.split(".", 1)
            tags.append((_tag_int(tag), _tag_int(ext)))
        else:
            tags.append(_tag_int(part))
    if not tags:
        raise ValueError(f"empty field selector: {text!r}")
    for known in PRESETS.values():
        if not known.full and not known.bss_membership and known.tags == tuple(tags):
            return known
    return FieldSelector(text, tuple(tags))


def _tag_int(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise ValueError(f"unknown field {text!r}") from None
    if not 0 <= value <= 255:
        raise ValueError(f"tag id out of range: {value}")
    return value


def _matches(ie: InformationElement, ref: TagRef) -> bool:
    if isinstance(ref, tuple):
        return ie.tag_id == ref[0] and ie.extension_id == ref[1]
    return ie.tag_id == ref


def _segment(bodies: list) -> bytes:
    if not bodies:
        return ABSENT
    joined = b"".join(bodies)
    return PRESENT + _len16(len(joined)) + joined


def _element_ids(ies: Sequence[InformationElement]) -> bytes:
    out = bytearray()
    for ie in ies:
        out.append(ie.tag_id)
        if ie.tag_id == TAG_EXTENSION:
            # 255 is always followed by a has-ext flag so the sequence stays parseable
            out += b"\x01" + ie.body[:1] if ie.body else b"\x00"
    return bytes(out)


def fingerprint_of(ies: Sequence[InformationElement], selector: FieldSelector) -> bytes:
    if selector.full:
        key = bytearray()
        if selector.ordered:
            ids = _element_ids(ies)
            key += _len16(len(ies)) + ids
        for tag in sorted({ie.tag_id for ie in ies}):
            if tag == TAG_SSID and not selector.include_ssid:
                continue
            key += _len16(tag) + _segment([ie.body for ie in ies if ie.tag_id == tag])
        return bytes(key)

    parts = [_segment([ie.body for ie in ies if _matches(ie, ref)]) for ref in selector.tags]
    if selector.bss_membership:
        members = bytes(b for ie in ies if ie.tag_id in (TAG_RATES, TAG_EXT_RATES)
                        for b in ie.body if b & 0x80 and (b & 0x7F) in BSS_MEMBERSHIP_SELECTORS)
        parts.append(_segment([members] if members else []))
    return b"".join(parts)


def decode_key(key: bytes, selector: FieldSelector) -> dict:
    """Split a non-full key back into {tag ref: concatenated bodies or None}."""
    if selector.full:
        raise ValueError("full-IE keys are opaque")
    refs = list(selector.tags) + (["bss_membership"] if selector.bss_membership else [])
    out = {}
    pos = 0
    for ref in refs:
        marker = key[pos]
        pos += 1
        if marker == 0:
            out[ref] = None
            continue
        (length,) = struct.unpack_from(">H", key, pos)
        pos += 2
        out[ref] = key[pos:pos + length]
        pos += length
    if pos != len(key):
        raise ValueError("key does not match selector")
    return out


def describe_key(key: bytes, selector: FieldSelector) -> dict:
    """Human-oriented view of a key; rate elements become lists of rate bytes."""
    if selector.full:
        return {"key_hex": key.hex()}
    out = {}
    for ref, body in decode_key(key, selector).items():
        name = ref if isinstance(ref, str) else _ref_name(ref)
        if body is None:
            out[name] = None
        elif ref in (TAG_RATES, TAG_EXT_RATES, TAG_DS_PARAMS):
            out[name] = list(body)
        else:
            out[name] = body.hex()
    return out


@dataclass
class DeviceRecord:
    """All probe requests seen from one source address.

    ``variants`` counts each distinct raw IE list, in first-seen order, so
    the device can be re-keyed under any selector without the requests.
    """

    mac: MacAddress
    request_count: int
    first_seen_ns: int
    last_seen_ns: int
    fingerprints: dict
    representative_key: bytes
    selector: FieldSelector
    policy: str = "mode"
    variants: dict = field(default_factory=dict, repr=False)
    first_variant: tuple = field(default=(), repr=False)

    def rekey(self, selector: FieldSelector) -> "DeviceRecord":
        if selector == self.selector:
            return self
        counts = _key_counts(self.variants, selector)
        rep = _representative(counts, fingerprint_of(self.first_variant, selector), self.policy)
        return DeviceRecord(self.mac, self.request_count, self.first_seen_ns, self.last_seen_ns,
                            counts, rep, selector, self.policy, self.variants, self.first_variant)

    def split(self, selector: FieldSelector) -> list:
        """(key, request count) pairs this device contributes under ``selector``."""
        dev = self.rekey(selector)
        if self.policy == "per-variant":
            return list(dev.fingerprints.items())
        return [(dev.representative_key, dev.request_count)]


def _key_counts(variants: dict, selector: FieldSelector) -> dict:
    counts: dict = {}
    for ies, n in variants.items():
        k = fingerprint_of(ies, selector)
        counts[k] = counts.get(k, 0) + n
    return counts


def _representative(counts: dict, first_key: bytes, policy: str) -> bytes:
    if policy == "first":
        return first_key
    # dicts keep first-seen order and max() returns the first maximum
    return max(counts, key=counts.__getitem__)


# canonical request order, so aggregation does not depend on input order
_order_key = attrgetter("timestamp_ns", "header.addr2.octets", "header.sequence_control", "ies")


def keep_request(req: ProbeRequestRecord, uaa_only: bool) -> bool:
    sa = req.sa
    return not uaa_only or not (sa.is_locally_administered or sa.is_group)


def aggregate_devices(requests: Iterable[ProbeRequestRecord],
                      selector: FieldSelector = RATES_ONLY,
                      uaa_only: bool = True, policy: str = "mode") -> list[DeviceRecord]:
    """Group requests by source MAC.

    With ``uaa_only`` locally administered and group source addresses are
    dropped first. Output is ordered by MAC.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown device-key policy {policy!r}")
    kept = sorted((r for r in requests if keep_request(r, uaa_only)), key=_order_key)
    per_mac: dict = {}
    for req in kept:
        sa = req.header.addr2
        entry = per_mac.get(sa.octets)
        if entry is None:
            per_mac[sa.octets] = entry = [sa, 0, req.timestamp_ns, req.timestamp_ns, {}, req.ies]
        entry[1] += 1
        entry[3] = req.timestamp_ns
        variants = entry[4]
        variants[req.ies] = variants.get(req.ies, 0) + 1

    devices = []
    for octets in sorted(per_mac):
        mac, count, first, last, variants, first_variant = per_mac[octets]
        counts = _key_counts(variants, selector)
        rep = _representative(counts, fingerprint_of(first_variant, selector), policy)
        devices.append(DeviceRecord(mac, count, first, last, counts, rep, selector, policy,
                                    variants, first_variant))
    return devices


def variation_stats(devices: Sequence[DeviceRecord]) -> dict:
    """How much per-device key variation the chosen representative hides."""
    varying = sum(1 for d in devices if len(d.fingerprints) > 1)
    total = sum(d.request_count for d in devices)
    matching = sum(d.fingerprints.get(d.representative_key, 0) for d in devices)
    return {
        "devices": len(devices),
        "devices_with_multiple_keys": varying,
        "requests": total,
        "requests_matching_representative": matching,
    }


def count_absent(requests: Iterable[ProbeRequestRecord], tag: int) -> int:
    """Requests that carry no element with ``tag``."""
    return sum(1 for r in requests if all(ie.tag_id != tag for ie in r.ies))


def tag_value_counts(requests: Iterable[ProbeRequestRecord], tag: int) -> Counter:
    return Counter(r.element(tag).body for r in requests if r.element(tag) is not None)

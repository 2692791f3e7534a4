"""Offline toolkit for 802.11 probe request privacy analysis.

Parses probe requests out of pcap captures, groups devices into anonymity
sets under reduced IE fingerprints, measures Time-to-Traffic, and crafts
minimal generic probe requests.
"""
from .frame_model import (
    InformationElement, MacAddress, ManagementHeader, ProbeRequestRecord, SupportedRates,
    decode_ies, decode_probe_request, encode_probe_request, fcs_verify, is_locally_administered,
    random_laa,
)

__version__ = "0.1.0"

__all__ = [
    "InformationElement", "MacAddress", "ManagementHeader", "ProbeRequestRecord",
    "SupportedRates", "decode_ies", "decode_probe_request", "encode_probe_request",
    "fcs_verify", "is_locally_administered", "random_laa",
]

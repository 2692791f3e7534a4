"""JSON Schemas for the CLI's ``--format json`` output."""

_stats = {
    "type": "object",
    "properties": {k: {"type": "integer", "minimum": 0} for k in (
        "total", "probe_requests", "probe_responses", "data_frames", "other",
        "unparseable", "uaa", "laa")},
    "required": ["total", "probe_requests", "unparseable", "uaa", "laa"],
}

PARSE = {
    "type": "object",
    "properties": {
        "stats": _stats,
        "requests": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "timestamp": {"type": "string"},
                    "sa": {"type": "string", "pattern": "^([0-9a-f]{2}:){5}[0-9a-f]{2}$"},
                    "laa": {"type": "boolean"},
                    "seq": {"type": "integer", "minimum": 0, "maximum": 4095},
                    "ssid": {"type": "string"},
                    "tags": {"type": "array", "items": {"type": "integer"}},
                    "frame_length": {"type": "integer"},
                    "channel": {"type": ["integer", "null"]},
                },
                "required": ["timestamp", "sa", "laa", "seq", "ssid", "tags", "frame_length"],
            },
        },
    },
    "required": ["stats", "requests"],
}

ANONSETS = {
    "type": "object",
    "properties": {
        "probe_requests": {"type": "integer"},
        "retained_requests": {"type": "integer"},
        "devices": {"type": "integer"},
        "device_key": {"enum": ["mode", "first", "per-variant"]},
        "ds_absent_requests": {"type": "integer"},
        "variation": {"type": "object"},
        "reports": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "selector": {"type": "string"},
                    "fields": {"type": "string"},
                    "set_count": {"type": "integer"},
                    "total_devices": {"type": "integer"},
                    "largest_set_devices": {"type": "integer"},
                    "largest_set_requests": {"type": "integer"},
                    "largest_fraction": {"type": "number"},
                    "largest_key_hex": {"type": ["string", "null"]},
                    "dominant": {"type": ["object", "null"]},
                    "histogram": {
                        "type": "array",
                        "items": {"type": "array", "items": {"type": "integer"},
                                  "minItems": 2, "maxItems": 2},
                    },
                },
                "required": ["selector", "set_count", "total_devices", "largest_set_devices",
                             "largest_fraction", "histogram"],
            },
        },
    },
    "required": ["probe_requests", "retained_requests", "devices", "reports"],
}

CRAFT = {
    "type": "object",
    "properties": {
        "output": {"type": "string"},
        "link_type": {"enum": [105, 127]},
        "frames": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "index": {"type": "integer"},
                    "timestamp": {"type": "string"},
                    "sa": {"type": "string"},
                    "seq": {"type": "integer"},
                    "frame_length": {"type": "integer"},
                },
                "required": ["index", "timestamp", "sa", "seq", "frame_length"],
            },
        },
        "frame0_hex": {"type": "string"},
    },
    "required": ["output", "link_type", "frames"],
}

TTT = {
    "type": "object",
    "properties": {
        "measurements": {
            "type": "array",
            "items": {
                "type": "object",
                "properties": {
                    "station": {"type": "string"},
                    "ap": {"type": "string"},
                    "start_ts": {"type": "string"},
                    "end_ts": {"type": "string"},
                    "duration_s": {"type": "number", "minimum": 0},
                    "degraded": {"type": "boolean"},
                    "start_frame": {"type": "integer"},
                    "end_frame": {"type": "integer"},
                },
                "required": ["station", "ap", "start_ts", "end_ts", "duration_s", "degraded"],
            },
        },
        "summary": {
            "type": ["object", "null"],
            "properties": {
                "n": {"type": "integer"},
                "mean": {"type": "number"},
                "median": {"type": "number"},
                "stddev": {"type": ["number", "null"]},
                "population_std": {"type": "boolean"},
            },
        },
        "skipped": {"type": "array", "items": {"type": "string"}},
    },
    "required": ["measurements", "summary"],
}

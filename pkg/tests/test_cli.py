import csv
import io
import json
import sys
from pathlib import Path

import jsonschema
import pytest

from probekit import schemas
from probekit.capture_io import CaptureRecord, read_capture, write_capture
from probekit.cli import main

import frames as F
from test_ttt import switch_timeline

GOLDEN = (Path(__file__).parent / "data" / "generic_probe.bin").read_bytes()
S = 1_000_000_000


def _pcap(path, timeline, link_type=105):
    with open(path, "wb") as fh:
        write_capture([CaptureRecord(t, link_type, p) for t, p in timeline], link_type, fh)
    return str(path)


def _json(capsys, argv, schema):
    assert main(argv) == 0
    doc = json.loads(capsys.readouterr().out)
    jsonschema.validate(doc, schema)
    return doc


@pytest.fixture
def mixed_pcap(tmp_path):
    rates = F.tlv(0) + F.tlv(1, b"\x02\x04\x0b\x16")
    timeline = [
        (1 * S, F.probe_req("00:0c:29:00:00:01", rates)),
        (2 * S, F.probe_req("00:0c:29:00:00:02", rates)),
        (3 * S, F.probe_req("00:0c:29:00:00:02", rates + F.tlv(3, b"\x06"))),
        (4 * S, F.probe_req("00:0c:29:00:00:03", F.tlv(0) + F.tlv(1, b"\x82\x84"))),
        (5 * S, F.probe_req("da:a1:19:12:34:56", rates)),
        (6 * S, F.beacon("00:11:22:33:44:55")),
    ]
    return _pcap(tmp_path / "mixed.pcap", timeline)


# -- parse -------------------------------------------------------------------

def test_parse_json(capsys, mixed_pcap):
    doc = _json(capsys, ["parse", mixed_pcap, "--format", "json"], schemas.PARSE)
    assert doc["stats"]["total"] == 6 and doc["stats"]["probe_requests"] == 5
    assert (doc["stats"]["uaa"], doc["stats"]["laa"]) == (4, 1)
    assert len(doc["requests"]) == 5
    assert doc["requests"][2]["channel"] == 6


def test_parse_uaa_only(capsys, mixed_pcap):
    doc = _json(capsys, ["parse", mixed_pcap, "--uaa-only", "--format", "json"], schemas.PARSE)
    assert len(doc["requests"]) == 4
    assert not any(r["laa"] for r in doc["requests"])


def test_parse_csv_and_table(capsys, mixed_pcap):
    assert main(["parse", mixed_pcap, "--format", "csv"]) == 0
    out = capsys.readouterr()
    rows = list(csv.reader(io.StringIO(out.out)))
    assert rows[0][:2] == ["timestamp", "sa"] and len(rows) == 6
    assert "uaa=4" in out.err
    assert main(["parse", mixed_pcap]) == 0
    assert "-- total=6" in capsys.readouterr().out


def test_parse_empty_capture(capsys, tmp_path):
    doc = _json(capsys, ["parse", _pcap(tmp_path / "e.pcap", []), "--format", "json"],
                schemas.PARSE)
    assert doc["requests"] == []
    assert all(v == 0 for v in doc["stats"].values())


def test_parse_stdin(capsys, mixed_pcap, monkeypatch):
    data = Path(mixed_pcap).read_bytes()
    monkeypatch.setattr(sys, "stdin", io.TextIOWrapper(io.BytesIO(data)))
    doc = _json(capsys, ["parse", "-", "--format", "json"], schemas.PARSE)
    assert doc["stats"]["probe_requests"] == 5


def test_data_errors_exit_2(capsys, tmp_path):
    junk = tmp_path / "junk.bin"
    junk.write_bytes(b"this is not a capture file")
    assert main(["parse", str(junk)]) == 2
    assert "BadMagic" in capsys.readouterr().err
    assert main(["parse", str(tmp_path / "missing.pcap")]) == 2


def test_usage_errors_exit_1(capsys, mixed_pcap):
    with pytest.raises(SystemExit) as err:
        main(["parse"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 1
    assert main(["anonsets", mixed_pcap, "--fields", "no_such_preset"]) == 1


# -- anonsets ----------------------------------------------------------------

def test_anonsets_json(capsys, mixed_pcap):
    doc = _json(capsys, ["anonsets", mixed_pcap, "--format", "json"], schemas.ANONSETS)
    assert (doc["probe_requests"], doc["retained_requests"], doc["devices"]) == (5, 4, 3)
    assert [r["set_count"] for r in doc["reports"]] == [2, 2, 2]
    assert doc["reports"][0]["largest_set_devices"] == 2
    assert doc["reports"][0]["dominant"] == {"Supported Rates": [2, 4, 11, 22]}
    assert doc["ds_absent_requests"] == 3


def test_anonsets_table_and_fields(capsys, mixed_pcap):
    assert main(["anonsets", mixed_pcap, "--fields", "rates"]) == 0
    out = capsys.readouterr().out
    assert "RATES_ONLY: 2 sets, largest 66.67%" in out
    assert main(["anonsets", mixed_pcap, "--fields", "rates,ds", "--device-key", "per-variant"]) == 0
    assert "RATES_DS: 3 sets, largest 50.00% (2/4 devices)" in capsys.readouterr().out


def test_anonsets_csv_and_plot_data(capsys, mixed_pcap, tmp_path):
    plot = tmp_path / "plot.csv"
    assert main(["anonsets", mixed_pcap, "--format", "csv", "--fields", "rates",
                 "--fields", "full", "--plot-data", str(plot)]) == 0
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["selector", "set_rank", "key_hex", "device_count", "request_count"]
    assert [r["set_rank"] for r in rows if r["selector"] == "RATES_ONLY"] == ["1", "2"]
    points = list(csv.DictReader(plot.open()))
    assert {(p["selector"], p["request_count"], p["device_count"]) for p in points
            if p["selector"] == "RATES_ONLY"} == {("RATES_ONLY", "1", "1"), ("RATES_ONLY", "3", "2")}


def test_anonsets_deterministic(capsys, mixed_pcap):
    outs = []
    for _ in range(2):
        assert main(["anonsets", mixed_pcap, "--format", "json"]) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


# -- craft -------------------------------------------------------------------

def test_craft_golden(capsys, tmp_path):
    out = tmp_path / "g.pcap"
    assert main(["craft", "--sa", "02:11:22:33:44:55", "--seq", "0", "--dump-hex",
                 "-o", str(out)]) == 0
    assert GOLDEN.hex() in capsys.readouterr().out
    (rec,) = list(read_capture(out.open("rb")))
    assert rec.payload == GOLDEN and rec.link_type == 105


def test_craft_ssid_json(capsys, tmp_path):
    doc = _json(capsys, ["craft", "--ssid", "eduroam", "--burst", "3", "--seed", "1",
                         "--format", "json", "-o", str(tmp_path / "e.pcap")], schemas.CRAFT)
    assert [f["frame_length"] for f in doc["frames"]] == [39, 39, 39]
    assert len({f["sa"] for f in doc["frames"]}) == 1
    assert [f["timestamp"] for f in doc["frames"]] == ["0.000000000", "0.020000000", "0.040000000"]


def test_craft_too_many_rates(capsys, tmp_path):
    assert main(["craft", "--rates", "2,4,11,22,12,18,24,36,48", "-o",
                 str(tmp_path / "x.pcap")]) == 1
    assert main(["craft", "--sa", "nonsense", "-o", str(tmp_path / "x.pcap")]) == 1


def test_craft_seed_env_fallback(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("PROBEKIT_SEED", "42")
    a, b = tmp_path / "a.pcap", tmp_path / "b.pcap"
    assert main(["craft", "--seq", "random", "--burst", "4", "-o", str(a)]) == 0
    assert main(["craft", "--seq", "random", "--burst", "4", "--seed", "42", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_craft_stdout(capsysbinary):
    assert main(["craft", "--sa", "02:11:22:33:44:55", "-o", "-"]) == 0
    out = capsysbinary.readouterr().out
    (rec,) = list(read_capture(io.BytesIO(out)))
    assert rec.payload == GOLDEN


def test_craft_radiotap_fcs(capsys, tmp_path):
    out = tmp_path / "r.pcap"
    assert main(["craft", "--radiotap", "--fcs", "--seed", "3", "-o", str(out)]) == 0
    (rec,) = list(read_capture(out.open("rb")))
    assert rec.link_type == 127
    capsys.readouterr()
    doc = _json(capsys, ["parse", str(out), "--format", "json"], schemas.PARSE)
    assert doc["stats"]["probe_requests"] == 1 and doc["stats"]["unparseable"] == 0
    assert doc["requests"][0]["laa"]


# -- ttt ---------------------------------------------------------------------

def test_ttt_address_switch(capsys, tmp_path):
    path = _pcap(tmp_path / "switch.pcap", switch_timeline(), link_type=105)
    doc = _json(capsys, ["ttt", path, "--format", "json"], schemas.TTT)
    assert len(doc["measurements"]) == 1
    m = doc["measurements"][0]
    assert m["duration_s"] == 2.5 and not m["degraded"]
    assert (m["start_ts"], m["end_ts"]) == ("1.000000000", "3.500000000")
    assert doc["summary"]["n"] == 1 and doc["summary"]["stddev"] is None


def test_ttt_two_attempts_csv(capsys, tmp_path):
    timeline = switch_timeline() + switch_timeline(t0=60 * S)
    path = _pcap(tmp_path / "two.pcap", timeline)
    assert main(["ttt", path, "--format", "csv"]) == 0
    out = capsys.readouterr()
    rows = list(csv.DictReader(io.StringIO(out.out)))
    assert list(rows[0]) == ["station", "ap", "start_ts", "end_ts", "duration_s", "degraded"]
    assert [r["duration_s"] for r in rows] == ["2.500000", "2.500000"]
    assert "n=2 mean=2.500000 median=2.500000 stddev=0.000000" in out.err
    assert main(["ttt", path]) == 0
    assert "average TtT 2.50 s" in capsys.readouterr().out


def test_ttt_unknown_ap(capsys, tmp_path):
    path = _pcap(tmp_path / "switch.pcap", switch_timeline())
    doc = _json(capsys, ["ttt", path, "--ap", "00:99:99:99:99:99", "--format", "json"],
                schemas.TTT)
    assert doc["measurements"] == [] and doc["summary"] is None


def test_ttt_bad_ap_is_usage_error(capsys, tmp_path):
    path = _pcap(tmp_path / "switch.pcap", switch_timeline())
    assert main(["ttt", path, "--ap", "zz"]) == 1
    assert main(["ttt", path, "--window-s", "0"]) == 1

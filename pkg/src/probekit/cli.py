"""probekit command line: parse, anonsets, craft, ttt.

Exit codes: 0 success, 1 usage error, 2 data error.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import math
import os
import sys
from typing import Optional

from . import anonymity, capture_io, crafting, fingerprint, ttt
from .frame_model import TAG_DS_PARAMS, FrameError, MacAddress

logger = logging.getLogger("probekit")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

NS = 1_000_000_000


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def fmt_ts(ns: int) -> str:
    sec, frac = divmod(ns, NS)
    return f"{sec}.{frac:09d}"


@contextlib.contextmanager
def _open_in(path: str):
    if path == "-":
        yield sys.stdin.buffer
    else:
        with open(path, "rb") as fh:
            yield fh


def _load(path: str):
    """Read a capture fully; a truncated tail is tolerated with a warning."""
    with _open_in(path) as fh:
        return list(capture_io.read_capture(fh, strict=False))


def _write_csv(rows, header):
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _table(rows, header):
    cols = [header] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cols) for i in range(len(header))]
    for r in cols:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())


def _dump_json(obj):
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


# -- parse -------------------------------------------------------------------

def cmd_parse(args) -> int:
    records = _load(args.pcap)
    requests, stats = capture_io.extract_probe_requests(records, assume_fcs=args.assume_fcs)
    laa = sum(1 for r in requests if r.sa.is_locally_administered)
    summary = stats.as_dict()
    summary.update(uaa=len(requests) - laa, laa=laa)
    if args.uaa_only:
        requests = [r for r in requests if fingerprint.keep_request(r, True)]

    rows = []
    for r in requests:
        rows.append({
            "timestamp": fmt_ts(r.timestamp_ns),
            "sa": str(r.sa),
            "laa": r.sa.is_locally_administered,
            "seq": r.sequence_number,
            "ssid": (r.ssid() or b"").decode("utf-8", "backslashreplace"),
            "tags": [ie.tag_id for ie in r.ies],
            "frame_length": r.frame_length,
            "channel": r.channel_hint,
        })
    header = ["timestamp", "sa", "laa", "seq", "ssid", "tags", "frame_length", "channel"]

    def flat(row):
        return [row["timestamp"], row["sa"], int(row["laa"]), row["seq"], row["ssid"],
                " ".join(map(str, row["tags"])), row["frame_length"],
                "" if row["channel"] is None else row["channel"]]

    footer = " ".join(f"{k}={v}" for k, v in summary.items())
    if args.format == "json":
        _dump_json({"stats": summary, "requests": rows})
    elif args.format == "csv":
        _write_csv([flat(r) for r in rows], header)
        print(f"# {footer}", file=sys.stderr)
    else:
        _table([flat(r) for r in rows], header)
        print(f"-- {footer}")
    return EXIT_OK


# -- anonsets ----------------------------------------------------------------

def _selectors(specs) -> list:
    if not specs:
        return list(fingerprint.DEFAULT_CHAIN)
    try:
        return [fingerprint.parse_selector(s) for s in specs]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_anonsets(args) -> int:
    selectors = _selectors(args.fields)
    records = _load(args.pcap)
    requests, _ = capture_io.extract_probe_requests(records, assume_fcs=args.assume_fcs)
    uaa_only = not args.all_macs
    retained = [r for r in requests if fingerprint.keep_request(r, uaa_only)]
    devices = fingerprint.aggregate_devices(retained, selectors[0], uaa_only=False,
                                            policy=args.device_key)
    rows = anonymity.compare_selectors(devices, selectors)

    if args.plot_data:
        with open(args.plot_data, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["selector", "request_count", "device_count"])
            for row in rows:
                for x, y in row.report.histogram:
                    w.writerow([row.selector.name, x, y])

    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(["selector", "set_rank", "key_hex", "device_count", "request_count"])
        for row in rows:
            for rank, s in enumerate(row.partition.sets, 1):
                w.writerow([row.selector.name, rank, s.key.hex(), s.device_count,
                            s.request_count])
    elif args.format == "json":
        reports = []
        for row in rows:
            d = row.report.as_dict()
            d["fields"] = row.selector.describe()
            d["dominant"] = row.dominant
            reports.append(d)
        _dump_json({
            "probe_requests": len(requests),
            "retained_requests": len(retained),
            "devices": len(devices),
            "device_key": args.device_key,
            "ds_absent_requests": fingerprint.count_absent(retained, TAG_DS_PARAMS),
            "variation": fingerprint.variation_stats(devices),
            "reports": reports,
        })
    else:
        print(f"probe requests: {len(requests)}  retained: {len(retained)}  "
              f"devices: {len(devices)}  device key: {args.device_key}")
        for row in rows:
            rep = row.report
            line = (f"{rep.selector}: {anonymity.summary_line(rep)} "
                    f"({rep.largest_set_devices}/{rep.total_devices} devices)")
            if row.dominant:
                line += "  dominant: " + "; ".join(
                    f"{k}={_short(v)}" for k, v in row.dominant.items())
            print(line)
    return EXIT_OK


def _short(value) -> str:
    if value is None:
        return "absent"
    if isinstance(value, list):
        return ",".join(map(str, value))
    return value if len(value) <= 32 else value[:32] + "..."


# -- craft -------------------------------------------------------------------

def _parse_rates(text: str) -> bytes:
    try:
        values = [int(v, 0) for v in text.replace(" ", "").split(",") if v]
        return bytes(values)
    except ValueError:
        raise UsageError(f"invalid --rates {text!r}") from None


def _seed(args) -> Optional[int]:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PROBEKIT_SEED")
    if env:
        try:
            return int(env, 0)
        except ValueError:
            raise UsageError(f"PROBEKIT_SEED is not an integer: {env!r}") from None
    return None


def cmd_craft(args) -> int:
    seed = _seed(args)
    if args.sa == "random":
        source = None
    else:
        try:
            source = MacAddress.parse(args.sa)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    if args.seq == "random":
        seq_start = None
    else:
        try:
            seq_start = int(args.seq, 0)
        except ValueError:
            raise UsageError(f"invalid --seq {args.seq!r}") from None
    spec = crafting.ProbeSpec(
        source=source, seed=seed, ssid=args.ssid, rates=_parse_rates(args.rates),
        seq_start=seq_start, burst_size=args.burst, gap_ns=round(args.gap_ms * 1e6),
        start_ns=round(args.start * 1e9), fcs=args.fcs)
    try:
        burst = crafting.build_burst(spec, radiotap=args.radiotap)
    except crafting.InvalidSpec as exc:
        raise UsageError(str(exc)) from None

    link_type = burst[0].link_type
    if args.output == "-":
        capture_io.write_capture(burst, link_type, sys.stdout.buffer)
        sys.stdout.buffer.flush()
        out = sys.stderr
    else:
        with open(args.output, "wb") as fh:
            capture_io.write_capture(burst, link_type, fh)
        out = sys.stdout

    frames = []
    for i, rec in enumerate(burst):
        frame, _ = capture_io.frame_of(rec)
        probe = crafting.build_generic_probe(spec, i)
        frames.append({"index": i, "timestamp": fmt_ts(rec.timestamp_ns), "sa": str(probe.sa),
                       "seq": probe.sequence_number, "frame_length": len(frame)})
    frame0 = capture_io.frame_of(burst[0])[0].hex()

    with contextlib.redirect_stdout(out):
        if args.format == "json":
            doc = {"output": args.output, "link_type": link_type, "frames": frames}
            if args.dump_hex:
                doc["frame0_hex"] = frame0
            _dump_json(doc)
        else:
            header = ["index", "timestamp", "sa", "seq", "frame_length"]
            rows = [[f[h] for h in header] for f in frames]
            (_write_csv if args.format == "csv" else _table)(rows, header)
            if args.dump_hex:
                print(f"frame0: {frame0}")
    return EXIT_OK


# -- ttt ---------------------------------------------------------------------

def cmd_ttt(args) -> int:
    ap = None
    if args.ap:
        try:
            ap = MacAddress.parse(args.ap)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    try:
        config = ttt.TtTConfig(ap_filter=ap, lookback_ns=round(args.window_s * NS),
                               min_gap_ns=round(args.gap_s * NS),
                               include_null_data=args.include_null_data)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    events = ttt.classify(_load(args.pcap), assume_fcs=args.assume_fcs)
    skipped: list = []
    ms = ttt.measure(events, config, skipped)
    if not ms:
        print("warning: no Time-to-Traffic measurement found", file=sys.stderr)
    summary = None
    if ms:
        st = ttt.stats([m.duration for m in ms], population=args.population_std)
        summary = {"n": st.n, "mean": st.mean, "median": st.median,
                   "stddev": None if math.isnan(st.stddev) else st.stddev,
                   "population_std": args.population_std}

    rows = [{"station": str(m.station_mac), "ap": str(m.ap), "start_ts": fmt_ts(m.start_ns),
             "end_ts": fmt_ts(m.end_ns), "duration_s": m.duration, "degraded": m.degraded,
             "start_frame": m.start_frame_ref, "end_frame": m.end_frame_ref} for m in ms]
    header = ["station", "ap", "start_ts", "end_ts", "duration_s", "degraded"]
    if args.format == "json":
        _dump_json({"measurements": rows, "summary": summary,
                    "skipped": [str(e) for e in skipped]})
        return EXIT_OK

    flat = [[r["station"], r["ap"], r["start_ts"], r["end_ts"], f"{r['duration_s']:.6f}",
             int(r["degraded"])] for r in rows]
    if args.format == "csv":
        _write_csv(flat, header)
        if summary:
            print(f"# n={summary['n']} mean={summary['mean']:.6f} "
                  f"median={summary['median']:.6f} stddev={_fmt_sd(summary['stddev'], 6)}",
                  file=sys.stderr)
    else:
        _table(flat, header)
        if summary:
            print(f"-- n={summary['n']}  average TtT {summary['mean']:.2f} s  "
                  f"median {summary['median']:.2f}  std. deviation "
                  f"{_fmt_sd(summary['stddev'], 2)}")
    return EXIT_OK


def _fmt_sd(value, digits):
    return "n/a" if value is None else f"{value:.{digits}f}"


# -- wiring ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="probekit", description="802.11 probe request analysis and crafting")
    p.add_argument("-v", "--verbose", action="store_true", help="log diagnostics")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fcs=True):
        sp.add_argument("--format", choices=("table", "csv", "json"), default="table")
        if fcs:
            sp.add_argument("--assume-fcs", action="store_true",
                            help="frames carry an FCS when radiotap has no Flags field")

    sp = sub.add_parser("parse", help="list probe requests in a capture")
    sp.add_argument("pcap", help="pcap file, or - for stdin")
    sp.add_argument("--uaa-only", action="store_true",
                    help="only globally unique (non-randomised) source addresses")
    common(sp)
    sp.set_defaults(func=cmd_parse)

    sp = sub.add_parser("anonsets", help="anonymity sets under reduced IE fingerprints")
    sp.add_argument("pcap")
    sp.add_argument("--fields", action="append", metavar="PRESET|TAGS",
                    help="preset name or comma list such as rates,ds,ht; repeatable "
                         "(default: rates / rates,ds / rates,ds,ht)")
    sp.add_argument("--device-key", choices=fingerprint.POLICIES, default="mode")
    sp.add_argument("--all-macs", action="store_true",
                    help="keep locally administered source addresses")
    sp.add_argument("--plot-data", metavar="CSV",
                    help="write (request_count, device_count) pairs per set")
    common(sp)
    sp.set_defaults(func=cmd_anonsets)

    sp = sub.add_parser("craft", help="write a burst of generic probe requests to pcap")
    sp.add_argument("--sa", default="random", help="source MAC or 'random' (LAA)")
    sp.add_argument("--seed", type=int, help="RNG seed (fallback: $PROBEKIT_SEED)")
    sp.add_argument("--ssid", help="SSID for a directed probe (default: undirected)")
    sp.add_argument("--rates", default="2,4,11,22", help="comma-separated rate bytes")
    sp.add_argument("--burst", type=int, default=1)
    sp.add_argument("--gap-ms", type=float, default=20.0)
    sp.add_argument("--seq", default="0", help="first sequence number or 'random'")
    sp.add_argument("--start", type=float, default=0.0, help="timestamp of frame 0 (epoch s)")
    sp.add_argument("--radiotap", action="store_true", help="prefix a minimal radiotap header")
    sp.add_argument("--fcs", action="store_true", help="append the 802.11 FCS")
    sp.add_argument("--dump-hex", action="store_true", help="print frame 0 as hex")
    sp.add_argument("-o", "--output", required=True, help="output pcap, or - for stdout")
    common(sp, fcs=False)
    sp.set_defaults(func=cmd_craft)

    sp = sub.add_parser("ttt", help="Time-to-Traffic measurements")
    sp.add_argument("pcap")
    sp.add_argument("--ap", help="only this BSSID")
    sp.add_argument("--window-s", type=float, default=30.0, help="lookback window")
    sp.add_argument("--gap-s", type=float, default=10.0, help="quiet gap separating attempts")
    sp.add_argument("--population-std", action="store_true")
    sp.add_argument("--include-null-data", action="store_true",
                    help="let null-function data frames end a measurement")
    common(sp)
    sp.set_defaults(func=cmd_ttt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"probekit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (capture_io.CaptureError, FrameError, OSError) as exc:
        print(f"probekit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()

"""Deterministic synthetic packet captures with ground-truth field counts.

Traffic is IPv4 TCP/UDP (optionally a sprinkling of ARP) with one heavy-hitter
destination taking ``heavy_hitter_fraction`` of packets and the rest drawn
from a Zipf-weighted host pool, so degree distributions are skewed.  Only
headers are captured; ``orig_len`` records the full wire length.

The sidecar ``<capture>.truth.tsv`` lists ``field  value  count`` for every
field value the generator emitted, formatted by the generator itself (not by
the extraction code), so it serves as an independent oracle.  Times are
rendered in UTC.
"""
from __future__ import annotations

import itertools
import os
import random
import struct
import time
from collections import Counter
from dataclasses import dataclass, replace
from pathlib import Path

from .compress import gzip_compress
from .pcap import GlobalHeader, LINKTYPE_ETHERNET, PcapWriter, RawPacket

TRUTH_SUFFIX = ".truth.tsv"

# 2017-04-12 11:49:36.188280 UTC, i.e. 07:49:36.18828 EDT
DEFAULT_START = 1491997776.18828

SNAPLEN = 96

TCP_FLAGS = (0x010, 0x010, 0x010, 0x018, 0x002, 0x012, 0x011, 0x004)
WELL_KNOWN = (80, 443, 22, 25, 53, 8080, 123, 993)


@dataclass(frozen=True)
class GenConfig:
    packet_count: int = 10_000
    seed: int = 0
    host_count: int = 500
    heavy_hitter_fraction: float = 0.3
    heavy_hitter: str = "1.1.1.1"
    start_time: float = DEFAULT_START
    mean_interarrival_us: float = 200.0
    tcp_fraction: float = 0.8
    arp_fraction: float = 0.0


def _ipv4_checksum(header: bytes) -> int:
    s = sum(struct.unpack("!10H", header))
    s = (s & 0xFFFF) + (s >> 16)
    s = (s & 0xFFFF) + (s >> 16)
    return ~s & 0xFFFF


def _quad(ip: int) -> str:
    return f"{ip >> 24}.{(ip >> 16) & 255}.{(ip >> 8) & 255}.{ip & 255}"


def _parse_quad(s: str) -> int:
    a, b, c, d = (int(x) for x in s.split("."))
    return (a << 24) | (b << 16) | (c << 8) | d


_MAC_DST = bytes.fromhex("001122334455")
_MAC_SRC = bytes.fromhex("66778899aabb")


def build_frame(src: str | int, dst: str | int, proto: int, total_len: int,
                sport: int = 0, dport: int = 0, flags: int = 0, ident: int = 0) -> tuple[bytes, int]:
    """Ethernet+IPv4+TCP/UDP headers for one packet; returns (bytes, wire length)."""
    src = _parse_quad(src) if isinstance(src, str) else src
    dst = _parse_quad(dst) if isinstance(dst, str) else dst
    ip = struct.pack("!BBHHHBBHII", 0x45, 0, total_len, ident & 0xFFFF, 0x4000, 64, proto, 0, src, dst)
    ip = ip[:10] + struct.pack("!H", _ipv4_checksum(ip)) + ip[12:]
    if proto == 6:
        l4 = struct.pack("!HHIIBBHHH", sport, dport, 0, 0, 0x50 | (flags >> 8), flags & 0xFF, 65535, 0, 0)
    elif proto == 17:
        l4 = struct.pack("!HHHH", sport, dport, max(8, total_len - 20), 0)
    else:
        l4 = b""
    return _MAC_DST + _MAC_SRC + b"\x08\x00" + ip + l4, 14 + total_len


def _arp_frame(rng: random.Random) -> bytes:
    body = struct.pack("!HHBBH6s4s6s4s", 1, 0x0800, 6, 4, 1, _MAC_SRC, rng.randbytes(4), b"\0" * 6, rng.randbytes(4))
    return b"\xff" * 6 + _MAC_SRC + b"\x08\x06" + body


class _Truth:
    def __init__(self, t0_us: int):
        self.t0 = t0_us
        self.counts: Counter = Counter()
        self._sec = None
        self._stamp = ""

    def time(self, ts_us: int) -> None:
        sec, usec = divmod(ts_us, 1_000_000)
        d = ts_us - self.t0
        self.counts["frame.time_relative", "%d.%06d000" % divmod(d, 1_000_000)] += 1
        if sec != self._sec:
            self._sec, self._stamp = sec, time.strftime("%Y %b %d %H:%M:%S", time.gmtime(sec))
        self.counts["frame.time", "%s.%05d UTC" % (self._stamp, usec // 10)] += 1

    def add(self, **fields) -> None:
        for k, v in fields.items():
            self.counts[k.replace("_", ".", 1), str(v)] += 1


def generate_packets(cfg: GenConfig) -> tuple[list[RawPacket], Counter]:
    rng = random.Random(cfg.seed)
    hosts = rng.sample(range(0x0B000000, 0xDF000000), cfg.host_count)
    weights = list(itertools.accumulate(1.0 / (i + 1) for i in range(cfg.host_count)))
    heavy = _parse_quad(cfg.heavy_hitter)
    ts = int(round(cfg.start_time * 1_000_000))
    truth = _Truth(ts)
    packets = []
    for n in range(cfg.packet_count):
        if n:
            ts += int(rng.expovariate(1.0 / cfg.mean_interarrival_us)) if cfg.mean_interarrival_us > 0 else 0
        sec, usec = divmod(ts, 1_000_000)
        truth.time(ts)
        if cfg.arp_fraction and rng.random() < cfg.arp_fraction:
            packets.append(RawPacket(sec, usec, _arp_frame(rng), 42))
            continue
        src = rng.choice(hosts)
        if rng.random() < cfg.heavy_hitter_fraction:
            dst = heavy
        else:
            dst = rng.choices(hosts, cum_weights=weights)[0]
        if rng.random() < cfg.tcp_fraction:
            proto = 6
            total = rng.choice((40, 52, 1500, 1500, 576, rng.randint(41, 1500)))
            flags = rng.choice(TCP_FLAGS)
            if rng.random() < 0.5:
                sport, dport = rng.choice(WELL_KNOWN), rng.randint(1024, 65535)
            else:
                sport, dport = rng.randint(1024, 65535), rng.choice(WELL_KNOWN)
            truth.add(ip_dst=_quad(dst), ip_len=total, ip_proto=6, ip_src=_quad(src),
                      tcp_dstport=dport, tcp_flags="0x%08x" % flags, tcp_srcport=sport)
        else:
            proto, flags = 17, 0
            total = rng.randint(28, 1500)
            sport, dport = rng.randint(1024, 65535), rng.choice((53, 123, 443, 1900))
            truth.add(ip_dst=_quad(dst), ip_len=total, ip_proto=17, ip_src=_quad(src))
        data, wire = build_frame(src, dst, proto, total, sport, dport, flags, n)
        packets.append(RawPacket(sec, usec, data, wire))
    return packets, truth.counts


def write_truth(counts: Counter, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("field\tvalue\tcount\n")
        for (field, value), c in sorted(counts.items()):
            f.write(f"{field}\t{value}\t{c}\n")


def read_truth(path: str | os.PathLike) -> Counter:
    counts: Counter = Counter()
    with open(path, encoding="utf-8") as f:
        next(f)
        for line in f:
            field, value, c = line.rstrip("\n").split("\t")
            counts[field, value] += int(c)
    return counts


def generate_capture(cfg: GenConfig, path: str | os.PathLike) -> Path:
    """Write a capture to ``path`` plus its ``.truth.tsv`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    packets, counts = generate_packets(cfg)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        w = PcapWriter(f, GlobalHeader("<", (2, 4), SNAPLEN, LINKTYPE_ETHERNET))
        for p in packets:
            w.write(p)
    os.replace(tmp, path)
    write_truth(counts, truth_path(path))
    return path


def truth_path(capture: str | os.PathLike) -> Path:
    capture = Path(capture)
    name = capture.name
    for ext in (".gz", ".pcap"):
        if name.endswith(ext):
            name = name[: -len(ext)]
    return capture.with_name(name + TRUTH_SUFFIX)


def generate_dataset(out_dir: str | os.PathLike, cfg: GenConfig, n_files: int = 1,
                     prefix: str = "cap") -> list[Path]:
    """Write ``n_files`` gzipped captures splitting ``cfg.packet_count`` between them.

    Files follow each other in time; each gets its own derived seed.  Only
    the ``.pcap.gz`` and truth sidecars are kept.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    per, extra = divmod(cfg.packet_count, n_files)
    start = cfg.start_time
    outputs = []
    for i in range(n_files):
        sub = replace(cfg, packet_count=per + (i < extra), seed=cfg.seed * 1_000_003 + i, start_time=start)
        raw = generate_capture(sub, out_dir / f"{prefix}{i:03d}.pcap")
        outputs.append(gzip_compress(raw))
        raw.unlink()
        start += sub.packet_count * cfg.mean_interarrival_us / 1e6 + 1.0
    return outputs


def dataset_truth(out_dir: str | os.PathLike) -> Counter:
    total: Counter = Counter()
    for p in sorted(Path(out_dir).glob("*" + TRUTH_SUFFIX)):
        total.update(read_truth(p))
    return total

"""Telemetry encoders: CSV files and "RTB1" UDP datagrams."""

from __future__ import annotations

import logging
import socket
import struct
from pathlib import Path
from typing import Iterable

from .sim import TelemetryRecord, Trajectory

log = logging.getLogger(__name__)

CSV_HEADER = "t,v,theta,theta_dot,beta,beta_cmd,omega_w,u_gamma,v_hope,theta_hope,ff_saturated"

MAGIC = b"RTB1"
# magic, sequence, ten float64 signals, ff_saturated as float32 0.0/1.0
DATAGRAM = struct.Struct("<4sI10df")
DATAGRAM_SIZE = DATAGRAM.size  # 92


def format_value(x: float) -> str:
    return f"{x:.9g}"


def csv_text(records: Iterable[TelemetryRecord]) -> str:
    lines = [CSV_HEADER]
    for rec in records:
        lines.append(",".join(format_value(x) for x in rec))
    return "\n".join(lines) + "\n"


def write_csv(traj: Trajectory, path: str | Path) -> None:
    # bytes, not text mode, so "\n" is never translated
    Path(path).write_bytes(csv_text(traj.records).encode("ascii"))


def read_csv(path: str | Path) -> list[TelemetryRecord]:
    lines = Path(path).read_text(encoding="ascii").splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: unexpected CSV header")
    return [TelemetryRecord(*(float(x) for x in line.split(","))) for line in lines[1:]]


def encode_datagram(seq: int, rec: TelemetryRecord) -> bytes:
    return DATAGRAM.pack(MAGIC, seq & 0xFFFF_FFFF, *rec[:10], 1.0 if rec.ff_saturated else 0.0)


def decode_datagram(data: bytes) -> tuple[int, TelemetryRecord]:
    if len(data) != DATAGRAM_SIZE:
        raise ValueError(f"datagram is {len(data)} bytes, expected {DATAGRAM_SIZE}")
    magic, seq, *values = DATAGRAM.unpack(data)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    return seq, TelemetryRecord(*values)


def parse_endpoint(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not host or not port.isdigit() or not 0 < int(port) < 65536:
        raise ValueError(f"expected host:port, got {text!r}")
    return host, int(port)


class UdpPublisher:
    """Fire-and-forget publisher, one datagram per record.

    Send failures are logged once and otherwise ignored so a missing
    listener never stops a run.
    """

    def __init__(self, host: str, port: int):
        self.address = (host, port)
        self.seq = 0
        self._warned = False
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.setblocking(False)

    def send(self, rec: TelemetryRecord) -> None:
        data = encode_datagram(self.seq, rec)
        self.seq += 1
        try:
            self._sock.sendto(data, self.address)
        except OSError as exc:
            if not self._warned:
                log.warning("telemetry to %s:%d failed: %s", *self.address, exc)
                self._warned = True

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def publish_udp(records: Iterable[TelemetryRecord], host: str, port: int) -> int:
    """Send recorded telemetry; returns the number of datagrams attempted."""
    with UdpPublisher(host, port) as pub:
        for rec in records:
            pub.send(rec)
        return pub.seq

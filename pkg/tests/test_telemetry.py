import logging
import socket

import pytest

from rotunsim.control import ControlConfig
from rotunsim.plant import PlantParams
from rotunsim.sim import Scenario, TelemetryRecord, TimelineSegment, run
from rotunsim.telemetry import (
    CSV_HEADER,
    DATAGRAM_SIZE,
    UdpPublisher,
    csv_text,
    decode_datagram,
    encode_datagram,
    parse_endpoint,
    publish_udp,
    read_csv,
    write_csv,
)

P, CFG = PlantParams(), ControlConfig()


def short_run(seed=0):
    sc = Scenario(1.0, [TimelineSegment(0, 2.0, 0.0), TimelineSegment(0.5, 2.0, 0.1)], seed=seed)
    return run(sc, P, CFG)


def test_header_is_fixed():
    assert CSV_HEADER == "t,v,theta,theta_dot,beta,beta_cmd,omega_w,u_gamma,v_hope,theta_hope,ff_saturated"
    assert CSV_HEADER.split(",") == list(TelemetryRecord._fields)


def test_csv_rows_and_bytes(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(short_run(), path)
    data = path.read_bytes()
    lines = data.decode().split("\n")
    assert lines[0] == CSV_HEADER
    assert lines[-1] == "" and len(lines) - 2 == 101
    assert b"\r" not in data
    write_csv(short_run(), tmp_path / "b.csv")
    assert (tmp_path / "b.csv").read_bytes() == data


def test_nine_significant_digits():
    rec = TelemetryRecord(0.01, 1 / 3, -2e-12, 123456789.123, 0, 0, 0, 0, 0, 0, 1.0)
    row = csv_text([rec]).split("\n")[1].split(",")
    assert row[:4] == ["0.01", "0.333333333", "-2e-12", "123456789"]
    assert row[-1] == "1"


def test_csv_read_back(tmp_path):
    traj = short_run()
    write_csv(traj, tmp_path / "a.csv")
    back = read_csv(tmp_path / "a.csv")
    assert len(back) == len(traj.records)
    for a, b in zip(back, traj.records):
        assert a == pytest.approx(b, rel=1e-8, abs=1e-300)


def test_datagram_layout():
    rec = TelemetryRecord(0.5, 1.0, 0.1, -0.2, 0.3, 0.4, 50.0, -3.0, 1.0, 0.26, 1.0)
    data = encode_datagram(0, rec)
    assert len(data) == DATAGRAM_SIZE == 92
    assert data[:4] == b"RTB1" == bytes([0x52, 0x54, 0x42, 0x31])
    assert data[4:8] == b"\x00\x00\x00\x00"
    assert decode_datagram(data) == (0, rec)
    assert encode_datagram(2 ** 32 + 5, rec)[4:8] == (5).to_bytes(4, "little")


def test_decode_rejects_garbage():
    with pytest.raises(ValueError):
        decode_datagram(b"RTB1")
    bad = b"XXXX" + encode_datagram(0, TelemetryRecord(*[0.0] * 11))[4:]
    with pytest.raises(ValueError):
        decode_datagram(bad)


def test_csv_and_udp_agree_per_tick():
    traj = short_run(seed=3)
    rows = csv_text(traj.records).split("\n")[1:-1]
    for seq, (rec, row) in enumerate(zip(traj.records, rows)):
        got_seq, got = decode_datagram(encode_datagram(seq, rec))
        assert got_seq == seq
        assert [float(x) for x in row.split(",")] == pytest.approx(list(got), rel=1e-8, abs=1e-300)


def test_live_udp_roundtrip():
    rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    rx.bind(("127.0.0.1", 0))
    rx.settimeout(2.0)
    try:
        traj = short_run()
        n = publish_udp(traj.records[:5], "127.0.0.1", rx.getsockname()[1])
        assert n == 5
        got = [decode_datagram(rx.recv(1024)) for _ in range(5)]
    finally:
        rx.close()
    assert [s for s, _ in got] == [0, 1, 2, 3, 4]
    assert [r for _, r in got] == traj.records[:5]


def test_send_failure_warns_once_and_continues(monkeypatch, caplog):
    pub = UdpPublisher("127.0.0.1", 9)

    def refuse(*_):
        raise OSError("network unreachable")

    monkeypatch.setattr(pub, "_sock", type("S", (), {"sendto": staticmethod(refuse), "close": lambda self: None})())
    with caplog.at_level(logging.WARNING, logger="rotunsim.telemetry"):
        for rec in short_run().records[:3]:
            pub.send(rec)
    assert pub.seq == 3
    assert len([r for r in caplog.records if "failed" in r.message]) == 1


@pytest.mark.parametrize("text", ["localhost", "host:", ":99", "h:0", "h:70000", "h:x"])
def test_bad_endpoints(text):
    with pytest.raises(ValueError):
        parse_endpoint(text)


def test_endpoint_parses():
    assert parse_endpoint("127.0.0.1:9000") == ("127.0.0.1", 9000)

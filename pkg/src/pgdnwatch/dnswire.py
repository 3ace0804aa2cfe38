"""Minimal DNS wire-format client for the live prober.

Covers exactly the record types the pipeline consumes (A, AAAA, NS,
CNAME, MX, SOA, TXT) over UDP with a TCP retry on truncation.  No
external resolver library; the encoder and parser are unit-tested against
hand-built packets.
"""

from __future__ import annotations

import socket
import struct

QTYPE = {
    "A": 1,
    "NS": 2,
    "CNAME": 5,
    "SOA": 6,
    "MX": 15,
    "TXT": 16,
    "AAAA": 28,
}
_QTYPE_NAME = {v: k for k, v in QTYPE.items()}

FLAG_RD = 0x0100
FLAG_TC = 0x0200


def encode_name(name: str) -> bytes:
    out = b""
    for label in name.rstrip(".").split("."):
        raw = label.encode("ascii")
        if not 0 < len(raw) < 64:
            raise ValueError(f"bad label in {name!r}")
        out += bytes([len(raw)]) + raw
    return out + b"\x00"


def build_query(name: str, qtype: str, txid: int = 0x1234) -> bytes:
    header = struct.pack(">HHHHHH", txid, FLAG_RD, 1, 0, 0, 0)
    question = encode_name(name) + struct.pack(">HH", QTYPE[qtype], 1)
    return header + question


def decode_name(data: bytes, offset: int) -> tuple[str, int]:
    """Decompress a possibly pointer-compressed name.

    Returns the dotted name and the offset just past its first encoding.
    """
    labels = []
    jumps = 0
    end = None
    while True:
        if offset >= len(data):
            raise ValueError("truncated name")
        length = data[offset]
        if length & 0xC0 == 0xC0:
            if offset + 1 >= len(data):
                raise ValueError("truncated pointer")
            pointer = ((length & 0x3F) << 8) | data[offset + 1]
            if end is None:
                end = offset + 2
            offset = pointer
            jumps += 1
            if jumps > 64:
                raise ValueError("compression loop")
            continue
        if length == 0:
            if end is None:
                end = offset + 1
            return ".".join(labels), end
        offset += 1
        labels.append(data[offset : offset + length].decode("ascii", "replace"))
        offset += length


def parse_response(data: bytes) -> list[tuple[str, str, object]]:
    """(owner, type-name, parsed rdata) for each answer record.

    SOA rdata parses to a dict of its timing fields; MX to (preference,
    exchange); TXT to the joined character strings; address and name types
    to plain strings.  Unknown types are skipped.
    """
    if len(data) < 12:
        raise ValueError("short DNS message")
    txid, flags, qdcount, ancount, _, _ = struct.unpack(">HHHHHH", data[:12])
    offset = 12
    for _ in range(qdcount):
        _, offset = decode_name(data, offset)
        offset += 4
    answers = []
    for _ in range(ancount):
        owner, offset = decode_name(data, offset)
        rtype, rclass, ttl, rdlength = struct.unpack(
            ">HHIH", data[offset : offset + 10]
        )
        offset += 10
        rdata = data[offset : offset + rdlength]
        rdata_offset = offset
        offset += rdlength
        type_name = _QTYPE_NAME.get(rtype)
        if type_name is None:
            continue
        if type_name == "A" and len(rdata) == 4:
            value: object = ".".join(str(b) for b in rdata)
        elif type_name == "AAAA" and len(rdata) == 16:
            value = socket.inet_ntop(socket.AF_INET6, rdata)
        elif type_name in ("NS", "CNAME"):
            value, _ = decode_name(data, rdata_offset)
        elif type_name == "MX":
            pref = struct.unpack(">H", rdata[:2])[0]
            exchange, _ = decode_name(data, rdata_offset + 2)
            value = (pref, exchange)
        elif type_name == "SOA":
            mname, pos = decode_name(data, rdata_offset)
            rname, pos = decode_name(data, pos)
            serial, refresh, retry, expire, minimum = struct.unpack(
                ">IIIII", data[pos : pos + 20]
            )
            value = {
                "mname": mname,
                "rname": rname,
                "serial": serial,
                "refresh": refresh,
                "retry": retry,
                "expire": expire,
                "minimum": minimum,
                "record_ttl": ttl,
            }
        elif type_name == "TXT":
            chunks = []
            pos = 0
            while pos < len(rdata):
                n = rdata[pos]
                chunks.append(rdata[pos + 1 : pos + 1 + n].decode("utf-8", "replace"))
                pos += 1 + n
            value = "".join(chunks)
        else:
            continue
        answers.append((owner, type_name, value))
    return answers


def is_truncated(data: bytes) -> bool:
    if len(data) < 4:
        return False
    flags = struct.unpack(">H", data[2:4])[0]
    return bool(flags & FLAG_TC)


def query(
    name: str,
    qtype: str,
    server: str = "8.8.8.8",
    timeout: float = 5.0,
    txid: int = 0x1234,
) -> list[tuple[str, str, object]]:
    """One question over UDP, falling back to TCP when truncated."""
    message = build_query(name, qtype, txid)
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        sock.settimeout(timeout)
        sock.sendto(message, (server, 53))
        data, _ = sock.recvfrom(4096)
    if is_truncated(data):
        with socket.create_connection((server, 53), timeout=timeout) as sock:
            sock.sendall(struct.pack(">H", len(message)) + message)
            raw = b""
            while len(raw) < 2:
                raw += sock.recv(4096)
            length = struct.unpack(">H", raw[:2])[0]
            while len(raw) < 2 + length:
                raw += sock.recv(4096)
            data = raw[2 : 2 + length]
    return parse_response(data)

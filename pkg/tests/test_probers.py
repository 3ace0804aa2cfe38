import datetime as dt
import struct

import pytest

from pgdnwatch import dnswire
from pgdnwatch.probers import (
    extract_page_fields,
    parse_der_certificate,
    parse_whois_text,
)


class TestDnsEncoding:
    def test_build_query_bytes(self):
        q = dnswire.build_query("example.com", "A", txid=0x1234)
        header = struct.pack(">HHHHHH", 0x1234, 0x0100, 1, 0, 0, 0)
        question = b"\x07example\x03com\x00" + struct.pack(">HH", 1, 1)
        assert q == header + question

    def test_encode_rejects_oversized_label(self):
        with pytest.raises(ValueError):
            dnswire.encode_name("a" * 64 + ".com")


def response(answers: bytes, ancount: int, question=b"\x07example\x03com\x00" + struct.pack(">HH", 1, 1)):
    header = struct.pack(">HHHHHH", 0x1234, 0x8180, 1, ancount, 0, 0)
    return header + question + answers


class TestDnsParsing:
    def test_a_record_with_compression(self):
        # answer name is a pointer to offset 12 (the question name)
        answer = b"\xc0\x0c" + struct.pack(">HHIH", 1, 1, 300, 4) + bytes([1, 2, 3, 4])
        parsed = dnswire.parse_response(response(answer, 1))
        assert parsed == [("example.com", "A", "1.2.3.4")]

    def test_cname_with_compressed_target(self):
        # target "cdn.example.com" reuses the question name via pointer
        rdata = b"\x03cdn\xc0\x0c"
        answer = b"\xc0\x0c" + struct.pack(">HHIH", 5, 1, 60, len(rdata)) + rdata
        parsed = dnswire.parse_response(response(answer, 1))
        assert parsed == [("example.com", "CNAME", "cdn.example.com")]

    def test_mx_record(self):
        rdata = struct.pack(">H", 10) + b"\x04mail\xc0\x0c"
        answer = b"\xc0\x0c" + struct.pack(">HHIH", 15, 1, 60, len(rdata)) + rdata
        parsed = dnswire.parse_response(response(answer, 1))
        assert parsed == [("example.com", "MX", (10, "mail.example.com"))]

    def test_soa_record_fields(self):
        mname = b"\x03ns1\xc0\x0c"
        rname = b"\x05admin\xc0\x0c"
        times = struct.pack(">IIIII", 2024081001, 7200, 600, 1209600, 3600)
        rdata = mname + rname + times
        answer = b"\xc0\x0c" + struct.pack(">HHIH", 6, 1, 500, len(rdata)) + rdata
        ((owner, rtype, soa),) = dnswire.parse_response(response(answer, 1))
        assert rtype == "SOA"
        assert soa["refresh"] == 7200
        assert soa["retry"] == 600
        assert soa["minimum"] == 3600
        assert soa["record_ttl"] == 500

    def test_txt_record_chunks(self):
        rdata = b"\x05hello\x06 world"
        answer = b"\xc0\x0c" + struct.pack(">HHIH", 16, 1, 60, len(rdata)) + rdata
        parsed = dnswire.parse_response(response(answer, 1))
        assert parsed == [("example.com", "TXT", "hello world")]

    def test_aaaa_record(self):
        rdata = bytes.fromhex("20010db8000000000000000000000001")
        answer = b"\xc0\x0c" + struct.pack(">HHIH", 28, 1, 60, 16) + rdata
        parsed = dnswire.parse_response(response(answer, 1))
        assert parsed == [("example.com", "AAAA", "2001:db8::1")]

    def test_truncation_flag(self):
        header = struct.pack(">HHHHHH", 1, 0x8380, 0, 0, 0, 0)
        assert dnswire.is_truncated(header)
        header = struct.pack(">HHHHHH", 1, 0x8180, 0, 0, 0, 0)
        assert not dnswire.is_truncated(header)

    def test_compression_loop_rejected(self):
        data = struct.pack(">HHHHHH", 1, 0x8180, 0, 1, 0, 0) + b"\xc0\x0c"
        with pytest.raises(ValueError):
            dnswire.decode_name(data, 12)

    def test_short_message_rejected(self):
        with pytest.raises(ValueError):
            dnswire.parse_response(b"\x00\x01")


class TestPageExtraction:
    def test_title_and_metas(self):
        html = (
            "<html><head><TITLE> Big \n Wins </TITLE>"
            "<meta name='keywords' content='casino,slots'>"
            '<meta name="description" content="play now">'
            "</head><body></body></html>"
        )
        snap = extract_page_fields(html, 200)
        assert snap.title == "Big Wins"
        assert snap.keywords == "casino,slots"
        assert snap.description == "play now"
        assert snap.status_code == 200

    def test_untitled_page(self):
        snap = extract_page_fields("<html><body>x</body></html>", 404)
        assert snap.title is None

    def test_empty_title_normalized(self):
        snap = extract_page_fields("<html><title>   </title>x</html>", 200)
        assert snap.title is None


class TestWhoisParsing:
    SAMPLE = """\
   Domain Name: EXAMPLE.TOP
   Registrar: NameCheap, Inc.
   Creation Date: 2024-08-10T07:11:52Z
   Registry Expiry Date: 2025-08-10T07:11:52Z
"""

    def test_registrar_and_duration(self):
        rec = parse_whois_text(self.SAMPLE)
        assert rec.registrar == "NameCheap, Inc."
        assert rec.registration_duration_days == 365

    def test_unparseable_text(self):
        assert parse_whois_text("No match for domain") is None

    def test_alternate_date_style(self):
        text = "Registrar: Example LLC\ncreated: 2024.08.10\npaid-till: 2026.08.10\n"
        rec = parse_whois_text(text)
        assert rec.registration_duration_days == 730


class TestCertParsing:
    def test_self_signed_round_trip(self):
        from cryptography import x509
        from cryptography.hazmat.primitives import hashes
        from cryptography.hazmat.primitives.asymmetric import ec
        from cryptography.x509.oid import NameOID

        key = ec.generate_private_key(ec.SECP256R1())
        name = x509.Name([
            x509.NameAttribute(NameOID.COMMON_NAME, "R3 Test CA"),
        ])
        not_before = dt.datetime(2024, 8, 10, tzinfo=dt.timezone.utc)
        not_after = dt.datetime(2024, 11, 8, tzinfo=dt.timezone.utc)
        cert = (
            x509.CertificateBuilder()
            .subject_name(name)
            .issuer_name(name)
            .public_key(key.public_key())
            .serial_number(x509.random_serial_number())
            .not_valid_before(not_before)
            .not_valid_after(not_after)
            .sign(key, hashes.SHA256())
        )
        from cryptography.hazmat.primitives.serialization import Encoding

        rec = parse_der_certificate(cert.public_bytes(Encoding.DER))
        assert rec.issuer == "R3 Test CA"
        assert rec.duration_days == 90

    def test_garbage_rejected(self):
        assert parse_der_certificate(b"not a certificate") is None

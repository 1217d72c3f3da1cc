"""TCP harness tests: echo fidelity, origin/transducer shims, report
decoding, and timing-based segmentation."""

import random
from concurrent.futures import ThreadPoolExecutor

import pytest

import conftest
from httpdelta.net import (
    Endpoint,
    RecoveryError,
    ResponseSegments,
    Segment,
    _split_responses,
    decode_origin_report,
    exchange_stream,
    recover_transduction,
    run_echo_server,
    serve_origin,
    serve_transducer,
)
from httpdelta.personalities import interpret
from httpdelta.wire import RequestStream

# Tight timings keep the suite fast; the client read window must exceed
# the server idle window so responses land inside it.
SERVER_IDLE_MS = 20
CLIENT_TIMEOUT_MS = 60


def client_for(handle):
    return Endpoint(handle.endpoint.host, handle.endpoint.port,
                    read_timeout_ms=CLIENT_TIMEOUT_MS)


def observable(report):
    """Entry content as agreement sees it: the informational framing
    tag is not transported over the wire and is excluded."""
    return [(e.method, e.uri, e.version, e.headers, e.body)
            for e in report.entries]


class TestEndpoint:
    def test_validation(self):
        with pytest.raises(ValueError):
            Endpoint("h", 0)
        with pytest.raises(ValueError):
            Endpoint("h", 80, read_timeout_ms=5)
        Endpoint("h", 80, read_timeout_ms=10)


class TestEcho:
    def test_bit_exact_on_1000_random_payloads(self):
        """Criterion-8 echo fidelity: 1,000 random payloads, including
        one containing every byte value, come back bit-exact."""
        rnd = random.Random(2718)
        payloads = [bytes(rnd.randrange(256)
                          for _ in range(rnd.randint(1, 400)))
                    for _ in range(999)]
        payloads.append(bytes(range(256)))
        with run_echo_server(idle_ms=SERVER_IDLE_MS) as server:
            # 32 concurrent exchanges contend for the accept loop; give
            # the responses a wider window than the direct-client tests.
            endpoint = Endpoint(server.endpoint.host, server.endpoint.port,
                                read_timeout_ms=200)

            def roundtrip(payload):
                r = exchange_stream(endpoint, RequestStream.of(payload))
                bodies = [b for _s, b in _split_responses(r.data)]
                return b"".join(bodies)

            with ThreadPoolExecutor(max_workers=32) as pool:
                echoed = list(pool.map(roundtrip, payloads))
        assert echoed == payloads

    def test_per_element_segmentation(self):
        with run_echo_server(idle_ms=SERVER_IDLE_MS) as server:
            r = exchange_stream(client_for(server),
                                RequestStream.of(b"one", b"two", b"three"))
        bodies = [b for _s, b in _split_responses(r.data)]
        assert bodies == [b"one", b"two", b"three"]
        assert [s.element_index for s in r.segments] == [0, 1, 2]
        assert not r.reset


class TestOriginShim:
    def test_adapter_equivalence_on_figures(self, registry):
        """decode(exchange(serve_origin(p))) matches interpret(p) on the
        figure payloads for representative personalities."""
        streams = [RequestStream.of(conftest.FIG5_PAYLOAD),
                   RequestStream.of(conftest.FIG6_PAYLOAD),
                   RequestStream.of(b"GET / HTTP/1.1\r\nHost: a\r\n\r\n"),
                   RequestStream.of(b"POST / HTTP/1.1\r\nHost: a\r\n\r\n")]
        for name in ("rfc-oracle", "litespeed-like", "node-like",
                     "strict-411-like"):
            p = registry[name]
            with serve_origin(p, idle_ms=SERVER_IDLE_MS) as server:
                endpoint = client_for(server)
                for stream in streams:
                    local = interpret(p, stream)
                    remote = decode_origin_report(
                        exchange_stream(endpoint, stream))
                    assert observable(remote) == observable(local), \
                        (name, stream)
                    if local.rejection is None:
                        assert remote.rejection is None
                    else:
                        assert remote.rejection == local.rejection

    def test_adapter_equivalence_on_random_streams(self, registry):
        from _support import random_fuzz_input
        rnd = random.Random(17)
        p = registry["rfc-oracle"]
        streams = [RequestStream.of(random_fuzz_input(rnd) or b"x")
                   for _ in range(30)]
        with serve_origin(p, idle_ms=SERVER_IDLE_MS) as server:
            endpoint = client_for(server)

            def check(stream):
                local = interpret(p, stream)
                remote = decode_origin_report(
                    exchange_stream(endpoint, stream))
                assert observable(remote) == observable(local)
                assert (remote.rejection is None) \
                    == (local.rejection is None)

            with ThreadPoolExecutor(max_workers=8) as pool:
                list(pool.map(check, streams))

    def test_loop_detected_produces_no_response(self, registry):
        p = registry["mongoose-like"]
        stream = RequestStream.of(conftest.NEGATIVE_CL_PAYLOAD)
        with serve_origin(p, idle_ms=SERVER_IDLE_MS) as server:
            r = exchange_stream(client_for(server), stream)
        assert r.data == b""


def patient_client_for(handle):
    # The transducer shim relays after its own idle window plus the
    # inter-element gap plus the backend idle window, so the client must
    # tolerate longer silences than against a direct server.
    return Endpoint(handle.endpoint.host, handle.endpoint.port,
                    read_timeout_ms=250)


class TestTransducerShim:
    def test_timing_segmentation_identity_vs_unpipeliner(self, registry):
        """Criterion-8 segmentation: a pipelined 2-request element comes
        out of an identity forwarder as one backend read period, but out
        of the un-pipeliner as two."""
        pipelined = RequestStream.of(b"GET /a HTTP/1.1\r\nHost: a\r\n\r\n"
                                     b"GET /b HTTP/1.1\r\nHost: a\r\n\r\n")
        counts = {}
        with run_echo_server(idle_ms=SERVER_IDLE_MS) as echo:
            for name in ("identity", "unpipeliner"):
                with serve_transducer(registry[name], echo.endpoint,
                                      idle_ms=SERVER_IDLE_MS,
                                      element_gap_ms=60) as shim:
                    r = exchange_stream(patient_client_for(shim),
                                        pipelined)
                    counts[name] = len(recover_transduction(r).elements)
        assert counts == {"identity": 1, "unpipeliner": 2}

    def test_recovered_bytes_match_local_transduction(self, registry):
        from httpdelta.personalities import transduce
        stream = RequestStream.of(conftest.FIG5_PAYLOAD)
        p = registry["haproxy-like"]
        local = transduce(p, stream).forwarded
        with run_echo_server(idle_ms=SERVER_IDLE_MS) as echo:
            with serve_transducer(p, echo.endpoint,
                                  idle_ms=SERVER_IDLE_MS) as shim:
                r = exchange_stream(patient_client_for(shim), stream)
        assert recover_transduction(r).data == local.data

    def test_rejection_surfaces_as_400(self, registry):
        stream = RequestStream.of(conftest.FIG6_PAYLOAD)
        p = registry["akamai-mitigation-like"]
        with run_echo_server(idle_ms=SERVER_IDLE_MS) as echo:
            with serve_transducer(p, echo.endpoint,
                                  idle_ms=SERVER_IDLE_MS) as shim:
                r = exchange_stream(patient_client_for(shim), stream)
        responses = _split_responses(r.data)
        assert responses and responses[0][0] == 400
        with pytest.raises(RecoveryError):
            recover_transduction(r)


class TestDecoding:
    def test_split_responses(self):
        data = (b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nhi"
                b"HTTP/1.1 411 Length Required\r\nContent-Length: 0\r\n\r\n")
        assert _split_responses(data) == [(200, b"hi"), (411, b"")]

    def test_split_rejects_garbage(self):
        with pytest.raises(RecoveryError):
            _split_responses(b"not http at all")
        with pytest.raises(RecoveryError):
            _split_responses(b"HTTP/1.1 200 OK\r\nContent-Length: 5\r\n\r\nab")

    def test_decode_empty_exchange(self):
        report = decode_origin_report(ResponseSegments(()))
        assert report.entries == () and report.rejection is None

    def test_decode_malformed_sets_errors(self):
        body = b"junk"
        data = (b"HTTP/1.1 200 OK\r\nContent-Length: %d\r\n\r\n" % len(body)
                + body)
        report = decode_origin_report(
            ResponseSegments((Segment(data, 0),)))
        assert report.decode_errors

    def test_recover_requires_responses(self):
        with pytest.raises(RecoveryError):
            recover_transduction(ResponseSegments(()))

"""Coverage-map tests: edge hashing, bucketed signatures, novelty
state, and the external map-file control protocol."""

import os
import random
import signal
import threading

import pytest

from httpdelta.coverage import (
    CLEAR_SIGNAL,
    DUMP_SIGNAL,
    MAP_SIZE,
    CoverageMap,
    DeltaState,
    ExternalTarget,
    MockControlChannel,
    SignalControlChannel,
    SnapshotError,
    UNTRACED_SIGNATURE,
    external_clear,
    external_snapshot,
    path_signature,
)


class TestCoverageMap:
    def test_edge_index_formula(self):
        # Frozen multiplicative-hash indices, computed independently.
        m = CoverageMap()
        m.record_edge(1, 2)
        assert m.cells[46623] == 1
        m.record_edge(5, 9)
        assert m.cells[61540] == 1

    def test_saturation(self):
        m = CoverageMap()
        for _ in range(300):
            m.record_edge(3, 4)
        assert max(m.cells) == 255

    def test_size_validation(self):
        CoverageMap(bytes(MAP_SIZE))
        with pytest.raises(ValueError):
            CoverageMap(bytes(MAP_SIZE - 1))

    def test_clear(self):
        m = CoverageMap()
        m.record_edge(1, 2)
        m.clear()
        assert m == CoverageMap()
        assert path_signature(m) == UNTRACED_SIGNATURE

    def test_touched_index_matches_bytes_construction(self):
        rnd = random.Random(99)
        m = CoverageMap()
        for _ in range(500):
            m.record_edge(rnd.randrange(1 << 20), rnd.randrange(1 << 20))
        rebuilt = CoverageMap(bytes(m.cells))
        assert m.nonzero_cells() == rebuilt.nonzero_cells()
        assert path_signature(m) == path_signature(rebuilt)


class TestPathSignature:
    def test_untraced_constant(self):
        assert UNTRACED_SIGNATURE == 13020603013274838756
        assert path_signature(CoverageMap()) == UNTRACED_SIGNATURE

    def test_order_independent(self):
        rnd = random.Random(1)
        edges = [(rnd.randrange(100), rnd.randrange(100)) for _ in range(200)]
        a, b = CoverageMap(), CoverageMap()
        for e in edges:
            a.record_edge(*e)
        for e in reversed(edges):
            b.record_edge(*e)
        assert path_signature(a) == path_signature(b)

    def test_bucketing_is_log2(self):
        # Counts 2 and 3 share a bucket; 1 and 2 do not.
        def sig_with_count(n):
            m = CoverageMap()
            for _ in range(n):
                m.record_edge(1, 2)
            return path_signature(m)

        assert sig_with_count(2) == sig_with_count(3)
        assert sig_with_count(4) == sig_with_count(7)
        assert sig_with_count(1) != sig_with_count(2)
        assert sig_with_count(3) != sig_with_count(4)

    def test_distinct_edges_distinct_signatures(self):
        a, b = CoverageMap(), CoverageMap()
        a.record_edge(1, 2)
        b.record_edge(1, 3)
        assert path_signature(a) != path_signature(b)


class TestDeltaState:
    def test_observe_set_semantics_brute_force(self):
        """Novelty decisions equal brute-force set membership over
        10,000 random tuple sequences."""
        rnd = random.Random(123)
        for _ in range(100):
            arity = rnd.randint(1, 4)
            state = DeltaState(tuple("t%d" % i for i in range(arity)))
            seen = set()
            for _ in range(100):
                t = tuple(rnd.randrange(5) for _ in range(arity))
                assert state.observe(t) == (t not in seen)
                seen.add(t)
            assert state.seen == seen

    def test_arity_check(self):
        state = DeltaState(("a", "b"))
        with pytest.raises(ValueError):
            state.observe((1,))


class TestExternalProtocol:
    def test_mock_round_trip(self, tmp_path):
        """dump-command -> map file -> parsed map, including a specific
        cell value."""
        map_path = str(tmp_path / "cov.map")

        def on_dump():
            cells = bytearray(MAP_SIZE)
            cells[7] = 3
            with open(map_path, "wb") as fh:
                fh.write(bytes(cells))

        cleared = []
        target = ExternalTarget(
            map_path, MockControlChannel(on_dump=on_dump,
                                         on_clear=lambda: cleared.append(1)))
        m = external_snapshot(target)
        assert m.cells[7] == 3
        assert sum(m.cells) == 3
        external_clear(target)
        assert cleared == [1]

    def test_dump_waits_for_rewrite(self, tmp_path):
        """A stale pre-existing file does not satisfy the snapshot; the
        file must be (re)written after the dump command."""
        map_path = str(tmp_path / "cov.map")
        with open(map_path, "wb") as fh:
            fh.write(bytes(MAP_SIZE))

        def delayed_dump():
            def write():
                cells = bytearray(MAP_SIZE)
                cells[1] = 1
                with open(map_path, "wb") as fh:
                    fh.write(bytes(cells))
            threading.Timer(0.05, write).start()

        target = ExternalTarget(map_path,
                                MockControlChannel(on_dump=delayed_dump))
        m = external_snapshot(target)
        assert m.cells[1] == 1

    def test_timeout(self, tmp_path):
        target = ExternalTarget(str(tmp_path / "never.map"),
                                MockControlChannel(), timeout=0.1)
        with pytest.raises(SnapshotError):
            external_snapshot(target)

    def test_wrong_size_file(self, tmp_path):
        map_path = str(tmp_path / "bad.map")

        def on_dump():
            with open(map_path, "wb") as fh:
                fh.write(b"short")

        target = ExternalTarget(map_path, MockControlChannel(on_dump=on_dump))
        with pytest.raises(SnapshotError):
            external_snapshot(target)

    def test_signal_channel_binding(self):
        assert DUMP_SIGNAL == 10
        assert CLEAR_SIGNAL == 12
        fired = []
        old = signal.signal(DUMP_SIGNAL, lambda *_: fired.append("dump"))
        try:
            SignalControlChannel(os.getpid()).dump()
        finally:
            signal.signal(DUMP_SIGNAL, old)
        assert fired == ["dump"]

    def test_dead_channel(self):
        def boom():
            raise OSError("gone")

        target = ExternalTarget("/nonexistent",
                                MockControlChannel(on_dump=boom,
                                                   on_clear=boom))
        with pytest.raises(SnapshotError):
            external_snapshot(target)
        with pytest.raises(SnapshotError):
            external_clear(target)

"""Fuzzing-loop tests: configuration, determinism, gates, queue
admission, persistence, validation, and throughput."""

import base64
import json
import time

import pytest

from httpdelta.coverage import DeltaState, UNTRACED_SIGNATURE
from httpdelta.fuzzer import (
    ConfigError,
    CorpusEntry,
    DEFAULT_SEEDS,
    Evaluation,
    FuzzConfig,
    PersistError,
    load_results,
    load_seed_corpus,
    persist_results,
    report_digest,
    resolve_targets,
    run_fuzz,
    run_fuzz_detailed,
    select_parents,
    validate_results,
)
from httpdelta.personalities import interpret
from httpdelta.wire import RequestStream

SMALL = dict(origins=("rfc-oracle", "litespeed-like", "python-int-like",
                      "node-like"),
             transducers=("identity", "ats-like", "haproxy-like"),
             generations=6, generation_size=40, rng_seed=7)


class TestFuzzConfig:
    def test_unknown_keys_rejected(self):
        with pytest.raises(ConfigError):
            FuzzConfig.from_dict({"origins": ["a", "b"],
                                  "transducers": ["t"], "generaions": 3})

    def test_required_fields(self):
        with pytest.raises(ConfigError):
            FuzzConfig.from_dict({"origins": ["a", "b"]})
        with pytest.raises(ConfigError):
            FuzzConfig(origins=("a",), transducers=("t",))
        with pytest.raises(ConfigError):
            FuzzConfig(origins=("a", "b"), transducers=())

    def test_weight_validation(self):
        with pytest.raises(ConfigError):
            FuzzConfig(origins=("a", "b"), transducers=("t",),
                       mutation_weights=(0, 0, 0))
        with pytest.raises(ConfigError):
            FuzzConfig(origins=("a", "b"), transducers=("t",),
                       mutation_weights=(1, 2))

    def test_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"origins": ["rfc-oracle", "node-like"],
                                    "transducers": ["identity"],
                                    "generations": 2}))
        cfg = FuzzConfig.from_file(str(path))
        assert cfg.origins == ("rfc-oracle", "node-like")
        assert cfg.generations == 2

    def test_unknown_targets_rejected(self):
        with pytest.raises(ConfigError):
            resolve_targets(FuzzConfig(origins=("rfc-oracle", "nope"),
                                       transducers=("identity",)))
        with pytest.raises(ConfigError):
            # an origin name is not a transducer
            resolve_targets(FuzzConfig(origins=("rfc-oracle", "node-like"),
                                       transducers=("rfc-oracle",)))


class TestSeeds:
    def test_default_seeds_shape(self):
        assert len(DEFAULT_SEEDS) >= 4
        assert any(len(s.elements) > 1 for s in DEFAULT_SEEDS)

    def test_load_seed_corpus(self, tmp_path):
        path = tmp_path / "seeds.jsonl"
        lines = [json.dumps([base64.b64encode(e).decode()
                             for e in s.elements])
                 for s in DEFAULT_SEEDS[:2]]
        path.write_text("\n".join(lines) + "\n")
        seeds = load_seed_corpus(str(path))
        assert seeds == list(DEFAULT_SEEDS[:2])
        (tmp_path / "empty.jsonl").write_text("")
        with pytest.raises(ConfigError):
            load_seed_corpus(str(tmp_path / "empty.jsonl"))


class TestSelectParents:
    def _entry(self, i):
        return CorpusEntry(i, RequestStream.of(b"x%d" % i), "seed")

    def test_admission_rules(self):
        state = DeltaState(("a", "b"))
        evals = [
            Evaluation(self._entry(0), (1, 1), False),   # novel, quiet
            Evaluation(self._entry(1), (1, 1), False),   # duplicate
            Evaluation(self._entry(2), (2, 2), True),    # novel, meaningful
            Evaluation(self._entry(3), (2, 2), False),   # burned by #2
            Evaluation(self._entry(4), (3, 3), False),   # novel, quiet
        ]
        admitted = select_parents(evals, state)
        assert [e.ident for e in admitted] == [0, 4]
        assert state.seen == {(1, 1), (2, 2), (3, 3)}


class TestRunFuzz:
    def test_deterministic(self, tmp_path):
        cfg = FuzzConfig(**SMALL)
        a = run_fuzz(cfg)
        b = run_fuzz(cfg)
        pa, pb = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        persist_results(a, str(pa))
        persist_results(b, str(pb))
        assert pa.read_bytes() == pb.read_bytes()
        assert len(a) > 0

    def test_gates_hold_for_every_result(self):
        detail = run_fuzz_detailed(FuzzConfig(**SMALL))
        assert detail.results
        for r in detail.results:
            assert r.matrix.set_bit_count() > 0
            assert r.witness
            assert r.group_key == r.matrix.row_major()

    def test_queue_hygiene(self):
        """No discrepancy-causing input may appear in any provenance
        chain or in the final parent queue."""
        detail = run_fuzz_detailed(FuzzConfig(**SMALL))
        meaningful = {ev.entry.ident for ev in detail.evaluations
                      if ev.meaningful}
        assert meaningful  # the run must actually find discrepancies
        for ev in detail.evaluations:
            if ev.entry.provenance != "seed":
                parent_ident, _record = ev.entry.provenance
                assert parent_ident not in meaningful
        for entry in detail.queue:
            assert entry.ident not in meaningful

    def test_untraced_targets_get_constant_signature(self):
        cfg = FuzzConfig(origins=("rfc-oracle", "node-like"),
                         transducers=("identity",),
                         generations=1, generation_size=5,
                         traced_targets=("rfc-oracle",))
        detail = run_fuzz_detailed(cfg)
        for ev in detail.evaluations:
            assert ev.signatures[1] == UNTRACED_SIGNATURE
            assert len(ev.signatures) == 2

    def test_incremental_sink_matches_results(self, tmp_path):
        out = tmp_path / "out.jsonl"
        cfg = FuzzConfig(**{**SMALL, "generations": 3,
                            "output_path": str(out)})
        results = run_fuzz(cfg)
        again = tmp_path / "again.jsonl"
        persist_results(results, str(again))
        assert out.read_bytes() == again.read_bytes()


@pytest.fixture(scope="module")
def run_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("fuzz") / "results.jsonl"
    cfg = FuzzConfig(**{**SMALL, "generations": 3,
                        "output_path": str(out)})
    results = run_fuzz(cfg)
    return out, results, cfg


class TestPersistence:
    def test_round_trip(self, run_file):
        out, results, _cfg = run_file
        loaded = load_results(str(out))
        assert len(loaded) == len(results)
        for got, want in zip(loaded, results):
            assert got.input == want.input
            assert got.matrix == want.matrix
            assert got.witness == want.witness
            assert got.group_key == want.group_key
            assert got.report_digests == {
                name: report_digest(rep)
                for name, rep in want.reports.items()}

    def test_malformed_line_raises(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"input": ["!!!not-base64"], "origins": []}\n')
        with pytest.raises(PersistError):
            load_results(str(path))

    def test_validation_clean(self, run_file):
        out, _results, cfg = run_file
        issues = validate_results(str(out),
                                  transducer_names=list(cfg.transducers))
        assert issues == []

    def test_validation_flags_injected_bogus_result(self, run_file,
                                                    tmp_path):
        """A hand-built non-durable 'result' (a plain GET that every
        origin parses identically) must fail validation."""
        out, _results, cfg = run_file
        stream = RequestStream.of(b"GET /benign HTTP/1.1\r\nHost: a\r\n\r\n")
        origins = list(cfg.origins)
        n = len(origins)
        bits = "".join("0" if i == j else "1"
                       for i in range(n) for j in range(n))
        digests = {}
        from httpdelta.personalities import builtin_registry, \
            registry_by_name
        registry = registry_by_name(builtin_registry())
        for name in origins:
            digests[name] = report_digest(interpret(registry[name], stream))
        bogus = {
            "input": [base64.b64encode(stream.data).decode()],
            "origins": origins,
            "matrix": bits,
            "witness": "identity",
            "group_key": bits,
            "reports": digests,
        }
        tainted = tmp_path / "tainted.jsonl"
        tainted.write_text(out.read_text() + json.dumps(bogus) + "\n")
        issues = validate_results(str(tainted),
                                  transducer_names=list(cfg.transducers))
        last_line = sum(1 for _ in open(tainted))
        assert issues
        assert all(i.line == last_line for i in issues)
        messages = " ".join(i.message for i in issues)
        assert "matrix mismatch" in messages
        assert "not meaningful" in messages
        assert "not durable" in messages


class TestThroughput:
    def test_floor_200_evaluations_per_second(self):
        """The in-process loop must sustain at least 200 evaluations
        per second with coverage tracing enabled."""
        cfg = FuzzConfig(origins=("rfc-oracle", "litespeed-like",
                                  "python-int-like", "node-like"),
                         transducers=("identity",),
                         generations=5, generation_size=100, rng_seed=3)
        start = time.perf_counter()
        detail = run_fuzz_detailed(cfg)
        elapsed = time.perf_counter() - start
        rate = len(detail.evaluations) / elapsed
        assert rate >= 200, "only %.0f evaluations/s" % rate

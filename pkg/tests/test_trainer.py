import numpy as np
import pytest
import torch

from xltopic.corpus import BowDocument, Vocabulary
from xltopic.errors import CheckpointError, ConfigurationError
from xltopic.linking import LinkTable
from xltopic.model import ModelConfig, init_model_state
from xltopic.trainer import (TrainConfig, TrainingTrace, TraceRecord,
                             cosine_distance_diagnostic, load_checkpoint,
                             save_checkpoint, train)
from oracles import oracle_cosine_distance_all_pairs


def tiny_problem(seed=0, align_weight=1.0):
    vocab = Vocabulary([f"a{i}" for i in range(4)],
                       [f"b{i}" for i in range(4)])
    links = {i: {4 + i} for i in range(4)}
    links.update({4 + i: {i} for i in range(4)})
    table = LinkTable(links=links)
    rng = np.random.default_rng(seed)
    docs1 = [BowDocument({int(i): 1 + int(rng.integers(3))
                          for i in rng.choice(4, 2, replace=False)}, "l1")
             for _ in range(12)]
    docs2 = [BowDocument({4 + int(i): 1 + int(rng.integers(3))
                          for i in rng.choice(4, 2, replace=False)}, "l2")
             for _ in range(12)]
    model_cfg = ModelConfig(n_topics=2, tau=0.5, align_weight=align_weight,
                            hidden_dim=6, dropout=0.1, seed=seed)
    return docs1, docs2, table, vocab, model_cfg


class TestTrain:
    def test_zero_learning_rate_keeps_init(self):
        docs1, docs2, table, vocab, mcfg = tiny_problem()
        tcfg = TrainConfig(epochs=2, batch_size=6, learning_rate=0.0, seed=1)
        state, _ = train(docs1, docs2, table, vocab, mcfg, tcfg)
        init = init_model_state(vocab, mcfg)
        for a, b in zip(state.parameters(), init.parameters()):
            assert torch.equal(a, b)

    def test_deterministic_traces(self):
        docs1, docs2, table, vocab, mcfg = tiny_problem()
        tcfg = TrainConfig(epochs=3, batch_size=5, seed=7)
        s1, tr1 = train(docs1, docs2, table, vocab, mcfg, tcfg)
        s2, tr2 = train(docs1, docs2, table, vocab, mcfg, tcfg)
        assert tr1 == tr2
        for a, b in zip(s1.parameters(), s2.parameters()):
            assert torch.equal(a, b)

    def test_loss_decreases_on_easy_instance(self):
        docs1, docs2, table, vocab, mcfg = tiny_problem(align_weight=0.0)
        tcfg = TrainConfig(epochs=30, batch_size=12, learning_rate=5e-3, seed=0)
        _, trace = train(docs1, docs2, None, vocab, mcfg, tcfg)
        assert trace.records[-1].total < trace.records[0].total

    def test_trace_finite(self):
        docs1, docs2, table, vocab, mcfg = tiny_problem()
        tcfg = TrainConfig(epochs=4, batch_size=6, seed=3)
        _, trace = train(docs1, docs2, table, vocab, mcfg, tcfg)
        for r in trace.records:
            assert np.isfinite([r.total, r.tami, r.tm, r.cosine_distance]).all()
        assert [r.epoch for r in trace.records] == sorted(
            r.epoch for r in trace.records)

    def test_empty_corpus_errors(self):
        docs1, docs2, table, vocab, mcfg = tiny_problem()
        with pytest.raises(ConfigurationError):
            train([], docs2, table, vocab, mcfg, TrainConfig(epochs=1))


class TestCosineDiagnostic:
    def test_identical_rows_zero(self):
        phi = np.ones((5, 3))
        assert cosine_distance_diagnostic(phi, 10_000) == pytest.approx(0.0)

    def test_orthogonal_rows_one(self):
        assert cosine_distance_diagnostic(np.eye(4), 10_000) == pytest.approx(1.0)

    def test_hand_oracle_exhaustive(self):
        rows = [[1.0, 0.0], [0.5, 0.5], [-1.0, 0.2], [0.0, 2.0]]
        got = cosine_distance_diagnostic(np.array(rows), 10_000)
        assert got == pytest.approx(oracle_cosine_distance_all_pairs(rows),
                                    abs=1e-12)

    def test_sampled_close_to_exact(self):
        rng = np.random.default_rng(0)
        phi = rng.normal(size=(60, 4))
        exact = cosine_distance_diagnostic(phi, 10_000_000)
        sampled = cosine_distance_diagnostic(phi, 5000, seed=1)
        assert sampled == pytest.approx(exact, abs=0.05)

    def test_range(self):
        rng = np.random.default_rng(1)
        phi = rng.normal(size=(20, 3))
        d = cosine_distance_diagnostic(phi, 10_000)
        assert 0.0 <= d <= 2.0

    def test_zero_row_errors(self):
        phi = np.zeros((3, 2))
        phi[0, 0] = 1.0
        with pytest.raises(ConfigurationError):
            cosine_distance_diagnostic(phi, 100)


class TestCheckpoint:
    def trained(self):
        docs1, docs2, table, vocab, mcfg = tiny_problem()
        tcfg = TrainConfig(epochs=2, batch_size=6, seed=2)
        return train(docs1, docs2, table, vocab, mcfg, tcfg)

    def test_roundtrip_bitwise(self, tmp_path):
        state, trace = self.trained()
        path = tmp_path / "ck.bin"
        save_checkpoint(state, trace, path)
        loaded, loaded_trace = load_checkpoint(path)
        for a, b in zip(state.parameters(), loaded.parameters()):
            assert torch.equal(a, b)
        assert torch.equal(state.prior1.var0, loaded.prior1.var0)
        assert loaded_trace == trace
        assert loaded.vocab.words_l1 == state.vocab.words_l1
        assert loaded.config == state.config

    def test_save_load_save_identical_bytes(self, tmp_path):
        state, trace = self.trained()
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_checkpoint(state, trace, p1)
        loaded, ltrace = load_checkpoint(p1)
        save_checkpoint(loaded, ltrace, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_version_bump_rejected(self, tmp_path):
        state, trace = self.trained()
        path = tmp_path / "ck.bin"
        save_checkpoint(state, trace, path)
        blob = bytearray(path.read_bytes())
        blob[4] += 1  # version byte
        import hashlib
        payload = bytes(blob[:-32])
        blob[-32:] = hashlib.sha256(payload).digest()
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="version"):
            load_checkpoint(path)

    def test_truncation_detected(self, tmp_path):
        state, trace = self.trained()
        path = tmp_path / "ck.bin"
        save_checkpoint(state, trace, path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-1])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_corruption_detected(self, tmp_path):
        state, trace = self.trained()
        path = tmp_path / "ck.bin"
        save_checkpoint(state, trace, path)
        blob = bytearray(path.read_bytes())
        blob[100] ^= 0xFF
        path.write_bytes(bytes(blob))
        with pytest.raises(CheckpointError, match="checksum"):
            load_checkpoint(path)


def test_trace_csv_format(tmp_path):
    trace = TrainingTrace([TraceRecord(1, 2.5, 0.25, 2.25, 0.9)])
    path = tmp_path / "trace.csv"
    trace.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "epoch,total,tami,tm,cosine_distance"
    assert lines[1] == "1,2.5,0.25,2.25,0.9"

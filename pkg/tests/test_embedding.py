import json
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from al_llm.embedding import (
    EmbeddingError,
    EmbeddingMatrix,
    HashEmbedder,
    fetch_remote,
    hash_embed,
    load_embedding_file,
    write_embedding_file,
)


def write_binary(path, dim, count, records):
    """records: list of (id, list-of-float) written verbatim."""
    with open(path, "wb") as fh:
        fh.write(b"ALEMB1")
        fh.write(struct.pack("<IQ", dim, count))
        for rid, vec in records:
            fh.write(struct.pack("<Q", rid))
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


class TestBinaryFormat:
    def test_load_basic(self, tmp_path):
        path = tmp_path / "e.alemb"
        write_binary(path, 4, 3, [(0, [1, 2, 3, 4]), (1, [5, 6, 7, 8]), (2, [9, 1, 2, 3])])
        m = load_embedding_file(path, expected_n=3)
        assert (m.n, m.dim) == (3, 4)
        assert m.vectors[2, 0] == 9.0

    def test_out_of_order_ids_are_sorted(self, tmp_path):
        path = tmp_path / "e.alemb"
        write_binary(path, 2, 2, [(1, [3, 4]), (0, [1, 2])])
        m = load_embedding_file(path, expected_n=2)
        assert m.vectors[0].tolist() == [1.0, 2.0]

    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(5)
        m = EmbeddingMatrix(vectors=rng.normal(size=(17, 9)).astype(np.float32))
        path = tmp_path / "rt.alemb"
        write_embedding_file(m, path)
        again = load_embedding_file(path, expected_n=17)
        assert again.vectors.tobytes() == m.vectors.tobytes()

    def test_magic_mismatch_falls_back_then_fails(self, tmp_path):
        path = tmp_path / "bad.alemb"
        path.write_bytes(b"NOTFMT" + b"\x00" * 20)
        with pytest.raises(EmbeddingError):
            load_embedding_file(path, expected_n=1)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "t.alemb"
        write_binary(path, 4, 2, [(0, [1, 2, 3, 4])])  # header says 2, one record present
        with pytest.raises(EmbeddingError, match="truncated"):
            load_embedding_file(path, expected_n=2)

    def test_non_finite_value(self, tmp_path):
        path = tmp_path / "nan.alemb"
        write_binary(path, 2, 1, [(0, [np.nan, 1.0])])
        with pytest.raises(EmbeddingError, match="non-finite"):
            load_embedding_file(path, expected_n=1)

    def test_id_gap(self, tmp_path):
        path = tmp_path / "gap.alemb"
        write_binary(path, 2, 2, [(0, [1, 2]), (2, [3, 4])])
        with pytest.raises(EmbeddingError, match="id gap"):
            load_embedding_file(path, expected_n=2)

    def test_duplicate_id(self, tmp_path):
        path = tmp_path / "dup.alemb"
        write_binary(path, 2, 2, [(0, [1, 2]), (0, [3, 4])])
        with pytest.raises(EmbeddingError, match="duplicate id"):
            load_embedding_file(path, expected_n=2)

    def test_count_mismatch(self, tmp_path):
        path = tmp_path / "cm.alemb"
        write_binary(path, 2, 2, [(0, [1, 2]), (1, [3, 4])])
        with pytest.raises(EmbeddingError, match="count mismatch"):
            load_embedding_file(path, expected_n=3)


class TestJsonlFallback:
    def test_load(self, tmp_path):
        path = tmp_path / "e.jsonl"
        rows = [{"id": 1, "vector": [3.0, 4.0]}, {"id": 0, "vector": [1.0, 2.0]}]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        m = load_embedding_file(path, expected_n=2)
        assert m.vectors[0].tolist() == [1.0, 2.0]

    def test_dimension_drift(self, tmp_path):
        path = tmp_path / "e.jsonl"
        rows = [{"id": 0, "vector": [1.0, 2.0]}, {"id": 1, "vector": [1.0]}]
        path.write_text("\n".join(json.dumps(r) for r in rows), encoding="utf-8")
        with pytest.raises(EmbeddingError, match="dimension drift"):
            load_embedding_file(path, expected_n=2)

    def test_nan_literal_rejected(self, tmp_path):
        path = tmp_path / "e.jsonl"
        path.write_text('{"id": 0, "vector": [NaN, 1.0]}', encoding="utf-8")
        with pytest.raises(EmbeddingError, match="non-finite"):
            load_embedding_file(path, expected_n=1)


class BatchRecorder(BaseHTTPRequestHandler):
    calls: list = []
    script: list = []  # per-call overrides: {"status": int} or {"dim": int}
    default_dim = 3

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        call_no = len(type(self).calls)
        type(self).calls.append(body["texts"])
        override = type(self).script[call_no] if call_no < len(type(self).script) else {}
        status = override.get("status", 200)
        if status != 200:
            self.send_response(status)
            self.end_headers()
            return
        dim = override.get("dim", type(self).default_dim)
        payload = json.dumps(
            {"embeddings": [[float(len(t))] * dim for t in body["texts"]]}
        ).encode()
        self.send_response(200)
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def log_message(self, *args):
        pass


@pytest.fixture
def embed_server():
    handler = type("Handler", (BatchRecorder,), {"calls": [], "script": []})
    server = ThreadingHTTPServer(("127.0.0.1", 0), handler)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield f"http://127.0.0.1:{server.server_address[1]}/embed", handler
    server.shutdown()
    server.server_close()


class TestFetchRemote:
    def test_batching_arithmetic_and_order(self, embed_server):
        url, handler = embed_server
        texts = [f"t{i:02d}" + "x" * i for i in range(10)]
        m = fetch_remote(url, texts, batch_size=4)
        assert [len(c) for c in handler.calls] == [4, 4, 2]
        assert m.n == 10
        assert m.vectors[:, 0].tolist() == [float(len(t)) for t in texts]

    def test_dimension_drift_across_batches(self, embed_server):
        url, handler = embed_server
        handler.script = [{}, {"dim": 2}]
        with pytest.raises(EmbeddingError, match="dimension drift"):
            fetch_remote(url, [f"t{i}" for i in range(8)], batch_size=4, retries=0)

    def test_empty_texts_no_requests(self, embed_server):
        url, handler = embed_server
        m = fetch_remote(url, [], batch_size=4)
        assert m.n == 0 and handler.calls == []

    def test_retry_on_transient_then_success(self, embed_server):
        url, handler = embed_server
        handler.script = [{"status": 503}, {}]
        m = fetch_remote(url, ["a", "b"], batch_size=2, retries=2, backoff=0.0)
        assert m.n == 2 and len(handler.calls) == 2

    def test_exhausted_retries(self, embed_server):
        url, handler = embed_server
        handler.script = [{"status": 500}] * 4
        with pytest.raises(EmbeddingError, match="exhausted retries"):
            fetch_remote(url, ["a"], batch_size=1, retries=2, backoff=0.0)

    def test_concurrent_assembly_preserves_order(self, embed_server):
        url, handler = embed_server
        texts = [f"{'y' * i}" + "z" for i in range(20)]
        m = fetch_remote(url, texts, batch_size=3, concurrency=4)
        assert m.vectors[:, 0].tolist() == [float(len(t)) for t in texts]


class TestHashEmbed:
    def test_deterministic(self):
        texts = ["a b c", "c d e", "a a a"]
        a = hash_embed(texts, 64, 9).vectors
        b = hash_embed(texts, 64, 9).vectors
        assert np.array_equal(a, b)

    def test_identical_texts_identical_rows(self):
        m = hash_embed(["same words here", "same words here"], 32, 0).vectors
        assert np.array_equal(m[0], m[1])

    def test_unit_norms(self):
        texts = [f"word{i} tok{i * 7} x{i} common" for i in range(12)]
        m = hash_embed(texts, 128, 3).vectors
        norms = np.linalg.norm(m.astype(np.float64), axis=1)
        assert np.all(np.abs(norms - 1.0) < 1e-6)

    def test_disjoint_vocab_near_orthogonal(self):
        # Frozen fixture: 20 texts, 8 disjoint tokens each, dim 2048, seed 0.
        # Measured max off-diagonal |cos| is 0.125 (single bucket collisions).
        texts = [" ".join(f"t{i}_{j}" for j in range(8)) for i in range(20)]
        m = hash_embed(texts, 2048, 0).vectors.astype(np.float64)
        cos = m @ m.T
        off = np.abs(cos[~np.eye(20, dtype=bool)])
        assert off.max() < 0.2

    def test_zero_rows_stay_zero(self):
        m = hash_embed(["", "actual words"], 16, 0).vectors
        assert np.all(m[0] == 0.0)

    def test_provider_row_count(self):
        provider = HashEmbedder(dim=32, rng_seed=1)
        out = provider.embed(["one", "two", "three"])
        assert out.n == 3 and out.dim == 32

    @given(st.integers(min_value=0, max_value=2**63 - 1))
    @settings(max_examples=20, deadline=None)
    def test_any_seed_valid(self, seed):
        m = hash_embed(["a b", "b c"], 8, seed)
        assert np.isfinite(m.vectors).all()


def test_matrix_rejects_non_finite():
    with pytest.raises(EmbeddingError, match="non-finite"):
        EmbeddingMatrix(vectors=np.array([[np.inf, 1.0]], dtype=np.float32))

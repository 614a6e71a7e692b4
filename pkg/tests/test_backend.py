import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from instrec import (
    BackendRequest,
    HttpBackend,
    MockBackend,
    MockScript,
    Modality,
    Mode,
    Prompt,
    ScriptEntry,
    Trigger,
    serialize_request,
)
from instrec.exceptions import (
    BackendUnreachable,
    DimensionMismatch,
    InvariantViolation,
    MalformedResponse,
    NoScriptMatch,
)


def text_trigger(text="Hotel reservation confirmed for March 3"):
    return Trigger(id="trig-1", modality=Modality.TEXT, text=text)


def gen_request(body="analyze the trigger", trigger=None):
    return BackendRequest(
        prompt=Prompt(body=body),
        trigger=trigger or text_trigger(),
        mode=Mode.GENERATE_TEXT,
    )


def score_request(prefix=(), trigger=None):
    return BackendRequest(
        prompt=Prompt(body="score context"),
        trigger=trigger or text_trigger(),
        mode=Mode.SCORE_TOKENS,
        prefix=tuple(prefix),
    )


class TestBackendRequest:
    def test_score_mode_requires_prefix(self):
        with pytest.raises(InvariantViolation):
            BackendRequest(
                prompt=Prompt(body="x"),
                trigger=text_trigger(),
                mode=Mode.SCORE_TOKENS,
            )

    def test_empty_prefix_is_valid(self):
        req = score_request(prefix=())
        assert req.prefix == ()


class TestSerializeRequest:
    def test_layout(self):
        serialized = serialize_request(score_request(prefix=(4, 3)))
        assert serialized.startswith("mode: score_tokens\n")
        assert "trigger: trig-1 Hotel reservation confirmed" in serialized
        assert "prefix: [4, 3]" in serialized
        assert serialized.endswith("prompt:\nscore context")

    def test_missing_prefix_serialized_as_none(self):
        assert "prefix: none" in serialize_request(gen_request())


class TestScriptEntry:
    def test_exactly_one_response_kind(self):
        with pytest.raises(InvariantViolation):
            ScriptEntry(match="x")
        with pytest.raises(InvariantViolation):
            ScriptEntry(match="x", text="y", logits=(1.0,))

    def test_script_json_roundtrip(self, tmp_path):
        script = MockScript(
            [
                ScriptEntry(match="a", text="response"),
                ScriptEntry(match="b", logits=(1.0, 2.0)),
            ]
        )
        path = tmp_path / "script.json"
        path.write_text(json.dumps(script.to_list()))
        loaded = MockScript.load(str(path))
        assert loaded.to_list() == script.to_list()


class TestMockBackend:
    def test_first_match_wins(self):
        backend = MockBackend(
            MockScript(
                [
                    ScriptEntry(match="reservation", text="first"),
                    ScriptEntry(match="Hotel", text="second"),
                ]
            )
        )
        assert backend.generate_text(gen_request()) == "first"

    def test_no_match(self):
        backend = MockBackend(MockScript([]))
        with pytest.raises(NoScriptMatch):
            backend.generate_text(gen_request())

    def test_text_entry_never_answers_scoring(self):
        backend = MockBackend(
            MockScript(
                [
                    ScriptEntry(match="trig-1", text="some text"),
                    ScriptEntry(match="trig-1", logits=(1.0, 2.0, 3.0)),
                ]
            )
        )
        logits = backend.score_tokens(score_request())
        assert np.array_equal(logits, [1.0, 2.0, 3.0])

    def test_prefix_keyed_entries_reproduce_walk(self, fixture_vocab):
        # Per-prefix vectors that spell out "save phone number" step by step.
        def vec(**weights):
            logits = [0.0] * fixture_vocab.size
            for token, weight in weights.items():
                logits[fixture_vocab.token_to_id[token]] = weight
            return tuple(logits)

        backend = MockBackend(
            MockScript(
                [
                    ScriptEntry(match="prefix: []", logits=vec(save=5.0, navigate=1.0)),
                    ScriptEntry(match="prefix: [4]", logits=vec(phone=5.0, address=1.0)),
                    ScriptEntry(match="prefix: [4, 3]", logits=vec(number=5.0)),
                    ScriptEntry(match="prefix: [4, 3, 2]", logits=vec(**{"<EOS>": 5.0})),
                ]
            ),
            vocab_size=fixture_vocab.size,
        )
        walk = [(), (4,), (4, 3), (4, 3, 2)]
        picks = [int(np.argmax(backend.score_tokens(score_request(p)))) for p in walk]
        assert picks == [4, 3, 2, fixture_vocab.specials.end_of_sequence]

    def test_deterministic_across_repeats(self):
        backend = MockBackend(
            MockScript([ScriptEntry(match="trig-1", logits=(0.5, 1.5))])
        )
        first = backend.score_tokens(score_request())
        second = backend.score_tokens(score_request())
        assert first.tobytes() == second.tobytes()

    def test_wrong_length_logits(self):
        backend = MockBackend(
            MockScript([ScriptEntry(match="trig-1", logits=(1.0, 2.0))]),
            vocab_size=3,
        )
        with pytest.raises(DimensionMismatch):
            backend.score_tokens(score_request())

    def test_mode_mismatch_guard(self):
        backend = MockBackend(MockScript([ScriptEntry(match="x", text="y")]))
        with pytest.raises(InvariantViolation):
            backend.generate_text(score_request())


class _StubHandler(BaseHTTPRequestHandler):
    captured = []
    behavior = "echo"

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        _StubHandler.captured.append((self.path, payload))
        if _StubHandler.behavior == "error":
            self.send_response(500)
            self.end_headers()
            return
        if _StubHandler.behavior == "garbage":
            body = b"not json"
        elif _StubHandler.behavior == "empty":
            body = b"{}"
        elif payload["mode"] == "generate_text":
            body = json.dumps({"text": "ok"}).encode()
        else:
            body = json.dumps({"logits": [0.1, 0.2, 0.3]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    server = HTTPServer(("127.0.0.1", 0), _StubHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    _StubHandler.captured = []
    _StubHandler.behavior = "echo"
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()


class TestHttpBackend:
    def test_generate_text_echo(self, stub_server):
        backend = HttpBackend(stub_server)
        assert backend.generate_text(gen_request()) == "ok"
        path, payload = _StubHandler.captured[0]
        assert path == "/generate"
        assert payload["mode"] == "generate_text"
        assert payload["trigger"] == {
            "modality": "text",
            "text": "Hotel reservation confirmed for March 3",
        }
        assert "prefix" not in payload

    def test_score_tokens_wire(self, stub_server):
        backend = HttpBackend(stub_server)
        logits = backend.score_tokens(score_request(prefix=(4, 3)))
        assert np.allclose(logits, [0.1, 0.2, 0.3])
        _, payload = _StubHandler.captured[0]
        assert payload["prefix"] == [4, 3]

    def test_image_trigger_sent_base64(self, stub_server):
        trigger = Trigger(id="trig-img", modality=Modality.IMAGE, image_ref=b"abc")
        HttpBackend(stub_server).generate_text(gen_request(trigger=trigger))
        _, payload = _StubHandler.captured[0]
        assert payload["trigger"] == {"modality": "image", "image_b64": "YWJj"}

    def test_non_200_unreachable(self, stub_server):
        _StubHandler.behavior = "error"
        with pytest.raises(BackendUnreachable):
            HttpBackend(stub_server).generate_text(gen_request())

    def test_garbage_response(self, stub_server):
        _StubHandler.behavior = "garbage"
        with pytest.raises(MalformedResponse):
            HttpBackend(stub_server).generate_text(gen_request())

    def test_missing_field(self, stub_server):
        _StubHandler.behavior = "empty"
        backend = HttpBackend(stub_server)
        with pytest.raises(MalformedResponse):
            backend.generate_text(gen_request())
        with pytest.raises(MalformedResponse):
            backend.score_tokens(score_request())

    def test_connection_refused(self):
        backend = HttpBackend("http://127.0.0.1:1", timeout=0.5)
        with pytest.raises(BackendUnreachable):
            backend.generate_text(gen_request())

    def test_wrong_length_logits(self, stub_server):
        backend = HttpBackend(stub_server, vocab_size=10)
        with pytest.raises(DimensionMismatch):
            backend.score_tokens(score_request())

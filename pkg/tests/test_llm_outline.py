import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest
from stubs import OutlineBackend, outline_client, prompt_paragraph

from paperdiag.errors import LlmTransportError, OutlineUnavailable
from paperdiag.llm import ChatCompletionBackend, LlmClient, LlmRequest, ResponseCache
from paperdiag.outline import OUTLINE_CAP, build_outline, choose_style, parse_outline_response
from paperdiag.prompts import load_template, render_outline_prompt


class Flaky:
    def __init__(self, failures, text="ok"):
        self.failures = failures
        self.text = text
        self.calls = 0

    def __call__(self, request):
        self.calls += 1
        if self.calls <= self.failures:
            raise LlmTransportError("HTTP 503")
        return self.text


def test_retries_with_backoff_then_succeeds():
    delays = []
    backend = Flaky(2)
    client = LlmClient(backend, sleep=delays.append, backoff_base=1.0)
    assert client.complete("hi").text == "ok"
    assert backend.calls == 3
    assert len(delays) == 2 and 1.0 <= delays[0] <= 1.1 and 2.0 <= delays[1] <= 2.2


def test_gives_up_after_max_retries():
    client = LlmClient(Flaky(99), sleep=lambda s: None, max_retries=3)
    with pytest.raises(LlmTransportError):
        client.complete("hi")
    assert client.network_calls == 3


def test_cache_hit_skips_backend_and_refresh_bypasses_read(tmp_path):
    backend = Flaky(0, "first")
    client = LlmClient(backend, cache=ResponseCache(tmp_path), sleep=lambda s: None)
    assert client.complete("p").cached is False
    again = LlmClient(Flaky(0, "second"), cache=ResponseCache(tmp_path))
    hit = again.complete("p")
    assert hit.text == "first" and hit.cached and again.network_calls == 0
    fresh = again.complete("p", refresh=True)
    assert fresh.text == "second" and again.network_calls == 1
    assert again.complete("p").text == "second"


def test_cache_key_depends_on_model_and_temperature():
    a = LlmRequest("m1", "p").cache_key()
    assert a != LlmRequest("m2", "p").cache_key()
    assert a != LlmRequest("m1", "p", temperature=0.7).cache_key()
    assert a == LlmRequest("m1", "p", max_tokens=9).cache_key()


def test_corrupt_cache_entry_is_ignored(tmp_path):
    cache = ResponseCache(tmp_path)
    req = LlmRequest("m", "p")
    cache.put(req, "x", {})
    path = tmp_path / req.cache_key()[:2] / f"{req.cache_key()}.json"
    path.write_text("{nope")
    assert cache.get(req) is None


def test_chat_completion_backend_against_local_server():
    seen = []

    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):
            body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
            seen.append((self.path, body, self.headers.get("Authorization")))
            out = json.dumps({"choices": [{"message": {"content": "answer"}}], "usage": {"total_tokens": 3}})
            self.send_response(200)
            self.send_header("Content-Length", str(len(out)))
            self.end_headers()
            self.wfile.write(out.encode())

        def log_message(self, *a):
            pass

    httpd = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
    threading.Thread(target=httpd.serve_forever, daemon=True).start()
    try:
        backend = ChatCompletionBackend(f"http://127.0.0.1:{httpd.server_address[1]}/v1", api_key="k")
        text, usage = backend(LlmRequest("model-x", "hello", max_tokens=7))
    finally:
        httpd.shutdown()
    assert (text, usage) == ("answer", {"total_tokens": 3})
    path, body, auth = seen[0]
    assert path == "/v1/chat/completions" and auth == "Bearer k"
    assert body["model"] == "model-x" and body["max_tokens"] == 7
    assert body["messages"] == [{"role": "user", "content": "hello"}]


# outlines ------------------------------------------------------------------

PARA = "The encoder improves accuracy on every benchmark while the decoder keeps latency low for long inputs."


def test_outline_prompt_ends_with_the_paragraph():
    for style in ("concise", "keypoints"):
        prompt = render_outline_prompt(style, PARA)
        assert prompt_paragraph(prompt) == PARA
        assert "[Paragraph]" not in prompt.rsplit("Paragraph: ", 1)[1]
        assert prompt.startswith(load_template(f"{style}_outline.txt")[:40])


def test_build_outline_accepts_short_outline():
    o = build_outline(PARA, "keypoints", outline_client())
    assert o.points == ("The encoder improves",) and o.rendered == "1. The encoder improves"
    assert o.token_count < OUTLINE_CAP


def test_build_outline_regenerates_once_then_gives_up():
    backend = OutlineBackend()
    client = LlmClient(backend, sleep=lambda s: None)
    with pytest.raises(OutlineUnavailable):
        build_outline("Verbose: " + PARA, "concise", client)
    assert backend.calls == 2


def test_parse_outline_response():
    assert parse_outline_response("keypoints", "1. a\n2. b\n") == ["a", "b"]
    assert parse_outline_response("keypoints", "plain sentence") == ["plain sentence"]
    assert parse_outline_response("concise", "  One sentence. ") == ["One sentence."]


def test_style_choice_is_seeded_and_balanced():
    styles = [choose_style(0, f"p:{i}") for i in range(400)]
    assert styles == [choose_style(0, f"p:{i}") for i in range(400)]
    assert 150 < styles.count("concise") < 250

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from rodiac.gateway import (
    AuthError,
    EchoTransport,
    Gateway,
    GatewayError,
    HTTPTransport,
    ModelEndpoint,
    ReplayMiss,
    ReplayTransport,
    ResponseCache,
    ScriptedTransport,
    TransientError,
    cache_key,
    record_replay,
)


def http_endpoint(**kw):
    base = dict(model_id="acme:tiny-1", base_url="https://api.test/v1",
                api_key_env="RODIAC_TEST_KEY", max_retries=3, backoff_base=1.0,
                backoff_cap=5.0)
    base.update(kw)
    return ModelEndpoint(**base)


def ok_reply(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}],
                                     "usage": {"prompt_tokens": 3}})


class Sleeps(list):
    def __call__(self, seconds):
        self.append(seconds)


@pytest.fixture(autouse=True)
def api_key(monkeypatch):
    monkeypatch.setenv("RODIAC_TEST_KEY", "sk-test")


def make(handler, sleeps=None, cache_dir=None, **kw):
    transport = HTTPTransport(httpx.Client(transport=httpx.MockTransport(handler)))
    return Gateway(http_endpoint(**kw), transport, cache_dir=cache_dir,
                   sleep=sleeps if sleeps is not None else Sleeps())


def test_wire_format():
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers["authorization"]
        seen["body"] = json.loads(request.content)
        return ok_reply("  Mâine  \n")

    gw = make(handler)
    c = gw.complete("Restore the diacritics: Maine")
    assert c.text == "Mâine"
    assert c.usage == {"prompt_tokens": 3}
    assert seen["url"] == "https://api.test/v1/chat/completions"
    assert seen["auth"] == "Bearer sk-test"
    assert seen["body"] == {
        "model": "tiny-1",
        "messages": [{"role": "user", "content": "Restore the diacritics: Maine"}],
        "temperature": 0.0,
        "max_tokens": 1024,
    }


def test_retries_with_capped_backoff():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) <= 3:
            return httpx.Response(503)
        return ok_reply("ok")

    sleeps = Sleeps()
    gw = make(handler, sleeps, backoff_base=2.0, backoff_cap=5.0)
    assert gw.complete("p").text == "ok"
    assert sleeps == [2.0, 4.0, 5.0]
    assert gw.request_count == 4


def test_gives_up_after_max_retries():
    sleeps = Sleeps()
    gw = make(lambda r: httpx.Response(500), sleeps, max_retries=2)
    with pytest.raises(GatewayError, match="3 attempts"):
        gw.complete("p")
    assert gw.request_count == 3
    assert len(sleeps) == 2


def test_network_errors_are_transient():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            raise httpx.ConnectError("boom", request=request)
        return ok_reply("fine")

    assert make(handler).complete("p").text == "fine"


def test_rate_limit_honors_retry_after():
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) == 1:
            return httpx.Response(429, headers={"Retry-After": "7"})
        return ok_reply("ok")

    sleeps = Sleeps()
    make(handler, sleeps).complete("p")
    assert sleeps == [7.0]


@pytest.mark.parametrize("status", [401, 403])
def test_auth_failure_is_immediate(status):
    sleeps = Sleeps()
    gw = make(lambda r: httpx.Response(status), sleeps)
    with pytest.raises(AuthError):
        gw.complete("p")
    assert gw.request_count == 1 and sleeps == []


def test_client_error_not_retried():
    gw = make(lambda r: httpx.Response(400, text="bad"))
    with pytest.raises(GatewayError):
        gw.complete("p")
    assert gw.request_count == 1


def test_malformed_body():
    gw = make(lambda r: httpx.Response(200, json={"nope": 1}))
    with pytest.raises(GatewayError, match="malformed"):
        gw.complete("p")


def test_missing_key(monkeypatch):
    monkeypatch.delenv("RODIAC_TEST_KEY")
    gw = make(lambda r: ok_reply("x"))
    with pytest.raises(AuthError, match="RODIAC_TEST_KEY"):
        gw.complete("p")


def test_cache_hits_skip_transport(tmp_path):
    calls = []

    def handler(request):
        calls.append(1)
        return ok_reply("reply")

    gw = make(handler, cache_dir=tmp_path)
    assert gw.cached_complete("p") == "reply"
    assert gw.cached_complete("p") == "reply"
    assert len(calls) == 1
    # a fresh client over the same directory still hits
    gw2 = make(handler, cache_dir=tmp_path)
    assert gw2.cached_complete("p") == "reply"
    assert len(calls) == 1
    # different sampling params are a different key
    gw3 = make(handler, cache_dir=tmp_path, temperature=0.5)
    gw3.cached_complete("p")
    assert len(calls) == 2


def test_cache_key_ignores_transport_settings():
    a = http_endpoint()
    b = http_endpoint(timeout=5, max_retries=0, max_in_flight=9)
    assert cache_key(a, "p") == cache_key(b, "p")
    assert cache_key(a, "p") != cache_key(http_endpoint(max_tokens=10), "p")
    assert cache_key(a, "p") != cache_key(http_endpoint(model_id="acme:other"), "p")


def test_corrupt_cache_entry_is_a_miss(tmp_path, caplog):
    ep = ModelEndpoint("echo-ish")
    cache = ResponseCache(tmp_path)
    key = cache_key(ep, "p")
    cache.path(key).parent.mkdir(parents=True)
    cache.path(key).write_text("{not json", encoding="utf-8")
    gw = Gateway(ep, ScriptedTransport(lambda p: "fresh"), cache_dir=tmp_path)
    with caplog.at_level(logging.WARNING, logger="rodiac"):
        assert gw.cached_complete("p") == "fresh"
    assert "corrupt" in caplog.text
    assert cache.get(key) == "fresh"


def test_bounded_concurrency():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def slow(prompt):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.01)
        with lock:
            state["now"] -= 1
        return prompt

    gw = Gateway(ModelEndpoint("m", max_in_flight=3), ScriptedTransport(slow))
    with ThreadPoolExecutor(16) as pool:
        list(pool.map(gw.complete, [f"p{i}" for i in range(48)]))
    assert state["peak"] <= 3
    assert gw.max_observed_in_flight <= 3
    assert gw.request_count == 48


def test_concurrent_identical_prompts_hit_once(tmp_path):
    calls = []

    def reply(p):
        calls.append(p)
        time.sleep(0.005)
        return "r"

    gw = Gateway(ModelEndpoint("m", max_in_flight=8), ScriptedTransport(reply),
                 cache_dir=tmp_path)
    with ThreadPoolExecutor(8) as pool:
        list(pool.map(gw.cached_complete, ["same"] * 20))
    assert len(calls) == 1


def test_min_interval_paces_requests():
    sleeps = Sleeps()
    gw = Gateway(ModelEndpoint("m", min_interval=10.0), EchoTransport(), sleep=sleeps)
    for _ in range(3):
        gw.complete("x")
    assert len(sleeps) == 2
    assert all(9.0 < s <= 20.0 for s in sleeps)


def test_echo_default_and_mock_without_transport():
    assert Gateway(ModelEndpoint("m")).complete(" hi ").text == "hi"
    with pytest.raises(GatewayError):
        Gateway(ModelEndpoint("m", base_url="mock://replay"))


def test_replay_roundtrip(tmp_path):
    record_replay(tmp_path, "mock:small", {"a": "ă", "b": "b"})
    gw = Gateway(ModelEndpoint("mock:small", base_url="mock://replay"),
                 ReplayTransport(tmp_path))
    assert gw.complete("a").text == "ă"
    with pytest.raises(ReplayMiss):
        gw.complete("zzz")


def test_scripted_failure():
    gw = Gateway(ModelEndpoint("m", max_retries=1),
                 ScriptedTransport(str, fail=["x"], exc=TransientError("t")),
                 sleep=Sleeps())
    with pytest.raises(GatewayError):
        gw.complete("x")
    assert gw.request_count == 2


def test_endpoint_validation():
    with pytest.raises(ValueError):
        ModelEndpoint("m", temperature=-1)
    with pytest.raises(ValueError):
        ModelEndpoint("m", max_in_flight=0)
    with pytest.raises(ValueError, match="unknown"):
        ModelEndpoint.from_dict({"model_id": "m", "colour": "red"})
    ep = ModelEndpoint.from_dict({"model_id": "m", "developer": "X"})
    assert ModelEndpoint.from_dict(ep.as_dict()) == ep

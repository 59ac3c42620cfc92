import random
import threading
import time

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline

from rodiac.gateway import Gateway, GatewayError, ModelEndpoint, ScriptedTransport
from rodiac.prompts import get_template
from rodiac.restorers import (
    DiacriticStripper,
    EchoRestorer,
    IdentityRestorer,
    ModelRestorer,
    RestorationRecord,
    run_batch,
    sanitize_reply,
)
from rodiac.textnorm import strip_diacritics

GOLD = ["Mâine va fi o zi frumoasă.", "Știu că ești acasă.", "Azi plouă."]
STRIPPED = [strip_diacritics(g) for g in GOLD]


def restoring_reply(prompt: str) -> str:
    """Scripted model: answers the inference INPUT with its gold form."""
    for s, g in zip(STRIPPED, GOLD):
        if prompt.endswith(s) or prompt.endswith(s + "\nOUTPUT:"):
            return g
    return prompt


def test_stripper():
    st = DiacriticStripper()
    assert st.fit_transform(GOLD) == STRIPPED
    with pytest.raises(TypeError):
        st.transform("a single string")
    with pytest.raises(TypeError):
        st.transform([1, 2])
    assert st.transform(np.array(GOLD)) == STRIPPED
    assert st.transform(np.array(GOLD).reshape(-1, 1)) == STRIPPED
    with pytest.raises(ValueError):
        st.transform(np.array([GOLD, GOLD]))


def test_echo_restorer_scores():
    echo = EchoRestorer().fit(STRIPPED)
    assert echo.predict(STRIPPED) == STRIPPED
    assert echo.restorer_id == "echo" and echo.template_id is None
    assert 0.0 < echo.score(STRIPPED, GOLD) < 1.0


def test_identity_restorer():
    ident = IdentityRestorer()
    with pytest.raises(NotFittedError):
        ident.predict(STRIPPED)
    ident.fit(STRIPPED, GOLD)
    assert ident.predict(STRIPPED) == GOLD
    assert ident.score(STRIPPED, GOLD) == 1.0
    with pytest.raises(ValueError):
        ident.restore("never seen")
    with pytest.raises(ValueError, match="conflicting"):
        IdentityRestorer().fit(["Tara", "Tara"], ["Țara", "Tara"])
    with pytest.raises(ValueError):
        IdentityRestorer().fit(STRIPPED)


def test_pipeline_with_stripper():
    pipe = make_pipeline(DiacriticStripper(), IdentityRestorer())
    pipe.fit(GOLD, GOLD)
    assert pipe.predict(GOLD) == GOLD


def test_score_length_mismatch():
    with pytest.raises(ValueError, match="inconsistent"):
        EchoRestorer().score(STRIPPED, GOLD[:2])


def test_model_restorer_params_and_clone():
    ep = ModelEndpoint("mock:m", base_url="mock://scripted")
    gw = Gateway(ep, ScriptedTransport(restoring_reply))
    est = ModelRestorer(endpoint=ep, template="restore_diacritics_3s", gateway=gw)
    params = est.get_params()
    assert params["template"] == "restore_diacritics_3s" and params["sanitize"] is False
    twin = clone(est)
    assert twin.gateway is gw
    twin.set_params(template="restore_diacritics_verbose")
    assert est.template_id == "restore_diacritics_3s"
    assert twin.template_id == "restore_diacritics_verbose"
    assert est.restorer_id == "model:mock:m"
    assert est.predict(STRIPPED) == GOLD
    assert est.score(STRIPPED, GOLD) == 1.0


def test_model_restorer_accepts_template_object_and_gateway_only():
    ep = ModelEndpoint("m")
    est = ModelRestorer(gateway=Gateway(ep), template=get_template("restore_diacritics"))
    assert est.restorer_id == "model:m"
    # echo transport repeats the prompt
    assert est.restore("Azi") == "Restore the diacritics: Azi"
    with pytest.raises(ValueError):
        ModelRestorer().restorer_id


@pytest.mark.parametrize("raw,clean", [
    ("Mâine.", "Mâine."),
    ("Sure! Here is the restored text: Mâine.", "Mâine."),
    ("```\nMâine.\n```", "Mâine."),
    ('"Mâine." I restored the diacritics.', "Mâine."),
    ("INPUT: Maine.\nOUTPUT: Mâine.", "Mâine."),
])
def test_sanitize(raw, clean):
    assert sanitize_reply(raw) == clean


def test_sanitize_flag():
    ep = ModelEndpoint("m", base_url="mock://s")
    gw = Gateway(ep, ScriptedTransport(lambda p: "Here you go: Știu."))
    assert ModelRestorer(ep, gateway=gw).restore("Stiu.") == "Here you go: Știu."
    assert ModelRestorer(ep, gateway=gw, sanitize=True).restore("Stiu.") == "Știu."


def test_record_json_roundtrip():
    rec = RestorationRecord("D-1", "D", "a", "ă", "echo", None, started=1.0, finished=2.0)
    line = rec.to_json()
    assert "started" not in line and "finished" not in line
    back = RestorationRecord.from_json(line)
    assert back.output == "ă" and not back.failed


class Flaky:
    """Restorer whose items fail or finish out of order."""

    restorer_id = "flaky"
    template_id = "t"

    def __init__(self):
        self.active = 0
        self.peak = 0
        self.lock = threading.Lock()

    def restore(self, text):
        with self.lock:
            self.active += 1
            self.peak = max(self.peak, self.active)
        time.sleep(random.Random(text).random() * 0.01)
        with self.lock:
            self.active -= 1
        if text.endswith("7"):
            raise GatewayError("upstream exploded")
        return text.upper()


def test_run_batch_order_and_isolation():
    items = [(f"D-{i}", f"text {i}") for i in range(20)]
    seq = run_batch(Flaky(), items, concurrency=1, dataset="D")
    flaky = Flaky()
    par = run_batch(flaky, items, concurrency=8, dataset="D")
    assert [r.statement_id for r in par] == [i for i, _ in items]
    assert [r.to_json() for r in seq] == [r.to_json() for r in par]
    failed = [r for r in par if r.failed]
    assert [r.statement_id for r in failed] == ["D-7", "D-17"]
    assert all(r.output == "" and "exploded" in r.error for r in failed)
    assert par[0].output == "TEXT 0" and par[0].dataset == "D"
    assert flaky.peak > 1


def test_run_batch_rejects_bad_concurrency():
    with pytest.raises(ValueError):
        run_batch(EchoRestorer(), [], concurrency=0)

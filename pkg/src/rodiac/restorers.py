"""Restorers: Echo baseline, Identity oracle and the model-backed restorer.

All restorers follow the scikit-learn estimator protocol (``fit`` /
``predict`` / ``score`` with ``get_params``), where ``X`` is a list of
diacritic-stripped texts and ``y`` the corresponding gold texts, so they can
be cloned, grid-searched over templates, or dropped into pipelines after a
:class:`DiacriticStripper`.
"""

from __future__ import annotations

import json
import math
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .corpus import Statement
from .gateway import Gateway, ModelEndpoint
from .metrics import evaluate_all
from .prompts import PromptTemplate, get_template, render
from .textnorm import strip_diacritics
from .utils.validation import check_consistent_length, check_texts

__all__ = [
    "RestorationRecord",
    "DiacriticStripper",
    "EchoRestorer",
    "IdentityRestorer",
    "ModelRestorer",
    "echo_restore",
    "identity_restore",
    "model_restore",
    "sanitize_reply",
    "run_batch",
]


@dataclass
class RestorationRecord:
    statement_id: str
    dataset: str
    input: str
    output: str
    restorer_id: str
    template_id: Optional[str]
    status: str = "ok"
    error: Optional[str] = None
    started: float = 0.0
    finished: float = 0.0

    @property
    def failed(self) -> bool:
        return self.status != "ok"

    def to_json(self) -> str:
        """Serialized form without wall-clock fields (see :meth:`timing_json`)."""
        data = asdict(self)
        del data["started"], data["finished"]
        return json.dumps(data, ensure_ascii=False, sort_keys=True)

    def timing_json(self) -> str:
        return json.dumps({"statement_id": self.statement_id, "started": self.started,
                           "finished": self.finished}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RestorationRecord":
        return cls(**json.loads(line))


def echo_restore(text: str) -> str:
    return text


def identity_restore(statement: Statement) -> str:
    return statement.text


_FENCE = re.compile(r"^```[^\n]*\n(.*?)\n?```\s*$", re.DOTALL)
_PREFACE = re.compile(r"^\s*(?:sure|here|certainly|ok|okay|of course)\b[^:\n]*:\s*",
                      re.IGNORECASE)
_QUOTED = re.compile(r'^\s*["“„](.*?)["”]', re.DOTALL)


def sanitize_reply(text: str) -> str:
    """Best-effort removal of chat boilerplate around a restored sentence.

    Off by default in the pipeline: replies are normally scored verbatim.
    """
    text = text.strip()
    m = _FENCE.match(text)
    if m:
        text = m.group(1).strip()
    if "OUTPUT:" in text:
        text = text.rsplit("OUTPUT:", 1)[1].strip()
    while True:
        m = _PREFACE.match(text)
        if not m:
            break
        text = text[m.end():]
    m = _QUOTED.match(text)
    if m:
        text = m.group(1)
    return text.strip()


def model_restore(gateway: Gateway, template: PromptTemplate, text: str,
                  sanitize: bool = False) -> str:
    reply = gateway.cached_complete(render(template, text)).strip()
    return sanitize_reply(reply) if sanitize else reply


class DiacriticStripper(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping gold texts to their stripped forms."""

    def fit(self, X, y=None):
        check_texts(X)
        return self

    def transform(self, X) -> List[str]:
        return [strip_diacritics(x) for x in check_texts(X)]


class BaseRestorer(BaseEstimator):
    """Common estimator surface; subclasses implement :meth:`restore`."""

    template_id: Optional[str] = None

    @property
    def restorer_id(self) -> str:
        raise NotImplementedError

    def fit(self, X, y=None):
        check_texts(X)
        return self

    def restore(self, text: str) -> str:
        raise NotImplementedError

    def predict(self, X) -> List[str]:
        return [self.restore(x) for x in check_texts(X)]

    def score(self, X, y) -> float:
        """Mean over statements of the average of all eight evaluator scores."""
        gold = check_texts(y, name="y")
        X = check_texts(X)
        check_consistent_length(X, gold)
        if not X:
            raise ValueError("cannot score an empty sample")
        per_statement = []
        for ref, out in zip(gold, self.predict(X)):
            scores = evaluate_all(ref, out)
            per_statement.append(math.fsum(scores.values()) / len(scores))
        return math.fsum(per_statement) / len(per_statement)


class EchoRestorer(BaseRestorer):
    """Baseline returning the stripped input unchanged."""

    @property
    def restorer_id(self) -> str:
        return "echo"

    def restore(self, text: str) -> str:
        return echo_restore(text)


class IdentityRestorer(BaseRestorer):
    """Oracle that memorizes ``stripped -> gold`` during ``fit``."""

    @property
    def restorer_id(self) -> str:
        return "identity"

    def fit(self, X, y=None):
        if y is None:
            raise ValueError("IdentityRestorer.fit requires the gold texts as y")
        X = check_texts(X)
        y = check_texts(y, name="y")
        check_consistent_length(X, y)
        mapping: Dict[str, str] = {}
        for stripped, gold in zip(X, y):
            if mapping.setdefault(stripped, gold) != gold:
                raise ValueError(f"stripped text {stripped!r} has conflicting gold forms")
        self.gold_ = mapping
        return self

    def restore(self, text: str) -> str:
        if not hasattr(self, "gold_"):
            raise NotFittedError("IdentityRestorer is not fitted yet; call fit(X, y)")
        try:
            return self.gold_[text]
        except KeyError:
            raise ValueError(f"no gold text known for {text!r}") from None


class ModelRestorer(BaseRestorer):
    """Restorer backed by a chat-completion endpoint.

    Parameters
    ----------
    endpoint : ModelEndpoint
    template : str or PromptTemplate
        Builtin template id or a template object.
    gateway : Gateway, optional
        Pre-built client (sharing its cache and rate limiter); built from
        ``endpoint`` on first use otherwise.
    sanitize : bool
        Strip chat boilerplate from replies before returning them.
    """

    def __init__(self, endpoint: ModelEndpoint = None,
                 template: Union[str, PromptTemplate] = "restore_diacritics",
                 gateway: Optional[Gateway] = None, sanitize: bool = False) -> None:
        self.endpoint = endpoint
        self.template = template
        self.gateway = gateway
        self.sanitize = sanitize

    @property
    def restorer_id(self) -> str:
        return f"model:{self._endpoint().model_id}"

    @property
    def template_id(self) -> str:
        return self._template().id

    def _endpoint(self) -> ModelEndpoint:
        if self.endpoint is not None:
            return self.endpoint
        if self.gateway is not None:
            return self.gateway.endpoint
        raise ValueError("ModelRestorer needs an endpoint or a gateway")

    def _template(self) -> PromptTemplate:
        if isinstance(self.template, PromptTemplate):
            return self.template
        return get_template(self.template)

    def _gateway(self) -> Gateway:
        if self.gateway is not None:
            return self.gateway
        if getattr(self, "_own_gateway", None) is None:
            self._own_gateway = Gateway(self._endpoint())
        return self._own_gateway

    def restore(self, text: str) -> str:
        return model_restore(self._gateway(), self._template(), text, self.sanitize)


def run_batch(restorer: BaseRestorer, items: Sequence[Tuple[str, str]],
              concurrency: int = 1, dataset: str = "") -> List[RestorationRecord]:
    """Restore ``(statement_id, stripped_text)`` items, one record per item.

    Records come back in input order whatever the completion order; an
    exception while restoring one item is captured in that item's record
    (``status="error"``, empty output) and the batch carries on.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")
    restorer_id = restorer.restorer_id
    template_id = restorer.template_id

    def one(item: Tuple[str, str]) -> RestorationRecord:
        statement_id, text = item
        started = time.time()
        try:
            output, status, error = restorer.restore(text), "ok", None
        except Exception as exc:  # recorded, never fatal for the batch
            output, status, error = "", "error", f"{type(exc).__name__}: {exc}"
        return RestorationRecord(statement_id, dataset, text, output, restorer_id,
                                 template_id, status, error, started, time.time())

    if concurrency == 1:
        return [one(item) for item in items]
    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        return list(pool.map(one, items))

"""Evaluation toolkit for Romanian diacritic restoration."""

__version__ = "0.1.0"

from .textnorm import normalize, strip_diacritics, tokenize  # noqa: E402
from .metrics import EVALUATORS, evaluate_all, levenshtein  # noqa: E402
from .restorers import (  # noqa: E402
    DiacriticStripper,
    EchoRestorer,
    IdentityRestorer,
    ModelRestorer,
    run_batch,
)

__all__ = [
    "__version__",
    "normalize",
    "strip_diacritics",
    "tokenize",
    "EVALUATORS",
    "evaluate_all",
    "levenshtein",
    "DiacriticStripper",
    "EchoRestorer",
    "IdentityRestorer",
    "ModelRestorer",
    "run_batch",
]

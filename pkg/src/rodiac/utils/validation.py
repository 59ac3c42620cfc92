from __future__ import annotations

from typing import Any, List

from ..textnorm import normalize


def check_texts(X: Any, *, name: str = "X", allow_empty: bool = True) -> List[str]:
    """Validate a one-dimensional collection of strings and return it as a list.

    A bare string is rejected (it is almost always a caller bug: iterating it
    would yield characters).  Numpy object/unicode arrays and pandas Series
    are accepted.
    """
    if isinstance(X, (str, bytes)):
        raise TypeError(f"{name} must be a collection of strings, not a single string")
    ndim = getattr(X, "ndim", 1)
    if ndim != 1:
        if ndim == 2 and getattr(X, "shape", (0, 0))[1] == 1:
            X = X.iloc[:, 0] if hasattr(X, "iloc") else X[:, 0]
        else:
            raise ValueError(f"{name} must be one-dimensional, got ndim={ndim}")
    try:
        texts = [x for x in X]
    except TypeError:
        raise TypeError(f"{name} must be iterable, got {type(X).__name__}") from None
    for i, x in enumerate(texts):
        if not isinstance(x, str):
            raise TypeError(f"{name}[{i}] is {type(x).__name__}, expected str")
    if not allow_empty and not texts:
        raise ValueError(f"{name} is empty")
    return [str(x) for x in texts]


def check_consistent_length(X: List[str], y: List[str]) -> None:
    if len(X) != len(y):
        raise ValueError(f"inconsistent lengths: X has {len(X)} samples, y has {len(y)}")


def check_normalized(texts: List[str], *, name: str = "X") -> List[str]:
    """Return canonical forms of ``texts`` (NFC, comma-below ș/ț)."""
    return [normalize(t) for t in texts]

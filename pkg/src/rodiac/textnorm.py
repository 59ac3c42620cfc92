"""Romanian text canonicalization, diacritic stripping and tokenization."""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterator, List, Union

__all__ = [
    "DIACRITICS",
    "BASE_LETTERS",
    "FAMILIES",
    "TextDecodeError",
    "DiacriticOccurrence",
    "POSITION_CLASSES",
    "SENTENCE_POSITIONS",
    "normalize",
    "strip_diacritics",
    "tokenize",
    "is_diacritic",
    "count_diacritics",
    "word_span",
    "sentences",
    "sentence_count",
    "diacritic_occurrences",
]

#: diacritic letter -> base letter, comma-below forms only
DIACRITICS = {
    "ă": "a", "â": "a", "î": "i", "ș": "s", "ț": "t",
    "Ă": "A", "Â": "A", "Î": "I", "Ș": "S", "Ț": "T",
}
BASE_LETTERS = frozenset(DIACRITICS.values())
#: lowercase family representatives in the order they are usually listed
FAMILIES = ("ă", "â", "î", "ș", "ț")

_CEDILLA_TO_COMMA = {
    "\u015e": "\u0218",  # S cedilla -> S comma below
    "\u015f": "\u0219",
    "\u0162": "\u021a",  # T cedilla -> T comma below
    "\u0163": "\u021b",
}
_FOLD = str.maketrans(_CEDILLA_TO_COMMA)
_STRIP = str.maketrans(DIACRITICS)
_TERMINALS = frozenset(".!?")

POSITION_CLASSES = (
    "sentence-initial-capital",
    "word-initial",
    "word-medial",
    "word-final",
)
SENTENCE_POSITIONS = ("initial", "medial", "final")


class TextDecodeError(ValueError):
    """Raised when input bytes (or surrogate-escaped text) are not valid UTF-8."""

    def __init__(self, offset: int, reason: str = "invalid UTF-8") -> None:
        super().__init__(f"{reason} at byte offset {offset}")
        self.offset = offset


def _check_surrogates(text: str) -> None:
    try:
        text.encode("utf-8")
    except UnicodeEncodeError as exc:
        offset = len(text[: exc.start].encode("utf-8"))
        raise TextDecodeError(offset, "undecodable code unit") from exc


def normalize(text: Union[str, bytes]) -> str:
    """Return the canonical form of ``text``: NFC with comma-below ș/ț.

    Bytes are decoded as strict UTF-8; a decoding failure raises
    :class:`TextDecodeError` carrying the offending byte offset.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise TextDecodeError(exc.start) from exc
    else:
        _check_surrogates(text)
    return unicodedata.normalize("NFC", text).translate(_FOLD)


def strip_diacritics(text: str) -> str:
    """Replace every Romanian diacritic letter by its base letter (length-preserving)."""
    return text.translate(_STRIP)


def is_diacritic(ch: str) -> bool:
    return ch in DIACRITICS


def count_diacritics(text: str) -> int:
    return sum(1 for ch in text if ch in DIACRITICS)


def tokenize(text: str) -> List[str]:
    """Split on whitespace runs; punctuation stays attached to its token."""
    return text.split()


def _is_word_char(ch: str) -> bool:
    return ch.isalnum()


def word_span(token: str) -> tuple:
    """Return ``(start, stop)`` of the token with edge punctuation removed.

    A token with no alphanumeric character yields an empty span at 0.
    """
    start, stop = 0, len(token)
    while start < stop and not _is_word_char(token[start]):
        start += 1
    while stop > start and not _is_word_char(token[stop - 1]):
        stop -= 1
    if start == stop:
        return 0, 0
    return start, stop


def _ends_sentence(token: str) -> bool:
    return bool(token) and token[-1] in _TERMINALS


def _token_offsets(text: str) -> Iterator[tuple]:
    i, n = 0, len(text)
    while i < n:
        while i < n and text[i].isspace():
            i += 1
        if i >= n:
            break
        j = i
        while j < n and not text[j].isspace():
            j += 1
        yield i, text[i:j]
        i = j


def sentences(text: str) -> List[List[str]]:
    """Group tokens into sentences.

    A sentence ends at a token whose last character is '.', '!' or '?',
    i.e. terminal punctuation followed by whitespace or end of text.
    """
    out: List[List[str]] = []
    current: List[str] = []
    for tok in tokenize(text):
        current.append(tok)
        if _ends_sentence(tok):
            out.append(current)
            current = []
    if current:
        out.append(current)
    return out


def sentence_count(text: str) -> int:
    return len(sentences(text))


@dataclass(frozen=True)
class DiacriticOccurrence:
    char_index: int
    letter: str
    word_index: int
    word_offset: int
    position_class: str
    sentence_position: str


def diacritic_occurrences(text: str) -> List[DiacriticOccurrence]:
    """List every diacritic in ``text`` with its word and sentence context."""
    occurrences: List[DiacriticOccurrence] = []
    tokens = list(_token_offsets(text))
    # sentence membership per token
    sent_start = True
    for word_index, (start, tok) in enumerate(tokens):
        is_first = sent_start
        is_last = _ends_sentence(tok) or word_index == len(tokens) - 1
        sent_start = _ends_sentence(tok)
        if is_first:
            sentence_position = "initial"
        elif is_last:
            sentence_position = "final"
        else:
            sentence_position = "medial"
        core_start, core_stop = word_span(tok)
        for offset, ch in enumerate(tok):
            if ch not in DIACRITICS:
                continue
            if offset == core_start:
                if is_first and ch.isupper():
                    position_class = "sentence-initial-capital"
                else:
                    position_class = "word-initial"
            elif offset == core_stop - 1:
                position_class = "word-final"
            else:
                position_class = "word-medial"
            occurrences.append(
                DiacriticOccurrence(
                    char_index=start + offset,
                    letter=ch,
                    word_index=word_index,
                    word_offset=offset,
                    position_class=position_class,
                    sentence_position=sentence_position,
                )
            )
    return occurrences

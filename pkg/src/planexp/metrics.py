"""Explanation quality metrics: length, Flesch Reading Ease, cosine similarity.

* Words are maximal non-whitespace runs containing at least one alphanumeric
  character, so bare punctuation never counts.
* FRES = 206.835 - 1.015 * (words/sentences) - 84.6 * (syllables/words), with
  sentences split on ., ! or ? followed by whitespace or end of text.
  Syllables use the vowel-group heuristic: contiguous [aeiouy] groups, minus
  a terminal silent "e" unless that would reach zero, minimum one per word.
  Tokens with no letters (e.g. "28.20") count as one syllable.
* Cosine similarity is taken over stop-word-filtered token count vectors;
  the stop-word list ships with the package and can be overridden by path.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources


class MetricsError(ValueError):
    pass


FRES_CEILING = 121.22

_SENTENCE_SPLIT = re.compile(r"[.!?]+(?:\s+|$)")
_VOWEL_GROUPS = re.compile(r"[aeiouy]+")
_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class MetricsReport:
    n_words: int
    fres: float
    cosine: float | None = None

    def to_json(self) -> dict:
        return {"n_words": self.n_words, "fres": self.fres, "cosine": self.cosine}


def words(text: str) -> list[str]:
    return [tok for tok in text.split() if any(c.isalnum() for c in tok)]


def word_count(text: str) -> int:
    return len(words(text))


def syllable_count(token: str) -> int:
    letters = re.sub(r"[^a-z]", "", token.lower())
    if not letters:
        return 1
    groups = len(_VOWEL_GROUPS.findall(letters))
    if letters.endswith("e") and groups >= 2:
        groups -= 1
    return max(groups, 1)


def sentence_count(text: str) -> int:
    chunks = _SENTENCE_SPLIT.split(text)
    return max(sum(1 for c in chunks if word_count(c) > 0), 1)


def fres(text: str) -> float:
    toks = words(text)
    if not toks:
        raise MetricsError("FRES needs at least one word")
    n_words = len(toks)
    n_sentences = sentence_count(text)
    n_syllables = sum(syllable_count(t) for t in toks)
    return 206.835 - 1.015 * (n_words / n_sentences) - 84.6 * (n_syllables / n_words)


def load_stopwords(path=None) -> frozenset[str]:
    if path is None:
        text = resources.files("planexp.data").joinpath("stopwords.txt").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


_DEFAULT_STOPWORDS: frozenset[str] | None = None


def default_stopwords() -> frozenset[str]:
    global _DEFAULT_STOPWORDS
    if _DEFAULT_STOPWORDS is None:
        _DEFAULT_STOPWORDS = load_stopwords()
    return _DEFAULT_STOPWORDS


def content_vector(text: str, stopwords: frozenset[str] | None = None) -> Counter:
    if stopwords is None:
        stopwords = default_stopwords()
    return Counter(t for t in _TOKEN.findall(text.lower()) if t not in stopwords)


def cosine_similarity(a: str, b: str, stopwords: frozenset[str] | None = None) -> float:
    """Cosine of the two stop-word-filtered count vectors.

    Errors when both texts filter down to nothing; a single empty side yields 0.
    """
    va = content_vector(a, stopwords)
    vb = content_vector(b, stopwords)
    if not va and not vb:
        raise MetricsError("both texts are empty after stop-word filtering")
    if not va or not vb:
        return 0.0
    dot = sum(count * vb[tok] for tok, count in va.items())
    norm = math.sqrt(sum(c * c for c in va.values())) * math.sqrt(sum(c * c for c in vb.values()))
    return min(max(dot / norm, 0.0), 1.0)


def report(narrative: str, explanation: str, stopwords: frozenset[str] | None = None) -> MetricsReport:
    """Length and FRES of the explanation, cosine against its narrative."""
    if word_count(explanation) == 0:
        raise MetricsError("explanation has no words")
    return MetricsReport(
        n_words=word_count(explanation),
        fres=fres(explanation),
        cosine=cosine_similarity(narrative, explanation, stopwords),
    )

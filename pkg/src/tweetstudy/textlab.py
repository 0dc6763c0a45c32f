"""Tokenization, stop-word filtering, vocabulary building and lexicon sentiment.

Sentiment scoring
-----------------
A text is split into sentences on terminal punctuation. Within a sentence every
token carrying a polarity weight contributes that weight, flipped in sign when
an odd number of negators occur among the two preceding tokens and multiplied
by any amplifier/deamplifier found in the same two-token look-back. The sentence
score is the sum of contributions divided by sqrt(sentence length in tokens);
the text score is the mean over its non-empty sentences.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

SHIFTER_WINDOW = 2

_URL_RE = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*://\S*")
_WORD_RE = re.compile(r"[^\W_]+")
_SENTENCE_RE = re.compile(r"[.!?]+")


def tokenize(text: str) -> list[str]:
    """Lowercase word tokens with URLs dropped and '#'/'@' prefixes stripped.

    >>> tokenize("Big NEWS: partnership! see https://t.co/x #blockchain @binance")
    ['big', 'news', 'partnership', 'see', 'blockchain', 'binance']
    """
    if not text:
        return []
    return _WORD_RE.findall(_URL_RE.sub(" ", text).lower())


def remove_stopwords(tokens: Sequence[str], stoplist: Iterable[str]) -> list[str]:
    stop = stoplist if isinstance(stoplist, (set, frozenset)) else frozenset(stoplist)
    return [t for t in tokens if t not in stop]


def build_vocabulary(corpus: Iterable[Sequence[str]], min_count: int = 50,
                     stoplist: Iterable[str] = ()) -> dict[str, int]:
    """Corpus frequency of every word seen at least ``min_count`` times."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    stop = frozenset(stoplist)
    counts = Counter(w for doc in corpus for w in doc if w not in stop)
    return {w: c for w, c in sorted(counts.items()) if c >= min_count}


@dataclass
class SentimentLexicon:
    polarity: dict[str, float]
    negators: frozenset[str] = frozenset()
    # word -> multiplier; >1 amplifies, <1 dampens
    shifters: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for w, x in self.polarity.items():
            if not math.isfinite(x):
                raise ValueError(f"weight for {w!r} is not finite")
        for w, m in self.shifters.items():
            if not (math.isfinite(m) and m > 0):
                raise ValueError(f"multiplier for {w!r} must be > 0")
        overlap = set(self.polarity) & (set(self.negators) | set(self.shifters))
        if overlap:
            raise ValueError(f"words both polar and shifters: {sorted(overlap)}")


def load_lexicon(path: str | Path | None = None) -> SentimentLexicon:
    """Read ``word,weight`` / ``word,NEGATOR`` / ``word,AMPLIFIER:x`` /
    ``word,DEAMPLIFIER:x`` rows. Without a path the bundled English lexicon is used.
    """
    if path is None:
        text = resources.files("tweetstudy").joinpath("data/lexicon.csv").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    polarity: dict[str, float] = {}
    negators: set[str] = set()
    shifters: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        raw = raw.strip()
        if not raw or raw.lower() == "word,weight":
            continue
        word, _, entry = raw.partition(",")
        word, entry = word.strip().lower(), entry.strip()
        if not word or not entry:
            raise ValueError(f"lexicon line {lineno}: expected word,value")
        if entry == "NEGATOR":
            negators.add(word)
        elif entry.startswith(("AMPLIFIER:", "DEAMPLIFIER:")):
            shifters[word] = float(entry.split(":", 1)[1])
        else:
            polarity[word] = float(entry)
    return SentimentLexicon(polarity, frozenset(negators), shifters)


def load_stoplist(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        text = resources.files("tweetstudy").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip())


def _sentence_score(tokens: list[str], lex: SentimentLexicon) -> float:
    total = 0.0
    for i, tok in enumerate(tokens):
        w = lex.polarity.get(tok)
        if w is None:
            continue
        flips = 0
        for prev in tokens[max(0, i - SHIFTER_WINDOW):i]:
            if prev in lex.negators:
                flips += 1
            elif prev in lex.shifters:
                w *= lex.shifters[prev]
        total += -w if flips % 2 else w
    return total / math.sqrt(len(tokens))


def sentiment_score(text: str, lexicon: SentimentLexicon) -> float:
    scores = []
    for sentence in _SENTENCE_RE.split(_URL_RE.sub(" ", text or "")):
        tokens = tokenize(sentence)
        if tokens:
            scores.append(_sentence_score(tokens, lexicon))
    return sum(scores) / len(scores) if scores else 0.0


def featurize_tweets(tweets, lexicon: SentimentLexicon, stoplist: Iterable[str]) -> None:
    """Fill ``sentiment`` and ``tokens`` (stop words removed) on each record in place."""
    stop = frozenset(stoplist)
    for t in tweets:
        t.sentiment = sentiment_score(t.text, lexicon)
        t.tokens = remove_stopwords(tokenize(t.text), stop)

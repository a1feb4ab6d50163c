"""Text cleaning for review corpora.

Turns raw review strings into token lists: tokenize, lowercase, drop
stopwords, lemmatize with suffix rules, and optionally filter by
language before anything downstream sees the record.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .errors import ConfigError

__all__ = [
    "PrepConfig",
    "RawRecord",
    "tokenize",
    "lemmatize_token",
    "detect_language",
    "preprocess",
    "preprocess_explain",
    "load_stopwords",
    "default_lexicons",
]

# Maximal runs of letters/digits, or single punctuation marks.  The
# underscore is \w in Python regexes but reads as punctuation in review
# text, so it gets its own branch.
_TOKEN_RE = re.compile(r"[^\W_]+|[^\w\s]|_")

_VOWELISH = "aeiouls"  # never undouble these after stripping a suffix


@dataclass(frozen=True)
class PrepConfig:
    """Switches for the cleaning pipeline.

    ``language_filter`` is a language code ("en") or None to accept
    everything.  ``drop_punctuation`` exists for bag-of-words
    featurization; sequence models keep punctuation so they can learn
    sentence endings.
    """

    lowercase: bool = True
    remove_stopwords: bool = True
    lemmatize: bool = True
    language_filter: str | None = "en"
    min_tokens: int = 1
    max_tokens: int = 200
    drop_punctuation: bool = False

    def __post_init__(self) -> None:
        if self.min_tokens < 0:
            raise ConfigError("min_tokens must be nonnegative")
        if self.max_tokens <= 0:
            raise ConfigError("max_tokens must be positive")
        if self.min_tokens > self.max_tokens:
            raise ConfigError(
                f"min_tokens ({self.min_tokens}) exceeds max_tokens ({self.max_tokens})"
            )


@dataclass
class RawRecord:
    """One labeled review as it arrives from disk."""

    label: str
    text: str
    extra: dict[str, str] = field(default_factory=dict)


def tokenize(text: str) -> list[str]:
    """Split text into alphanumeric runs and single punctuation marks."""
    return _TOKEN_RE.findall(text)


def _strip_once(token: str) -> str:
    """Apply the first matching suffix rule, or return the token unchanged."""
    if token.endswith("ies") and len(token) >= 5:
        return token[:-3] + "y"
    if token.endswith("ing") and len(token) >= 6:
        stem = token[:-3]
        if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELISH:
            stem = stem[:-1]
        return stem
    if token.endswith("ed") and len(token) >= 5:
        stem = token[:-2]
        if stem.endswith("i"):
            # "studied" strips to "studi"; restore the y so repeated
            # passes agree with "studies" and "studying".
            return stem[:-1] + "y"
        if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] not in _VOWELISH:
            stem = stem[:-1]
        return stem
    if (
        token.endswith("s")
        and len(token) >= 4
        and not token.endswith(("ss", "us", "is"))
        and token not in ("always", "perhaps", "whereas")
    ):
        return token[:-1]
    return token


def lemmatize_token(token: str) -> str:
    """Reduce a lowercased token to its stem by iterated suffix rules.

    Iterates to a fixed point so that plural gerunds ("meetings")
    collapse the same way their parts do.
    """
    while True:
        stripped = _strip_once(token)
        if stripped == token:
            return token
        token = stripped


@lru_cache(maxsize=None)
def load_stopwords(language: str) -> frozenset[str]:
    """Load the shipped stopword list for a language code."""
    name = f"stopwords_{language}.txt"
    try:
        raw = resources.files("ganbalance.data").joinpath(name).read_text("utf-8")
    except FileNotFoundError:
        raise ConfigError(f"no stopword list shipped for language {language!r}") from None
    words = set()
    for line in raw.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def default_lexicons() -> dict[str, frozenset[str]]:
    """Stopword lexicons for every language with a shipped list."""
    codes = []
    for entry in resources.files("ganbalance.data").iterdir():
        m = re.fullmatch(r"stopwords_(\w+)\.txt", entry.name)
        if m:
            codes.append(m.group(1))
    return {code: load_stopwords(code) for code in sorted(codes)}


def detect_language(
    text: str, lexicons: dict[str, frozenset[str]] | None = None
) -> tuple[str, float]:
    """Guess the language of a text by stopword overlap.

    Returns (language code, confidence) where confidence is the
    fraction of tokens that hit the winning language's stopword list.
    Ties break toward the lexicographically smaller code; an empty
    text is ("und", 0.0).
    """
    if lexicons is None:
        lexicons = default_lexicons()
    if not lexicons:
        raise ConfigError("detect_language needs at least one lexicon")
    tokens = [t.lower() for t in tokenize(text)]
    if not tokens:
        return ("und", 0.0)
    best_code = "und"
    best_score = 0.0
    for code in sorted(lexicons):
        lex = lexicons[code]
        score = sum(1 for t in tokens if t in lex) / len(tokens)
        if score > best_score:
            best_code, best_score = code, score
    return (best_code, best_score)


def preprocess_explain(
    record: RawRecord,
    config: PrepConfig,
    lexicons: dict[str, frozenset[str]] | None = None,
) -> tuple[list[str] | None, str | None]:
    """Clean one record, reporting why it was dropped if it was.

    Returns (tokens, None) on success or (None, reason) where reason is
    one of "language", "too_short", "too_long".
    """
    if config.language_filter is not None:
        code, _ = detect_language(record.text, lexicons)
        # "und" means no lexicon scored a single hit; without positive
        # evidence of another language the record stays.
        if code not in (config.language_filter, "und"):
            return (None, "language")

    tokens = tokenize(record.text)
    if config.lowercase:
        tokens = [t.lower() for t in tokens]
    if config.drop_punctuation:
        tokens = [t for t in tokens if t[0].isalnum()]
    if config.remove_stopwords:
        stop = load_stopwords(config.language_filter or "en")
        tokens = [t for t in tokens if t not in stop]
    if config.lemmatize:
        tokens = [lemmatize_token(t) for t in tokens]
        if config.remove_stopwords:
            # a lemma can land on a stopword ("wills" -> "will"); sweep
            # again so cleaning a cleaned text changes nothing
            tokens = [t for t in tokens if t not in stop]

    if len(tokens) < config.min_tokens:
        return (None, "too_short")
    if len(tokens) > config.max_tokens:
        return (None, "too_long")
    return (tokens, None)


def preprocess(
    record: RawRecord,
    config: PrepConfig,
    lexicons: dict[str, frozenset[str]] | None = None,
) -> list[str] | None:
    """Clean one record; None means the record was dropped."""
    tokens, _ = preprocess_explain(record, config, lexicons)
    return tokens

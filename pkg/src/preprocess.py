"""Sentence segmentation and token normalization for citing spans.

normalize() runs a fixed seven-step pipeline: placeholder protection, URL
replacement, dash removal, number masking, tokenization, capitalization
normalization and phrase merging. Every step but the first can be switched
off in NormConfig.
"""

import logging
import re
from collections import Counter
from pathlib import Path
from typing import FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError

from config import NormConfig
from models import PLACEHOLDER_RE, CitingSpan, Sentence, Token, TokenKind

logger = logging.getLogger(__name__)

URL_TOKEN = "xurlx"
NUMBER_TOKEN = "xnumx"

_URL = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
_INNER_DASH = re.compile(r"(?<=\w)[-‐‑–](?=\w)")
_STANDALONE_DASH = re.compile(r"(?<!\w)[-‐‑‒–—―]+(?!\w)")
_NUMBER = re.compile(r"(?<![\w.])\d+(?:\.\d+)?(?!\w|\.\d)")
_WORD = re.compile(r"\w+")
_TERMINAL = re.compile(r"[.!?]+")
_LEADING_PUNCT = "([{\"'"


class PhraseDict(BaseModel):
    """Multi-word phrases (2-6 normalized words), sorted for deterministic matching"""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[Tuple[str, ...], ...] = Field(default_factory=tuple)

    _lookup: FrozenSet[Tuple[str, ...]] = PrivateAttr(default_factory=frozenset)
    _max_len: int = PrivateAttr(0)

    def model_post_init(self, __context) -> None:
        self._lookup = frozenset(self.entries)
        self._max_len = max((len(e) for e in self.entries), default=0)

    @classmethod
    def from_lines(cls, lines: Iterable[str], rules: Optional[NormConfig] = None) -> "PhraseDict":
        rules = rules or NormConfig()
        entries = set()
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#") or "⟦" in line:
                continue
            words = tuple(_normalize_words(line, None, rules, None, merge=False))
            if 2 <= len(words) <= 6:
                entries.add(words)
            else:
                logger.debug(f"Skipping phrase '{line}': {len(words)} words after normalization")
        return cls(entries=tuple(sorted(entries)))

    def merge(self, words: Sequence[str]) -> List[str]:
        """Greedy longest match, matched words joined with '_'"""
        if not self._lookup:
            return list(words)
        merged = []
        i = 0
        n = len(words)
        while i < n:
            for length in range(min(self._max_len, n - i), 1, -1):
                candidate = tuple(words[i:i + length])
                if candidate in self._lookup:
                    merged.append("_".join(candidate))
                    i += length
                    break
            else:
                merged.append(words[i])
                i += 1
        return merged


def load_phrase_dict(path: Optional[str], rules: Optional[NormConfig] = None) -> PhraseDict:
    if not path:
        return PhraseDict()
    text = Path(path).read_text(encoding="utf-8")
    phrases = PhraseDict.from_lines(text.splitlines(), rules)
    logger.info(f"Loaded {len(phrases.entries)} phrases from {path}")
    return phrases


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------

def _abbreviation_tails(abbreviations: Iterable[str]) -> FrozenSet[str]:
    # "et al." is matched on its last chunk "al."
    return frozenset(a.split()[-1].lower() for a in abbreviations if a.strip())


def split_sentences(text: str, abbreviations: Optional[Iterable[str]] = None) -> List[str]:
    tails = _abbreviation_tails(abbreviations if abbreviations is not None else NormConfig().abbreviations)
    protected = [(m.start(), m.end()) for m in PLACEHOLDER_RE.finditer(text)]

    sentences = []
    start = 0
    for match in _TERMINAL.finditer(text):
        end = match.end()
        if any(lo < end < hi for lo, hi in protected):
            continue
        rest = text[end:]
        stripped = rest.lstrip()
        if len(stripped) == len(rest) or not stripped:
            continue
        if not (stripped[0].isupper() or stripped[0].isdigit()):
            continue
        chunk_start = max(text.rfind(" ", start, match.start()) + 1, start)
        chunk = text[chunk_start:end].lstrip(_LEADING_PUNCT).lower()
        if chunk in tails:
            continue
        sentence = text[start:end].strip()
        if sentence:
            sentences.append(sentence)
        start = end

    last = text[start:].strip()
    if last:
        sentences.append(last)
    return sentences


def segment(span: CitingSpan, abbreviations: Optional[Iterable[str]] = None) -> List[str]:
    """Split a citing span on . ! ? followed by whitespace and an uppercase letter or digit"""
    return split_sentences(span.text, abbreviations)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------

def _pre_tokenize(text: str, rules: NormConfig) -> List[str]:
    """Steps 2-5: URLs, dashes, numbers, tokenization"""
    if rules.url_replace:
        text = _URL.sub(f" {URL_TOKEN} ", text)
    if rules.dash_removal:
        text = _INNER_DASH.sub("", text)
        text = _STANDALONE_DASH.sub(" ", text)
    if rules.number_replace:
        text = _NUMBER.sub(NUMBER_TOKEN, text)
    return _WORD.findall(text)


def _is_acronym(word: str) -> bool:
    return len(word) >= 2 and word.isupper()


def _normalize_words(text: str, phrases: Optional[PhraseDict], rules: NormConfig,
                     acronyms: Optional[FrozenSet[str]], merge: bool = True) -> List[str]:
    words = _pre_tokenize(text, rules)
    if rules.lowercase:
        keep = acronyms if (rules.acronym_pass and acronyms) else frozenset()
        words = [w if w in keep else w.lower() for w in words]
    if merge and rules.phrase_merge and phrases is not None:
        words = phrases.merge(words)
    return words


def collect_acronyms(spans: Iterable[CitingSpan], rules: NormConfig) -> FrozenSet[str]:
    """Read-only pre-scan for the acronym-preserving capitalization mode"""
    counts: Counter = Counter()
    for span in spans:
        text = PLACEHOLDER_RE.sub(" ", span.text)
        counts.update(w for w in _pre_tokenize(text, rules) if _is_acronym(w))
    acronyms = frozenset(w for w, c in counts.items() if c >= 2)
    logger.info(f"Acronym pass kept {len(acronyms)} all-caps tokens")
    return acronyms


def normalize(raw: str, phrases: Optional[PhraseDict], rules: NormConfig,
              acronyms: Optional[FrozenSet[str]] = None) -> List[Token]:
    """Placeholders become citation tokens; the text between them runs through steps 2-7"""
    tokens: List[Token] = []
    position = 0
    for match in PLACEHOLDER_RE.finditer(raw):
        tokens.extend(Token.word(w) for w in _normalize_words(raw[position:match.start()], phrases, rules, acronyms))
        try:
            tokens.append(Token(kind=TokenKind.CITATION, surface=f"CITE:{match.group(1)}:{match.group(2)}"))
        except ValidationError:
            logger.debug(f"Dropping invalid placeholder {match.group(0)}")
        position = match.end()
    tokens.extend(Token.word(w) for w in _normalize_words(raw[position:], phrases, rules, acronyms))
    return tokens


def run_preprocess(spans: Iterable[CitingSpan], phrases: Optional[PhraseDict], rules: NormConfig,
                   acronyms: Optional[FrozenSet[str]] = None) -> Iterator[Sentence]:
    """Segment, normalize, and keep only citing sentences with some context"""
    for span in spans:
        for raw in segment(span, rules.abbreviations):
            sentence = Sentence(
                doc_id=span.doc_id,
                pub_year=span.pub_year,
                tokens=normalize(raw, phrases, rules, acronyms),
            )
            if sentence.is_trainable:
                yield sentence


# ---------------------------------------------------------------------------
# Sentence files
# ---------------------------------------------------------------------------

def write_sentences(path: Path, sentences: Iterable[Sentence]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for sentence in sentences:
            f.write(sentence.to_line() + "\n")
            count += 1
    return count


def read_sentences(path: Path, pub_year: int) -> List[Sentence]:
    sentences = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            surfaces = line.split()
            if surfaces:
                sentences.append(Sentence(pub_year=pub_year, tokens=[Token.from_surface(s) for s in surfaces]))
    return sentences

import re
from enum import Enum
from typing import Dict, List, Optional, Set, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

PLACEHOLDER_OPEN = "⟦"
PLACEHOLDER_CLOSE = "⟧"
CITE_PREFIX = "CITE:"

META_KEY_RE = re.compile(r"^[a-z0-9]+(?:_[a-z0-9]+){4}$")
PLACEHOLDER_RE = re.compile(r"⟦CITE:(pmid|pmcid|meta):([^⟧ ]+)⟧")


class CitationKind(str, Enum):
    PMID = "pmid"
    PMCID = "pmcid"
    META = "meta"


class CitationId(BaseModel):
    """Canonical identifier of a cited (or citing) publication"""

    model_config = ConfigDict(frozen=True)

    kind: CitationKind
    value: str = Field(..., description="Digits for pmid/pmcid (no PMC prefix), fa_ve_yr_vo_fp for meta")

    @model_validator(mode="after")
    def validate_value(self):
        if self.kind in (CitationKind.PMID, CitationKind.PMCID):
            if not self.value or not self.value.isdigit():
                raise ValueError(f"{self.kind.value} must be a nonempty digit string, got '{self.value}'")
        elif not META_KEY_RE.match(self.value):
            raise ValueError(f"'{self.value}' is not a canonical meta-key")
        return self

    def __str__(self) -> str:
        return f"{self.kind.value}:{self.value}"

    @property
    def token(self) -> str:
        return f"{CITE_PREFIX}{self}"

    @property
    def placeholder(self) -> str:
        return f"{PLACEHOLDER_OPEN}{self.token}{PLACEHOLDER_CLOSE}"

    @classmethod
    def parse(cls, text: str) -> "CitationId":
        """Accepts CITE:kind:value, kind:value, PMC123 or a bare PMID"""
        text = text.strip()
        if text.startswith(CITE_PREFIX):
            text = text[len(CITE_PREFIX):]
        if ":" in text:
            kind, value = text.split(":", 1)
            return cls(kind=CitationKind(kind), value=value)
        if text.upper().startswith("PMC"):
            return cls(kind=CitationKind.PMCID, value=text[3:])
        return cls(kind=CitationKind.PMID, value=text)


class RefMetadata(BaseModel):
    first_author_given: str = ""
    first_author_surname: str = ""
    venue: str = ""
    year: Optional[int] = Field(None, description="Calendar year; None when the reference has none")
    volume: str = ""
    first_page: str = ""
    pmid: Optional[str] = None
    pmcid: Optional[str] = None


class XrefMarker(BaseModel):
    """Inline bibliographic cross-reference inside a paragraph"""

    rid: str


class Paragraph(BaseModel):
    segments: List[Union[XrefMarker, str]] = Field(default_factory=list)

    @property
    def markers(self) -> List[XrefMarker]:
        return [s for s in self.segments if isinstance(s, XrefMarker)]


class RawDocument(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: CitationId
    pub_year: int
    body_text: List[Paragraph]
    references: Dict[str, RefMetadata] = Field(default_factory=dict)

    @property
    def markers(self) -> List[XrefMarker]:
        return [m for p in self.body_text for m in p.markers]

    @property
    def dangling_labels(self) -> Set[str]:
        return {m.rid for m in self.markers if m.rid not in self.references}


class CitingSpan(BaseModel):
    doc_id: CitationId
    pub_year: int
    text: str = Field(..., description="Paragraph text with ⟦CITE:<kind>:<value>⟧ placeholders")


class TokenKind(str, Enum):
    WORD = "word"
    CITATION = "citation"


class Token(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: TokenKind
    surface: str

    @model_validator(mode="after")
    def validate_surface(self):
        if self.kind == TokenKind.WORD:
            if not self.surface or any(ch.isspace() for ch in self.surface):
                raise ValueError(f"invalid word token '{self.surface}'")
        else:
            CitationId.parse(self.surface)
        return self

    @classmethod
    def word(cls, surface: str) -> "Token":
        return cls(kind=TokenKind.WORD, surface=surface)

    @classmethod
    def citation(cls, citation: CitationId) -> "Token":
        return cls(kind=TokenKind.CITATION, surface=citation.token)

    @classmethod
    def from_surface(cls, surface: str) -> "Token":
        if surface.startswith(CITE_PREFIX):
            return cls(kind=TokenKind.CITATION, surface=surface)
        return cls(kind=TokenKind.WORD, surface=surface)


class Sentence(BaseModel):
    doc_id: Optional[CitationId] = Field(None, description="None when read back from a sentence file")
    pub_year: int
    tokens: List[Token]

    @property
    def is_trainable(self) -> bool:
        """At least one citation and some context around it"""
        return len(self.tokens) >= 2 and any(t.kind == TokenKind.CITATION for t in self.tokens)

    def to_line(self) -> str:
        return " ".join(t.surface for t in self.tokens)


class VocabEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    surface: str
    kind: TokenKind
    count: int = Field(..., ge=0)


class Vocabulary(BaseModel):
    """Joint word/citation vocabulary; ids are positions in `entries`"""

    entries: List[VocabEntry]
    total_tokens: int = Field(..., ge=0)

    _index: Dict[str, int] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context) -> None:
        self._index = {e.surface: i for i, e in enumerate(self.entries)}

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, surface: str) -> bool:
        return surface in self._index

    @property
    def index(self) -> Dict[str, int]:
        return self._index

    def id_of(self, surface: str) -> Optional[int]:
        return self._index.get(surface)

    def counts(self) -> np.ndarray:
        return np.array([e.count for e in self.entries], dtype=np.int64)

    def citation_mask(self) -> np.ndarray:
        return np.array([e.kind == TokenKind.CITATION for e in self.entries], dtype=bool)


class EmbeddingModel(BaseModel):
    """One period's vectors; input_vectors rows are the published representations"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    period: int
    vocab: Vocabulary
    input_vectors: np.ndarray
    output_vectors: Optional[np.ndarray] = None
    aligned: bool = False
    frame_period: Optional[int] = None
    loss_history: List[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_matrix(self):
        if self.input_vectors.ndim != 2 or self.input_vectors.shape[0] != len(self.vocab):
            raise ValueError(
                f"input_vectors shape {self.input_vectors.shape} does not match |V|={len(self.vocab)}"
            )
        if not np.all(np.isfinite(self.input_vectors)):
            raise ValueError("input_vectors contain non-finite entries")
        return self

    @property
    def dim(self) -> int:
        return int(self.input_vectors.shape[1])

    def vector(self, surface: str) -> Optional[np.ndarray]:
        idx = self.vocab.id_of(surface)
        return None if idx is None else self.input_vectors[idx]


class Rotation(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    matrix: np.ndarray
    rank_deficient: bool = False
    residual: Optional[float] = None

    @field_validator("matrix")
    def validate_square(cls, v):
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"rotation must be square, got shape {v.shape}")
        return v

    @classmethod
    def identity(cls, d: int) -> "Rotation":
        return cls(matrix=np.eye(d))


class AlignedSeries(BaseModel):
    periods: List[int]
    models: List[EmbeddingModel]
    rotations: List[Rotation]

    def model_for(self, year: int) -> Optional[EmbeddingModel]:
        if year not in self.periods:
            return None
        return self.models[self.periods.index(year)]


class ChangeRecord(BaseModel):
    publication: CitationId
    year_t: int
    score: float = Field(..., ge=0.0, le=2.0)
    citations_t: int = Field(..., ge=0)
    citations_prev: int = Field(..., ge=0)


class GroupStat(BaseModel):
    year: int
    threshold: int
    mean: Optional[float] = Field(None, description="None when n = 0")
    sd: Optional[float] = Field(None, description="Sample SD; 0.0 when n = 1, None when n = 0")
    n: int = Field(..., ge=0)


class RankedPublication(BaseModel):
    publication: CitationId
    avg_score: float
    years_present: int


class HistogramBin(BaseModel):
    bin_lo: float
    count: int


class Neighbor(BaseModel):
    surface: str
    kind: TokenKind
    similarity: float = Field(..., ge=-1.0 - 1e-9, le=1.0 + 1e-9)

    @property
    def label(self) -> str:
        """Citation tokens are shown without the CITE: prefix"""
        if self.kind == TokenKind.CITATION:
            return str(CitationId.parse(self.surface))
        return self.surface


class RoleRow(BaseModel):
    year: int
    present: bool
    change_score: Optional[float] = None
    top_citation: Optional[Neighbor] = None
    top_words: List[Neighbor] = Field(default_factory=list)


class RoleReport(BaseModel):
    publication: CitationId
    rows: List[RoleRow]


class CorpusYearStats(BaseModel):
    """One row of the per-year corpus table"""

    year: int
    publications: int = 0
    publications_with_citations: int = 0
    cp: int = 0
    cp_pubmed: int = 0
    cp_over_threshold: int = 0



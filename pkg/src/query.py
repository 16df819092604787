import logging
from typing import Iterable, List, Optional, Tuple

import numpy as np

from errors import ConfigError, UnknownToken
from models import AlignedSeries, ChangeRecord, CitationId, EmbeddingModel, Neighbor, RoleReport, RoleRow, TokenKind

logger = logging.getLogger(__name__)

NA = "NA"


def cosine_similarities(matrix: np.ndarray, index: int) -> np.ndarray:
    """Cosine of row `index` against every row; zero-norm rows score 0"""
    norms = np.linalg.norm(matrix, axis=1)
    query_norm = norms[index]
    dots = matrix @ matrix[index]
    denom = norms * query_norm
    sims = np.zeros(len(matrix))
    nonzero = denom > 0
    sims[nonzero] = dots[nonzero] / denom[nonzero]
    return np.clip(sims, -1.0, 1.0)


def nearest(model: EmbeddingModel, token: str, k: int,
            kind_filter: Optional[TokenKind] = None) -> List[Neighbor]:
    """Exhaustive cosine top-k, self excluded, ties broken by surface"""
    if k < 1:
        raise ConfigError("k must be >= 1")
    index = model.vocab.id_of(token)
    if index is None:
        raise UnknownToken(f"'{token}' is not in the {model.period} vocabulary")

    sims = cosine_similarities(model.input_vectors, index)
    entries = model.vocab.entries
    candidates = np.array([
        i for i, e in enumerate(entries)
        if i != index and (kind_filter is None or e.kind == kind_filter)
    ], dtype=np.int64)
    if len(candidates) == 0:
        return []

    if len(candidates) > k:
        # keep everything tied with the k-th best so the surface tie-break is exact
        kth = np.partition(-sims[candidates], k - 1)[k - 1]
        candidates = candidates[-sims[candidates] <= kth]

    ordered = sorted(candidates, key=lambda i: (-sims[i], entries[i].surface))[:k]
    return [
        Neighbor(surface=entries[i].surface, kind=entries[i].kind, similarity=float(sims[i]))
        for i in ordered
    ]


def role_report(series: AlignedSeries, scores: Iterable[ChangeRecord], p: CitationId,
                years: Tuple[int, int], n_words: int) -> RoleReport:
    """Per-year change score, nearest citation and nearest words of one publication"""
    start, end = years
    if start > end:
        raise ConfigError(f"report window start {start} is after end {end}")
    lookup = {(r.publication, r.year_t): r.score for r in scores}

    rows = []
    for year in range(start, end + 1):
        model = series.model_for(year)
        if model is None or p.token not in model.vocab:
            rows.append(RoleRow(year=year, present=False))
            continue
        citations = nearest(model, p.token, 1, TokenKind.CITATION)
        rows.append(RoleRow(
            year=year,
            present=True,
            change_score=lookup.get((p, year)),
            top_citation=citations[0] if citations else None,
            top_words=nearest(model, p.token, n_words, TokenKind.WORD),
        ))
    return RoleReport(publication=p, rows=rows)


def _with_similarity(neighbor: Neighbor) -> str:
    return f"{neighbor.label} ({neighbor.similarity:.2f})"


def format_role_report(report: RoleReport) -> str:
    """One tab-separated line per year: year, score, top citation, top words"""
    lines = []
    for row in report.rows:
        if not row.present:
            lines.append(f"{row.year}\tabsent")
            continue
        fields = [
            str(row.year),
            NA if row.change_score is None else f"{row.change_score:.6g}",
            NA if row.top_citation is None else _with_similarity(row.top_citation),
        ]
        fields.extend(_with_similarity(n) for n in row.top_words)
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"

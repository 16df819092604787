import csv
import logging
import math
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigError, PeriodGap
from models import (
    AlignedSeries,
    ChangeRecord,
    CitationId,
    GroupStat,
    HistogramBin,
    RankedPublication,
    TokenKind,
)

logger = logging.getLogger(__name__)

NA = "NA"
BIN_TOLERANCE = 1e-9


def cosine_change(x: Optional[np.ndarray], y: Optional[np.ndarray]) -> Optional[float]:
    """1 - cos(x, y) clamped to [0, 2]; None for a missing or zero vector"""
    if x is None or y is None:
        return None
    nx, ny = float(np.linalg.norm(x)), float(np.linalg.norm(y))
    if nx == 0.0 or ny == 0.0:
        return None
    score = 1.0 - float(x @ y) / (nx * ny)
    return min(2.0, max(0.0, score))


def change_score(series: AlignedSeries, p: CitationId, t: int) -> Optional[float]:
    current, previous = series.model_for(t), series.model_for(t - 1)
    if current is None or previous is None:
        raise PeriodGap(f"change score for {t} needs periods {t - 1} and {t} in the series")
    return cosine_change(current.vector(p.token), previous.vector(p.token))


def compute_change_records(series: AlignedSeries, cumulative: bool = False) -> List[ChangeRecord]:
    """Scores for every citation token present in two consecutive periods.

    citations_t/citations_prev are in-period occurrence counts, or running
    totals since the first period when cumulative is set.
    """
    running: Counter = Counter()
    totals: Dict[int, Counter] = {}
    for year, model in zip(series.periods, series.models):
        for entry in model.vocab.entries:
            if entry.kind == TokenKind.CITATION:
                running[entry.surface] += entry.count
        totals[year] = Counter(running)

    records = []
    for year in series.periods[1:]:
        current, previous = series.model_for(year), series.model_for(year - 1)
        if previous is None:
            continue
        surfaces = sorted(
            e.surface for e in current.vocab.entries
            if e.kind == TokenKind.CITATION and e.surface in previous.vocab
        )
        for surface in surfaces:
            score = cosine_change(current.vector(surface), previous.vector(surface))
            if score is None:
                continue
            if cumulative:
                n_t, n_prev = totals[year][surface], totals[year - 1][surface]
            else:
                n_t = current.vocab.entries[current.vocab.id_of(surface)].count
                n_prev = previous.vocab.entries[previous.vocab.id_of(surface)].count
            records.append(ChangeRecord(
                publication=CitationId.parse(surface),
                year_t=year,
                score=score,
                citations_t=n_t,
                citations_prev=n_prev,
            ))
        logger.info(f"{year}: {sum(1 for r in records if r.year_t == year)} change scores")
    return records


def over_threshold(records: Iterable[ChangeRecord], threshold: int) -> List[ChangeRecord]:
    """Records of publications cited more than threshold times in year_t"""
    return [r for r in records if r.citations_t > threshold]


def yearly_stats(records: Iterable[ChangeRecord], thresholds: Sequence[int],
                 years: Optional[Sequence[int]] = None) -> List[GroupStat]:
    """Mean and sample SD per (year, threshold) over records with citations_t > threshold"""
    records = list(records)
    if years is None:
        years = sorted({r.year_t for r in records})

    stats = []
    for year in years:
        in_year = [r for r in records if r.year_t == year]
        for threshold in thresholds:
            scores = np.array([r.score for r in over_threshold(in_year, threshold)])
            n = len(scores)
            if n == 0:
                mean, sd = None, None
            elif n == 1:
                mean, sd = float(scores[0]), 0.0
            else:
                mean, sd = float(scores.mean()), float(scores.std(ddof=1))
            stats.append(GroupStat(year=year, threshold=threshold, mean=mean, sd=sd, n=n))
    return stats


def rank_by_avg(records: Iterable[ChangeRecord], window_years: Tuple[int, int], min_years: int,
                k: int) -> List[RankedPublication]:
    start, end = window_years
    if start > end:
        raise ConfigError(f"ranking window start {start} is after end {end}")

    by_publication: Dict[CitationId, List[float]] = defaultdict(list)
    for record in records:
        if start <= record.year_t <= end:
            by_publication[record.publication].append(record.score)

    ranked = [
        RankedPublication(publication=pub, avg_score=float(np.mean(scores)), years_present=len(scores))
        for pub, scores in by_publication.items()
        if len(scores) >= min_years
    ]
    ranked.sort(key=lambda r: (-r.avg_score, str(r.publication)))
    return ranked[:k]


def histogram(records: Iterable[Union[ChangeRecord, float]], bin_width: float) -> List[HistogramBin]:
    """Counts in half-open bins [lo, lo + w) starting at 0; empty bins are omitted"""
    if bin_width <= 0:
        raise ConfigError("bin width must be > 0")
    counts: Counter = Counter()
    for record in records:
        score = record.score if isinstance(record, ChangeRecord) else float(record)
        counts[math.floor(score / bin_width + BIN_TOLERANCE)] += 1
    return [
        HistogramBin(bin_lo=round(i * bin_width, 12), count=counts[i])
        for i in sorted(counts)
    ]


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def format_float(value: Optional[float]) -> str:
    return NA if value is None else f"{value:.6g}"


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[str]]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
            count += 1
    return count


def write_scores_csv(path: Path, records: Iterable[ChangeRecord]) -> int:
    return write_csv(
        path,
        ["publication", "year", "score", "citations_t", "citations_prev"],
        ([str(r.publication), r.year_t, format_float(r.score), r.citations_t, r.citations_prev]
         for r in records),
    )


def write_stats_csv(path: Path, stats: Iterable[GroupStat]) -> int:
    return write_csv(
        path,
        ["year", "threshold", "mean", "sd", "n"],
        ([s.year, s.threshold, format_float(s.mean), format_float(s.sd), s.n] for s in stats),
    )


def write_rank_csv(path: Path, ranked: Iterable[RankedPublication]) -> int:
    return write_csv(
        path,
        ["rank", "publication", "avg_score", "years_present"],
        ([i, str(r.publication), format_float(r.avg_score), r.years_present]
         for i, r in enumerate(ranked, start=1)),
    )


def write_histogram_csv(path: Path, bins: Iterable[HistogramBin]) -> int:
    return write_csv(path, ["bin_lo", "count"], ([format_float(b.bin_lo), b.count] for b in bins))

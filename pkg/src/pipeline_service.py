import logging
from collections import Counter, defaultdict
from pathlib import Path
from typing import Dict, List, Optional

from align import align_series
from change import (
    compute_change_records,
    histogram,
    over_threshold,
    rank_by_avg,
    write_csv,
    write_histogram_csv,
    write_rank_csv,
    write_scores_csv,
    write_stats_csv,
    yearly_stats,
)
from config import PipelineConfig
from corpus import extract_citing_spans, iter_xml_files, parse_document, read_spans, write_spans
from errors import ConfigError, DocumentError, EmptyCorpus, UnknownToken
from models import (
    CITE_PREFIX,
    PLACEHOLDER_RE,
    AlignedSeries,
    ChangeRecord,
    CitationId,
    CitationKind,
    CitingSpan,
    CorpusYearStats,
    EmbeddingModel,
    GroupStat,
    HistogramBin,
    Neighbor,
    RankedPublication,
    RoleReport,
    TokenKind,
)
from preprocess import collect_acronyms, load_phrase_dict, read_sentences, run_preprocess, write_sentences
from query import nearest, role_report
from sgns import train
from storage import export_text, load_model, load_rotation, save_model, save_rotation
from vocab import build_vocab, count_by_kind

logger = logging.getLogger(__name__)

CORPUS_STATS_HEADER = ["year", "publications", "publications_with_citations", "cp", "cp_pubmed", "cp_over_threshold"]


class PipelineService:
    """One method per pipeline stage; every artifact lives under the work dir"""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.workdir = config.work_path
        self.skipped = 0

    # ---- paths -----------------------------------------------------------

    def span_path(self, year: int) -> Path:
        return self.workdir / "spans" / f"{year}.tsv"

    def sentence_path(self, year: int) -> Path:
        return self.workdir / "sentences" / f"{year}.txt"

    def model_path(self, year: int) -> Path:
        return self.workdir / "models" / f"{year}.cemb"

    def aligned_path(self, year: int) -> Path:
        return self.workdir / "aligned" / f"{year}.cemb"

    def rotation_path(self, year: int) -> Path:
        return self.workdir / "aligned" / f"R_{year}.txt"

    def _years_in(self, directory: str, suffix: str) -> List[int]:
        folder = self.workdir / directory
        if not folder.is_dir():
            return []
        years = sorted(int(p.stem) for p in folder.glob(f"*{suffix}") if p.stem.isdigit())
        if self.config.years:
            years = [y for y in years if y in self.config.years]
        return years

    # ---- extract ---------------------------------------------------------

    def extract(self) -> List[CorpusYearStats]:
        """Parse every XML file, write spans/<year>.tsv and corpus_stats.csv"""
        self.config.require_paths("corpus_dir")
        files = list(iter_xml_files(self.config.corpus_dir))
        if not files:
            logger.warning(f"No XML files under {self.config.corpus_dir}")
            return []

        spans_by_year: Dict[int, List[CitingSpan]] = defaultdict(list)
        stats: Dict[int, CorpusYearStats] = {}
        self.skipped = 0

        for path in files:
            try:
                document = parse_document(path.read_bytes(), source=str(path))
            except (DocumentError, OSError) as e:
                logger.warning(f"Skipping {path}: {e}")
                self.skipped += 1
                continue
            if self.config.years and document.pub_year not in self.config.years:
                logger.debug(f"{path}: year {document.pub_year} outside configured years")
                continue

            spans = extract_citing_spans(document)
            row = stats.setdefault(document.pub_year, CorpusYearStats(year=document.pub_year))
            row.publications += 1
            if spans:
                row.publications_with_citations += 1
            spans_by_year[document.pub_year].extend(spans)

        threshold = self.config.analysis.thresholds[0] if self.config.analysis.thresholds else 0
        for year in sorted(stats):
            written = write_spans(self.span_path(year), spans_by_year[year])
            cited = Counter(
                CitationId.parse(f"{m.group(1)}:{m.group(2)}")
                for span in spans_by_year[year]
                for m in PLACEHOLDER_RE.finditer(span.text)
            )
            row = stats[year]
            row.cp = len(cited)
            row.cp_pubmed = sum(1 for c in cited if c.kind == CitationKind.PMID)
            row.cp_over_threshold = sum(1 for n in cited.values() if n > threshold)
            logger.info(
                f"{year}: {row.publications} publications, {row.publications_with_citations} with citations, "
                f"{written} citing spans, {row.cp} cited publications"
            )

        rows = [stats[y] for y in sorted(stats)]
        write_csv(
            self.workdir / "corpus_stats.csv",
            CORPUS_STATS_HEADER,
            ([r.year, r.publications, r.publications_with_citations, r.cp, r.cp_pubmed, r.cp_over_threshold]
             for r in rows),
        )
        if self.skipped:
            logger.warning(f"Skipped {self.skipped} file(s) that could not be parsed")
        return rows

    # ---- train -----------------------------------------------------------

    def train(self, year: int) -> EmbeddingModel:
        """spans/<year>.tsv -> sentences/<year>.txt -> vocabulary -> models/<year>.cemb"""
        span_file = self.span_path(year)
        if not span_file.is_file():
            raise ConfigError(f"No span file for {year}: {span_file} (run extract first)")

        norm = self.config.norm
        phrases = load_phrase_dict(self.config.phrase_dict, norm)
        spans = list(read_spans(span_file))
        acronyms = collect_acronyms(spans, norm) if norm.acronym_pass else None
        n_sentences = write_sentences(self.sentence_path(year), run_preprocess(spans, phrases, norm, acronyms))
        if n_sentences == 0:
            raise EmptyCorpus(f"{year}: no trainable citing sentences in {span_file}")

        sentences = read_sentences(self.sentence_path(year), year)
        cfg = self.config.train
        vocab = build_vocab(sentences, cfg.min_count_word, cfg.min_count_citation)
        words, citations = count_by_kind(vocab)
        logger.info(f"{year}: {n_sentences} sentences, {words} word types, {citations} citation types")

        model = train(sentences, vocab, cfg, period=year)
        save_model(model, self.model_path(year))
        logger.info(f"Saved {self.model_path(year)}")
        return model

    def train_all(self) -> List[int]:
        years = self._years_in("spans", ".tsv")
        if not years:
            raise ConfigError(f"No span files under {self.workdir / 'spans'} (run extract first)")
        for year in years:
            self.train(year)
        return years

    # ---- align -----------------------------------------------------------

    def align(self) -> AlignedSeries:
        years = self._years_in("models", ".cemb")
        if len(years) < 2:
            raise ConfigError(f"Alignment needs at least two trained models, found {len(years)}")
        series = align_series([load_model(self.model_path(y)) for y in years], self.config.align)
        for year, model, rotation in zip(series.periods, series.models, series.rotations):
            save_model(model, self.aligned_path(year))
            save_rotation(rotation, self.rotation_path(year))
        return series

    def load_series(self) -> AlignedSeries:
        years = self._years_in("aligned", ".cemb")
        if not years:
            raise ConfigError(f"No aligned models under {self.workdir / 'aligned'} (run align first)")
        return AlignedSeries(
            periods=years,
            models=[load_model(self.aligned_path(y)) for y in years],
            rotations=[load_rotation(self.rotation_path(y)) for y in years],
        )

    # ---- analysis --------------------------------------------------------

    def records(self, series: Optional[AlignedSeries] = None) -> List[ChangeRecord]:
        series = series or self.load_series()
        return compute_change_records(series, cumulative=self.config.analysis.cumulative_counts)

    def score(self) -> List[ChangeRecord]:
        records = self.records()
        write_scores_csv(self.workdir / "scores.csv", records)
        return records

    def stats(self) -> List[GroupStat]:
        series = self.load_series()
        result = yearly_stats(self.records(series), self.config.analysis.thresholds, years=series.periods[1:])
        write_stats_csv(self.workdir / "stats.csv", result)
        return result

    def rank(self, start: Optional[int] = None, end: Optional[int] = None,
             top: Optional[int] = None) -> List[RankedPublication]:
        series = self.load_series()
        analysis = self.config.analysis
        start = start if start is not None else (analysis.rank_from or series.periods[0])
        end = end if end is not None else (analysis.rank_to or series.periods[-1])
        ranked = rank_by_avg(self.records(series), (start, end), analysis.min_years, top or analysis.top_k)
        write_rank_csv(self.workdir / "rank.csv", ranked)
        return ranked

    def hist_path(self, threshold: Optional[int] = None) -> Path:
        return self.workdir / ("hist.csv" if threshold is None else f"hist_gt{threshold}.csv")

    def hist(self, bin_width: Optional[float] = None, threshold: Optional[int] = None) -> List[HistogramBin]:
        """Score distribution of all records, or of one citation-count group"""
        records = self.records()
        if threshold is not None:
            if threshold < 0:
                raise ConfigError("hist threshold must be non-negative")
            records = over_threshold(records, threshold)
        bins = histogram(records, bin_width or self.config.analysis.bin_width)
        write_histogram_csv(self.hist_path(threshold), bins)
        return bins

    # ---- query -----------------------------------------------------------

    def _year_model(self, year: int) -> EmbeddingModel:
        """Aligned model when one exists, otherwise the per-year trained model"""
        path = self.aligned_path(year) if self.aligned_path(year).is_file() else self.model_path(year)
        if not path.is_file():
            raise ConfigError(f"No model for {year}")
        return load_model(path)

    def neighbors(self, token: str, year: int, k: Optional[int] = None,
                  kind: Optional[TokenKind] = None) -> List[Neighbor]:
        return nearest(self._year_model(year), resolve_token(token), k or self.config.analysis.top_k, kind)

    def export(self, year: int) -> Path:
        """word2vec text dump of the model neighbors would query"""
        target = self.workdir / "export" / f"{year}.txt"
        export_text(self._year_model(year), target)
        logger.info(f"Exported {year} to {target}")
        return target

    def report(self, publication: str, start: Optional[int] = None, end: Optional[int] = None) -> RoleReport:
        series = self.load_series()
        try:
            p = CitationId.parse(publication)
        except ValueError as e:
            raise ConfigError(f"'{publication}' is not a publication identifier") from e
        start = start if start is not None else series.periods[0]
        end = end if end is not None else series.periods[-1]
        result = role_report(series, self.records(series), p, (start, end), self.config.analysis.n_words)
        if not any(row.present for row in result.rows):
            raise UnknownToken(f"{p} is not in any vocabulary between {start} and {end}")
        return result


def resolve_token(text: str) -> str:
    """'pmid:123' style ids become citation tokens; anything else is a word"""
    if text.startswith(CITE_PREFIX):
        return text
    kind = text.split(":", 1)[0]
    if kind in {k.value for k in CitationKind}:
        try:
            return CitationId.parse(text).token
        except ValueError as e:
            raise ConfigError(f"'{text}' is not a valid citation id") from e
    return text

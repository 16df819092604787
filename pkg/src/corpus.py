"""JATS-like full-text ingestion: documents, references and citing spans.

Only the subset listed below is interpreted; any other element contributes its
text (inside paragraphs) or is ignored:

    article/front/article-meta/(article-id[@pub-id-type], pub-date/year)
    body//p with inline xref[@ref-type="bibr"][@rid]
    back/ref-list/ref[@id]/(element-citation|mixed-citation)
"""

import logging
import re
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional

from lxml import etree
from unidecode import unidecode

from errors import MalformedXml, MissingBody, MissingIdentifier, MissingPubYear
from models import (
    CitationId,
    CitationKind,
    CitingSpan,
    Paragraph,
    RawDocument,
    RefMetadata,
    XrefMarker,
)

logger = logging.getLogger(__name__)

_PARSER = etree.XMLParser(resolve_entities=False, no_network=True, load_dtd=False, huge_tree=True)
_NON_ALNUM = re.compile(r"[^0-9a-z]+")
_WHITESPACE = re.compile(r"\s+")
_YEAR = re.compile(r"\d{4}")


def _local(el) -> str:
    """Tag name without namespace; comments and PIs yield ''"""
    if not isinstance(el.tag, str):
        return ""
    return etree.QName(el).localname


def _children(el, name: str) -> List:
    return [c for c in el if _local(c) == name]


def _first(el, *path: str):
    """Follow a chain of child names, first match at each step"""
    current = el
    for name in path:
        if current is None:
            return None
        found = _children(current, name)
        current = found[0] if found else None
    return current


def _text(el) -> str:
    if el is None:
        return ""
    return _WHITESPACE.sub(" ", "".join(el.itertext())).strip()


def _digits(value: Optional[str]) -> Optional[str]:
    if not value:
        return None
    value = value.strip()
    if value.upper().startswith("PMC"):
        value = value[3:]
    return value if value.isdigit() else None


def _parse_year(value: str) -> Optional[int]:
    match = _YEAR.search(value or "")
    return int(match.group()) if match else None


# ---------------------------------------------------------------------------
# Identifiers
# ---------------------------------------------------------------------------

def normalize_key_component(value: str) -> str:
    """Lowercase, ASCII-fold, drop punctuation and whitespace"""
    folded = unidecode(value or "").lower()
    return _NON_ALNUM.sub("", folded)


def build_meta_key(m: RefMetadata) -> Optional[str]:
    """fa_ve_yr_vo_fp, or None when any component is empty (the reference is ignored)"""
    components = [
        normalize_key_component(f"{m.first_author_given} {m.first_author_surname}"),
        normalize_key_component(m.venue),
        normalize_key_component(str(m.year) if m.year is not None else ""),
        normalize_key_component(m.volume),
        normalize_key_component(m.first_page),
    ]
    if not all(components):
        return None
    return "_".join(components)


def resolve_identifier(m: RefMetadata) -> Optional[CitationId]:
    """PMID > PMCID > meta-key; None when the reference is unidentifiable"""
    pmid = _digits(m.pmid)
    if pmid:
        return CitationId(kind=CitationKind.PMID, value=pmid)
    pmcid = _digits(m.pmcid)
    if pmcid:
        return CitationId(kind=CitationKind.PMCID, value=pmcid)
    key = build_meta_key(m)
    if key:
        return CitationId(kind=CitationKind.META, value=key)
    return None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _first_author(citation) -> tuple:
    groups = _children(citation, "person-group")
    authors = [g for g in groups if g.get("person-group-type") in (None, "author")] or groups
    candidates = authors[0] if authors else citation
    name = _first(candidates, "name")
    if name is None:
        return "", ""
    return _text(_first(name, "given-names")), _text(_first(name, "surname"))


def parse_reference(ref) -> RefMetadata:
    citation = None
    for child in ref.iter():
        if _local(child) in ("element-citation", "mixed-citation", "citation"):
            citation = child
            break
    if citation is None:
        return RefMetadata()

    ids: Dict[str, str] = {}
    for pub_id in citation.iter():
        if _local(pub_id) == "pub-id":
            id_type = (pub_id.get("pub-id-type") or "").lower()
            ids.setdefault(id_type, _text(pub_id))

    given, surname = _first_author(citation)
    return RefMetadata(
        first_author_given=given,
        first_author_surname=surname,
        venue=_text(_first(citation, "source")),
        year=_parse_year(_text(_first(citation, "year"))),
        volume=_text(_first(citation, "volume")),
        first_page=_text(_first(citation, "fpage")),
        pmid=ids.get("pmid"),
        pmcid=ids.get("pmcid") or ids.get("pmc"),
    )


def _paragraph_segments(el, segments: List) -> None:
    """Walk a paragraph in document order, turning bibr xrefs into markers"""
    if el.text:
        segments.append(el.text)
    for child in el:
        name = _local(child)
        if name == "xref" and child.get("ref-type") == "bibr" and child.get("rid"):
            # one marker per rid; "rid" may list several ids separated by spaces
            for rid in child.get("rid").split():
                segments.append(XrefMarker(rid=rid))
        elif name:
            _paragraph_segments(child, segments)
        if child.tail:
            segments.append(child.tail)


def _document_id(meta) -> CitationId:
    ids: Dict[str, str] = {}
    for article_id in _children(meta, "article-id"):
        ids.setdefault((article_id.get("pub-id-type") or "").lower(), _text(article_id))

    pmid = _digits(ids.get("pmid"))
    if pmid:
        return CitationId(kind=CitationKind.PMID, value=pmid)
    pmcid = _digits(ids.get("pmcid") or ids.get("pmc"))
    if pmcid:
        return CitationId(kind=CitationKind.PMCID, value=pmcid)

    contrib = _first(meta, "contrib-group", "contrib", "name")
    own = RefMetadata(
        first_author_given=_text(_first(contrib, "given-names")) if contrib is not None else "",
        first_author_surname=_text(_first(contrib, "surname")) if contrib is not None else "",
        venue=_text(_first(meta.getparent(), "journal-meta", "journal-title-group", "journal-title")),
        year=_earliest_year(meta),
        volume=_text(_first(meta, "volume")),
        first_page=_text(_first(meta, "fpage")),
    )
    key = build_meta_key(own)
    if key is None:
        raise MissingIdentifier("article has no pmid, pmcid or identifiable metadata")
    return CitationId(kind=CitationKind.META, value=key)


def _earliest_year(meta) -> Optional[int]:
    years = []
    for pub_date in _children(meta, "pub-date"):
        year = _parse_year(_text(_first(pub_date, "year")))
        if year is not None:
            years.append(year)
    return min(years) if years else None


def parse_document(xml_bytes: bytes, source: Optional[str] = None) -> RawDocument:
    """Parse one JATS-like article"""
    try:
        root = etree.fromstring(xml_bytes, _PARSER)
    except etree.XMLSyntaxError as e:
        raise MalformedXml(str(e), source) from e

    article = root if _local(root) == "article" else next(
        (el for el in root.iter() if _local(el) == "article"), None
    )
    if article is None:
        raise MalformedXml("no article element", source)

    body = _first(article, "body")
    if body is None:
        raise MissingBody("no body element", source)

    meta = _first(article, "front", "article-meta")
    if meta is None:
        raise MissingPubYear("no front/article-meta", source)
    pub_year = _earliest_year(meta)
    if pub_year is None:
        raise MissingPubYear("no pub-date year in front matter", source)

    try:
        doc_id = _document_id(meta)
    except MissingIdentifier as e:
        raise MissingIdentifier(str(e), source) from e

    paragraphs = []
    for p in body.iter():
        if _local(p) != "p" or any(_local(a) == "p" for a in p.iterancestors()):
            continue
        segments: List = []
        _paragraph_segments(p, segments)
        paragraphs.append(Paragraph(segments=segments))

    references: Dict[str, RefMetadata] = {}
    ref_list = _first(article, "back", "ref-list")
    if ref_list is not None:
        for ref in ref_list.iter():
            if _local(ref) == "ref" and ref.get("id"):
                references[ref.get("id")] = parse_reference(ref)

    document = RawDocument(doc_id=doc_id, pub_year=pub_year, body_text=paragraphs, references=references)
    dangling = document.dangling_labels
    if dangling:
        logger.debug(f"{source or doc_id}: {len(dangling)} dangling xref label(s): {sorted(dangling)}")
    return document


# ---------------------------------------------------------------------------
# Citing spans
# ---------------------------------------------------------------------------

def resolve_references(doc: RawDocument) -> Dict[str, Optional[CitationId]]:
    return {label: resolve_identifier(meta) for label, meta in doc.references.items()}


def extract_citing_spans(doc: RawDocument) -> List[CitingSpan]:
    """Paragraphs with at least one resolvable marker, placeholders substituted"""
    resolved = resolve_references(doc)
    spans = []
    for paragraph in doc.body_text:
        parts = []
        hits = 0
        for segment in paragraph.segments:
            if isinstance(segment, XrefMarker):
                citation = resolved.get(segment.rid)
                if citation is None:
                    # dangling or unidentifiable: the marker disappears
                    continue
                parts.append(f" {citation.placeholder} ")
                hits += 1
            else:
                parts.append(segment)
        if hits == 0:
            continue
        text = _WHITESPACE.sub(" ", "".join(parts)).strip()
        spans.append(CitingSpan(doc_id=doc.doc_id, pub_year=doc.pub_year, text=text))
    return spans


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def iter_xml_files(path: str) -> Iterator[Path]:
    """A single file, or every *.xml below a directory in sorted order"""
    root = Path(path)
    if root.is_file():
        yield root
        return
    yield from sorted(p for p in root.rglob("*.xml") if p.is_file())


def span_to_line(span: CitingSpan) -> str:
    text = _WHITESPACE.sub(" ", span.text).strip()
    return f"{span.doc_id}\t{span.pub_year}\t{text}"


def write_spans(path: Path, spans: Iterable[CitingSpan]) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for span in spans:
            f.write(span_to_line(span) + "\n")
            count += 1
    return count


def read_spans(path: Path) -> Iterator[CitingSpan]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t", 2)
            if len(fields) != 3:
                logger.warning(f"{path}:{lineno}: expected 3 tab-separated fields, skipping")
                continue
            doc_id, year, text = fields
            yield CitingSpan(doc_id=CitationId.parse(doc_id), pub_year=int(year), text=text)

import pytest

from config import NormConfig
from corpus import extract_citing_spans, parse_document
from models import CitationId, CitingSpan, TokenKind
from preprocess import (
    PhraseDict,
    collect_acronyms,
    load_phrase_dict,
    normalize,
    read_sentences,
    run_preprocess,
    segment,
    split_sentences,
    write_sentences,
)

DOC = CitationId.parse("pmid:1")


def _span(text: str) -> CitingSpan:
    return CitingSpan(doc_id=DOC, pub_year=2010, text=text)


def _surfaces(tokens):
    return [t.surface for t in tokens]


class TestSegment:
    def test_basic_split(self):
        assert segment(_span("A was shown ⟦CITE:pmid:1⟧. B differs ⟦CITE:pmid:2⟧.")) == [
            "A was shown ⟦CITE:pmid:1⟧.",
            "B differs ⟦CITE:pmid:2⟧.",
        ]

    def test_et_al_before_placeholder(self):
        assert len(segment(_span("Smith et al. ⟦CITE:pmid:1⟧ reported X."))) == 1

    def test_abbreviation_before_capital(self):
        text = "Shown by Smith et al. In mice the effect holds ⟦CITE:pmid:1⟧."
        assert len(split_sentences(text)) == 1

    def test_abbreviations_with_inner_dots(self):
        text = "Kinases, e.g. Src ⟦CITE:pmid:1⟧, see Fig. 2 for details."
        assert split_sentences(text) == [text]

    def test_no_terminal_punctuation(self):
        assert segment(_span("no terminal punctuation ⟦CITE:pmid:1⟧ here")) == [
            "no terminal punctuation ⟦CITE:pmid:1⟧ here"
        ]

    def test_split_needs_uppercase_or_digit(self):
        assert len(split_sentences("Values rose. then fell ⟦CITE:pmid:1⟧.")) == 1
        assert len(split_sentences("Values rose. 3 groups fell ⟦CITE:pmid:1⟧.")) == 2

    def test_custom_abbreviation_list(self):
        text = "See Ref. Nine ⟦CITE:pmid:1⟧."
        assert len(split_sentences(text, abbreviations=[])) == 2
        assert len(split_sentences(text, abbreviations=["Ref."])) == 1

    def test_never_splits_inside_placeholder(self):
        text = "Keys like ⟦CITE:meta:a_b_2000_1_2⟧ stay whole. Next one."
        parts = split_sentences(text)
        assert parts[0] == "Keys like ⟦CITE:meta:a_b_2000_1_2⟧ stay whole."


class TestNormalize:
    def test_dash_and_placeholder(self):
        tokens = normalize("Phosphorylation of T-cell receptors ⟦CITE:pmid:18172933⟧", None, NormConfig())
        assert _surfaces(tokens) == ["phosphorylation", "of", "tcell", "receptors", "CITE:pmid:18172933"]
        assert tokens[-1].kind == TokenKind.CITATION

    def test_url_replacement(self):
        assert _surfaces(normalize("see http://x.y/z for details", None, NormConfig())) == [
            "see", "xurlx", "for", "details"
        ]

    def test_www_url(self):
        assert _surfaces(normalize("at www.example.org today", None, NormConfig())) == ["at", "xurlx", "today"]

    def test_number_masking(self):
        tokens = normalize("In 2010 about 3.5 percent of T4 cells", None, NormConfig())
        assert _surfaces(tokens) == ["in", "xnumx", "about", "xnumx", "percent", "of", "t4", "cells"]

    def test_standalone_dash_removed(self):
        assert _surfaces(normalize("alpha – beta - gamma", None, NormConfig())) == ["alpha", "beta", "gamma"]

    def test_steps_can_be_disabled(self):
        rules = NormConfig(number_replace=False, lowercase=False, dash_removal=False)
        assert _surfaces(normalize("In 2010 T-cell", None, rules)) == ["In", "2010", "T", "cell"]

    def test_phrase_merge(self):
        phrases = PhraseDict.from_lines(["signaling networks"])
        tokens = normalize("Complex signaling networks emerge", phrases, NormConfig())
        assert _surfaces(tokens) == ["complex", "signaling_networks", "emerge"]

    def test_phrase_merge_never_crosses_citation(self):
        phrases = PhraseDict.from_lines(["signaling networks"])
        tokens = normalize("signaling ⟦CITE:pmid:1⟧ networks", phrases, NormConfig())
        assert _surfaces(tokens) == ["signaling", "CITE:pmid:1", "networks"]

    def test_longest_match_wins(self):
        phrases = PhraseDict(entries=(("protein", "kinase"), ("protein", "kinase", "a")))
        assert phrases.merge(["protein", "kinase", "a", "binds"]) == ["protein_kinase_a", "binds"]
        assert phrases.merge(["protein", "kinase", "binds"]) == ["protein_kinase", "binds"]

    def test_idempotent_on_plain_words(self):
        first = _surfaces(normalize("The T-cell count rose 12 percent", None, NormConfig()))
        second = _surfaces(normalize(" ".join(first), None, NormConfig()))
        assert first == second


class TestAcronyms:
    def test_collect_and_preserve(self):
        spans = [_span("PHOSIDA lists sites ⟦CITE:pmid:1⟧."), _span("Query PHOSIDA and NCBI ⟦CITE:pmid:2⟧.")]
        rules = NormConfig(acronym_pass=True)
        acronyms = collect_acronyms(spans, rules)
        assert acronyms == frozenset({"PHOSIDA"})
        tokens = normalize("PHOSIDA and NCBI ⟦CITE:pmid:2⟧", None, rules, acronyms)
        assert _surfaces(tokens) == ["PHOSIDA", "and", "ncbi", "CITE:pmid:2"]

    def test_single_pass_lowercases_everything(self):
        tokens = normalize("PHOSIDA ⟦CITE:pmid:2⟧", None, NormConfig(), frozenset({"PHOSIDA"}))
        assert _surfaces(tokens) == ["phosida", "CITE:pmid:2"]


class TestPhraseDict:
    def test_load_file(self, fixtures_dir):
        phrases = load_phrase_dict(str(fixtures_dir / "phrases.txt"))
        assert phrases.entries == (
            ("mass", "spectrometry"),
            ("protein", "kinase", "a"),
            ("signaling", "networks"),
        )

    def test_no_path_gives_empty_dict(self):
        assert load_phrase_dict(None).entries == ()

    def test_single_words_and_placeholders_are_skipped(self):
        phrases = PhraseDict.from_lines(["kinase", "x ⟦CITE:pmid:1⟧", "a b c d e f g", ""])
        assert phrases.entries == ()


class TestRunPreprocess:
    def test_mini_fixture_token_streams(self, read_fixture):
        spans = extract_citing_spans(parse_document(read_fixture("mini.xml")))
        sentences = list(run_preprocess(spans, None, NormConfig()))
        assert [s.to_line() for s in sentences] == [
            "protein phosphorylation was mapped with mass spectrometry CITE:pmid:17081983",
            "earlier work CITE:pmid:11111111 used gels as did followup studies CITE:pmid:17081983",
        ]
        assert all(s.doc_id == CitationId.parse("pmid:20000001") for s in sentences)

    def test_phrases_applied(self, read_fixture, fixtures_dir):
        spans = extract_citing_spans(parse_document(read_fixture("mini.xml")))
        phrases = load_phrase_dict(str(fixtures_dir / "phrases.txt"))
        first = next(run_preprocess(spans, phrases, NormConfig()))
        assert "mass_spectrometry" in first.to_line().split()

    def test_citationless_sentence_dropped(self):
        sentences = list(run_preprocess([_span("No citation here. Cited work ⟦CITE:pmid:7⟧.")], None, NormConfig()))
        assert [s.to_line() for s in sentences] == ["cited work CITE:pmid:7"]

    def test_lone_citation_dropped(self):
        assert list(run_preprocess([_span("⟦CITE:pmid:7⟧.")], None, NormConfig())) == []

    def test_empty_span(self):
        assert list(run_preprocess([_span("")], None, NormConfig())) == []

    def test_citation_multiset_preserved(self, read_fixture):
        spans = extract_citing_spans(parse_document(read_fixture("multi_xref.xml")))
        sentences = list(run_preprocess(spans, None, NormConfig()))
        citations = sorted(t.surface for s in sentences for t in s.tokens if t.kind == TokenKind.CITATION)
        assert citations == ["CITE:pmid:123", "CITE:pmid:456", "CITE:pmid:456"]

    def test_sentence_file_round_trip(self, read_fixture, tmp_path):
        spans = extract_citing_spans(parse_document(read_fixture("mini.xml")))
        sentences = list(run_preprocess(spans, None, NormConfig()))
        path = tmp_path / "sentences" / "2010.txt"
        assert write_sentences(path, sentences) == 2
        back = read_sentences(path, 2010)
        assert [s.tokens for s in back] == [s.tokens for s in sentences]

    def test_deterministic(self, read_fixture):
        spans = extract_citing_spans(parse_document(read_fixture("meta_fallback.xml")))
        first = [s.to_line() for s in run_preprocess(spans, None, NormConfig())]
        second = [s.to_line() for s in run_preprocess(spans, None, NormConfig())]
        assert first == second


@pytest.mark.parametrize("text", ["⟦CITE:pmid:⟧ alone", "⟦CITE:doi:10⟧ other"])
def test_invalid_placeholders_are_not_citations(text):
    tokens = normalize(text, None, NormConfig())
    assert all(t.kind == TokenKind.WORD for t in tokens)

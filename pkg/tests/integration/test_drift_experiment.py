"""Change scores on synthetic corpora with a planted role shift.

DRIFT moves from cluster A to cluster B between the two periods while STABLE
stays with cluster A. The planted shift has to show up as a clearly larger
change score across seeds; two identical periods have to score zero.

The 20-seed study trains with DRIFT_BATCH_PAIRS-pair mini-batches (not the
per-pair default); the other experiments here use the default.
"""

import numpy as np
import pytest

from config import build_pipeline_config
from models import CitationId
from pipeline_service import PipelineService
from query import cosine_similarities
from settings import DRIFT_BATCH_PAIRS, DRIFT_DIM, DRIFT_EPOCHS, DRIFT_SEEDS, DRIFT_SENTENCES_PER_PERIOD
from utilities.synthetic_corpus import (
    CLUSTER_A,
    CLUSTER_B,
    DRIFT,
    STABLE,
    plan_drift_corpus,
    plan_identical_corpus,
    write_corpus,
)


def _run(tmp_path, plan, seed, dim, epochs, batch_pairs=1):
    corpus = tmp_path / "corpus"
    write_corpus(plan, corpus)
    service = PipelineService(build_pipeline_config({
        "corpus_dir": str(corpus),
        "workdir": str(tmp_path / "work"),
        "dim": dim,
        "epochs": epochs,
        "seed": seed,
        "subsample_t": 1.0,
        "min_count_word": 1,
        "batch_pairs": batch_pairs,
    }))
    service.extract()
    service.train_all()
    series = service.align()
    scores = {(str(r.publication), r.year_t): r.score for r in service.records(series)}
    return series, scores


def _mean_cosine(model, left, right):
    ids_left = [model.vocab.id_of(w) for w in left if w in model.vocab]
    ids_right = set(model.vocab.id_of(w) for w in right if w in model.vocab)
    values = []
    for i in ids_left:
        sims = cosine_similarities(model.input_vectors, i)
        values.extend(sims[j] for j in ids_right if j != i)
    return float(np.mean(values))


@pytest.mark.slow
def test_planted_shift_is_detected(tmp_path):
    drift_wins = 0
    clusters_separate = 0
    drift_scores, stable_scores = [], []
    for seed in DRIFT_SEEDS:
        plan = plan_drift_corpus(seed, DRIFT_SENTENCES_PER_PERIOD)
        series, scores = _run(tmp_path / f"seed{seed}", plan, seed, DRIFT_DIM, DRIFT_EPOCHS, DRIFT_BATCH_PAIRS)
        year = series.periods[1]
        drift, stable = scores[(DRIFT, year)], scores[(STABLE, year)]
        drift_scores.append(drift)
        stable_scores.append(stable)
        drift_wins += drift > stable

        model = series.models[1]
        intra = _mean_cosine(model, CLUSTER_A, CLUSTER_A)
        inter = _mean_cosine(model, CLUSTER_A, CLUSTER_B)
        clusters_separate += intra > inter

    assert drift_wins >= len(DRIFT_SEEDS) - 1
    assert clusters_separate >= len(DRIFT_SEEDS) - 1
    assert float(np.median(drift_scores)) - float(np.median(stable_scores)) > 0.2


def test_identical_periods_do_not_change(tmp_path):
    series, scores = _run(tmp_path, plan_identical_corpus(3, 200), seed=3, dim=10, epochs=2)
    assert scores
    assert max(scores.values()) < 1e-6
    assert series.rotations[0].matrix == pytest.approx(np.eye(10), abs=1e-6)


def test_identifiers_round_trip_through_xml(tmp_path):
    series, scores = _run(tmp_path, plan_drift_corpus(5, 100), seed=5, dim=8, epochs=1)
    token = CitationId.parse(DRIFT).token
    assert all(token in model.vocab for model in series.models)
    assert (DRIFT, 2011) in scores

"""Skip-gram with negative sampling over the joint word/citation stream."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import TrainConfig
from errors import DimMismatch, EmptyCorpus
from models import EmbeddingModel, Sentence, Vocabulary
from vocab import NegativeTable, build_negative_table, keep_probabilities

logger = logging.getLogger(__name__)

SIGMOID_CLAMP = 30.0
SIGMOID_EPS = 1e-13
MAX_REDRAWS = 10


def sigmoid(x):
    """Logistic function with the argument clamped to |x| <= 30"""
    x = np.asarray(x, dtype=np.float64)
    out = 1.0 / (1.0 + np.exp(-np.clip(x, -SIGMOID_CLAMP, SIGMOID_CLAMP)))
    out = np.where(x > SIGMOID_CLAMP, 1.0 - SIGMOID_EPS, out)
    out = np.where(x < -SIGMOID_CLAMP, SIGMOID_EPS, out)
    return out


def _scores(center, context, negatives):
    center = np.asarray(center, dtype=np.float64)
    context = np.asarray(context, dtype=np.float64)
    negatives = np.asarray(negatives, dtype=np.float64)
    if center.shape != context.shape or negatives.shape[:-2] != center.shape[:-1] \
            or negatives.shape[-1] != center.shape[-1]:
        raise DimMismatch(
            f"center {center.shape}, context {context.shape} and negatives {negatives.shape} disagree"
        )
    positive = np.einsum("...d,...d->...", center, context)
    negative = np.einsum("...d,...kd->...k", center, negatives)
    return center, context, negatives, positive, negative


def _negative_weights(negative, negative_mask):
    if negative_mask is None:
        return np.ones_like(negative)
    return np.asarray(negative_mask, dtype=np.float64)


def pair_loss(center_vec, context_vec, negative_vecs, negative_mask=None):
    """-[log s(c.x) + sum_k log s(-c.n_k)]; leading batch dimensions broadcast.

    negative_mask (same shape as the k scores) zeroes skipped negatives.
    """
    _, _, _, positive, negative = _scores(center_vec, context_vec, negative_vecs)
    weights = _negative_weights(negative, negative_mask)
    loss = -(np.log(sigmoid(positive)) + np.sum(weights * np.log(sigmoid(-negative)), axis=-1))
    return float(loss) if np.ndim(loss) == 0 else loss


def pair_gradients(center_vec, context_vec, negative_vecs, negative_mask=None
                   ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of pair_loss: (g_center, g_context, g_negatives)"""
    center, context, negatives, positive, negative = _scores(center_vec, context_vec, negative_vecs)
    weights = _negative_weights(negative, negative_mask)

    pos_coef = sigmoid(positive) - 1.0
    neg_coef = sigmoid(negative) * weights

    g_context = pos_coef[..., None] * center
    g_negatives = neg_coef[..., None] * center[..., None, :]
    g_center = pos_coef[..., None] * context + np.einsum("...k,...kd->...d", neg_coef, negatives)
    return g_center, g_context, g_negatives


def encode_sentences(sentences: Sequence[Sentence], v: Vocabulary) -> List[np.ndarray]:
    """Vocabulary ids per sentence; out-of-vocabulary tokens are skipped"""
    encoded = []
    for sentence in sentences:
        ids = [v.id_of(t.surface) for t in sentence.tokens]
        encoded.append(np.array([i for i in ids if i is not None], dtype=np.int64))
    return encoded


def schedule_pairs(encoded: Sequence[np.ndarray], keep: np.ndarray, window: int,
                   rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Subsample, draw a window b in [1, window] per position, emit (center, context) pairs.

    Windows never cross sentence boundaries.
    """
    offsets = np.array([o for o in range(-window, window + 1) if o != 0], dtype=np.int64)
    centers, contexts = [], []
    for ids in encoded:
        if len(ids) < 2:
            continue
        kept = ids[rng.random(len(ids)) < keep[ids]]
        n = len(kept)
        if n < 2:
            continue
        reach = rng.integers(1, window + 1, size=n)
        positions = np.arange(n)
        j = positions[:, None] + offsets[None, :]
        valid = (np.abs(offsets)[None, :] <= reach[:, None]) & (j >= 0) & (j < n)
        i_idx = np.broadcast_to(positions[:, None], j.shape)[valid]
        centers.append(kept[i_idx])
        contexts.append(kept[j[valid]])
    if not centers:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty
    return np.concatenate(centers), np.concatenate(contexts)


def draw_negatives(table: NegativeTable, contexts: np.ndarray, k: int,
                   rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """k negatives per pair; collisions with the true context are redrawn up to MAX_REDRAWS times, then masked"""
    negatives = table.sample(rng, (len(contexts), k))
    collide = negatives == contexts[:, None]
    for _ in range(MAX_REDRAWS):
        n_collide = int(collide.sum())
        if n_collide == 0:
            break
        negatives[collide] = table.sample(rng, n_collide)
        collide = negatives == contexts[:, None]
    return negatives, ~collide


def _run_batches(w_in: np.ndarray, w_out: np.ndarray, centers: np.ndarray, contexts: np.ndarray,
                 negatives: np.ndarray, mask: np.ndarray, start: int, stop: int,
                 cfg: TrainConfig, epoch: int) -> float:
    total = len(centers)
    d = w_in.shape[1]
    loss_sum = 0.0
    for s in range(start, stop, cfg.batch_pairs):
        e = min(s + cfg.batch_pairs, stop)
        progress = (epoch + s / total) / cfg.epochs
        lr = cfg.lr_start + (cfg.lr_end - cfg.lr_start) * progress

        c_ids, x_ids, n_ids, m = centers[s:e], contexts[s:e], negatives[s:e], mask[s:e]
        c, x, n = w_in[c_ids], w_out[x_ids], w_out[n_ids]

        loss_sum += float(np.sum(pair_loss(c, x, n, m)))
        g_c, g_x, g_n = pair_gradients(c, x, n, m)

        np.add.at(w_in, c_ids, -lr * g_c)
        np.add.at(w_out, x_ids, -lr * g_x)
        np.add.at(w_out, n_ids.ravel(), -lr * g_n.reshape(-1, d))
    return loss_sum


def train(sentences: Sequence[Sentence], v: Vocabulary, cfg: TrainConfig,
          period: Optional[int] = None, init_vectors: Optional[np.ndarray] = None) -> EmbeddingModel:
    """Train one period's embeddings.

    With workers=1 the result is bit-deterministic for a given seed. With
    workers>1 contiguous shards of the epoch's pairs update the shared
    matrices from threads without locking, so results vary run to run.
    init_vectors warm-starts the input matrix instead of the seeded uniform init.
    """
    if period is None:
        if not sentences:
            raise EmptyCorpus("no sentences and no period given")
        period = sentences[0].pub_year

    encoded = encode_sentences(sentences, v)
    if sum(len(ids) for ids in encoded) == 0:
        raise EmptyCorpus(f"period {period}: no in-vocabulary tokens to train on")

    d = cfg.dim
    rng = np.random.default_rng(cfg.seed)
    w_in = rng.uniform(-0.5 / d, 0.5 / d, size=(len(v), d))
    if init_vectors is not None:
        if init_vectors.shape != (len(v), d):
            raise DimMismatch(f"init_vectors shape {init_vectors.shape}, expected {(len(v), d)}")
        w_in = np.array(init_vectors, dtype=np.float64)
    w_out = np.zeros((len(v), d))

    history: List[float] = []
    if cfg.epochs > 0:
        table = build_negative_table(v)
        keep = keep_probabilities(v, cfg.subsample_t)

    for epoch in range(cfg.epochs):
        centers, contexts = schedule_pairs(encoded, keep, cfg.window, rng)
        total = len(centers)
        if total == 0:
            logger.warning(f"Period {period} epoch {epoch + 1}: no training pairs after subsampling")
            history.append(0.0)
            continue
        negatives, mask = draw_negatives(table, contexts, cfg.negatives, rng)

        if cfg.workers == 1:
            loss_sum = _run_batches(w_in, w_out, centers, contexts, negatives, mask, 0, total, cfg, epoch)
        else:
            bounds = np.linspace(0, total, cfg.workers + 1).astype(int)
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                futures = [
                    pool.submit(_run_batches, w_in, w_out, centers, contexts, negatives, mask,
                                int(lo), int(hi), cfg, epoch)
                    for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
                ]
                loss_sum = sum(f.result() for f in futures)

        history.append(loss_sum / total)
        logger.info(f"Period {period} epoch {epoch + 1}/{cfg.epochs}: {total} pairs, mean loss {history[-1]:.4f}")

    return EmbeddingModel(
        period=period,
        vocab=v,
        input_vectors=w_in,
        output_vectors=w_out,
        loss_history=history,
    )

"""Orthogonal Procrustes alignment of per-period embedding matrices.

Rows are vectors: a source row x maps to R @ x, i.e. source @ R.T, and
R = argmin ||source @ Q.T - target||_F over orthogonal Q.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from config import AlignConfig
from errors import DimMismatch, EmptyIntersection, PeriodGap
from models import AlignedSeries, EmbeddingModel, Rotation, Vocabulary

logger = logging.getLogger(__name__)

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 30
RANK_RTOL = 1e-10


def jacobi_svd(m: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS
               ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, bool]:
    """One-sided (Hestenes) Jacobi SVD of a square matrix: m = u @ diag(sigma) @ v.T.

    Column pairs are rotated until every pair is orthogonal to within tol
    (relative) or max_sweeps is reached. Singular values come back in
    descending order. When m is rank deficient the missing columns of u are
    completed to an orthonormal basis, starting from the matching columns of v,
    and the returned flag is True.
    """
    a = np.array(m, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimMismatch(f"jacobi_svd expects a square matrix, got shape {a.shape}")
    n = a.shape[1]
    v = np.eye(n)

    for sweep in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = a[:, p] @ a[:, p]
                beta = a[:, q] @ a[:, q]
                gamma = a[:, p] @ a[:, q]
                if alpha == 0.0 or beta == 0.0 or abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t

                ap = a[:, p].copy()
                a[:, p] = c * ap - s * a[:, q]
                a[:, q] = s * ap + c * a[:, q]
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            logger.debug(f"Jacobi SVD converged after {sweep + 1} sweep(s)")
            break
    else:
        logger.warning(f"Jacobi SVD stopped after {max_sweeps} sweeps without converging")

    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma, a, v = sigma[order], a[:, order], v[:, order]

    cutoff = RANK_RTOL * (sigma[0] if n else 0.0)
    full = sigma > cutoff
    u = np.zeros_like(a)
    u[:, full] = a[:, full] / sigma[full]
    deficient = not bool(np.all(full))
    if deficient:
        u = _complete_basis(u, full, v)
    return u, sigma, v, deficient


def _complete_basis(u: np.ndarray, full: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Gram-Schmidt fill of the columns of u not marked full"""
    n = u.shape[0]
    basis = [u[:, j] for j in np.flatnonzero(full)]
    candidates = [v[:, j] for j in np.flatnonzero(~full)] + list(np.eye(n))
    filled = []
    for candidate in candidates:
        if len(basis) == n:
            break
        w = candidate.copy()
        for _ in range(2):
            for b in basis:
                w -= (b @ w) * b
        norm = np.linalg.norm(w)
        if norm > 1e-8:
            w /= norm
            basis.append(w)
            filled.append(w)
    for j, w in zip(np.flatnonzero(~full), filled):
        u[:, j] = w
    return u


def procrustes(source: np.ndarray, target: np.ndarray) -> Rotation:
    """Orthogonal R minimizing ||source @ R.T - target||_F, via the SVD of target.T @ source"""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.ndim != 2 or source.shape != target.shape:
        raise DimMismatch(f"source {source.shape} and target {target.shape} must be equal n x d")
    if source.shape[0] == 0:
        raise DimMismatch("procrustes needs at least one shared row")

    u, _, v, deficient = jacobi_svd(target.T @ source)
    r = u @ v.T
    residual = float(np.linalg.norm(source @ r.T - target))
    return Rotation(matrix=r, rank_deficient=deficient, residual=residual)


def shared_rows(a: Vocabulary, b: Vocabulary, min_count: int = 1) -> List[Tuple[int, int]]:
    """(id_a, id_b) for tokens in both vocabularies with matching kind, by surface.

    min_count > 1 keeps only anchors seen at least that often in both periods.
    """
    pairs = []
    for surface in sorted(set(a.index) & set(b.index)):
        ia, ib = a.index[surface], b.index[surface]
        ea, eb = a.entries[ia], b.entries[ib]
        if ea.kind != eb.kind:
            continue
        if ea.count < min_count or eb.count < min_count:
            continue
        pairs.append((ia, ib))
    if not pairs:
        raise EmptyIntersection()
    return pairs


def _check_series(models: Sequence[EmbeddingModel]) -> None:
    if len(models) < 2:
        raise PeriodGap(f"alignment needs at least two periods, got {len(models)}")
    for prev, cur in zip(models, models[1:]):
        if cur.period != prev.period + 1:
            raise PeriodGap(f"periods must be consecutive years: {prev.period} is followed by {cur.period}")
        if cur.dim != prev.dim:
            raise DimMismatch(f"period {prev.period} has d={prev.dim}, period {cur.period} has d={cur.dim}")


def align_series(models: Sequence[EmbeddingModel], cfg: Optional[AlignConfig] = None) -> AlignedSeries:
    """Rotate every period into the frame of the latest one by backward chaining"""
    cfg = cfg or AlignConfig()
    models = list(models)
    _check_series(models)

    last = models[-1]
    aligned: List[Optional[EmbeddingModel]] = [None] * len(models)
    rotations: List[Optional[Rotation]] = [None] * len(models)
    aligned[-1] = last.model_copy(update={"aligned": True, "frame_period": last.period})
    rotations[-1] = Rotation.identity(last.dim)

    for i in range(len(models) - 2, -1, -1):
        source, target = models[i], aligned[i + 1]
        try:
            pairs = shared_rows(source.vocab, target.vocab, cfg.anchor_min_count)
        except EmptyIntersection as e:
            raise EmptyIntersection((source.period, target.period)) from e

        ids_s = np.array([p[0] for p in pairs])
        ids_t = np.array([p[1] for p in pairs])
        xs = source.input_vectors[ids_s]
        xt = target.input_vectors[ids_t]
        if cfg.center:
            mu_s, mu_t = xs.mean(axis=0), xt.mean(axis=0)
        else:
            mu_s = mu_t = np.zeros(source.dim)

        rotation = procrustes(xs - mu_s, xt - mu_t)
        vectors = (source.input_vectors - mu_s) @ rotation.matrix.T + mu_t

        aligned[i] = source.model_copy(update={
            "input_vectors": vectors,
            "output_vectors": None,
            "aligned": True,
            "frame_period": last.period,
        })
        rotations[i] = rotation
        logger.info(
            f"Aligned {source.period} -> {target.period}: {len(pairs)} shared rows, "
            f"residual {rotation.residual:.6g}{', rank deficient' if rotation.rank_deficient else ''}"
        )

    return AlignedSeries(
        periods=[m.period for m in models],
        models=aligned,
        rotations=rotations,
    )

"""
Elements and norms of H_k({e_n}) and l_{p,k}({e_n}) on truncations.

A truncated element x = (f) sum_{n<=N} c_n e_n is measured through its
isometric coordinates y = T Delta^k c, where T maps the orthonormal model to
the Riesz basis {e_n} (identity when no transform is configured):

    ||x||_k = ||y||_p
"""
import logging
from typing import List, Sequence

import numpy as np
from scipy.linalg import lstsq, solve

from diffseq import DifferenceOperator, diff_array, prefix_sum_array
from models import CoeffVec, DimensionMismatch, OutOfRange, SpaceConfig, Unsupported

logger = logging.getLogger(__name__)


def _check_transform(cfg: SpaceConfig, N: int) -> None:
    T = cfg.basis.transform
    if T is not None and T.shape[0] != N:
        raise DimensionMismatch(f"basis transform is {T.shape[0]}x{T.shape[0]} but the vector has N={N}")


def isometric_coordinates(cfg: SpaceConfig, c: np.ndarray) -> np.ndarray:
    """y = T Delta^k c (truncated to N)"""
    c = np.asarray(c)
    _check_transform(cfg, c.shape[0])
    d = diff_array(cfg.k, c)
    T = cfg.basis.transform
    return d if T is None else T @ d


def space_norm(cfg: SpaceConfig, c: CoeffVec) -> float:
    """||c||_k: the p-norm of the isometric coordinates"""
    y = isometric_coordinates(cfg, c.entries)
    return float(np.linalg.norm(y, ord=cfg.p))


def inner_product(cfg: SpaceConfig, x: CoeffVec, y: CoeffVec) -> complex:
    """<x, y>_k in H_k, linear in x and conjugate-linear in y"""
    if not cfg.is_hilbert:
        raise Unsupported(f"inner product needs p = 2, got p = {cfg.p}")
    if x.N != y.N:
        raise DimensionMismatch(f"lengths differ: {x.N} vs {y.N}")
    return complex(np.vdot(isometric_coordinates(cfg, y.entries), isometric_coordinates(cfg, x.entries)))


def block_vector(a: int, b: int, N: int) -> CoeffVec:
    """Indicator of the index block [a, b] (1-based, inclusive)"""
    if not 1 <= a <= b <= N:
        raise OutOfRange(f"block [{a}, {b}] is not inside 1..{N}")
    c = np.zeros(N)
    c[a - 1: b] = 1.0
    return CoeffVec(entries=c)


def indicator_vector(indices: Sequence[int], N: int) -> CoeffVec:
    """sum_{j in A} e_j for an arbitrary index set A"""
    idx = np.asarray(list(indices), dtype=int)
    if idx.size == 0 or idx.min() < 1 or idx.max() > N:
        raise OutOfRange(f"index set must be a non-empty subset of 1..{N}")
    c = np.zeros(N)
    c[idx - 1] = 1.0
    return CoeffVec(entries=c)


def block_norm_lower_bound(cfg: SpaceConfig) -> float:
    """1/sqrt(M): every indicator of a block has at least this norm"""
    return 1.0 / np.sqrt(cfg.basis.M)


def _functional_row(k: int, n: int) -> np.ndarray:
    """Row n of Delta^{-k}: coefficients of c_n in terms of d_1..d_n"""
    first = np.zeros(n)
    first[0] = 1.0
    return prefix_sum_array(k, first)[::-1]


def minimality_distance(cfg: SpaceConfig, n: int, N: int, method: str = "functional") -> float:
    """dist(e_n, span{e_j : j != n, j <= N}) in H_k.

    Computed over the first N basis vectors, so the value is an upper bound of
    the distance to the closed span of all the others and is nonincreasing in N.

    method="functional" evaluates the least-squares minimum through the
    biorthogonal functional c -> c_n (min ||y|| subject to u.y = 1 is 1/||u||);
    method="lstsq" solves the least-squares problem explicitly.
    """
    if not cfg.is_hilbert:
        raise Unsupported(f"minimality distances are only computed for p = 2, got p = {cfg.p}")
    if not 1 <= n <= N:
        raise OutOfRange(f"index n={n} outside 1..{N}")
    _check_transform(cfg, N)
    T = cfg.basis.transform

    if method == "functional":
        w = np.zeros(N)
        w[:n] = _functional_row(cfg.k, n)
        u = w if T is None else solve(T.T, w)
        return float(1.0 / np.linalg.norm(u))

    if method == "lstsq":
        D = DifferenceOperator(cfg.k, N).dense()
        B = D if T is None else T @ D
        target = B[:, n - 1]
        others = np.delete(B, n - 1, axis=1)
        if others.shape[1] == 0:
            return float(np.linalg.norm(target))
        alpha, _, _, _ = lstsq(others, target)
        return float(np.linalg.norm(target - others @ alpha))

    raise OutOfRange(f"unknown minimality method {method!r}")


def minimality_decay_exponent(cfg: SpaceConfig, n_grid: List[int], N: int):
    """Least-squares slope of log dist(e_n, others) against log n, with residual"""
    if len(n_grid) < 2:
        raise OutOfRange("need at least two indices to fit a decay exponent")
    distances = np.array([minimality_distance(cfg, n, N) for n in n_grid])
    x = np.log(np.asarray(n_grid, dtype=float))
    slope, intercept = np.polyfit(x, np.log(distances), 1)
    residual = float(np.sqrt(np.mean((np.log(distances) - (slope * x + intercept)) ** 2)))
    logger.debug("minimality decay exponent k=%d: %.4f (residual %.2e)", cfg.k, slope, residual)
    return float(slope), residual, distances

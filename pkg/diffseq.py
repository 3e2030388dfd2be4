"""
Difference calculus on finite sequences: Delta^k and its inverse, the discrete
Hardy inequality, and finite-window S_k diagnostics for symbols.

Conventions
-----------
Sequences are 1-based in the mathematics and 0-based in numpy. A length-N
sequence c_1..c_N is zero-padded on the left (c_n = 0 for n <= 0), so

    (Delta^k c)_n = sum_{j=0..k} (-1)^j C(k, j) c_{n-j},   1 <= n <= N

is lower triangular and banded with bandwidth k. Differences of symbols are
backward differences evaluated only where every argument is >= 1 (n >= j+1).
"""
import logging
import math
from typing import Dict, Optional

import numpy as np
from scipy.linalg import solve_banded, toeplitz

from config import Config
from models import CoeffVec, OutOfRange, SkReport, Symbol, SymbolKind, ZeroSequence

logger = logging.getLogger(__name__)


def binom(k: int, m: int) -> int:
    """Exact binomial coefficient C(k, m) for 0 <= m <= k <= BINOM_MAX_K"""
    if k < 0 or m < 0 or m > k:
        raise OutOfRange(f"binomial C({k}, {m}) needs 0 <= m <= k")
    if k > Config.BINOM_MAX_K:
        raise OutOfRange(f"k={k} exceeds the exact-binomial cap {Config.BINOM_MAX_K}")
    return math.comb(k, m)


def diff_kernel(k: int) -> np.ndarray:
    """Stencil ((-1)^j C(k, j))_{j=0..k} as int64"""
    if k < 1:
        raise OutOfRange(f"difference order k={k} must be >= 1")
    return np.array([(-1) ** j * binom(k, j) for j in range(k + 1)], dtype=np.int64)


def diff_array(k: int, x: np.ndarray) -> np.ndarray:
    return np.convolve(x, diff_kernel(k))[: x.shape[0]]


def prefix_sum_array(k: int, x: np.ndarray) -> np.ndarray:
    out = x
    for _ in range(k):
        out = np.cumsum(out)
    return out


def diff_apply(k: int, c: CoeffVec) -> CoeffVec:
    """d = Delta^k c with the zero-padding convention; same length as c"""
    return CoeffVec(entries=diff_array(k, c.entries))


def diff_inverse(k: int, d: CoeffVec) -> CoeffVec:
    """c with Delta^k c = d, realised by k repeated prefix sums"""
    if k < 1:
        raise OutOfRange(f"difference order k={k} must be >= 1")
    return CoeffVec(entries=prefix_sum_array(k, d.entries))


class DifferenceOperator:
    """Delta^k restricted to the first N coordinates.

    Stored in the banded form used by :func:`scipy.linalg.solve_banded`; the
    forward map is a banded multiply and the inverse a banded triangular solve,
    both O(kN). The adjoint is the upper-banded transpose.
    """

    def __init__(self, k: int, N: int):
        if N < 1:
            raise OutOfRange(f"truncation N={N} must be >= 1")
        self.k = k
        self.N = N
        self.kernel = diff_kernel(k)
        self.band = min(k, N - 1)
        self._lower = self._banded(lower=True)
        self._upper = self._banded(lower=False)

    def _banded(self, lower: bool) -> np.ndarray:
        # solve_banded layout: ab[u + i - j, j] = a[i, j]
        k, N = self.band, self.N
        ab = np.zeros((k + 1, N))
        for s in range(k + 1):
            if lower:
                ab[s, : N - s] = self.kernel[s]
            else:
                ab[k - s, s:] = self.kernel[s]
        return ab

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return np.convolve(x, self.kernel)[: self.N]

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        # (Delta^T y)_m = sum_s kernel_s y_{m+s}
        return np.convolve(y[::-1], self.kernel)[: self.N][::-1]

    def solve(self, d: np.ndarray) -> np.ndarray:
        if self.N == 1:
            return np.asarray(d) * 1.0
        return solve_banded((self.band, 0), self._lower, d, check_finite=False)

    def solve_adjoint(self, y: np.ndarray) -> np.ndarray:
        if self.N == 1:
            return np.asarray(y) * 1.0
        return solve_banded((0, self.band), self._upper, y, check_finite=False)

    def dense(self) -> np.ndarray:
        col = np.zeros(self.N)
        m = min(self.k + 1, self.N)
        col[:m] = self.kernel[:m]
        return toeplitz(col, np.zeros(self.N))

    def dense_inverse(self) -> np.ndarray:
        """Delta^{-k}: lower-triangular Toeplitz with entries C(n - m + k - 1, k - 1)"""
        first = np.zeros(self.N)
        first[0] = 1.0
        col = prefix_sum_array(self.k, first)
        return toeplitz(col, np.zeros(self.N))


def hardy_constant(p: float) -> float:
    """Best constant (p/(p-1))^p of the discrete Hardy inequality"""
    if p <= 1:
        raise OutOfRange(f"Hardy exponent p={p} must exceed 1")
    return (p / (p - 1.0)) ** p


def hardy_ratio(p: float, a: np.ndarray) -> float:
    """sum_n ((1/n) sum_{j<=n} a_j)^p / sum_n a_n^p over the finite window"""
    if p <= 1:
        raise OutOfRange(f"Hardy exponent p={p} must exceed 1")
    a = np.asarray(a, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise OutOfRange("Hardy sequence must be a non-empty 1-D array")
    if np.any(a < 0):
        raise OutOfRange("Hardy sequence must be nonnegative")
    denominator = np.sum(a ** p)
    if denominator == 0:
        raise ZeroSequence("Hardy ratio is undefined for the zero sequence")
    n = np.arange(1, a.size + 1, dtype=float)
    means = np.cumsum(a) / n
    return float(np.sum(means ** p) / denominator)


def hardy_sequence(family: str, N: int, exponent: float = -0.51, seed: Optional[int] = None) -> np.ndarray:
    """Test sequences: single-spike (delta_1), power (n^exponent), random (uniform[0,1))"""
    if N < 1:
        raise OutOfRange(f"sequence length N={N} must be >= 1")
    if family == "single-spike":
        a = np.zeros(N)
        a[0] = 1.0
        return a
    if family == "power":
        return np.arange(1, N + 1, dtype=float) ** exponent
    if family == "random":
        rng = np.random.default_rng(Config.SEED if seed is None else seed)
        return rng.random(N)
    raise OutOfRange(f"unknown Hardy sequence family {family!r}")


def make_symbol(kind: SymbolKind, N_max: int) -> Symbol:
    """Closed-form symbols on 1..N_max: ln n, ln(1 + ln n), sqrt(n)"""
    kind = SymbolKind(kind)
    if N_max < 1:
        raise OutOfRange(f"symbol window N_max={N_max} must be >= 1")
    n = np.arange(1, N_max + 1, dtype=float)
    if kind == SymbolKind.LOG:
        values = np.log(n)
    elif kind == SymbolKind.ITERATED_LOG:
        values = np.log1p(np.log(n))
    elif kind == SymbolKind.SQRT_WITNESS:
        values = np.sqrt(n)
    else:
        raise OutOfRange("tabulated symbols are loaded from a file (storage.load_symbol_table)")
    return Symbol(kind=kind, values=values)


def _symbol_differences(f: np.ndarray, j: int):
    """Backward differences Delta^j f(n) for n = j+1..N and their rounding floors"""
    kernel = diff_kernel(j).astype(float)
    # full convolution index n-1 holds sum_i kernel_i f(n-i); valid once n-j >= 1
    diffs = np.convolve(f, kernel)[j: f.size]
    magnitude = np.convolve(np.abs(f), np.abs(kernel))[j: f.size]
    floor = 8.0 * np.finfo(float).eps * magnitude
    return diffs, floor


def sk_diagnostics(f: Symbol, k: int, N: int) -> SkReport:
    """Finite-window check of {n^j Delta^j f(n)} in l_inf for 1 <= j <= k.

    Values whose float64 rounding floor exceeds RESOLVE_RTOL of the running
    sup are treated as unresolved; sups and flags only use the resolved prefix.
    """
    if k < 1:
        raise OutOfRange(f"order k={k} must be >= 1")
    window = f.window(N)
    per_j_sup: Dict[int, float] = {}
    argmax_n: Dict[int, int] = {}
    resolved_limit: Dict[int, int] = {}
    unbounded = False

    for j in range(1, k + 1):
        if N < j + 1:
            per_j_sup[j], argmax_n[j], resolved_limit[j] = 0.0, j + 1, j
            continue
        diffs, floor = _symbol_differences(window, j)
        n = np.arange(j + 1, N + 1, dtype=float)
        scaled = n ** j * np.abs(diffs)
        noise = n ** j * floor
        running = np.maximum.accumulate(scaled)
        resolved = noise <= Config.RESOLVE_RTOL * np.maximum(running, np.finfo(float).tiny)
        # resolution is lost monotonically as n grows; keep the leading resolved run
        bad = np.flatnonzero(~resolved)
        stop = bad[0] if bad.size else scaled.size
        stop = max(stop, 1)
        best = int(np.argmax(scaled[:stop]))
        per_j_sup[j] = float(scaled[best])
        argmax_n[j] = j + 1 + best
        limit = j + stop
        resolved_limit[j] = limit
        if argmax_n[j] > limit / 10.0 and limit >= 10 * (j + 1):
            unbounded = True
        if limit < N:
            logger.debug("Delta^%d f resolved only up to n=%d of N=%d", j, limit, N)

    head = window[: max(1, N // 2)]
    tends = bool(N >= 2 and window[-1] > head.max() and window[-1] > window[max(0, N // 10 - 1)])
    return SkReport(
        k=k,
        N=N,
        per_j_sup=per_j_sup,
        argmax_n=argmax_n,
        resolved_limit=resolved_limit,
        unbounded_flag=unbounded,
        tends_to_infinity_flag=tends,
    )

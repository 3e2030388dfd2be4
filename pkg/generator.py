"""
The generator A_k, its group and resolvent.

In coefficient coordinates every function of A_k is diagonal:

    A_k           c_n -> i f(n) c_n
    e^{A_k t}     c_n -> e^{i t f(n)} c_n
    (A_k - lam)^-1  c_n -> c_n / (i f(n) - lam)

Norms live in the isometric coordinates y = B Delta^k c, where the operator
becomes the lower-triangular conjugate  T = B Delta^k diag(sigma) Delta^{-k} B^{-1}.
Truncation keeps the first N coordinates. Since T is lower triangular,
P_N T P_N = P_N T, so truncated norms are exact norms of the compression and
are nondecreasing in N (orthonormal basis model).
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.integrate import simpson
from scipy.linalg import eigvals, lu_factor, lu_solve, svdvals
from scipy.optimize import linear_sum_assignment
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, svds

from config import Config
from diffseq import DifferenceOperator, sk_diagnostics
from hkspace import isometric_coordinates, space_norm
from models import (
    CoeffVec,
    DimensionMismatch,
    GeneratorConfig,
    NoConvergence,
    NormEstimate,
    NormMethod,
    OperatorKind,
    OperatorSpec,
    OutOfRange,
    SpectrumPoint,
    SpectrumView,
    Unsupported,
)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Coefficientwise action
# ---------------------------------------------------------------------------

def _symbol_for(g: GeneratorConfig, N: int) -> np.ndarray:
    if N > g.symbol.N_max:
        raise DimensionMismatch(f"vector length N={N} exceeds the symbol window N_max={g.symbol.N_max}")
    return g.symbol.window(N)


def check_generator_config(g: GeneratorConfig, N: int) -> bool:
    """Warn (but allow) when the symbol fails the finite-window S_k heuristic"""
    report = sk_diagnostics(g.symbol, g.k, min(N, g.symbol.N_max))
    if report.unbounded_flag:
        logger.warning(
            "symbol %s looks outside S_%d on n <= %d (sup n^j|Delta^j f| still rising); "
            "group/resolvent bounds need not hold",
            g.symbol.kind.value, g.k, report.N,
        )
    return not report.unbounded_flag


def spectrum(g: GeneratorConfig, N: int) -> SpectrumView:
    """Truncated point spectrum {i f(n) : n <= N}"""
    return SpectrumView(eigenvalues=1j * _symbol_for(g, N), N=N)


def apply_generator(g: GeneratorConfig, c: CoeffVec) -> CoeffVec:
    return CoeffVec(entries=1j * _symbol_for(g, c.N) * c.entries)


def group_apply(g: GeneratorConfig, t: float, c: CoeffVec) -> CoeffVec:
    return CoeffVec(entries=np.exp(1j * t * _symbol_for(g, c.N)) * c.entries)


def _nearest_eigenvalue(g: GeneratorConfig, lam: complex, N: int) -> Tuple[float, int]:
    gaps = np.abs(1j * _symbol_for(g, N) - lam)
    n = int(np.argmin(gaps))
    return float(gaps[n]), n + 1


def spectrum_distance(g: GeneratorConfig, lam: complex, N: int) -> float:
    """min_{n <= N} |i f(n) - lam|"""
    if N < 1:
        raise OutOfRange(f"truncation N={N} must be >= 1")
    return _nearest_eigenvalue(g, complex(lam), N)[0]


def _check_off_spectrum(g: GeneratorConfig, lam: complex, N: int) -> None:
    distance, n = _nearest_eigenvalue(g, lam, N)
    if distance <= Config.SPECTRUM_TOL:
        raise SpectrumPoint(lam, n, distance)


def resolvent_apply(g: GeneratorConfig, lam: complex, c: CoeffVec) -> CoeffVec:
    """(A_k - lam)^{-1} c = (c_n / (i f(n) - lam))_n"""
    lam = complex(lam)
    _check_off_spectrum(g, lam, c.N)
    return CoeffVec(entries=c.entries / (1j * _symbol_for(g, c.N) - lam))


def operator_symbol(g: GeneratorConfig, spec: OperatorSpec, N: int) -> np.ndarray:
    """Diagonal entries sigma(f(n)), n <= N, of the chosen function of A_k"""
    f = _symbol_for(g, N)
    if spec.kind == OperatorKind.GENERATOR:
        return 1j * f
    if spec.kind == OperatorKind.GROUP:
        return np.exp(1j * spec.t * f)
    if spec.kind == OperatorKind.RESOLVENT:
        _check_off_spectrum(g, spec.lam, N)
        return 1.0 / (1j * f - spec.lam)
    mask = np.asarray(spec.mask, dtype=bool)
    if mask.shape[0] < N:
        raise DimensionMismatch(f"projection mask covers {mask.shape[0]} indices, need N={N}")
    return mask[:N].astype(complex)


# ---------------------------------------------------------------------------
# Isometric-coordinate operators
# ---------------------------------------------------------------------------

class ConjugatedOperator:
    """T = B Delta^k diag(sigma) Delta^{-k} B^{-1} on the first N coordinates.

    Each application costs one banded multiply and one banded triangular
    solve (O(kN)) plus dense work only when a basis transform is configured.
    """

    def __init__(self, g: GeneratorConfig, spec: OperatorSpec, N: int):
        if not g.space.is_hilbert:
            raise Unsupported(f"isometric operators need p = 2, got p = {g.space.p}")
        self.N = N
        self.sigma = operator_symbol(g, spec, N)
        self.delta = DifferenceOperator(g.k, N)
        self.transform = g.space.basis.transform
        self._lu = None
        if self.transform is not None:
            if self.transform.shape[0] != N:
                raise DimensionMismatch(f"basis transform is {self.transform.shape[0]}x{self.transform.shape[0]}, need N={N}")
            self._lu = lu_factor(self.transform)
        self.applications = 0

    def matvec(self, x: np.ndarray) -> np.ndarray:
        self.applications += 1
        x = np.ravel(x)
        if self._lu is not None:
            x = lu_solve(self._lu, x)
        y = self.delta.matvec(self.sigma * self.delta.solve(x))
        return y if self.transform is None else self.transform @ y

    def rmatvec(self, y: np.ndarray) -> np.ndarray:
        self.applications += 1
        y = np.ravel(y)
        if self.transform is not None:
            y = self.transform.conj().T @ y
        x = self.delta.solve_adjoint(np.conj(self.sigma) * self.delta.rmatvec(y))
        return x if self._lu is None else lu_solve(self._lu, x, trans=2)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.N, self.N), matvec=self.matvec, rmatvec=self.rmatvec, dtype=complex)

    def dense(self) -> np.ndarray:
        D = self.delta.dense()
        core = D @ (self.sigma[:, None] * self.delta.dense_inverse())
        if self.transform is None:
            return core
        return self.transform @ core @ lu_solve(self._lu, np.eye(self.N))


def conjugated_operator(g: GeneratorConfig, spec: OperatorSpec, N: int) -> LinearOperator:
    return ConjugatedOperator(g, spec, N).as_linear_operator()


def truncated_matrix(g: GeneratorConfig, spec: OperatorSpec, N: int) -> np.ndarray:
    """Dense N x N matrix of the operator in isometric coordinates; similar to diag(sigma)"""
    return ConjugatedOperator(g, spec, N).dense()


def power_iteration(op: ConjugatedOperator, tol: float = None, max_iter: int = None, seed: int = None) -> Tuple[float, int]:
    """Largest singular value by power iteration on T^H T.

    Stops when the Rayleigh quotient ||T v||^2 changes by less than tol
    (relative); raises NoConvergence after max_iter sweeps.
    """
    tol = Config.POWER_TOL if tol is None else tol
    max_iter = Config.POWER_MAX_ITER if max_iter is None else max_iter
    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    v = rng.standard_normal(op.N) + 0j
    v /= np.linalg.norm(v)

    rho_old = None
    change = float("inf")
    for iteration in range(1, max_iter + 1):
        w = op.matvec(v)
        rho = float(np.real(np.vdot(w, w)))
        if rho == 0.0:
            return 0.0, iteration
        if rho_old is not None:
            change = abs(rho - rho_old) / rho
            if change < tol:
                logger.debug("power iteration converged after %d iterations: sigma=%.12g", iteration, np.sqrt(rho))
                return float(np.sqrt(rho)), iteration
        rho_old = rho
        z = op.rmatvec(w)
        v = z / np.linalg.norm(z)
    raise NoConvergence("power iteration did not converge", iterations=max_iter, last_change=change)


def describe_operator(spec: OperatorSpec) -> Tuple[str, object]:
    """Human-readable label and grid parameter of an operator spec"""
    if spec.kind == OperatorKind.GROUP:
        return f"group at t={spec.t:g}", spec.t
    if spec.kind == OperatorKind.RESOLVENT:
        return f"resolvent at lam={spec.lam}", spec.lam
    if spec.kind == OperatorKind.PROJECTION:
        return f"projection onto {int(np.count_nonzero(spec.mask))} indices", None
    return "generator", None


def operator_norm(
    g: GeneratorConfig,
    spec: OperatorSpec,
    N: int,
    method: NormMethod = NormMethod.MATRIX_FREE,
    seed: Optional[int] = None,
) -> NormEstimate:
    """Largest singular value of the truncated operator in isometric coordinates.

    NoConvergence names the operator and carries its t or lambda in ``point``.
    """
    method = NormMethod(method)
    if not g.space.is_hilbert:
        raise Unsupported(f"operator norms are exact only for p = 2 (got p = {g.space.p}); use probe_norm_lower_bound")
    if N < 1:
        raise OutOfRange(f"truncation N={N} must be >= 1")
    op = ConjugatedOperator(g, spec, N)

    if method == NormMethod.DENSE_SVD or (method == NormMethod.MATRIX_FREE and N <= Config.DENSE_FALLBACK_N):
        if N > Config.DENSE_SVD_MAX_N:
            raise OutOfRange(f"dense SVD is limited to N <= {Config.DENSE_SVD_MAX_N}, got N={N}")
        value = float(svdvals(op.dense())[0])
        return NormEstimate(value=value, iterations=0, method=method.value)

    label, point = describe_operator(spec)
    if method == NormMethod.POWER:
        try:
            value, iterations = power_iteration(op, seed=seed)
        except NoConvergence as e:
            raise NoConvergence(f"power iteration did not converge for the {label}, N={N}",
                                iterations=e.iterations, last_change=e.last_change, point=point) from e
        return NormEstimate(value=value, iterations=iterations, method=method.value)

    rng = np.random.default_rng(Config.SEED if seed is None else seed)
    v0 = rng.standard_normal(N) + 0j
    try:
        s = svds(
            op.as_linear_operator(),
            k=1,
            which="LM",
            v0=v0,
            tol=0,
            maxiter=Config.POWER_MAX_ITER,
            return_singular_vectors=False,
        )
    except ArpackNoConvergence as e:
        raise NoConvergence(f"Lanczos SVD did not converge for the {label}, N={N}: {e}",
                            iterations=op.applications, point=point) from e
    value = float(np.max(s))
    logger.debug("%s norm at N=%d: %.12g (%d applications)", spec.kind.value, N, value, op.applications)
    return NormEstimate(value=value, iterations=op.applications, method=method.value)


def probe_norm_lower_bound(
    g: GeneratorConfig,
    spec: OperatorSpec,
    N: int,
    trials: int = 64,
    seed: Optional[int] = None,
) -> NormEstimate:
    """max ||T x||_p / ||x||_p over random and coordinate probes; a lower bound for any p"""
    sigma = operator_symbol(g, spec, N)
    delta = DifferenceOperator(g.k, N)
    T = g.space.basis.transform
    p = g.space.p
    if T is not None and T.shape[0] != N:
        raise DimensionMismatch(f"basis transform is {T.shape[0]}x{T.shape[0]}, need N={N}")
    rng = np.random.default_rng(Config.SEED if seed is None else seed)

    def ratio(y: np.ndarray) -> float:
        d = y if T is None else np.linalg.solve(T, y)
        out = delta.matvec(sigma * delta.solve(d))
        out = out if T is None else T @ out
        return float(np.linalg.norm(out, ord=p) / np.linalg.norm(y, ord=p))

    # the eigenvector of the largest |sigma_n| keeps the probe above the spectral radius
    top = int(np.argmax(np.abs(sigma)))
    best = ratio(isometric_coordinates(g.space, np.eye(1, N, top, dtype=complex)[0]))
    for n in range(min(N, trials)):
        e = np.zeros(N, dtype=complex)
        e[n] = 1.0
        best = max(best, ratio(e))
    for _ in range(trials):
        best = max(best, ratio(rng.standard_normal(N) + 1j * rng.standard_normal(N)))
    return NormEstimate(value=best, iterations=2 * trials + 1, method="random-probe", lower_bound_only=True)


def estimate_norm(
    g: GeneratorConfig,
    spec: OperatorSpec,
    N: int,
    method: NormMethod = NormMethod.MATRIX_FREE,
    seed: Optional[int] = None,
) -> NormEstimate:
    """operator_norm for p = 2, the flagged probe lower bound otherwise"""
    if g.space.is_hilbert:
        return operator_norm(g, spec, N, method=method, seed=seed)
    return probe_norm_lower_bound(g, spec, N, seed=seed)


# ---------------------------------------------------------------------------
# Explicit k = 1 estimates
# ---------------------------------------------------------------------------

def closed_form_resolvent_bound(g: GeneratorConfig, lam: complex, N: int) -> float:
    """sqrt(2M/m) sqrt(a^2 + 4C^2) / a^2 with a = dist(lam, sigma_N), C = sup n|Delta f(n)|"""
    if g.k != 1:
        raise Unsupported(f"the closed-form resolvent bound is stated for k = 1, got k = {g.k}")
    a = spectrum_distance(g, lam, N)
    if a <= Config.SPECTRUM_TOL:
        raise SpectrumPoint(complex(lam), _nearest_eigenvalue(g, complex(lam), N)[1], a)
    C = sk_diagnostics(g.symbol, 1, N).C if N >= 2 else 0.0
    basis = g.space.basis
    return float(np.sqrt(2.0 * basis.M / basis.m) * np.sqrt(a ** 2 + 4.0 * C ** 2) / a ** 2)


def resolvent_split_estimates(g: GeneratorConfig, lam: complex, c: CoeffVec) -> Dict[str, float]:
    """The k = 1 splitting of ||R(lam) x||_1 into Sigma_1 + Sigma_2, plus Xi, with their bounds"""
    if g.k != 1:
        raise Unsupported(f"the Sigma/Xi splitting is stated for k = 1, got k = {g.k}")
    lam = complex(lam)
    N = c.N
    _check_off_spectrum(g, lam, N)
    lam_n = 1j * _symbol_for(g, N)
    a = spectrum_distance(g, lam, N)
    C = sk_diagnostics(g.symbol, 1, N).C if N >= 2 else 0.0
    basis = g.space.basis
    T = basis.transform

    def h_norm(alpha: np.ndarray) -> float:
        return float(np.linalg.norm(alpha if T is None else T @ alpha))

    x = c.entries.astype(complex)
    d = np.diff(x, prepend=0.0)
    x_norm = h_norm(d)
    shift = 1.0 / (lam_n - lam)

    sigma_1 = h_norm(d * shift)
    second = np.zeros(N, dtype=complex)
    second[1:] = (shift[1:] - shift[:-1]) * x[:-1]
    sigma_2 = h_norm(second)
    rx = x * shift
    xi = float(np.sum(np.abs(np.diff(rx)) ** 2))

    return {
        "resolvent_norm": space_norm(g.space, CoeffVec(entries=rx)),
        "sigma_1": sigma_1,
        "sigma_2": sigma_2,
        "xi": xi,
        "x_norm": x_norm,
        "sigma_1_bound": float(np.sqrt(basis.M / basis.m) * x_norm / a),
        "sigma_2_bound": float(np.sqrt(4.0 * basis.M / basis.m) * C * x_norm / a ** 2),
        "xi_bound": float((2.0 * basis.M / a ** 2 + 8.0 * basis.M * C ** 2 / a ** 4) * x_norm ** 2),
        "a": a,
        "C": C,
    }


# ---------------------------------------------------------------------------
# Laplace representation and spectral mapping
# ---------------------------------------------------------------------------

def _simpson_laplace(f: np.ndarray, lam: complex, c: np.ndarray, T: float, steps: int) -> np.ndarray:
    t = np.linspace(0.0, T, steps + 1)
    out = np.empty(c.shape[0], dtype=complex)
    chunk = max(1, 2_000_000 // (steps + 1))
    for start in range(0, c.shape[0], chunk):
        stop = min(start + chunk, c.shape[0])
        rate = 1j * f[start:stop, None] - lam
        out[start:stop] = c[start:stop] * simpson(np.exp(rate * t[None, :]), x=t, axis=1)
    return out


def _even_steps(steps: int) -> int:
    if steps < 2:
        raise OutOfRange(f"Simpson needs at least 2 steps, got {steps}")
    return steps if steps % 2 == 0 else steps + 1


def richardson_steps(steps: int) -> int:
    """Steps rounded up to a multiple of 4, so a half-step Simpson rule exists for the error estimate"""
    _even_steps(steps)
    return max(4, -(-steps // 4) * 4)


def laplace_resolvent(g: GeneratorConfig, lam: complex, c: CoeffVec, T: float, steps: int) -> CoeffVec:
    """Composite Simpson value of int_0^T e^{-lam t} e^{A_k t} c dt.

    As T grows this tends to (c_n / (lam - i f(n)))_n = -(A_k - lam)^{-1} c:
    the componentwise Laplace integral carries the opposite sign of the
    resolvent as (A_k - lam)^{-1} is written here.
    """
    lam = complex(lam)
    if lam.real <= 0:
        raise OutOfRange(f"Laplace representation needs Re(lam) > 0, got {lam}")
    if T <= 0:
        raise OutOfRange(f"horizon T={T} must be positive")
    f = _symbol_for(g, c.N)
    return CoeffVec(entries=_simpson_laplace(f, lam, c.entries.astype(complex), T, _even_steps(steps)))


def laplace_error_bound(
    g: GeneratorConfig,
    lam: complex,
    c: CoeffVec,
    T: float,
    steps: int,
    measure_group: bool = False,
) -> Dict[str, float]:
    """Tail bound e^{-Re lam T}(1+T)^k ||x|| (optionally times ||e^{A_k T}||) plus the Richardson Simpson error"""
    lam = complex(lam)
    steps = richardson_steps(steps)
    x_norm = space_norm(g.space, c) if g.space.is_hilbert else float(np.linalg.norm(isometric_coordinates(g.space, c.entries), ord=g.space.p))
    group_norm = 1.0
    if measure_group:
        group_norm = operator_norm(g, OperatorSpec.group(T), c.N).value
    tail = float(np.exp(-lam.real * T) * (1.0 + T) ** g.k * group_norm * x_norm)

    fine = laplace_resolvent(g, lam, c, T, steps)
    coarse = laplace_resolvent(g, lam, c, T, steps // 2)
    diff = CoeffVec(entries=fine.entries - coarse.entries)
    discretization = float(np.linalg.norm(isometric_coordinates(g.space, diff.entries), ord=g.space.p) / 15.0)
    rounding = float(np.finfo(float).eps * steps * max(x_norm, 1.0))
    return {
        "tail": tail,
        "discretization": discretization,
        "rounding": rounding,
        "total": tail + discretization + rounding,
    }


def spectral_mapping_deviation(g: GeneratorConfig, t: float, N: int) -> float:
    """Largest gap in an optimal matching of eig(truncated e^{A_k t}) with {e^{i t f(n)}}"""
    eigs = eigvals(truncated_matrix(g, OperatorSpec.group(t), N))
    target = np.exp(1j * t * _symbol_for(g, N))
    cost = np.abs(eigs[:, None] - target[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())

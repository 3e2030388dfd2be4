"""
Data models and error types for the sequence-space operator lab
"""
from pydantic import BaseModel, Field, validator, root_validator
from typing import Optional, List, Dict, Any
from enum import Enum
import numpy as np


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class LabError(Exception):
    """Base class for every error raised by the lab"""


class OutOfRange(LabError, ValueError):
    pass


class ZeroSequence(LabError, ValueError):
    pass


class DimensionMismatch(LabError, ValueError):
    pass


class Unsupported(LabError, NotImplementedError):
    pass


class InvalidPartition(LabError, ValueError):
    pass


class SpectrumPoint(LabError, ArithmeticError):
    """lambda coincides with an eigenvalue i*f(n) of the truncated operator"""

    def __init__(self, lam: complex, n: int, distance: float):
        self.lam = lam
        self.n = n
        self.distance = distance
        super().__init__(f"lambda={lam} lies on the spectrum: |i f({n}) - lambda| = {distance:.3e}")


class NoConvergence(LabError, RuntimeError):
    """``point`` is the grid parameter (t or lambda) whose norm failed, when known"""

    def __init__(self, message: str, iterations: int = 0, last_change: float = float("nan"), point: Any = None):
        self.iterations = iterations
        self.last_change = last_change
        self.point = point
        super().__init__(f"{message} (iterations={iterations}, last relative change={last_change:.3e})")


class InputFormatError(LabError, ValueError):
    def __init__(self, path: str, line: int, message: str):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


# ---------------------------------------------------------------------------
# Enums
# ---------------------------------------------------------------------------

class SymbolKind(str, Enum):
    LOG = "log"
    ITERATED_LOG = "iterated-log"
    SQRT_WITNESS = "sqrt-witness"
    TABULATED = "tabulated"


class OperatorKind(str, Enum):
    GENERATOR = "generator"
    GROUP = "group"
    RESOLVENT = "resolvent"
    PROJECTION = "projection"


class NormMethod(str, Enum):
    MATRIX_FREE = "matrix-free"
    POWER = "power"
    DENSE_SVD = "dense-svd"


# ---------------------------------------------------------------------------
# Sequences and symbols
# ---------------------------------------------------------------------------

class CoeffVec(BaseModel):
    """Truncated coefficient sequence c_1..c_N of a formal series sum c_n e_n.

    Entries beyond N and at indices n <= 0 are zero; neither is stored.
    """
    entries: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator('entries', pre=True)
    def validate_entries(cls, v):
        arr = np.asarray(v)
        if arr.ndim != 1:
            raise ValueError('entries must be one-dimensional')
        if arr.size < 1:
            raise ValueError('a coefficient vector needs at least one entry')
        if arr.dtype.kind not in 'iufc':
            raise ValueError(f'entries must be numeric, got dtype {arr.dtype}')
        if arr.dtype.kind == 'u':
            arr = arr.astype(np.int64)
        return arr

    @property
    def N(self) -> int:
        return int(self.entries.shape[0])

    def __len__(self) -> int:
        return self.N

    @classmethod
    def basis_vector(cls, n: int, N: int) -> "CoeffVec":
        """delta_n: 1 at position n (1-based), zero elsewhere"""
        if not 1 <= n <= N:
            raise OutOfRange(f"basis index n={n} outside 1..{N}")
        e = np.zeros(N)
        e[n - 1] = 1.0
        return cls(entries=e)


class Symbol(BaseModel):
    """Eigenvalue-generating sequence f(1..N_max)"""
    kind: SymbolKind
    values: np.ndarray

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator('values', pre=True)
    def validate_values(cls, v):
        arr = np.asarray(v, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError('symbol values must be a non-empty 1-D sequence')
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0]) + 1
            raise ValueError(f'symbol value f({bad}) is not finite')
        return arr

    @root_validator(skip_on_failure=True)
    def validate_log_anchor(cls, values):
        if values['kind'] == SymbolKind.LOG and values['values'][0] != 0.0:
            raise ValueError('log symbol must satisfy f(1) = 0')
        return values

    @property
    def N_max(self) -> int:
        return int(self.values.shape[0])

    def window(self, N: int) -> np.ndarray:
        """f(1..N) as a float array"""
        if not 1 <= N <= self.N_max:
            raise OutOfRange(f"window N={N} outside 1..{self.N_max} of the {self.kind.value} symbol")
        return self.values[:N]


class SkReport(BaseModel):
    """Finite-window S_k diagnostics of a symbol (a prefix check, never a proof)"""
    k: int
    N: int
    per_j_sup: Dict[int, float]
    argmax_n: Dict[int, int]
    resolved_limit: Dict[int, int]
    unbounded_flag: bool
    tends_to_infinity_flag: bool

    @property
    def C(self) -> float:
        """sup_n n|Delta f(n)| on the window"""
        return self.per_j_sup[1]


# ---------------------------------------------------------------------------
# Spaces
# ---------------------------------------------------------------------------

class BasisModel(BaseModel):
    """Riesz basis model: m ||y||^2 <= sum |alpha_n|^2 <= M ||y||^2"""
    m: float = 1.0
    M: float = 1.0
    transform: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator('transform', pre=True)
    def validate_transform(cls, v):
        if v is None:
            return None
        arr = np.asarray(v)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f'basis transform must be square, got shape {arr.shape}')
        return arr

    @root_validator(skip_on_failure=True)
    def validate_constants(cls, values):
        m, M = values['m'], values['M']
        if not 0 < m <= M:
            raise ValueError(f'Riesz constants must satisfy 0 < m <= M, got m={m}, M={M}')
        if values.get('transform') is None and (m != 1.0 or M != 1.0):
            raise ValueError('without a transform the basis is orthonormal (m = M = 1)')
        return values

    @classmethod
    def from_transform(cls, transform: np.ndarray) -> "BasisModel":
        """Riesz constants of e_n = T u_n: m = 1/s_max^2, M = 1/s_min^2"""
        from scipy.linalg import svdvals

        s = svdvals(np.asarray(transform))
        if s[-1] <= s[0] * s.size * np.finfo(float).eps:
            raise ValueError('basis transform is singular')
        return cls(m=1.0 / s[0] ** 2, M=1.0 / s[-1] ** 2, transform=transform)

    @property
    def is_orthonormal(self) -> bool:
        return self.transform is None


class SpaceConfig(BaseModel):
    """H_k (p = 2) or l_{p,k} (p != 2) over a basis model"""
    k: int = Field(ge=1)
    p: float = Field(default=2.0, ge=1.0)
    basis: BasisModel = Field(default_factory=BasisModel)

    @property
    def is_hilbert(self) -> bool:
        return self.p == 2.0


class GeneratorConfig(BaseModel):
    """The operator A_k: diagonal i*f(n) in coefficient coordinates"""
    space: SpaceConfig
    symbol: Symbol

    @property
    def k(self) -> int:
        return self.space.k


class SpectrumView(BaseModel):
    eigenvalues: np.ndarray
    N: int

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator('eigenvalues')
    def validate_imaginary(cls, v):
        if np.any(np.real(v) != 0):
            raise ValueError('eigenvalues of A_k are purely imaginary')
        return v


class OperatorSpec(BaseModel):
    """Which function of A_k to realise: A_k, e^{A_k t}, (A_k - lam)^{-1} or a spectral projection"""
    kind: OperatorKind
    t: float = 0.0
    lam: Optional[complex] = None
    mask: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True
        frozen = True

    @validator('lam', pre=True)
    def validate_lam(cls, v):
        return None if v is None else complex(v)

    @root_validator(skip_on_failure=True)
    def validate_params(cls, values):
        if values['kind'] == OperatorKind.RESOLVENT and values.get('lam') is None:
            raise ValueError('resolvent needs lam')
        if values['kind'] == OperatorKind.PROJECTION and values.get('mask') is None:
            raise ValueError('projection needs an index mask')
        return values

    @classmethod
    def generator(cls) -> "OperatorSpec":
        return cls(kind=OperatorKind.GENERATOR)

    @classmethod
    def group(cls, t: float) -> "OperatorSpec":
        return cls(kind=OperatorKind.GROUP, t=float(t))

    @classmethod
    def resolvent(cls, lam: complex) -> "OperatorSpec":
        return cls(kind=OperatorKind.RESOLVENT, lam=lam)

    @classmethod
    def projection(cls, mask: np.ndarray) -> "OperatorSpec":
        return cls(kind=OperatorKind.PROJECTION, mask=np.asarray(mask, dtype=bool))


class NormEstimate(BaseModel):
    value: float
    iterations: int = 0
    method: str
    lower_bound_only: bool = False


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

class Grouping(BaseModel):
    """Disjoint blocks A_1, A_2, ... covering {1..N} (1-based indices)"""
    blocks: List[List[int]]
    N: int

    @property
    def max_block(self) -> int:
        return max(len(b) for b in self.blocks)


class ScanResult(BaseModel):
    name: str
    grid_label: str
    grid: List[float]
    values: List[float]
    fitted_slope: Optional[float] = None
    slope_residual: Optional[float] = None
    monotone_flag: bool = False
    columns: Dict[str, List[Any]] = Field(default_factory=dict)
    contract: str = ""
    contract_passed: bool = True
    notes: List[str] = Field(default_factory=list)


class RunConfig(BaseModel):
    """One CLI invocation: subcommand plus the full flag set"""
    subcommand: str
    flags: Dict[str, Any] = Field(default_factory=dict)
    N: Optional[int] = None
    seed: int = 0
    out: Optional[str] = None

    def provenance(self) -> str:
        flag_text = " ".join(f"--{k.replace('_', '-')}={v}" for k, v in sorted(self.flags.items()))
        return f"# subcommand={self.subcommand} N={self.N} seed={self.seed} flags: {flag_text}"

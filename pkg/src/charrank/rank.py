"""Rank backends: SVD thresholding over the reals, exact elimination over F_p."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from sympy import isprime

from .errors import ConfigError, NumericInputError
from .jacobian import MAX_INT64_MODULUS, assemble, random_point
from .model import ProblemSpec

DEFAULT_PRIME = 2**31 - 1

Backend = Literal["svd", "finite_field"]
BACKENDS: tuple[str, ...] = ("svd", "finite_field")


@dataclass(frozen=True)
class TolerancePolicy:
    """Singular-value cutoff.

    In ``relative`` mode the cutoff is ``factor * sigma_max``; in ``absolute``
    mode it is ``factor``. ``factor=None`` means ``max(rows, cols) * eps``.
    """

    mode: Literal["relative", "absolute"] = "relative"
    factor: float | None = None

    def __post_init__(self):
        if self.mode not in ("relative", "absolute"):
            raise ConfigError(f"unknown tolerance mode {self.mode!r}")
        if self.factor is not None and not self.factor > 0:
            raise ConfigError(f"tolerance factor must be positive, got {self.factor}")

    def threshold(self, shape: tuple[int, int], sigma_max: float) -> float:
        factor = self.factor if self.factor is not None else max(shape) * np.finfo(np.float64).eps
        return factor * sigma_max if self.mode == "relative" else factor


@dataclass(frozen=True)
class RankResult:
    rank: int
    backend: str
    diagnostics: dict[str, Any] = field(default_factory=dict)


def numeric_rank(M: np.ndarray, policy: TolerancePolicy | None = None) -> RankResult:
    policy = policy or TolerancePolicy()
    M = np.asarray(M, dtype=np.float64)
    if M.ndim != 2:
        raise NumericInputError(f"expected a 2-D matrix, got {M.ndim} dimensions")
    if not np.all(np.isfinite(M)):
        raise NumericInputError("matrix contains non-finite entries")
    if M.size == 0:
        return RankResult(0, "svd", {"singular_values": [], "tolerance": 0.0})
    s = np.linalg.svd(M, compute_uv=False)
    tol = policy.threshold(M.shape, float(s[0]))
    return RankResult(int(np.count_nonzero(s > tol)), "svd", {"singular_values": s.tolist(), "tolerance": tol})


@functools.lru_cache(maxsize=64)
def check_prime(p: int) -> int:
    if p < 2 or not isprime(p):
        raise ConfigError(f"modulus {p} is not prime")
    return p


def _eliminate_rank(A: np.ndarray, p: int) -> int:
    """Fraction-free Gaussian elimination mod p; ``A`` is overwritten."""
    rows, cols = A.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(A[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            A[[r, piv], c:] = A[[piv, r], c:]
        pivot_row = A[r, c:]
        below = r + 1 + np.flatnonzero(A[r + 1:, c])
        if below.size:
            # row_i <- pivot * row_i - a_ic * pivot_row ; pivot is a unit mod p
            f = A[below, c][:, None]
            A[below, c:] = (A[r, c] * A[below, c:] - f * pivot_row[None, :]) % p
        r += 1
    return r


def finite_field_rank(M: np.ndarray, p: int = DEFAULT_PRIME) -> RankResult:
    """Exact rank of an integer matrix over F_p."""
    check_prime(p)
    M = np.asarray(M)
    if M.ndim != 2:
        raise ConfigError(f"expected a 2-D matrix, got {M.ndim} dimensions")
    if M.dtype == object or p > MAX_INT64_MODULUS:
        A = np.array([[int(v) % p for v in row] for row in M.tolist()], dtype=object).reshape(M.shape)
    else:
        if not np.issubdtype(M.dtype, np.integer):
            raise ConfigError("finite_field_rank needs integer entries")
        A = np.mod(M.astype(np.int64), p)
    rank = _eliminate_rank(A, p) if A.size else 0
    return RankResult(rank, "finite_field", {"prime": p})


def jacobian_rank_mod_p(spec: ProblemSpec, seed, p: int = DEFAULT_PRIME) -> RankResult:
    """Rank of the Jacobian at a uniformly random point of F_p^N.

    Entries are polynomials of degree at most 2 in the parameters, so a
    random point hits the generic rank except with probability <= 2N/p.
    """
    check_prime(p)
    rng = np.random.default_rng(seed)
    point = random_point(spec, rng, modulus=p)
    J = assemble(point)
    result = finite_field_rank(J.data, p)
    return RankResult(result.rank, "finite_field", {"prime": p, "seed": _seed_repr(seed)})


def _seed_repr(seed):
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed

"""Monte Carlo sweep: probability that random tensor masks are well-posed.

Each (n, p) cell draws ``trials`` masks of size m = ceil(p * n^3) uniformly
without replacement and records how often the rank-r tensor completion
instance passes the well-posedness check.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .analysis import AnalysisOptions, check_wellposed
from .errors import ConfigError
from .model import ObservationPattern, ProblemSpec
from .rank import BACKENDS, DEFAULT_PRIME

DEFAULT_N_VALUES = tuple(range(2, 11))
DEFAULT_P_VALUES = tuple(round(0.02 * k, 2) for k in range(1, 31))
DEFAULT_LEVELS = (0.90, 0.999)

SWEEP_HEADER = ["n", "p", "m", "trials", "successes", "probability"]
THRESHOLD_HEADER = ["level", "n", "p_threshold", "p_theory"]


@dataclass(frozen=True)
class SweepConfig:
    n_values: tuple[int, ...] = DEFAULT_N_VALUES
    p_values: tuple[float, ...] = DEFAULT_P_VALUES
    rank: int = 1
    trials: int = 100
    seed: int = 0
    backend: str = "finite_field"
    levels: tuple[float, ...] = DEFAULT_LEVELS
    # one exact F_p sample per trial already fails with probability < 1e-6
    samples: int = 1
    cross_check: bool = False
    prime: int = DEFAULT_PRIME
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "p_values", tuple(float(p) for p in self.p_values))
        object.__setattr__(self, "levels", tuple(float(x) for x in self.levels))
        if any(n < 1 for n in self.n_values):
            raise ConfigError("tensor extents must be positive")
        if any(not 0 < p <= 1 for p in self.p_values):
            raise ConfigError("proportions must lie in (0, 1]")
        if any(not 0 < x <= 1 for x in self.levels):
            raise ConfigError("threshold levels must lie in (0, 1]")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class CellRecord:
    n: int
    p: float
    m: int
    trials: int
    successes: int

    @property
    def probability(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True)
class SweepResult:
    cells: tuple[CellRecord, ...]
    rank: int = 1
    levels: tuple[float, ...] = DEFAULT_LEVELS
    thresholds: dict[float, dict[int, float | None]] = field(default_factory=dict)

    @property
    def n_values(self) -> list[int]:
        return sorted({c.n for c in self.cells})

    def theory(self) -> dict[int, float]:
        """Counting-bound proportion r(3n - 2)/n^3 (rank 1: (3n - 2)/n^3)."""
        return {n: self.rank * (3 * n - 2) / n**3 for n in self.n_values}


def observations_for(p: float, n: int) -> int:
    """m = ceil(p * n^3), computed exactly from the decimal value of p and clamped to n^3."""
    m = math.ceil(Fraction(repr(p)) * n**3)
    return min(m, n**3)


def _p_key(p: float) -> int:
    return int(round(p * 10**6))


def trial_seeds(seed: int, n: int, p: float, trial: int) -> tuple[np.random.SeedSequence, int]:
    """Mask stream and rank-sampling seed for one trial, keyed by (seed, n, p, trial)."""
    root = np.random.SeedSequence(seed, spawn_key=(n, _p_key(p), trial))
    mask_ss, rank_ss = root.spawn(2)
    return mask_ss, int(rank_ss.generate_state(1, np.uint64)[0])


def sample_mask(shape: Sequence[int], m: int, rng: np.random.Generator) -> ObservationPattern:
    """Uniform m-subset via a seeded Fisher-Yates shuffle of the linear indices."""
    size = math.prod(shape)
    chosen = rng.permutation(size)[:m]
    return ObservationPattern.from_linear(shape, chosen)


def _run_cell(config: SweepConfig, n: int, p: float) -> CellRecord:
    m = observations_for(p, n)
    successes = 0
    for trial in range(config.trials):
        mask_ss, rank_seed = trial_seeds(config.seed, n, p, trial)
        pattern = sample_mask((n, n, n), m, np.random.default_rng(mask_ss))
        spec = ProblemSpec.tensor_completion(n, n, n, config.rank, pattern)
        opts = AnalysisOptions(backend=config.backend, samples=config.samples, seed=rank_seed,
                               prime=config.prime, cross_check=config.cross_check)
        if check_wellposed(spec, opts).wellposed:
            successes += 1
    return CellRecord(n, p, m, config.trials, successes)


def run_sweep(config: SweepConfig) -> SweepResult:
    grid = [(n, p) for n in sorted(set(config.n_values)) for p in sorted(set(config.p_values))]
    if config.workers > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            cells = list(pool.map(_run_cell, [config] * len(grid), *zip(*grid)))
    else:
        cells = [_run_cell(config, n, p) for n, p in grid]
    result = SweepResult(tuple(cells), config.rank, config.levels)
    thresholds = {level: extract_thresholds(result, level) for level in config.levels}
    return SweepResult(result.cells, config.rank, config.levels, thresholds)


def extract_thresholds(result: SweepResult, level: float) -> dict[int, float | None]:
    """Per n, the smallest grid p whose empirical probability reaches ``level``."""
    if not 0 < level <= 1:
        raise ConfigError("level must lie in (0, 1]")
    target = Fraction(repr(float(level)))
    out: dict[int, float | None] = {}
    for n in result.n_values:
        hits = [c.p for c in result.cells if c.n == n and Fraction(c.successes, c.trials) >= target]
        out[n] = min(hits) if hits else None
    return out


def _fmt(x: float) -> str:
    return format(x, ".6g")


def emit_csv(result: SweepResult, destination: str | Path) -> tuple[Path, Path]:
    """Write the per-cell CSV to ``destination`` and ``thresholds.csv`` beside it."""
    dest = Path(destination)
    thresholds_path = dest.with_name("thresholds.csv")
    try:
        dest.parent.mkdir(parents=True, exist_ok=True)
        with dest.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(SWEEP_HEADER)
            for c in sorted(result.cells, key=lambda c: (c.n, c.p)):
                writer.writerow([c.n, _fmt(c.p), c.m, c.trials, c.successes, _fmt(c.probability)])
        theory = result.theory()
        with thresholds_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(THRESHOLD_HEADER)
            for level in result.levels:
                per_n = result.thresholds.get(level) or extract_thresholds(result, level)
                for n in result.n_values:
                    thr = per_n.get(n)
                    writer.writerow([_fmt(level), n, "none" if thr is None else _fmt(thr), _fmt(theory[n])])
    except OSError as exc:
        raise OSError(f"cannot write sweep output {exc.filename or dest}: {exc.strerror}") from exc
    return dest, thresholds_path


def emit_gnuplot(result: SweepResult, destination: str | Path) -> Path:
    """Probability pivoted by n: one row per p, one column per n."""
    dest = Path(destination)
    ns = result.n_values
    ps = sorted({c.p for c in result.cells})
    table = {(c.n, c.p): c.probability for c in result.cells}
    lines = ["# p " + " ".join(f"n={n}" for n in ns)]
    for p in ps:
        row = [_fmt(p)] + [_fmt(table[(n, p)]) if (n, p) in table else "NaN" for n in ns]
        lines.append(" ".join(row))
    try:
        dest.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {dest}: {exc.strerror}") from exc
    return dest


def default_workers() -> int:
    env = os.environ.get("CHARRANK_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"CHARRANK_WORKERS must be an integer, got {env!r}") from None
        if value < 1:
            raise ConfigError("CHARRANK_WORKERS must be >= 1")
        return value
    return os.cpu_count() or 1


def records_from_rows(rows: Iterable[Sequence]) -> tuple[CellRecord, ...]:
    """Rebuild cell records from (n, p, m, trials, successes[, probability]) rows."""
    return tuple(CellRecord(int(r[0]), float(r[1]), int(r[2]), int(r[3]), int(r[4])) for r in rows)

"""Characteristic-rank estimation and identifiability verdicts."""

from __future__ import annotations

import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from . import __version__
from .errors import BackendDisagreementError, ConfigError, UnsupportedVariantError
from .jacobian import assemble, random_point
from .model import ProblemSpec, Variant, dimension_summary, necessary_sample_bound
from .rank import BACKENDS, DEFAULT_PRIME, TolerancePolicy, check_prime, finite_field_rank, numeric_rank

log = logging.getLogger(__name__)

# the finite-field verdict is cross-checked against SVD up to this many columns
CROSS_CHECK_MAX_COLS = 200

VERDICT_IDENTIFIABLE = "generically locally identifiable"
VERDICT_SARD = "generically unsolvable (Sard)"


@dataclass(frozen=True)
class AnalysisOptions:
    backend: str = "finite_field"
    samples: int = 8
    seed: int = 0
    prime: int = DEFAULT_PRIME
    tolerance: TolerancePolicy = field(default_factory=TolerancePolicy)
    cross_check: bool | None = None  # None: only when cols <= CROSS_CHECK_MAX_COLS
    workers: int = 1

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"unknown backend {self.backend!r}; choose from {', '.join(BACKENDS)}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be a non-negative integer")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        check_prime(self.prime)


@dataclass(frozen=True)
class CharRankEstimate:
    spec: ProblemSpec
    sample_count: int
    sample_ranks: tuple[int, ...]
    char_rank: int
    all_samples_agree: bool
    backend: str
    seed: int
    cross_check_backend: str | None = None
    cross_check_rank: int | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)


def sample_seed(seed: int, index: int, stream: int = 0) -> np.random.SeedSequence:
    """Per-sample stream keyed by (master seed, sample index, backend stream)."""
    return np.random.SeedSequence(int(seed), spawn_key=(stream, index))


def _sample_rank(spec: ProblemSpec, backend: str, seed_seq: np.random.SeedSequence,
                 prime: int, tolerance: TolerancePolicy) -> tuple[int, dict]:
    rng = np.random.default_rng(seed_seq)
    if backend == "finite_field":
        J = assemble(random_point(spec, rng, modulus=prime))
        res = finite_field_rank(J.data, prime)
    else:
        J = assemble(random_point(spec, rng))
        res = numeric_rank(J.data, tolerance)
    return res.rank, res.diagnostics


def _run_samples(spec: ProblemSpec, backend: str, opts: AnalysisOptions, stream: int) -> list[tuple[int, dict]]:
    seeds = [sample_seed(opts.seed, i, stream) for i in range(opts.samples)]
    args = [(spec, backend, s, opts.prime, opts.tolerance) for s in seeds]
    if opts.workers > 1 and opts.samples > 1:
        with ProcessPoolExecutor(max_workers=opts.workers) as pool:
            return list(pool.map(_sample_rank, *zip(*args)))
    return [_sample_rank(*a) for a in args]


def characteristic_rank(spec: ProblemSpec, options: AnalysisOptions | None = None, **overrides) -> CharRankEstimate:
    """Max Jacobian rank over ``samples`` random parameter points.

    Normal entries for ``svd``, uniform residues for ``finite_field``. With
    cross-checking on, the other backend is run on its own points and any
    mismatch in the maximum raises :class:`BackendDisagreementError`.
    """
    opts = replace(options or AnalysisOptions(), **overrides)
    results = _run_samples(spec, opts.backend, opts, stream=0)
    ranks = tuple(r for r, _ in results)
    char_rank = max(ranks)
    agree = len(set(ranks)) == 1
    if not agree:
        log.warning("sample ranks disagree for %s: %s", spec.to_json(), ranks)

    diagnostics: dict[str, Any] = {}
    if opts.backend == "finite_field":
        diagnostics["prime"] = opts.prime
    else:
        diagnostics["singular_values"] = results[0][1]["singular_values"]
        diagnostics["tolerance"] = results[0][1]["tolerance"]

    cross = opts.cross_check
    if cross is None:
        cross = spec.param_dim <= CROSS_CHECK_MAX_COLS
    other = other_rank = None
    if cross:
        other = "svd" if opts.backend == "finite_field" else "finite_field"
        other_results = _run_samples(spec, other, opts, stream=1)
        other_rank = max(r for r, _ in other_results)
        if other == "svd":
            diagnostics["singular_values"] = other_results[0][1]["singular_values"]
            diagnostics["tolerance"] = other_results[0][1]["tolerance"]
        else:
            diagnostics["prime"] = opts.prime
        if other_rank != char_rank:
            raise BackendDisagreementError(
                f"{opts.backend} rank {char_rank} != {other} rank {other_rank} for {spec.to_json()}",
                {"spec": spec.to_dict(), opts.backend: list(ranks), other: [r for r, _ in other_results], **diagnostics},
            )

    return CharRankEstimate(
        spec=spec,
        sample_count=opts.samples,
        sample_ranks=ranks,
        char_rank=char_rank,
        all_samples_agree=agree,
        backend=opts.backend,
        seed=int(opts.seed),
        cross_check_backend=other,
        cross_check_rank=other_rank,
        diagnostics=diagnostics,
    )


@dataclass(frozen=True)
class IdentifiabilityReport:
    spec: ProblemSpec
    estimate: CharRankEstimate
    ambient_dim: int
    param_dim: int
    tangent_dim: int
    complement_dim: int
    wellposed_target: int
    wellposed: bool
    sard_unsolvable: bool | None
    counting_bound: int | None
    counting_bound_ok: bool | None
    verdict: str
    notes: tuple[str, ...] = ()

    @property
    def char_rank(self) -> int:
        return self.estimate.char_rank

    def to_dict(self, include_spectrum: bool = True) -> dict[str, Any]:
        est = self.estimate
        diagnostics = dict(est.diagnostics)
        if not include_spectrum:
            diagnostics.pop("singular_values", None)
        return {
            "tool": "charrank",
            "version": __version__,
            "spec": self.spec.to_dict(),
            "seed": est.seed,
            "backend": est.backend,
            "samples": est.sample_count,
            "sample_ranks": list(est.sample_ranks),
            "all_samples_agree": est.all_samples_agree,
            "cross_check_backend": est.cross_check_backend,
            "cross_check_rank": est.cross_check_rank,
            "char_rank": est.char_rank,
            "ambient_dim": self.ambient_dim,
            "param_dim": self.param_dim,
            "tangent_dim": self.tangent_dim,
            "complement_dim": self.complement_dim,
            "wellposed_target": self.wellposed_target,
            "wellposed": self.wellposed,
            "sard_unsolvable": self.sard_unsolvable,
            "counting_bound": self.counting_bound,
            "counting_bound_ok": self.counting_bound_ok,
            "verdict": self.verdict,
            "notes": list(self.notes),
            "diagnostics": diagnostics,
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(**kwargs), sort_keys=True, indent=2)

    def to_text(self) -> str:
        spec = self.spec
        lines = [
            f"problem: {spec.variant.value} dims={'x'.join(map(str, spec.dims))} rank={spec.rank}"
            + (f" observed m={spec.m}" if spec.is_completion else ""),
            f"characteristic rank: {self.char_rank} ({self.estimate.backend}, {self.estimate.sample_count} samples, seed {self.estimate.seed})",
            f"tangent space dimension: {self.tangent_dim}",
            f"unobserved-entry dimension: {self.complement_dim}",
            f"well-posedness target: {self.wellposed_target}",
            f"well-posedness condition: {'satisfied' if self.wellposed else 'not satisfied'}",
        ]
        if self.counting_bound is not None:
            lines.append(f"necessary sample count: m >= {self.counting_bound} ({'met' if self.counting_bound_ok else 'not met'})")
        if self.sard_unsolvable is not None:
            lines.append(f"image full-dimensional: {'no' if self.sard_unsolvable else 'yes'} (ambient dimension {self.ambient_dim})")
        lines.extend(f"note: {n}" for n in self.notes)
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines) + "\n"


def _verdict(wellposed: bool, deficit: int, sard: bool | None) -> str:
    parts = [VERDICT_IDENTIFIABLE if wellposed else f"not well-posed (rank deficit {deficit})"]
    if sard:
        parts.append(VERDICT_SARD)
    return "; ".join(parts)


def _report(spec: ProblemSpec, est: CharRankEstimate, notes: tuple[str, ...] = ()) -> IdentifiabilityReport:
    dims = dimension_summary(spec)
    wellposed = est.char_rank == dims.wellposed_target
    if spec.is_completion:
        sard = est.char_rank < dims.ambient_dim
        bound = necessary_sample_bound(spec)
        bound_ok = spec.m >= bound
    else:
        sard = bound = bound_ok = None
    return IdentifiabilityReport(
        spec=spec,
        estimate=est,
        ambient_dim=dims.ambient_dim,
        param_dim=dims.param_dim,
        tangent_dim=dims.tangent_dim,
        complement_dim=dims.complement_dim,
        wellposed_target=dims.wellposed_target,
        wellposed=wellposed,
        sard_unsolvable=sard,
        counting_bound=bound,
        counting_bound_ok=bound_ok,
        verdict=_verdict(wellposed, dims.wellposed_target - est.char_rank, sard),
        notes=notes,
    )


def check_wellposed(spec: ProblemSpec, options: AnalysisOptions | None = None, **overrides) -> IdentifiabilityReport:
    """Compare the characteristic rank with tangent_dim + complement_dim.

    For CPD this is the test char_rank == r(n1 + n2 + n3 - 2); a pass is
    necessary, not sufficient, for global identifiability.
    """
    est = characteristic_rank(spec, options, **overrides)
    notes: tuple[str, ...] = ()
    if spec.variant is Variant.CPD:
        notes = ("local identifiability is necessary but not sufficient for global identifiability",)
    return _report(spec, est, notes)


def check_solvability(spec: ProblemSpec, options: AnalysisOptions | None = None, **overrides) -> IdentifiabilityReport:
    """Flag instances whose image has measure zero (char_rank < ambient_dim)."""
    if not spec.is_completion:
        raise UnsupportedVariantError("solvability check applies to completion problems only")
    est = characteristic_rank(spec, options, **overrides)
    bound = necessary_sample_bound(spec)
    notes = [f"m > {bound} alone guarantees char_rank < {spec.ambient_dim}"]
    if spec.m > bound:
        notes.append(f"m = {spec.m} exceeds {bound}: an exact rank-{spec.rank} fit to generic data is impossible")
    return _report(spec, est, tuple(notes))

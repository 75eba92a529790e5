"""Command-line entry point.

Exit codes: 0 analysis completed (whatever the verdict), 2 usage error,
3 input/parse error, 4 backend disagreement. Every failure prints exactly one
line ``charrank: error: <kind>: <reason>`` on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import AnalysisOptions, check_solvability, check_wellposed
from .errors import BackendDisagreementError, ConfigError, InvalidSpecError, MaskParseError, UnsupportedVariantError
from .experiment import SweepConfig, default_workers, emit_csv, emit_gnuplot, run_sweep, sample_mask
from .jacobian import ParameterPoint, assemble, random_point
from .model import ObservationPattern, ProblemSpec, Variant
from .rank import BACKENDS, DEFAULT_PRIME, TolerancePolicy

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DISAGREE = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_mask_file(path: str | Path, shape: Sequence[int]) -> ObservationPattern:
    """Read a mask file; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MaskParseError(f"cannot read mask file: {exc.strerror}", path=str(path)) from None
    return ObservationPattern.parse_text(text, shape, path=str(path))


def _int_list(text: str) -> list[int]:
    """``2,3,4`` or an inclusive range ``2-6``."""
    try:
        if "-" in text and "," not in text:
            lo, hi = text.split("-", 1)
            return list(range(int(lo), int(hi) + 1))
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers like 2,3,4 or 2-6, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _dims3(text: str) -> list[int]:
    dims = _int_list(text)
    if len(dims) != 3:
        raise argparse.ArgumentTypeError(f"--dims needs three extents, got {text!r}")
    return dims


def _add_analysis_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, required=True, help="master seed for all random draws")
    p.add_argument("--backend", choices=BACKENDS, default="finite_field")
    p.add_argument("--samples", type=int, default=8, help="parameter points per estimate (default 8)")
    p.add_argument("--prime", type=int, default=DEFAULT_PRIME)
    p.add_argument("--tol-factor", type=float, default=None, help="singular-value cutoff factor (default max(rows,cols)*eps)")
    p.add_argument("--tol-mode", choices=("relative", "absolute"), default="relative")
    cross = p.add_mutually_exclusive_group()
    cross.add_argument("--cross-check", dest="cross_check", action="store_true", default=None,
                       help="always cross-check with the other backend")
    cross.add_argument("--no-cross-check", dest="cross_check", action="store_false")
    p.add_argument("--solvability", action="store_true", help="report the Sard check notes (completion only)")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--out", help="write the report here instead of stdout")


def _add_mask_options(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mask", help="mask file: one 0-based index tuple per line")
    g.add_argument("--random-mask", type=int, metavar="M", help="draw M observed cells uniformly (uses --seed)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="charrank", description="Characteristic-rank identifiability checks.")
    parser.add_argument("--version", action="version", version=f"charrank {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check-matrix", help="low-rank matrix completion")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--rank", type=int, required=True)
    _add_mask_options(p)
    _add_analysis_options(p)

    p = sub.add_parser("check-cpd", help="three-way CP decomposition")
    p.add_argument("--dims", type=_dims3, required=True, help="n1,n2,n3")
    p.add_argument("--rank", type=int, required=True)
    _add_analysis_options(p)

    p = sub.add_parser("check-tensor", help="three-way tensor completion")
    p.add_argument("--dims", type=_dims3, required=True, help="n1,n2,n3")
    p.add_argument("--rank", type=int, required=True)
    _add_mask_options(p)
    _add_analysis_options(p)

    p = sub.add_parser("sweep", help="Monte Carlo well-posedness sweep over tensor size and sampling proportion")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-values", type=_int_list, default=list(range(2, 11)), help="e.g. 2-10 or 2,4,6")
    p.add_argument("--p-values", type=_float_list, default=None, help="explicit proportions; overrides --p-step/--p-max")
    p.add_argument("--p-step", type=float, default=0.02)
    p.add_argument("--p-max", type=float, default=0.6)
    p.add_argument("--rank", type=int, default=1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--levels", type=_float_list, default=[0.9, 0.999])
    p.add_argument("--backend", choices=BACKENDS, default="finite_field")
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--workers", type=int, default=None, help="default: $CHARRANK_WORKERS or CPU count")
    p.add_argument("--out", required=True, help="output directory for sweep.csv and thresholds.csv")
    p.add_argument("--gnuplot", action="store_true", help="also write probability pivoted by n to sweep.dat")

    p = sub.add_parser("jacobian-dump", help="write the assembled Jacobian as CSV")
    p.add_argument("--variant", choices=("matrix", "cpd", "tensor"), required=True)
    p.add_argument("--dims", type=_int_list, required=True, help="n1,n2 or n1,n2,n3")
    p.add_argument("--rank", type=int, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mask")
    g.add_argument("--random-mask", type=int, metavar="M")
    p.add_argument("--seed", type=int, help="required unless --point is given and no random mask is drawn")
    p.add_argument("--point", type=_float_list, help="explicit parameter vector in storage order")
    p.add_argument("--modulus", type=int, default=None, help="draw a residue point mod this prime instead of a Gaussian one")
    p.add_argument("--out")
    return parser


def _spec_from_args(args, variant: Variant, dims: Sequence[int]) -> ProblemSpec:
    pattern = None
    if variant is not Variant.CPD:
        if getattr(args, "mask", None):
            pattern = parse_mask_file(args.mask, dims)
        elif getattr(args, "random_mask", None) is not None:
            m = args.random_mask
            total = int(np.prod(dims))
            if not 0 <= m <= total:
                raise InvalidSpecError(f"--random-mask {m} outside [0, {total}]")
            if args.seed is None:
                raise UsageError("--random-mask needs --seed")
            rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(2**32 - 1,)))
            pattern = sample_mask(dims, m, rng)
        else:
            raise UsageError(f"{variant.value} needs --mask or --random-mask")
    return ProblemSpec(variant, tuple(dims), args.rank, pattern)


def _emit(text: str, out: str | None) -> None:
    if out:
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise MaskParseError(f"cannot write output: {exc.strerror}", path=out) from None
    else:
        sys.stdout.write(text)


def _run_check(args) -> int:
    variant = {"check-matrix": Variant.MATRIX_COMPLETION, "check-cpd": Variant.CPD,
               "check-tensor": Variant.TENSOR_COMPLETION}[args.command]
    dims = [args.n1, args.n2] if variant is Variant.MATRIX_COMPLETION else args.dims
    spec = _spec_from_args(args, variant, dims)
    opts = AnalysisOptions(
        backend=args.backend,
        samples=args.samples,
        seed=args.seed,
        prime=args.prime,
        tolerance=TolerancePolicy(args.tol_mode, args.tol_factor),
        cross_check=args.cross_check,
        workers=default_workers(),
    )
    if args.solvability:
        report = check_solvability(spec, opts)
    else:
        report = check_wellposed(spec, opts)
    text = report.to_json() + "\n" if args.format == "json" else report.to_text()
    _emit(text, args.out)
    return EXIT_OK


def _run_sweep(args) -> int:
    if args.p_values is not None:
        p_values = args.p_values
    else:
        if args.p_step <= 0:
            raise UsageError("--p-step must be positive")
        count = int(round(args.p_max / args.p_step))
        p_values = [round(args.p_step * k, 10) for k in range(1, count + 1)]
    config = SweepConfig(
        n_values=tuple(args.n_values),
        p_values=tuple(p_values),
        rank=args.rank,
        trials=args.trials,
        seed=args.seed,
        backend=args.backend,
        levels=tuple(args.levels),
        samples=args.samples,
        workers=args.workers if args.workers is not None else default_workers(),
    )
    result = run_sweep(config)
    out = Path(args.out)
    sweep_path, thr_path = emit_csv(result, out / "sweep.csv")
    summary = {"sweep_csv": str(sweep_path), "thresholds_csv": str(thr_path),
               "cells": len(result.cells), "seed": config.seed, "version": __version__}
    if args.gnuplot:
        summary["gnuplot"] = str(emit_gnuplot(result, out / "sweep.dat"))
    summary["thresholds"] = {str(level): {str(n): p for n, p in per_n.items()}
                             for level, per_n in result.thresholds.items()}
    sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return EXIT_OK


def _run_dump(args) -> int:
    variant = {"matrix": Variant.MATRIX_COMPLETION, "cpd": Variant.CPD, "tensor": Variant.TENSOR_COMPLETION}[args.variant]
    spec = _spec_from_args(args, variant, args.dims)
    if args.point is not None:
        values = np.asarray(args.point)
        if args.modulus is not None:
            values = values.astype(np.int64)
        point = ParameterPoint(spec, values, args.modulus)
    else:
        if args.seed is None:
            raise UsageError("jacobian-dump needs --seed or --point")
        point = random_point(spec, np.random.default_rng(args.seed), args.modulus)
    _emit(assemble(point).to_csv(), args.out)
    return EXIT_OK


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "sweep":
            return _run_sweep(args)
        if args.command == "jacobian-dump":
            return _run_dump(args)
        return _run_check(args)
    except MaskParseError as exc:
        return _fail(EXIT_INPUT, "input", str(exc))
    except (UsageError, InvalidSpecError, ConfigError, UnsupportedVariantError) as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except ValueError as exc:
        # e.g. a --point of the wrong length
        return _fail(EXIT_USAGE, "usage", str(exc))
    except OSError as exc:
        return _fail(EXIT_INPUT, "input", str(exc))
    except BackendDisagreementError as exc:
        return _fail(EXIT_DISAGREE, "backend-disagreement", str(exc) + " " + json.dumps(exc.diagnostics, default=str))


def _fail(code: int, kind: str, message: str) -> int:
    sys.stderr.write(f"charrank: error: {kind}: {' '.join(message.split())}\n")
    return code


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

"""Command-line front end: ingest targets, run verification suites, emit reports.

Subcommands
-----------
verify-finite   gap profile + telescope residuals + bound sandwich on finite
                targets (from JSON files or seeded random generation)
verify-cube     closed forms, eigenrelation, TV/coupling contraction, and the
                empirical relaxation sandwich for the cube-corner target
sample          stream Gibbs-chain states as newline-delimited JSON
report-merge    combine several report files into one

Reports are JSON only and self-contained: tool version, seed, tolerances,
wall clock, and per-check pass flags are always embedded.  Exit codes:
0 all checks pass, 1 some check failed, 2 malformed input or bad arguments,
3 state-space cap exceeded, 4 statistical contract not met.  The environment
variable ``SPECTEL_THREADS`` caps per-context parallelism (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from . import cube_corner as corner
from .bounds import assemble_bounds, spectral_radius
from .errors import (
    DomainError,
    NumericalContractError,
    ResourceLimitError,
    StatisticalContractError,
)
from .kernels import sample_gibbs_chain
from .target import FiniteTarget, load_target, random_target

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_RESOURCE = 3
EXIT_STATISTICAL = 4

DEFAULT_TOLERANCES = {
    "telescope": 1e-9,
    "bound_slack": 1e-9,
    "lemma": 1e-8,
    "psd": 1e-10,
    "exact": 1e-14,
    "eigenrelation": 1e-8,
    "orthonormality": 1e-10,
    "tv_match": 1e-8,
    "tv_bound_slack": 1e-10,
}


def _threads() -> int:
    raw = os.environ.get("SPECTEL_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise DomainError(f"SPECTEL_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise DomainError(f"SPECTEL_THREADS must be >= 1, got {value}")
    return value


def _parse_tolerances(pairs: list[str] | None) -> dict[str, float]:
    tols = dict(DEFAULT_TOLERANCES)
    for item in pairs or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise DomainError(f"--tol expects KEY=VAL, got {item!r}")
        if key not in tols:
            raise DomainError(
                f"unknown tolerance {key!r}; known keys: {', '.join(sorted(tols))}"
            )
        value = float(raw)
        if value <= 0:
            raise DomainError(f"tolerance {key} must be > 0, got {value}")
        tols[key] = value
    return tols


def _parse_axes(raw: str | None, n: int | None) -> tuple[int, ...]:
    if raw is None:
        raise DomainError("--random requires --axes (and --n for a uniform size)")
    if "," in raw:
        return tuple(int(v) for v in raw.split(","))
    if n is None:
        raise DomainError("--axes SIZE without commas needs --n for the coordinate count")
    return (int(raw),) * n


def _write_report(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2, sort_keys=False) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_report(command: str, seed: int, tolerances: dict) -> dict:
    return {
        "tool": "spectel",
        "version": __version__,
        "command": command,
        "seed": seed,
        "tolerances": tolerances,
    }


def cmd_verify_finite(args: argparse.Namespace) -> int:
    tols = _parse_tolerances(args.tol)
    threads = _threads()
    started = time.monotonic()
    report = _base_report("verify-finite", args.seed, tols)

    targets: list[tuple[str, FiniteTarget]] = []
    if args.target:
        targets.append((args.target, load_target(args.target)))
    elif args.random:
        rng = np.random.default_rng(args.seed)
        axes = _parse_axes(args.axes, args.n)
        for k in range(args.random):
            targets.append((f"random[{k}]", random_target(axes, rng)))
    else:
        raise DomainError("verify-finite needs --target PATH or --random COUNT")

    entries = []
    for name, target in targets:
        bound_report = assemble_bounds(
            target,
            args.l,
            max_workers=threads,
            slack=tols["bound_slack"],
            lemma_tol=tols["lemma"],
            psd_tol=tols["psd"],
        )
        entry = {"name": name, "axes": list(target.axes)}
        entry.update(bound_report.to_json_dict())
        entries.append(entry)

    report["l"] = args.l
    report["targets"] = entries
    report["all_passed"] = all(e["passed"] for e in entries)
    report["wallclock_s"] = round(time.monotonic() - started, 3)
    _write_report(report, args.out)
    return EXIT_OK if report["all_passed"] else EXIT_CHECKS_FAILED


def _check_closed_forms(tol: float) -> dict:
    """Exact-arithmetic identities among the corner's closed forms."""
    ok = True
    details: dict = {}
    for m in range(2, 9):
        z1 = corner.poly_eigenvalue(1, m)
        consistency = abs(
            corner.correlation_coefficient_bound(m) * m - corner.sum_square_constant(m)
        )
        ok &= abs(z1 + 1.0 / m) <= tol and consistency <= tol
        details[str(m)] = {
            "zeta1": z1,
            "s_bound": corner.correlation_coefficient_bound(m),
            "constant_consistency": consistency,
        }
    ok &= abs(corner.correlation_coefficient_bound(2) - 0.75) <= tol
    floor4 = corner.corner_gap_lower_bound(4).simplified_floor
    ok &= abs(floor4 - 5.0 / 72.0) <= tol
    for n in range(3, 21):
        bound = corner.corner_gap_lower_bound(n)
        ok &= bound.product_form <= 1.0 / n
        if bound.simplified_floor is not None:
            ok &= bound.product_form >= bound.simplified_floor - tol
    return {"passed": bool(ok), "details": details}


def _check_influence(n: int, tol: float) -> dict:
    levels = sorted({4, 5, max(3, min(n, 8))})
    details = {}
    ok = True
    for m in levels:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            radius = spectral_radius(corner.wasserstein_influence(m).entries)
        expected = (m - 1) / (m - 2)
        ok &= abs(radius - expected) <= tol
        details[str(m)] = {
            "spectral_radius": radius,
            "expected": expected,
            "beyond_stated_hypothesis": m < 4,
        }
    return {"passed": bool(ok), "details": details}


def _check_eigenrelation(tols: dict) -> dict:
    details = {}
    ok = True
    for m in range(2, 7):
        for budget in (0.3, 1.0):
            basis = corner.OrthoBasis(m, budget, 6)
            ortho = basis.orthonormality_residual()
            try:
                residual = corner.verify_eigenrelation(
                    m, budget, 6, tol=tols["eigenrelation"]
                )
                good = ortho <= tols["orthonormality"]
            except NumericalContractError:
                residual, good = float("nan"), False
            ok &= good
            details[f"m={m},R={budget}"] = {
                "max_residual": residual,
                "orthonormality_residual": ortho,
            }
    return {"passed": bool(ok), "details": details}


def _check_tv_sweep(rng: np.random.Generator, tols: dict, count: int = 100) -> dict:
    worst_gap = 0.0
    ok = True
    for _ in range(count):
        m = int(rng.integers(3, 9))
        budget = float(rng.uniform(0.3, 1.0))
        x, xp = sorted(float(v) for v in rng.uniform(0.0, budget, 2))
        if not 0.0 < x < xp < budget:
            continue
        try:
            result = corner.tv_contraction_check(
                m,
                budget,
                x,
                xp,
                match_tol=tols["tv_match"],
                bound_slack=tols["tv_bound_slack"],
            )
            worst_gap = max(worst_gap, abs(result.tv_quadrature - result.tv_formula))
        except NumericalContractError:
            ok = False
    return {"passed": bool(ok), "worst_formula_mismatch": worst_gap}


def _check_contraction_mc(rng: np.random.Generator, draws: int = 100_000) -> dict:
    details = {}
    ok = True
    for m in (4, 5):
        budget = 0.9
        x, xp = 0.2 * budget, 0.6 * budget
        d_in = corner.contraction_metric(budget, x, xp)
        u = rng.random(draws)
        fraction = 1.0 - (1.0 - u) ** (1.0 / (m - 1))
        out_a = (budget - x) * fraction
        out_b = (budget - xp) * fraction
        d_out = np.abs(out_a - out_b) / (budget - np.maximum(out_a, out_b))
        ratios = d_out / d_in
        mean = float(ratios.mean())
        se = float(ratios.std(ddof=1) / np.sqrt(draws))
        good = mean <= 1.0 / (m - 2) + 3.0 * se
        ok &= good
        details[str(m)] = {"mean_ratio": mean, "se": se, "ceiling": 1.0 / (m - 2)}
    return {"passed": bool(ok), "details": details}


def cmd_verify_cube(args: argparse.Namespace) -> int:
    if not 3 <= args.n <= 8:
        raise DomainError(f"--n must lie in 3..8, got {args.n}")
    tols = _parse_tolerances(args.tol)
    started = time.monotonic()
    rng = np.random.default_rng(args.seed)
    report = _base_report("verify-cube", args.seed, tols)
    report["n"] = args.n
    report["steps"] = args.steps

    checks = {
        "closed_forms": _check_closed_forms(tols["exact"]),
        "influence_matrix": _check_influence(args.n, tols["exact"]),
        "eigenrelation": _check_eigenrelation(tols),
        "tv_contraction": _check_tv_sweep(rng, tols),
        "coupling_contraction_mc": _check_contraction_mc(rng),
    }

    bound = corner.corner_gap_lower_bound(args.n)
    lower = bound.simplified_floor if bound.simplified_floor is not None else bound.product_form
    estimate = corner.empirical_gap_estimate(args.n, args.steps, rng)
    sandwich_ok = (
        lower - estimate.ci <= estimate.gap <= 1.0 / args.n + estimate.ci
    )
    checks["empirical_sandwich"] = {
        "passed": bool(sandwich_ok),
        "gap_estimate": estimate.gap,
        "rho": estimate.rho,
        "ci": estimate.ci,
        "lags_used": estimate.lags_used,
        "lower_bound": lower,
        "lower_bound_kind": "simplified_floor" if bound.simplified_floor else "product_form",
        "product_form": bound.product_form,
        "upper_bound": 1.0 / args.n,
    }

    report["checks"] = checks
    report["all_passed"] = all(c["passed"] for c in checks.values())
    report["wallclock_s"] = round(time.monotonic() - started, 3)
    _write_report(report, args.out)
    return EXIT_OK if report["all_passed"] else EXIT_CHECKS_FAILED


def cmd_sample(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    if args.target == "cube":
        if args.n is None:
            raise DomainError("sampling the cube-corner target needs --n")
        states = corner.run_corner_chain(args.n, args.steps, rng)
        lines = (json.dumps([float(v) for v in row]) for row in states)
    else:
        target = load_target(args.target)
        states = sample_gibbs_chain(target, args.steps, rng, l=args.l)
        lines = (json.dumps([int(v) for v in row]) for row in states)
    stream = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        for line in lines:
            stream.write(line + "\n")
    finally:
        if args.out:
            stream.close()
    return EXIT_OK


def cmd_report_merge(args: argparse.Namespace) -> int:
    merged = _base_report("report-merge", args.seed, _parse_tolerances(args.tol))
    reports = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            reports.append({"path": path, "report": json.load(fh)})
    all_passed = all(
        entry["report"].get("all_passed", entry["report"].get("passed", False))
        for entry in reports
    )
    merged["reports"] = reports
    merged["all_passed"] = all_passed
    _write_report(merged, args.out)
    return EXIT_OK if all_passed else EXIT_CHECKS_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spectel",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"spectel {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0, help="RNG seed (recorded in reports)")
        p.add_argument("--out", type=str, default=None, help="write output to this path")
        p.add_argument(
            "--tol",
            action="append",
            metavar="KEY=VAL",
            help=f"override a tolerance; keys: {', '.join(sorted(DEFAULT_TOLERANCES))}",
        )

    p = sub.add_parser("verify-finite", help="telescope and bound checks on finite targets")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--target", type=str, help="path to a target JSON file")
    source.add_argument("--random", type=int, help="verify COUNT random Dirichlet(1) targets")
    p.add_argument("--n", type=int, default=None, help="coordinate count for --random")
    p.add_argument(
        "--axes",
        type=str,
        default=None,
        help="alphabet sizes for --random: a single size (with --n) or a comma list",
    )
    p.add_argument("--l", type=int, default=1, help="block size (default 1)")
    common(p)
    p.set_defaults(func=cmd_verify_finite)

    p = sub.add_parser("verify-cube", help="closed-form and Monte Carlo cube-corner checks")
    p.add_argument("--n", type=int, default=4, help="dimension, 3..8 (default 4)")
    p.add_argument(
        "--steps", type=int, default=2_000_000, help="Gibbs steps for the empirical estimate"
    )
    common(p)
    p.set_defaults(func=cmd_verify_cube)

    p = sub.add_parser("sample", help="stream chain states as newline-delimited JSON")
    p.add_argument(
        "--target",
        type=str,
        required=True,
        help='path to a target JSON file, or the builtin name "cube"',
    )
    p.add_argument("--n", type=int, default=None, help="dimension for the cube target")
    p.add_argument("--l", type=int, default=1, help="block size for finite targets")
    p.add_argument("--steps", type=int, default=1000, help="number of states to emit")
    common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("report-merge", help="combine report files into one")
    p.add_argument("reports", nargs="+", help="report JSON files to merge")
    common(p)
    p.set_defaults(func=cmd_report_merge)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DomainError, FileNotFoundError) as exc:
        print(f"spectel: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except json.JSONDecodeError as exc:
        print(f"spectel: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except ResourceLimitError as exc:
        print(f"spectel: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except StatisticalContractError as exc:
        print(f"spectel: statistical contract not met: {exc}", file=sys.stderr)
        return EXIT_STATISTICAL


if __name__ == "__main__":
    sys.exit(main())

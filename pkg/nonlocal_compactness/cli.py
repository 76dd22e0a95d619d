"""
Command-line front end.

    nonlocal-lab kernel-check --config kernel.json --out results/
    nonlocal-lab poincare --config poincare.json --threads 4

Each subcommand writes ``report.json`` plus CSV curves into the output
directory and prints a short summary table. Exit codes: 0 completed,
1 usage or configuration error, 2 hypothesis violated, 3 numerical
degeneracy.
"""

import argparse
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from joblib import parallel_config

from .analysis import (
    boundary_mass_check,
    boundary_mass_curve,
    compactness_probe,
    default_r0,
    experiment_deltas,
    kernel_sequence_experiment,
    poincare_constant,
)
from .config import (
    COMMANDS,
    ExperimentConfig,
    build_cone,
    build_field,
    build_grid,
    build_kernel,
    build_subspace,
    load_config,
)
from .errors import (
    CapabilityError,
    ConfigError,
    DegenerateKernelError,
    HypothesisViolatedError,
    KernelSingularityError,
    RankError,
)
from .fields import write_field_csv
from .kernels import (
    check_cone_condition,
    check_mass_ratio_limit,
    check_radial_monotone,
    integrable_quotient,
)
from .operators import (
    cone_matrix,
    f_curve,
    full_difference_seminorm,
    gap_chain_bound,
    mollifier_stencil,
    mollify,
    seminorm,
    symgrad_upper_bound_check,
)
from .reports import write_curve, write_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HYPOTHESIS = 2
EXIT_DEGENERATE = 3

HELP = {
    "kernel-check": "Check kernel admissibility conditions",
    "seminorm": "Evaluate the projected-difference seminorm of a field",
    "mollify": "Measure smoothing gaps of the cone mollifier",
    "poincare": "Estimate the Poincare-Korn constant on a subspace",
    "boundary": "Evaluate the near-boundary mass inequality",
    "compactness": "Probe a field sequence against the cone bound",
    "sequence": "Run a field sequence against a kernel sequence",
}


@dataclass
class Outcome:
    """Payload, summary table and deferred error of one run."""

    payload: dict
    summary: pd.DataFrame
    error: Optional[Exception] = None


def _p(config: ExperimentConfig, default: float = 2.0) -> float:
    return config.p if config.p is not None else default


def _sequence_spec(config: ExperimentConfig) -> tuple[dict, list]:
    spec = dict(config.sequence)
    spec.pop("family", None)
    n_values = spec.pop("n_values", list(range(1, 9)))
    return spec, [int(n) for n in n_values]


def _run_kernel_check(config: ExperimentConfig, out: Path) -> Outcome:
    kernel = build_kernel(config)
    reports = []
    payload = {"kernel": kernel.to_dict()}
    if kernel.is_radial:
        reach = min(1.0, kernel.support_radius)
        radii = np.geomspace(1e-3 * reach, 0.9 * reach, 12)
        reports.append(check_radial_monotone(kernel, radii))
        reports.append(check_mass_ratio_limit(kernel, config.deltas))
        payload["integrable_quotient"] = integrable_quotient(kernel)
        write_curve(
            out,
            "mass_ratio_limit.csv",
            reports[-1].samples,
            ["delta", "ratio"],
        )
    if not kernel.is_radial or config.cone is not None:
        cone = (
            kernel.cone
            if config.cone is None and kernel.cone is not None
            else build_cone(config, kernel.d)
        )
        reports.append(
            check_cone_condition(
                kernel,
                config.theta0,
                cone,
                config.deltas,
                n_theta=config.theta_grid,
            )
        )
        write_curve(
            out,
            "cone_condition.csv",
            reports[-1].samples,
            ["delta", "ratio"],
        )
    payload["conditions"] = [r.to_dict() for r in reports]
    summary = pd.DataFrame(
        [
            {
                "condition": r.condition_id,
                "verdict": r.verdict,
                "slope": r.fitted_log_slope,
            }
            for r in reports
        ]
    )
    return Outcome(payload, summary)


def _run_seminorm(config: ExperimentConfig, out: Path) -> Outcome:
    grid = build_grid(config)
    kernel = build_kernel(config)
    u = build_field(config, grid)
    p = _p(config, kernel.p)
    result = seminorm(u, kernel, p, error_estimate=config.error_estimate)
    payload = {
        "seminorm": result.to_dict(),
        "full_difference": full_difference_seminorm(u, kernel, p),
        "norm_p": u.lp_norm_p(p),
    }
    rows = [
        {"quantity": "seminorm", "value": result.value_p},
        {"quantity": "full_difference", "value": payload["full_difference"]},
        {"quantity": "norm_p", "value": payload["norm_p"]},
    ]
    if config.symgrad:
        check = symgrad_upper_bound_check(u, kernel, p)
        payload["symgrad"] = check.to_dict()
        rows.append({"quantity": "symgrad_ratio", "value": check.ratio})
    return Outcome(payload, pd.DataFrame(rows))


def _run_mollify(config: ExperimentConfig, out: Path) -> Outcome:
    grid = build_grid(config)
    u = build_field(config, grid)
    p = _p(config)
    mm = cone_matrix(build_cone(config, grid.d))
    deltas, dropped = experiment_deltas(grid, config.deltas)

    chains = [gap_chain_bound(u, delta, mm, p) for delta in deltas]
    defects = [
        mollifier_stencil(mm, delta, grid.h).normalization_defect
        for delta in deltas
    ]
    mollified_norms = [
        mollify(u, delta, mm, extension=config.extension).lp_norm_p(p)
        for delta in deltas
    ]
    write_curve(
        out,
        "gap_curve.csv",
        [(c.delta, c.gap) for c in chains],
        ["delta", "gap"],
    )
    lengths = np.geomspace(grid.h.min(), max(deltas), 16)
    write_curve(
        out,
        "f_curve.csv",
        f_curve(u, mm.cone.axis, p, lengths),
        ["t", "F_p"],
    )
    payload = {
        "mollifier": mm.to_dict(),
        "gap_chain": [c.to_dict() for c in chains],
        "normalization_defects": defects,
        "extension": config.extension,
        "mollified_norm_p": mollified_norms,
        "norm_p": u.lp_norm_p(p),
        "dropped_deltas": dropped,
    }
    summary = pd.DataFrame(
        {
            "delta": [c.delta for c in chains],
            "gap": [c.gap for c in chains],
            "bound": [c.bound for c in chains],
        }
    )
    return Outcome(payload, summary)


def _run_poincare(config: ExperimentConfig, out: Path) -> Outcome:
    grid = build_grid(config)
    kernel = build_kernel(config)
    estimate = poincare_constant(
        build_subspace(config),
        kernel,
        _p(config, kernel.p),
        grid,
        seed=config.seed,
        restarts=config.restarts,
    )
    write_field_csv(estimate.minimizer, out / "minimizer.csv")
    summary = pd.DataFrame([estimate.to_dict()])[
        ["constant", "method", "grid_h", "refinement_drift"]
    ]
    return Outcome({"poincare": estimate.to_dict()}, summary)


def _run_boundary(config: ExperimentConfig, out: Path) -> Outcome:
    grid = build_grid(config)
    kernel = build_kernel(config)
    u = build_field(config, grid)
    p = _p(config, kernel.p)
    r0 = config.r0 if config.r0 is not None else default_r0(grid)
    radii = config.radii or (r0 / 2, r0 / 4, r0 / 8)
    reports = [
        boundary_mass_check(u, kernel, r, config.epsilon0, p, r0=r0)
        for r in radii
    ]
    write_curve(
        out,
        "boundary_mass.csv",
        boundary_mass_curve([u], p),
        ["tau", "mass"],
    )
    summary = pd.DataFrame([r.to_dict() for r in reports])[
        ["r", "lhs", "interior_term", "seminorm_term", "implied_C2"]
    ]
    write_curve(
        out,
        "boundary_check.csv",
        summary.values.tolist(),
        list(summary.columns),
    )
    return Outcome({"boundary": [r.to_dict() for r in reports]}, summary)


def _write_compactness(out: Path, report) -> None:
    write_curve(out, "gap_curve.csv", report.gap_curve, ["delta", "gap"])
    write_curve(
        out,
        "boundary_mass.csv",
        report.boundary_mass_curve,
        ["tau", "mass"],
    )
    if report.bound_curve:
        write_curve(
            out, "bound_curve.csv", report.bound_curve, ["delta", "bound"]
        )


def _compactness_summary(report) -> pd.DataFrame:
    return pd.DataFrame(
        [
            {
                "sequence": report.sequence_id,
                "sup_seminorm": report.sup_seminorm,
                "envelope": report.envelope_constant,
                "verdict": report.verdict,
            }
        ]
    )


def _run_compactness(config: ExperimentConfig, out: Path) -> Outcome:
    grid = build_grid(config)
    kernel = build_kernel(config)
    spec, n_values = _sequence_spec(config)
    cone = build_cone(config, grid.d) if config.cone is not None else None
    report = compactness_probe(
        spec,
        kernel,
        _p(config, kernel.p),
        grid,
        cone=cone,
        theta0=config.theta0,
        deltas=config.deltas,
        n_values=n_values,
        normalize_seminorm=config.normalize_seminorm,
        seed=config.seed,
        n_theta=config.theta_grid,
    )
    _write_compactness(out, report)
    return Outcome(
        {"compactness": report.to_dict()}, _compactness_summary(report)
    )


def _run_sequence(config: ExperimentConfig, out: Path) -> Outcome:
    grid = build_grid(config)
    kernel = build_kernel(config)
    spec, n_values = _sequence_spec(config)
    cone = build_cone(config, grid.d) if config.cone is not None else None
    report = kernel_sequence_experiment(
        config.sequence["family"],
        kernel,
        spec,
        _p(config, kernel.p),
        grid,
        n_values=n_values,
        deltas=config.deltas,
        cone=cone,
        seed=config.seed,
    )
    error = None
    try:
        report.raise_for_hypothesis()
        _write_compactness(out, report)
    except HypothesisViolatedError as e:
        error = e
    return Outcome(
        {"compactness": report.to_dict()}, _compactness_summary(report), error
    )


RUNNERS = {
    "kernel-check": _run_kernel_check,
    "seminorm": _run_seminorm,
    "mollify": _run_mollify,
    "poincare": _run_poincare,
    "boundary": _run_boundary,
    "compactness": _run_compactness,
    "sequence": _run_sequence,
}


def run(config: ExperimentConfig, out_dir: Optional[Path] = None) -> int:
    """
    Run one experiment and write its artifacts.

    Args:
        config: Validated config
        out_dir: Output directory (default: config.output)

    Returns:
        Exit code

    Raises:
        HypothesisViolatedError: After the report is written, if the run
            found its hypothesis violated
    """
    out = Path(out_dir if out_dir is not None else config.output)
    out.mkdir(parents=True, exist_ok=True)
    with parallel_config(n_jobs=config.threads, prefer="threads"):
        outcome = RUNNERS[config.command](config, out)
    payload = dict(outcome.payload)
    payload["seed"] = config.seed
    write_report(out, config.command, payload)
    print(outcome.summary.to_string(index=False))
    if outcome.error is not None:
        raise outcome.error
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nonlocal-lab",
        description="Numerical experiments on nonlocal seminorms",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command, help=HELP[command])
        sub.add_argument(
            "--config", required=True, type=Path, help="JSON config file"
        )
        sub.add_argument("--out", type=Path, help="Output directory")
        sub.add_argument("--threads", type=int, help="joblib workers")
        sub.add_argument("--seed", type=int, help="Random seed")
        sub.add_argument(
            "-v",
            "--verbose",
            action="count",
            default=0,
            help="Log INFO (-v) or DEBUG (-vv) messages",
        )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2, which is reserved for failed hypotheses
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    level = max(logging.WARNING - 10 * args.verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s"
    )
    try:
        config = load_config(args.config, command=args.command)
        if args.seed is not None and args.seed < 0:
            raise ConfigError("--seed must be nonnegative", key="seed")
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be positive", key="threads")
        config = config.with_overrides(
            seed=args.seed,
            threads=args.threads,
            output=str(args.out) if args.out is not None else None,
        )
        return run(config)
    except HypothesisViolatedError as e:
        logger.error("%s", e)
        return EXIT_HYPOTHESIS
    except (
        RankError,
        DegenerateKernelError,
        KernelSingularityError,
    ) as e:
        logger.error("%s", e)
        return EXIT_DEGENERATE
    except (ValueError, CapabilityError) as e:
        logger.error("%s", e)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: pairwise registration, multiview reconstruction,
robustness sweeps and criterion-landscape dumps.

Exit codes are a stable contract: 0 success, 2 parse/config error, 3 I/O
error, 4 numerical degeneracy. ``MPE_SEED`` overrides the default seed when
no ``--seed`` flag is given.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .cloud_io import load_cloud, save_cloud, save_transform
from .config import RunConfig, load_run_config
from .criterion import CriterionParams, SweepAxis, default_eps2, landscape_sweep
from .errors import CloudFormatError, ConfigError, DegenerateConfigurationError
from .multiview import multiview_register, register_pair
from .synth import run_sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DEGENERATE = 4


def _parse_levels(spec: str) -> list[float]:
    """Level grid: 'lo:hi:n' (inclusive linspace) or 'a,b,c' literals."""
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ConfigError(f"level range must be lo:hi:count, got {spec!r}")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ConfigError(f"level count must be >= 1, got {n}")
        return [float(v) for v in np.linspace(lo, hi, n)]
    try:
        return [float(v) for v in spec.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad level list {spec!r}") from None


def _parse_axis(spec: str) -> SweepAxis:
    """Axis flag format: kind:dx,dy,dz:start:stop:steps."""
    parts = spec.split(":")
    if len(parts) != 5:
        raise ConfigError(
            f"axis must be kind:dx,dy,dz:start:stop:steps, got {spec!r}"
        )
    kind, direction, start, stop, steps = parts
    try:
        d = [float(v) for v in direction.split(",")]
        axis = SweepAxis(kind, d, float(start), float(stop), int(steps))
    except ValueError as exc:
        raise ConfigError(f"bad axis {spec!r}: {exc}") from None
    return axis


def _apply_seed(config: RunConfig, args) -> RunConfig:
    if args.seed is not None:
        return config.with_seed(args.seed)
    env = os.environ.get("MPE_SEED")
    if env is not None:
        try:
            return config.with_seed(int(env))
        except ValueError:
            raise ConfigError(f"MPE_SEED must be an integer, got {env!r}") from None
    return config


def _write_text(path, text: str) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _cmd_register(args) -> int:
    config = _apply_seed(load_run_config(args.config), args)
    template = load_cloud(args.template)
    reference = load_cloud(args.reference)
    pair = register_pair(template, reference, config.multiview)
    if pair.icp_result.degenerate:
        print("error: refinement hit a rank-deficient fit", file=sys.stderr)
        return EXIT_DEGENERATE
    save_transform(pair.transform, args.output)
    print(f"overlap {pair.overlap!r}")
    print(f"nfi_energy {pair.nfi_refined!r}")
    return EXIT_OK


def _cmd_multiview(args) -> int:
    config = _apply_seed(load_run_config(args.config), args)
    scans = [load_cloud(p) for p in args.scans]
    report = multiview_register(scans, config.multiview)
    save_cloud(report.model, args.output, fmt=args.format)
    _write_text(args.report, report.report_text())
    accepted = sum(1 for r in report.per_scan if r.status == "accepted")
    print(f"accepted {accepted} of {len(report.per_scan)} incoming scans")
    print(f"model points {len(report.model)}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    config = _apply_seed(load_run_config(args.config), args)
    model = load_cloud(args.model)
    levels = _parse_levels(args.levels)
    result = run_sweep(
        model,
        args.sweep,
        levels,
        trials_per_level=args.trials,
        mpe=config.mpe,
        icp=config.icp,
        seed=config.mpe.seed,
    )
    _write_text(args.output, result.to_csv(include_runtime=not args.no_runtime))
    agg = args.aggregate_output or _derived_aggregate_path(args.output)
    _write_text(agg, result.aggregate_csv())
    print(f"wrote {len(result.trials)} trials to {args.output}")
    print(f"wrote {len(result.levels)} level summaries to {agg}")
    return EXIT_OK


def _derived_aggregate_path(path) -> Path:
    p = Path(path)
    return p.with_name(p.stem + ".agg" + (p.suffix or ".csv"))


def _cmd_landscape(args) -> int:
    config = _apply_seed(load_run_config(args.config), args)
    template = load_cloud(args.template)
    reference = load_cloud(args.reference)
    axes = [_parse_axis(args.axis1)]
    if args.axis2:
        axes.append(_parse_axis(args.axis2))
    eps2 = config.mpe.eps2 if config.mpe.eps2 is not None else default_eps2(reference)
    if args.eps2 is not None:
        eps2 = args.eps2
    params = CriterionParams(eps2, config.mpe.gravitational_constant)
    grid = landscape_sweep(template, reference, params, tuple(axes))
    _write_text(args.output, grid.to_csv())
    print(f"wrote {grid.nfi.size} grid nodes to {args.output}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpereg",
        description="Point-cloud registration by potential-energy descent "
        "with trimmed-ICP refinement.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="align one template onto one reference")
    p.add_argument("template")
    p.add_argument("reference")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True, help="transform text file (12 numbers)")
    p.set_defaults(func=_cmd_register)

    p = sub.add_parser("multiview", help="register and merge a scan sequence")
    p.add_argument("scans", nargs="+")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True, help="merged model path")
    p.add_argument("--format", choices=("xyz", "ply"), default="xyz")
    p.add_argument("--report", required=True, help="per-scan report path")
    p.set_defaults(func=_cmd_multiview)

    p = sub.add_parser("bench", help="noise/outlier/sampling robustness sweep")
    p.add_argument("--model", required=True)
    p.add_argument("--sweep", choices=("noise", "outliers", "sample-ratio"), required=True)
    p.add_argument("--levels", required=True, help="'lo:hi:count' or 'a,b,c'")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", required=True, help="per-trial CSV path")
    p.add_argument("--aggregate-output", default=None)
    p.add_argument(
        "--no-runtime",
        action="store_true",
        help="omit the wall-clock column for byte-reproducible output",
    )
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("landscape", help="criterion energies over a parameter grid")
    p.add_argument("template")
    p.add_argument("reference")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--axis1", required=True, help="kind:dx,dy,dz:start:stop:steps")
    p.add_argument("--axis2", default=None)
    p.add_argument("--eps2", type=float, default=None, help="override the offset")
    p.add_argument("--output", required=True, help="grid CSV path")
    p.set_defaults(func=_cmd_landscape)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags, which matches the config-error code.
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except (ConfigError, CloudFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DegenerateConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

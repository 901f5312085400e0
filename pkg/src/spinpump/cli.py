"""Command-line driver: sweeps, figure datasets, stochastic oracle runs.

Exit codes: 0 on full success, 1 when any sweep row failed or an emission
failed (a machine-readable JSON error summary goes to stderr), 2 for
configuration errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .sweep import (ConfigError, emit_csv, emit_figure_data, parse_config,
                    run_sweep)


def _load_spec(path: str, seed_override=None):
    text = Path(path).read_text(encoding="utf-8")
    spec = parse_config(text)
    if seed_override is not None and spec.oracle is not None:
        spec = dataclasses.replace(
            spec, oracle=dataclasses.replace(spec.oracle, seed=seed_override))
    return spec


def _fail(errors) -> int:
    json.dump({"errors": list(errors)}, sys.stderr)
    sys.stderr.write("\n")
    return 1


def _cmd_validate(args) -> int:
    try:
        _load_spec(args.config)
    except ConfigError as exc:
        for message in exc.errors:
            print(message, file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def _run_spec(args):
    try:
        spec = _load_spec(args.config, getattr(args, "seed", None))
    except ConfigError as exc:
        for message in exc.errors:
            print(message, file=sys.stderr)
        sys.exit(2)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        sys.exit(2)
    return spec


def _cmd_sweep(args) -> int:
    spec = _run_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(spec, threads=args.threads)
    try:
        emit_csv(result, out / "sweep.csv")
    except OSError as exc:
        return _fail([f"emission failed: {exc}"])
    failed = [row for row in result.rows if row.status != "ok"]
    if failed:
        return _fail([
            f"{row.regime} {spec.swept}={row.value!r}: {row.error}"
            for row in failed])
    print(f"wrote {out / 'sweep.csv'} ({len(result.rows)} rows)")
    return 0


def _cmd_figure(args) -> int:
    spec = _run_spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_sweep(spec, threads=args.threads)
    try:
        text = emit_figure_data(result, args.which)
    except ValueError as exc:
        return _fail([str(exc)])
    suffix = "csv" if args.which != "table1" else "txt"
    path = out / f"{args.which}.{suffix}"
    path.write_text(text, encoding="utf-8")
    failed = [row for row in result.rows if row.status != "ok"]
    if failed:
        return _fail([
            f"{row.regime} {spec.swept}={row.value!r}: {row.error}"
            for row in failed])
    print(f"wrote {path}")
    return 0


def _cmd_oracle(args) -> int:
    spec = _run_spec(args)
    if spec.oracle is None:
        return _fail(["config has no [oracle] section"])
    from .montecarlo import (TrajectoryConfig, empirical_cumulants, simulate,
                             write_samples)
    from .sweep import GROUP_COLUMNS, _derived_se, derived_quantity
    from .cumulants import CumulantSet
    from .sweep import SweepRow

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    points = spec.oracle.points or (getattr(spec.fixed, spec.swept),)
    summary_rows = []
    for value in points:
        params = spec.fixed.replace(**{spec.swept: value})
        cfg = TrajectoryConfig(t_final=spec.oracle.t_final,
                               n_trajectories=spec.oracle.n_trajectories,
                               seed=spec.oracle.seed)
        samples = simulate(params, cfg)
        write_samples(samples, out / f"samples_{spec.swept}_{value!r}.tsv")
        emp = empirical_cumulants(samples, cfg.t_final)
        cs = CumulantSet(first=emp.first, second=emp.second, third=emp.third)
        row = SweepRow(regime="oracle", gamma_phi=params.gamma_phi,
                       value=value, status="ok", cumulants=cs,
                       errors_se={"first": emp.first_se,
                                  "second": emp.second_se,
                                  "third": emp.third_se})
        summary_rows.append(row)

    columns = [c for group in spec.outputs for c in GROUP_COLUMNS[group]]
    with open(out / "oracle_summary.csv", "w", encoding="utf-8",
              newline="") as fh:
        header = [f"{spec.swept}/Gamma"]
        for col in columns:
            header += [f"{col}/Gamma", f"{col}_se/Gamma"]
        fh.write(",".join(header) + "\n")
        for row in summary_rows:
            cells = [repr(float(row.value))]
            for col in columns:
                cells.append(repr(derived_quantity(row.cumulants, col)))
                cells.append(repr(_derived_se(row, col)))
            fh.write(",".join(cells) + "\n")
    print(f"wrote {out / 'oracle_summary.csv'} ({len(points)} points)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spinpump",
        description="Counting statistics of an ESR-driven quantum-dot spin pump")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("config", help="path to a sweep configuration file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker threads for grid evaluation")
        p.add_argument("--seed", type=int, default=None,
                       help="override the oracle seed from the config")

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep, emit CSV")
    add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fig = sub.add_parser("figure", help="emit a figure-reproduction dataset")
    p_fig.add_argument("which", choices=("fig2", "fig3", "table1"))
    add_common(p_fig)
    p_fig.set_defaults(func=_cmd_figure)

    p_oracle = sub.add_parser("oracle", help="run the stochastic oracle")
    add_common(p_oracle)
    p_oracle.set_defaults(func=_cmd_oracle)

    p_val = sub.add_parser("validate", help="validate a configuration file")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``gfid run``, ``gfid check`` and ``gfid preset``.

Exit codes: 0 on success, 2 on a configuration error, 3 on an I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, IoError
from .experiments import PRESETS, emit_csv, load_config, load_preset, preset_document, run_scenario, summarize

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


def _add_source(p):
    p.add_argument("--config", type=Path, help="scenario JSON file")
    p.add_argument("--preset", choices=PRESETS, help="bundled scenario")


def _parser():
    parser = argparse.ArgumentParser(prog="gfid", description="Blind graph filter identification experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write a CSV")
    _add_source(run)
    run.add_argument("--out", help="output CSV (default <name>.csv, '-' for stdout)")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--trials", type=int, help="override the trials per cell")
    run.add_argument("--full-scale", action="store_true", help="use the full trial count of the scenario")
    run.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")
    run.add_argument("--timing", action="store_true", help="fill the wall_ms column")
    run.add_argument("--plot", action="store_true", help="also write an SVG chart next to the CSV")
    run.add_argument("--quiet", action="store_true", help="skip the per-cell summary on stderr")

    check = sub.add_parser("check", help="validate a scenario without running it")
    _add_source(check)

    preset = sub.add_parser("preset", help="print a bundled scenario as JSON")
    preset.add_argument("name", choices=PRESETS)
    return parser


def _load(args):
    if (args.config is None) == (args.preset is None):
        raise ConfigError("<args>", "give exactly one of --config or --preset")
    return load_config(args.config) if args.config else load_preset(args.preset)


def _run(args):
    cfg = _load(args)
    if args.full_scale:
        cfg = cfg.full_scale()
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trials", "must be >= 1")
        cfg = cfg.with_trials(args.trials)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed", "must be >= 0")
        cfg = cfg.with_seed(args.seed)
    out = args.out or f"{cfg.name}.csv"
    rows = []

    def collect():
        for row in run_scenario(cfg, workers=args.workers, timing=args.timing):
            rows.append(row)
            yield row

    if out == "-":
        emit_csv(collect(), sys.stdout, cfg.cell_keys)
    else:
        # open first so that a bad path fails before the trials run
        try:
            handle = open(out, "w", newline="")
        except OSError as exc:
            raise IoError(f"cannot write {out}: {exc}") from exc
        with handle:
            emit_csv(collect(), handle, cfg.cell_keys)
    if not args.quiet:
        keys = ",".join(cfg.cell_keys)
        print(f"{cfg.name}: {len(rows)} rows; per cell ({keys}): rate, median error", file=sys.stderr)
        for cell, agg in summarize(rows).items():
            print(f"  {','.join(cell)}: {agg['rate']:.3f}  {agg['median_error']:.3g}", file=sys.stderr)
    if args.plot:
        if cfg.plot is None:
            print("scenario has no plot section; skipping chart", file=sys.stderr)
        else:
            from .plotting import plot_results

            stem = Path(cfg.name if out == "-" else out).with_suffix(".svg")
            plot_results(cfg, rows, stem)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "check":
            cfg = _load(args)
            print(f"{cfg.name}: ok ({cfg.n_cells} cells x {cfg.trials} trials, "
                  f"full scale {cfg.full_trials})")
            return EXIT_OK
        print(json.dumps(preset_document(args.name), indent=2))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IoError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

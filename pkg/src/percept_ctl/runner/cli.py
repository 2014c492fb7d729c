"""``percept-ctl`` command line.

    percept-ctl run --config cfg.json [--set key=value]...
    percept-ctl validate --config cfg.json [--set key=value]...
    percept-ctl scenarios

Exit codes: 0 success, 2 invalid configuration, 3 simulation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from ..errors import ConfigError, PerceptCtlError
from .config import apply_overrides, load_config, resolve, validate_config
from .output import output_root, write_csv, write_summary, write_svg
from .scenarios import CATALOGUE, list_scenarios

EXIT_OK, EXIT_CONFIG, EXIT_SIMULATION = 0, 2, 3

log = logging.getLogger("percept_ctl")


def run_config(config: dict) -> tuple[dict, Path]:
    """Validate, run and write outputs; returns the summary and the output directory."""
    rc = resolve(config, CATALOGUE)
    out = Path(rc.output_dir) if rc.output_dir else output_root() / f"{rc.scenario}-seed{rc.seed}"
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError([f"output_dir: {out} is not writable ({exc.strerror or exc})"]) from exc
    started = time.perf_counter()
    result = CATALOGUE[rc.scenario].run(rc.parameters, rc.seed)
    summary = dict(rc.echo())
    summary["results"] = result.summary
    summary["wall_clock_s"] = time.perf_counter() - started
    write_csv(out / "trajectory.csv", result.columns, result.rows)
    write_svg(out / "plot.svg", result.plot)
    write_summary(out / "summary.json", summary)
    return summary, out


def _read(args) -> dict:
    return apply_overrides(load_config(args.config), args.set)


def _print_problems(problems):
    for p in problems:
        print(f"error: {p}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        summary, out = run_config(_read(args))
    except ConfigError as exc:
        _print_problems(exc.diagnostics)
        return EXIT_CONFIG
    except (PerceptCtlError, ArithmeticError, ValueError, OSError) as exc:
        print(f"simulation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    print(f"wrote {out}/summary.json, trajectory.csv, plot.svg")
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        problems = validate_config(_read(args), CATALOGUE)
    except ConfigError as exc:
        problems = exc.diagnostics
    if problems:
        _print_problems(problems)
        return EXIT_CONFIG
    print("config is valid")
    return EXIT_OK


def cmd_scenarios(args) -> int:
    cat = list_scenarios()
    if args.json:
        print(json.dumps(cat, indent=2, sort_keys=True))
        return EXIT_OK
    for name, entry in cat.items():
        print(f"{name}: {entry['doc']}")
        for key, desc in entry["parameters"].items():
            print(f"    {key}: {desc}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percept-ctl", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, help_ in (("run", cmd_run, "run a scenario and write its outputs"),
                              ("validate", cmd_validate, "check a config and list every problem")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (dotted path; bare keys are parameters)")
        p.set_defaults(func=func)
    p = sub.add_parser("scenarios", help="list scenarios and their parameters")
    p.add_argument("--json", action="store_true", help="machine-readable catalogue")
    p.set_defaults(func=cmd_scenarios)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

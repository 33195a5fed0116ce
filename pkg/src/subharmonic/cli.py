"""Command-line front end: ``subharmonic <command> [options]``."""

import argparse
import json
from concurrent.futures import ProcessPoolExecutor
import logging
import os
import sys

from . import __version__, pipeline
from .config import KEYS, PRESETS, ConfigError, load_config, resolve_config
from .pipeline import EXIT_INCONCLUSIVE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, diagnostic
from .systems import SYSTEMS

COMMANDS = ("analyze", "find-zero", "verify", "floquet", "simulate", "selftest")


class _Parser(argparse.ArgumentParser):
    """Argument parser that exits with the usage code instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        diagnostic(message)
        raise SystemExit(EXIT_USAGE)


def _add_config_options(p):
    g = p.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", help="flat 'key = value' configuration file")
    g.add_argument("--system", choices=sorted(SYSTEMS))
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--epsilon", help="perturbation size, or a comma-separated list")
    g.add_argument("--resonance", help="resonance orders 'm,n'")
    g.add_argument("--seed", help="starting point 'theta0,I1,...'")
    g.add_argument("--x0", help="explicit orbit seed state 'x1,...,xN'")
    g.add_argument("--cycles", type=int)
    g.add_argument("--output-dir", dest="output_dir")
    g.add_argument("--workers", type=int)
    for key in ("rel_tol", "abs_tol", "quad_tol", "newton_tol", "zero_tol",
                "degeneracy_tol", "seed_bound", "t_final"):
        g.add_argument("--" + key.replace("_", "-"), dest=key, type=float)
    g.add_argument("--samples-per-cycle", dest="samples_per_cycle", type=int)
    g.add_argument("--grid-seed", dest="grid_seed", type=int)
    g.add_argument("--param", action="append", default=[], metavar="NAME=VALUE",
                   help="system parameter override (repeatable)")


def build_parser():
    parser = _Parser(prog="subharmonic",
                     description="Subharmonic periodic orbits via Melnikov vectors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    _add_config_options(sub.add_parser("analyze", help="full pipeline, all artifacts"))
    _add_config_options(sub.add_parser("find-zero", help="Melnikov zero and existence report"))
    for name, helptext in (("verify", "return distances of a saved orbit record"),
                           ("floquet", "stability of a saved orbit record")):
        p = sub.add_parser(name, help=helptext)
        _add_config_options(p)
        p.add_argument("--record", required=True, help="orbit.json from a previous run")
        if name == "floquet":
            p.add_argument("--path", choices=("refined", "eqAt"), default="refined")
    _add_config_options(sub.add_parser("simulate", help="raw trajectory dump"))
    p = sub.add_parser("selftest", help="invariant suites and published-value regressions")
    p.add_argument("--skip-published", action="store_true",
                   help="run only the invariant suites")
    return parser


def _cli_values(args):
    values = {key: getattr(args, key, None) for key in KEYS}
    for item in args.param:
        if "=" not in item:
            raise ConfigError(f"--param expects NAME=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        values["param." + name.strip()] = value.strip()
    return values


def resolve(args):
    file_values = load_config(args.config) if args.config else {}
    return resolve_config(file_values, _cli_values(args))


def _record_config(args, record_path):
    """Config for commands working on a saved record: the record's embedded
    config, then the config file and flags on top."""
    with open(record_path, encoding="utf-8") as fh:
        saved = json.load(fh).get("config", {})
    base = {}
    for key, value in saved.items():
        if key == "overrides":
            base.update({"param." + k: v for k, v in value.items()})
        elif key in KEYS and key != "output_dir" and value is not None:
            base[key] = value
    if args.config:
        base.update(load_config(args.config))
    return resolve_config(base, _cli_values(args))


def _run_dir(cfg, eps):
    if len(cfg.epsilon) == 1:
        return cfg.output_dir
    return os.path.join(cfg.output_dir, f"eps_{eps!r}")


def _analyze_one(cfg, eps):
    try:
        return pipeline.run_analyze(cfg, eps, _run_dir(cfg, eps))
    except OSError as err:
        diagnostic(f"cannot write artifacts: {err}")
        return EXIT_NUMERICAL


def combine(codes):
    """Worst exit code: numerical failure, then inconclusive, then success."""
    for code in (EXIT_USAGE, EXIT_NUMERICAL, EXIT_INCONCLUSIVE):
        if code in codes:
            return code
    return EXIT_OK


def cmd_analyze(cfg):
    if len(cfg.epsilon) == 1:
        return _analyze_one(cfg, cfg.epsilon[0])
    workers = min(cfg.workers or os.cpu_count() or 1, len(cfg.epsilon))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        codes = list(pool.map(_analyze_one, [cfg] * len(cfg.epsilon), cfg.epsilon))
    return combine(codes)


def cmd_selftest(args):
    from .selftest import run_checks

    rows = run_checks(include_published=not args.skip_published)
    print(pipeline.format_table(rows))
    return EXIT_OK if all(r[1] for r in rows) else EXIT_NUMERICAL


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selftest":
        return cmd_selftest(args)
    try:
        if args.command in ("verify", "floquet"):
            cfg = _record_config(args, args.record)
            record = pipeline.load_record(args.record)
        else:
            cfg = resolve(args)
    except (ConfigError, OSError, ValueError, KeyError) as err:
        diagnostic(f"configuration error: {err}")
        return EXIT_USAGE
    try:
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "find-zero":
            return pipeline.run_find_zero(cfg, cfg.output_dir)
        if args.command == "verify":
            return pipeline.run_verify(cfg, record, cfg.output_dir)
        if args.command == "floquet":
            return pipeline.run_floquet(cfg, record, cfg.output_dir, args.path)
        return pipeline.run_simulate(cfg, cfg.epsilon[0], cfg.output_dir)
    except pipeline.NUMERICAL_ERRORS as err:
        diagnostic(f"numerical failure: {err}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

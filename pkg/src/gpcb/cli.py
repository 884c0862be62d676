"""Command line entry point.

    gpcb run --config cfg.yaml [--seed-offset N] [--jobs J]
    gpcb sweep --config cfg.yaml --param env.lengthscale --values 0.01,1.0
    gpcb diagnostics gamma --config cfg.yaml

Exit codes: 0 ok, 2 config error, 3 numerical error, 4 io error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError, InputError, NumericalError
from .harness import gamma_report, load_config, parse_values, run, sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def build_parser():
    parser = argparse.ArgumentParser(prog="gpcb", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every seed of a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed-offset", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="run a config once per parameter value")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, help="dotted config path, e.g. env.lengthscale")
    p.add_argument("--values", required=True, help="comma separated values")
    p.add_argument("--seed-offset", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("diagnostics", help="information-gain diagnostics")
    p.add_argument("which", choices=["gamma"])
    p.add_argument("--config", required=True)
    return parser


def _dispatch(args):
    config = load_config(args.config)
    if args.command == "run":
        result = run(config, seed_offset=args.seed_offset, jobs=args.jobs)
        for seed, summary in sorted(result.summaries.items()):
            print(f"seed {seed}: reward ratio {summary['reward_ratio']:.4f}, "
                  f"final regret {summary['final_cum_regret']:.4f}")
        print(f"manifest: {result.manifest_path}")
    elif args.command == "sweep":
        root = sweep(config, args.param, parse_values(args.values),
                     seed_offset=args.seed_offset, jobs=args.jobs)
        print((root / "summary.csv").read_text(), end="")
    else:
        doc = gamma_report(config)
        text = json.dumps(doc, indent=2, sort_keys=True)
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "gamma_report.json").write_text(text + "\n")
        print(text)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        _dispatch(args)
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

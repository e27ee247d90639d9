"""Command line entry point: ``kthboot run`` and ``kthboot diagnostics``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import harness
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _csv_list(text):
    return [x for x in text.replace(",", " ").split() if x]


def _threads(text):
    if text == "auto":
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer or 'auto', got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kthboot", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration (flags override the JSON document)")
    g.add_argument("--config", help="JSON experiment document")
    g.add_argument("--preset", choices=sorted(harness.PRESETS), help="start from a named preset")
    g.add_argument("--design", nargs="+", choices=["I", "II"])
    g.add_argument("--rho", nargs="+", type=float)
    g.add_argument("--n", nargs="+", type=int)
    g.add_argument("--d", nargs="+", type=int)
    g.add_argument("--k", nargs="+", type=int)
    g.add_argument("--case", nargs="+", choices=["asymmetric", "symmetric"])
    g.add_argument("--methods", type=_csv_list, help="comma-separated subset of EB,GB,MB,RB,BB,DB")
    g.add_argument("--alpha", type=float)
    g.add_argument("--b1", dest="B1", type=int)
    g.add_argument("--b2", dest="B2", type=int)
    g.add_argument("--reps", type=int)
    g.add_argument("--seed", dest="master_seed", type=int)
    g.add_argument("--threads", type=_threads)
    g.add_argument("--theta", type=float)
    g.add_argument("--marginal", choices=["gamma", "normal"])
    g.add_argument("--db-laws", dest="db_laws", type=_csv_list, help="first,second level laws for DB")
    g.add_argument("--k0", type=int)
    o = common.add_argument_group("output")
    o.add_argument("--out", help="output file (default: stdout)")
    o.add_argument("--format", choices=["csv", "markdown"], default="csv")

    run = sub.add_parser("run", parents=[common], help="empirical-size experiment")
    run.add_argument("--checkpoint-dir", help="directory for per-cell JSON-lines checkpoints")
    run.add_argument("--no-resume", action="store_true", help="ignore existing checkpoints")
    run.add_argument("--no-timing", action="store_true", help="write runtime_s as 0 for byte-identical output")
    sub.add_parser("diagnostics", parents=[common], help="reference-theory estimate/bound report")
    return p


_OVERRIDES = ("design", "rho", "n", "d", "k", "case", "methods", "alpha", "B1", "B2", "reps", "master_seed",
              "threads", "theta", "marginal", "db_laws", "k0")


def config_document(args) -> dict:
    doc = {}
    if args.preset:
        doc.update(harness.PRESETS[args.preset])
    if args.config:
        doc.update(harness.load_config(args.config))
    for name in _OVERRIDES:
        v = getattr(args, name, None)
        if v is not None:
            doc[name] = v
    if getattr(args, "no_timing", False):
        doc["record_runtime"] = False
    return doc


def _write(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfgs = harness.expand_config(config_document(args))
        if args.command == "run":
            if any("DB" in c.methods for c in cfgs):
                print(f"note: {harness.DB_LAW_NOTE}", file=sys.stderr)
            table = harness.run_grid(cfgs, checkpoint_dir=args.checkpoint_dir, resume=not args.no_resume)
            _write(harness.emit_table(table, args.format), args.out)
        else:
            texts = []
            for cfg in cfgs:
                rep = harness.run_diagnostics(cfg)
                texts.append(rep.to_csv() if args.format == "csv" else rep.to_markdown())
            _write("\n".join(texts), args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).debug("failure", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

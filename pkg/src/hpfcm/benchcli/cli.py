"""Command line entry point: ``hpfcm-bench {run,sweep,validate,tables}``."""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .config import ConfigError, load_config, load_sweep
from .runner import run, sweep, tables_from_csv


def _parser():
    ap = argparse.ArgumentParser(prog="hpfcm-bench", description=__doc__)
    ap.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
    ap.add_argument("--threads", type=int, default=1,
                    help="worker processes for sweeps; BLAS threads are pinned to 1 per worker")
    ap.add_argument("--seed", type=int, default=0, help="reserved; all benchmark math is deterministic")
    ap.add_argument("--strict", action="store_true", help="abort a sweep on the first failing cell")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("run", help="run one benchmark config").add_argument("config", type=Path)
    sub.add_parser("sweep", help="run a sweep spec").add_argument("spec", type=Path)
    sub.add_parser("validate", help="check a config or sweep spec").add_argument("config", type=Path)
    t = sub.add_parser("tables", help="render text tables from a sweep CSV")
    t.add_argument("csv", type=Path)
    t.add_argument("--value", choices=("iterations", "rho_max"), default="iterations")
    return ap


def _validate(path):
    import yaml

    with open(path) as fh:
        data = yaml.safe_load(fh)
    if isinstance(data, dict) and ("sweep" in data or "base" in data):
        spec = load_sweep(path)
        spec.configs()
        return f"ok: sweep with {len(spec)} cells"
    load_config(path)
    return "ok: benchmark config"


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads > 1:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, "1")
    try:
        if args.command == "validate":
            print(_validate(args.config))
        elif args.command == "run":
            cfg = load_config(args.config)
            rep = run(cfg, args.out)
            extra = " (error: " + rep.meta["error"] + ")" if "error" in rep.meta else ""
            print(f"iterations={rep.cell} rho_max={rep.rho_max:.4g} n_dofs={rep.meta.get('n_dofs')}{extra}")
        elif args.command == "sweep":
            spec = load_sweep(args.spec)
            out = args.out or spec.base.get("output", {}).get("dir")
            rows = sweep(spec, out, threads=args.threads, strict=args.strict)
            if out is None:
                from .runner import render_tables
                print(render_tables(rows), end="")
            else:
                print(f"wrote {len(rows)} rows to {Path(out) / 'sweep.csv'}")
        elif args.command == "tables":
            print(tables_from_csv(args.csv, args.value), end="")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

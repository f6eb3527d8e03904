"""Command line entry point: ``fhnspiral run|stability|info``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiments as ex
from . import stability as st
from .grid import CFLError, TorusError
from .io import parse_config
from .model import ConvergenceError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _overrides(args) -> dict[str, str]:
    out = {}
    if args.config:
        out.update(parse_config(Path(args.config).read_text()))
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ex.ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = value.strip()
    return out


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fhnspiral", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    r = sub.add_parser("run", help="run a figure preset")
    r.add_argument("preset", choices=sorted(ex.PRESETS))
    r.add_argument("--set", action="append", metavar="KEY=VALUE")
    r.add_argument("--config", help="file of 'key = value' overrides")
    r.add_argument("--out", default="runs", help="parent directory for run outputs")
    r.add_argument("--no-frames", action="store_true")

    s = sub.add_parser("stability", help="modal stability report")
    s.add_argument("--layout", default="fig4",
                   choices=["idealized", "uniform", "fig4", "fig5", "fig8", "custom"])
    s.add_argument("--chi-mode", default=st.NUMERIC_SLOPE, choices=[st.NUMERIC_SLOPE, st.ANALYTIC])
    s.add_argument("--N", type=int, default=32)
    s.add_argument("--k", type=_floats, help="comma separated gain sweep")
    s.add_argument("--convention", default=st.COSINE_WITH_CONSTANT, choices=list(st.CONVENTIONS))
    s.add_argument("--Lx", type=float, default=200.0)
    s.add_argument("--sensor-x", type=float)
    s.add_argument("--actuator-x", type=_floats)

    i = sub.add_parser("info", help="print a resolved preset")
    i.add_argument("preset", choices=sorted(ex.PRESETS))
    i.add_argument("--set", action="append", metavar="KEY=VALUE")
    i.add_argument("--config")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.verb == "info":
            p = ex.get_preset(args.preset, _overrides(args))
            sys.stdout.write(f"# preset {p.name}\n" + ex.describe(p))
            sys.stdout.write("snapshot_times = " + " ".join(f"{t:g}" for t in p.snapshot_times) + "\n")
            problems = ex.self_check(ex.PRESETS[args.preset])
            sys.stdout.write("self_check = " + ("ok" if not problems else "; ".join(problems)) + "\n")
        elif args.verb == "stability":
            rep = ex.stability_report(args.layout, args.chi_mode, args.N, args.k, args.convention,
                                      args.Lx, args.sensor_x, args.actuator_x)
            sys.stdout.write(rep.text())
        else:
            rep = ex.run_preset(args.preset, _overrides(args), out_dir=args.out,
                                write_frames=not args.no_frames)
            ttp = "none" if rep.time_to_planar is None else f"{rep.time_to_planar:g}"
            print(f"{rep.name}: {rep.final_classification} (time_to_planar = {ttp})")
            print(f"outputs in {rep.run_dir}")
    except (ex.ConfigError, CFLError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, TorusError, st.DegenerateTransferError,
            st.DegenerateRootError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line entry point: ``leftrs {gen,analyze,simulate,sweep,table,sound,plot}``.

Exit codes: 0 success, 1 soundness counterexample, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .analysis_baselines import OverheadModel, analyze
from .model import SystemSpec, validate
from .taskgen import GenConfig, generate_with_meta

EXIT_OK, EXIT_UNSOUND, EXIT_INVALID = 0, 1, 2

log = logging.getLogger("leftrs")


class InvalidInput(Exception):
    pass


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    # the same flags are accepted before and after the subcommand
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=d(0), help="master seed (default 0)")
    g.add_argument("--out-dir", default=d(None), help="directory for output files")
    g.add_argument("--systems-per-point", type=int, default=d(None),
                   help=f"systems per sweep point (default {harness.DESK_SCALE})")
    g.add_argument("--paper-scale", action="store_true", default=d(False),
                   help=f"use {harness.FULL_SCALE} systems per point")
    g.add_argument("--protocols", default=d(None),
                   help="comma-separated subset of " + ",".join(harness.ALL_PROTOCOLS))
    g.add_argument("--workers", type=int, default=d(1), help="worker processes")
    g.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="leftrs", parents=[_global_flags(False)],
                                 description="LEFT-RS analysis, simulation and schedulability experiments.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    common = [_global_flags(True)]

    p = sub.add_parser("gen", parents=common, help="generate a task system (SystemSpec JSON)")
    p.add_argument("--config", help="GenConfig JSON file")
    for name, typ in (("M", int), ("N", int), ("K", int), ("A", int), ("f-max", int)):
        p.add_argument(f"--{name}", type=typ)
    p.add_argument("--rsf", type=float)
    p.add_argument("--cs-max", type=int, help="critical sections drawn from [1, cs-max] us")
    p.add_argument("-o", "--output", help="write the JSON here instead of stdout")

    p = sub.add_parser("analyze", parents=common, help="WCRT analysis of a SystemSpec JSON")
    p.add_argument("system")
    p.add_argument("--protocol", default="leftrs", choices=harness.ALL_PROTOCOLS)
    p.add_argument("--o-wrap", type=int, default=1)
    p.add_argument("--o-replica", type=int, default=6)
    p.add_argument("--o-self-wrap", type=int, default=1)
    p.add_argument("--backend", default="auto", choices=("auto", "numba", "numpy", "reference"))

    p = sub.add_parser("simulate", parents=common, help="simulate a SystemSpec JSON")
    p.add_argument("system")
    p.add_argument("--protocol", default="leftrs", choices=("leftrs", "checkpointing"))
    p.add_argument("--pattern", default="synchronous-periodic",
                   help="synchronous-periodic or sporadic[:seed]")
    p.add_argument("--faults", help="scripted fault file (task release segment attempt) or an integer seed")
    p.add_argument("--horizon-us", type=int, help="release horizon (default max D)")

    p = sub.add_parser("sweep", parents=common, help="schedulability sweep over one parameter")
    p.add_argument("config", nargs="?", help="SweepConfig JSON file")
    p.add_argument("--param", choices=sorted(harness.AXES))
    p.add_argument("--values", help="comma-separated parameter values")
    p.add_argument("--plot", action="store_true", help="also write the SVG")

    p = sub.add_parser("table", parents=common, help="exclusive MSRP-FT / LEFT-RS counts per point")
    p.add_argument("--param", action="append", choices=sorted(harness.AXES),
                   help="swept parameter(s); default A and f")

    p = sub.add_parser("sound", parents=common, help="simulation-vs-analysis soundness campaign")
    p.add_argument("--systems", type=int, default=100)
    p.add_argument("--runs", type=int, default=100, help="simulation seeds per system")
    p.add_argument("--small", action="store_true", help="small systems plus the exhaustive probe")

    p = sub.add_parser("plot", parents=common, help="plot a sweep CSV (or run a sweep) to SVG")
    p.add_argument("csv", nargs="?", help="sweep CSV written by `sweep`")
    p.add_argument("--param", choices=sorted(harness.AXES))
    p.add_argument("-o", "--output", help="SVG path")
    return ap


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise InvalidInput(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise InvalidInput(f"{path}: not valid JSON ({e})") from None


def _load_system(path: str) -> SystemSpec:
    try:
        system = SystemSpec.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInput(f"{path}: malformed SystemSpec ({e!r})") from None
    errs = validate(system)
    if errs:
        raise InvalidInput(f"{path}: " + "; ".join(errs))
    return system


def _out_dir(args) -> Path | None:
    if args.out_dir is None:
        return None
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _protocols(args) -> tuple[str, ...] | None:
    if not args.protocols:
        return None
    ps = tuple(p.strip() for p in args.protocols.split(",") if p.strip())
    bad = [p for p in ps if p not in harness.ALL_PROTOCOLS]
    if bad or not ps:
        raise InvalidInput(f"unknown protocols {bad or ps}")
    return ps


def _sweep_config(args, param: str | None, path: str | None = None) -> harness.SweepConfig:
    cfg = harness.SweepConfig.from_dict(_read_json(path)) if path else harness.SweepConfig(seed=args.seed)
    over = {"workers": args.workers}
    if param:
        over["param"] = param
        over["values"] = harness.AXES[param]
    if getattr(args, "values", None):
        over["values"] = tuple(harness._parse_value(v) for v in args.values.split(","))
    if args.systems_per_point:
        over["systems_per_point"] = args.systems_per_point
    if args.paper_scale:
        over["systems_per_point"] = harness.FULL_SCALE
    if _protocols(args):
        over["protocols"] = _protocols(args)
    if not path:
        over["seed"] = args.seed
    cfg = replace(cfg, **over)
    errs = cfg.check()
    if errs:
        raise InvalidInput("; ".join(errs))
    return cfg


def cmd_gen(args) -> int:
    cfg = GenConfig.from_dict(_read_json(args.config)) if args.config else GenConfig()
    over = {k: getattr(args, k.replace("-", "_")) for k in ("M", "N", "K", "A", "rsf")}
    over = {k: v for k, v in over.items() if v is not None}
    if args.f_max is not None:
        over["f_max"] = args.f_max
    if args.cs_max is not None:
        over["cs_range"] = (1, args.cs_max)
    cfg = replace(cfg, seed=args.seed, **over)
    if cfg.check():
        raise InvalidInput("; ".join(cfg.check()))
    system, meta = generate_with_meta(cfg)
    if meta.clamps:
        log.warning("%d task(s) had C clamped to 0 (+%.4f utilisation)", meta.clamps, meta.slack)
    text = system.to_json() + "\n"
    if args.output:
        Path(args.output).write_text(text)
    elif args.out_dir:
        (_out_dir(args) / f"system_{args.seed}.json").write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_analyze(args) -> int:
    system = _load_system(args.system)
    model = OverheadModel(args.o_wrap, args.o_replica, args.o_self_wrap)
    res = analyze(system, args.protocol, model, backend=args.backend)
    text = json.dumps(res.to_dict(), indent=2)
    out = _out_dir(args)
    if out:
        (out / f"analysis_{args.protocol}.json").write_text(text + "\n")
    else:
        print(text)
    print(res.verdict_line())
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .sim import FaultSchedule, ReleasePattern, simulate

    system = _load_system(args.system)
    faults = FaultSchedule.load(args.faults) if args.faults else FaultSchedule.none()
    if faults.mode == "scripted":
        faults.check(system)
    trace = simulate(system, args.protocol, ReleasePattern.parse(args.pattern), faults, args.horizon_us)
    summary = json.dumps(trace.summary(), indent=2)
    out = _out_dir(args)
    if out:
        (out / "trace.txt").write_text(trace.to_text())
        (out / "summary.json").write_text(summary + "\n")
        print(f"{args.protocol}: {'no deadline miss' if trace.verdict else 'DEADLINE MISS'}")
    else:
        sys.stdout.write(trace.to_text())
        print(summary)
    return EXIT_OK


def _report_curve(curve, args, plot: bool) -> None:
    out = _out_dir(args)
    if out:
        for p in harness.write_outputs(curve, out):
            log.info("wrote %s", p)
        if plot:
            harness.plot(curve, out / f"sweep_{curve.param}.svg")
    else:
        sys.stdout.write(curve.to_csv())
    s = curve.summary()
    if "leftrs" in curve.protocols and "msrpft" in curve.protocols:
        ri = curve.relative_improvement()
        s["relative_improvement_pct"] = None if ri != ri else round(ri, 2)
    print(json.dumps(s), file=sys.stderr if not out else sys.stdout)


def cmd_sweep(args) -> int:
    if not args.config and not args.param:
        raise InvalidInput("sweep needs a config file or --param")
    curve = harness.sweep(_sweep_config(args, args.param, args.config))
    _report_curve(curve, args, args.plot)
    return EXIT_OK


def cmd_table(args) -> int:
    for param in args.param or ["A", "f"]:
        cfg = _sweep_config(args, param)
        if not {"leftrs", "msrpft"} <= set(cfg.protocols):
            raise InvalidInput("table needs both leftrs and msrpft")
        curve = harness.sweep(replace(cfg, protocols=("leftrs", "msrpft")))
        print(f"{param:>5}  MSRP-FT only  LEFT-RS only")
        for v, a, b in harness.exclusive_table(curve):
            print(f"{harness.fmt_value(v):>5}  {a:>12}  {b:>12}")
        out = _out_dir(args)
        if out:
            (out / f"table_{param}.csv").write_text(curve.exclusive_csv())
    return EXIT_OK


def cmd_sound(args) -> int:
    rep = harness.soundness_campaign(args.systems, args.runs, args.small, seed=args.seed, workers=args.workers)
    d = rep.to_dict()
    text = json.dumps(d, indent=2)
    out = _out_dir(args)
    if out:
        (out / "soundness.json").write_text(text + "\n")
    print(f"systems={rep.systems} candidates={rep.candidates} sims={rep.sims} "
          f"violations={len(rep.violations)} unfinished={rep.unfinished} "
          f"max_ratio={rep.max_ratio:.4f} probes={len(rep.probes)} probe_failures={len(rep.probe_failures)}")
    for v in rep.violations[:20]:
        print(f"  COUNTEREXAMPLE system_seed={v.system_seed} run={v.run_seed} task={v.task} "
              f"response={v.observed} > R={v.bound}")
    return EXIT_OK if rep.ok else EXIT_UNSOUND


def cmd_plot(args) -> int:
    if args.csv:
        try:
            curve = harness.read_curve_csv(Path(args.csv).read_text())
        except FileNotFoundError:
            raise InvalidInput(f"no such file: {args.csv}") from None
    elif args.param:
        curve = harness.sweep(_sweep_config(args, args.param))
    else:
        raise InvalidInput("plot needs a sweep CSV or --param")
    target = args.output or str((_out_dir(args) or Path(".")) / f"sweep_{curve.param}.svg")
    print(harness.plot(curve, target))
    return EXIT_OK


COMMANDS = {
    "gen": cmd_gen, "analyze": cmd_analyze, "simulate": cmd_simulate, "sweep": cmd_sweep,
    "table": cmd_table, "sound": cmd_sound, "plot": cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.cmd](args)
    except (InvalidInput, ValueError, KeyError) as e:
        print(f"leftrs: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as e:
        print(f"leftrs: error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())

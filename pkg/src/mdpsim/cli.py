"""Experiment runner: wires traces, profiles, labels, predictors and the
core model into reproducible experiments with CSV output.

Subcommands: gen-trace, profile, label, run, compare-profiles,
search-threshold. Exit codes: 0 success, 1 usage, 2 input error,
3 internal invariant failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

from .core import (CSV_COLUMNS, PRESETS, ConfigError, CoreConfig,
                   SimInternalError, SimReport, simulate)
from .predictors import PredictorConfig
from .profiler import (compare_label_sets, format_labels, format_profile,
                       label_loads, merge_profiles, parse_labels,
                       parse_profile, profile_trace)
from .search import search_threshold
from .trace import (Trace, TraceParseError, load_trace_file, serialize_trace,
                    serialize_trace_binary)
from .workloads import GENERATORS, parse_generator_spec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3


class InputError(Exception):
    """Bad input file or spec; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    # argparse defaults to exit code 2 on usage errors; this tool
    # reserves 2 for input errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read_trace(path: str) -> Trace:
    if not os.path.exists(path):
        raise InputError(f"trace file not found: {path}")
    try:
        return load_trace_file(path)
    except TraceParseError as e:
        raise InputError(f"cannot parse trace {path}: {e}") from e


def _gen_trace(spec: str, default_seed: int) -> Trace:
    try:
        return parse_generator_spec(spec, default_seed=default_seed)
    except ValueError as e:
        raise InputError(str(e)) from e


def _collect_traces(files: list[str], gens: list[str], seed: int) -> list[Trace]:
    traces = [_read_trace(p) for p in files]
    traces.extend(_gen_trace(g, seed) for g in gens)
    if not traces:
        raise InputError("no input traces (give files or --gen specs)")
    return traces


def _read_profile(path: str):
    if not os.path.exists(path):
        raise InputError(f"profile file not found: {path}")
    try:
        with open(path, encoding="ascii") as f:
            return parse_profile(f.read(), source=path)
    except ValueError as e:
        raise InputError(f"cannot parse profile {path}: {e}") from e


def _write_text(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(text)


# -- experiment config -------------------------------------------------------

@dataclass
class ExperimentConfig:
    name: str
    seed: int
    out_dir: str
    trace_specs: list[str]
    core: CoreConfig
    predictor: PredictorConfig
    sweep_ssit: list[int]
    sweep_threshold: list[int]
    sweep_ports: list[int]


def _int_list(raw: str) -> list[int]:
    return [int(x) for x in raw.replace(",", " ").split()]


def load_experiment(path: str, default_seed: int = 0,
                    out_dir: str | None = None) -> ExperimentConfig:
    """Parse the flat key=value experiment file (INI sections)."""
    if not os.path.exists(path):
        raise InputError(f"experiment config not found: {path}")
    cp = configparser.ConfigParser()
    try:
        cp.read(path)
    except configparser.Error as e:
        raise InputError(f"cannot parse config {path}: {e}") from e

    name = cp.get("experiment", "name",
                  fallback=os.path.splitext(os.path.basename(path))[0])
    seed = cp.getint("experiment", "seed", fallback=default_seed)
    out = out_dir or cp.get("experiment", "out_dir", fallback=".")

    raw = cp.get("traces", "specs", fallback="")
    trace_specs = [line.strip() for line in raw.splitlines() if line.strip()]
    if not trace_specs:
        raise InputError(f"{path}: [traces] specs is empty")
    for spec in trace_specs:
        if spec.startswith("file:") and not os.path.exists(spec[5:]):
            raise InputError(f"trace file not found: {spec[5:]}")

    preset_name = cp.get("core", "preset", fallback="small")
    if preset_name not in PRESETS:
        raise InputError(f"unknown core preset {preset_name!r}")
    preset = PRESETS[preset_name]
    core_cfg = preset.core
    for key, value in cp.items("core") if cp.has_section("core") else []:
        if key == "preset":
            continue
        if not hasattr(core_cfg, key):
            raise InputError(f"unknown core option {key!r}")
        core_cfg = replace(core_cfg, **{key: int(value)})

    pred_cfg = preset.predictor
    for key, value in cp.items("predictor") if cp.has_section("predictor") else []:
        if key == "kind":
            pred_cfg = replace(pred_cfg, kind=value.strip())
        elif key == "phast_lengths":
            pred_cfg = replace(pred_cfg, phast_lengths=tuple(_int_list(value)))
        elif hasattr(pred_cfg, key):
            pred_cfg = replace(pred_cfg, **{key: int(value)})
        else:
            raise InputError(f"unknown predictor option {key!r}")

    get_sweep = (lambda key, dflt: _int_list(cp.get("sweep", key))
                 if cp.has_option("sweep", key) else dflt)
    return ExperimentConfig(
        name=name, seed=seed, out_dir=out, trace_specs=trace_specs,
        core=core_cfg, predictor=pred_cfg,
        sweep_ssit=get_sweep("ssit", [pred_cfg.ssit_entries]),
        sweep_threshold=get_sweep("threshold", [preset.threshold]),
        sweep_ports=get_sweep("ports", [core_cfg.mdp_read_ports]),
    )


def _build_trace(spec: str, seed: int) -> Trace:
    if spec.startswith("file:"):
        return _read_trace(spec[5:])
    if spec.startswith("gen:"):
        return _gen_trace(spec[4:], seed)
    return _read_trace(spec)


def _sim_point(payload):
    """One sweep point; module-level so worker pools can pickle it."""
    trace, core_cfg, pred_cfg, labels = payload
    mdp = pred_cfg.build(trace)
    return simulate(trace, core_cfg, mdp, labels)


def run_experiment(exp: ExperimentConfig, jobs: int = 1
                   ) -> tuple[str, list[SimReport]]:
    """Execute the sweep and return (csv_text, reports).

    Every sweep point gets a baseline run plus one labelled run per
    threshold; labels come from self-profiling the experiment's traces.
    Row order is canonical (trace, ssit, ports, baseline-then-threshold)
    regardless of worker completion order.
    """
    traces = [_build_trace(s, exp.seed) for s in exp.trace_specs]
    profile = merge_profiles([profile_trace(t) for t in traces])
    label_sets = {t: label_loads(profile, t) for t in exp.sweep_threshold}

    points = []
    for trace in sorted(traces, key=lambda t: t.name):
        for ssit in sorted(exp.sweep_ssit):
            pred_cfg = (exp.predictor.scaled(ssit)
                        if exp.predictor.kind.endswith("storesets")
                        else exp.predictor)
            for ports in sorted(exp.sweep_ports):
                core_cfg = replace(exp.core, mdp_read_ports=ports)
                points.append((trace, core_cfg, pred_cfg, None))
                for thr in sorted(exp.sweep_threshold):
                    points.append((trace, core_cfg, pred_cfg, label_sets[thr]))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(_sim_point, points))
    else:
        reports = [_sim_point(p) for p in points]

    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for report in reports:
        writer.writerow(report.csv_row())
    return out.getvalue(), reports


_GNUPLOT_TEMPLATE = """\
set datafile separator ','
set key autotitle columnhead
set logscale x 2
set xlabel 'SSIT entries'
set ylabel 'IPC'
plot '{csv}' using 3:($6 eq '' ? $9 : NaN) with linespoints title 'baseline', \\
     '{csv}' using 3:($6 ne '' ? $9 : NaN) with linespoints title 'labelled'
"""


# -- subcommands -------------------------------------------------------------

def cmd_gen_trace(args) -> int:
    t = _gen_trace(args.spec, args.seed)
    data = serialize_trace_binary(t) if args.binary else serialize_trace(t)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    with open(args.out, "wb") as f:
        f.write(data)
    print(f"wrote {len(t.events)} events to {args.out}")
    return EXIT_OK


def cmd_profile(args) -> int:
    traces = _collect_traces(args.traces, args.gen, args.seed)
    merged = merge_profiles([profile_trace(t) for t in traces])
    _write_text(args.out, format_profile(merged))
    print(f"profiled {len(traces)} trace(s), {len(merged.per_pc)} static "
          f"loads -> {args.out}")
    return EXIT_OK


def cmd_label(args) -> int:
    profile = _read_profile(args.profile)
    try:
        labels = label_loads(profile, args.threshold)
    except ValueError as e:
        raise InputError(str(e)) from e
    _write_text(args.out, format_labels(labels))
    print(f"labelled {len(labels.labelled)}/{len(profile.per_pc)} static "
          f"loads at threshold {args.threshold} -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    exp = load_experiment(args.config, default_seed=args.seed,
                          out_dir=args.out_dir)
    csv_text, reports = run_experiment(exp, jobs=args.jobs)
    out_path = os.path.join(exp.out_dir, f"{exp.name}.csv")
    _write_text(out_path, csv_text)
    print(f"{len(reports)} runs -> {out_path}")
    if args.gnuplot:
        gp_path = os.path.join(exp.out_dir, f"{exp.name}.gp")
        _write_text(gp_path, _GNUPLOT_TEMPLATE.format(csv=out_path))
        print(f"gnuplot script -> {gp_path}")
    return EXIT_OK


def cmd_compare_profiles(args) -> int:
    train_profile = _read_profile(args.train)
    ref_profile = _read_profile(args.ref)
    train_labels = label_loads(train_profile, args.threshold)
    ref_labels = label_loads(ref_profile, args.threshold)
    cmp = compare_label_sets(train_labels, train_profile,
                             ref_labels, ref_profile)
    print(f"tp={cmp.tp} tn={cmp.tn} fp={cmp.fp} fn={cmp.fn} "
          f"missing={cmp.missing} total={cmp.total}")
    print(cmp.format_line())
    return EXIT_OK


def cmd_search_threshold(args) -> int:
    traces = _collect_traces(args.traces, args.gen, args.seed)
    profile = merge_profiles([profile_trace(t) for t in traces])
    preset = PRESETS[args.core]
    pred_cfg = preset.predictor
    if args.predictor:
        pred_cfg = replace(pred_cfg, kind=args.predictor)
    try:
        result = search_threshold(traces, profile, preset.core, pred_cfg,
                                  args.lo, args.hi, mode=args.mode)
    except ValueError as e:
        raise InputError(str(e)) from e
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["threshold", "geomean_ipc"])
    for t, ipc in result.evaluated:
        writer.writerow([t, f"{ipc:.6f}"])
    if args.out:
        _write_text(args.out, out.getvalue())
    else:
        sys.stdout.write(out.getvalue())
    best_ipc = dict(result.evaluated)[result.best_threshold]
    print(f"best threshold={result.best_threshold} "
          f"geomean_ipc={best_ipc:.6f} mode={args.mode}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mdpsim", description=__doc__)
    parser.add_argument("--seed", type=int, default=0,
                        help="default seed for generator specs")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallel workers for sweeps")
    parser.add_argument("--out-dir", default=None,
                        help="output directory override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-trace", help="emit a synthetic trace file")
    p.add_argument("spec", help="generator spec, e.g. "
                   f"'pixel_avg:width=64,height=8' ({', '.join(sorted(GENERATORS))})")
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true",
                   help="write the binary trace format")
    p.set_defaults(func=cmd_gen_trace)

    p = sub.add_parser("profile", help="profile store distances")
    p.add_argument("traces", nargs="*", help="trace files")
    p.add_argument("--gen", action="append", default=[],
                   help="generator spec instead of a file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("label", help="emit a label set from a profile")
    p.add_argument("profile")
    p.add_argument("--threshold", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("run", help="run a sweep experiment from a config file")
    p.add_argument("config")
    p.add_argument("--gnuplot", action="store_true",
                   help="also emit a gnuplot script")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare-profiles",
                       help="label agreement between two profiles")
    p.add_argument("--train", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--threshold", type=int, required=True)
    p.set_defaults(func=cmd_compare_profiles)

    p = sub.add_parser("search-threshold",
                       help="search the labelling threshold by geomean IPC")
    p.add_argument("traces", nargs="*", help="trace files")
    p.add_argument("--gen", action="append", default=[])
    p.add_argument("--core", choices=sorted(PRESETS), default="small")
    p.add_argument("--predictor", default=None,
                   help="override the preset's predictor kind")
    p.add_argument("--lo", type=int, default=1)
    p.add_argument("--hi", type=int, default=64)
    p.add_argument("--mode", choices=["exhaustive", "binary"],
                   default="exhaustive")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_search_threshold)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except SimInternalError as e:
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

# ------------------ Command-Line Interface ------------------
import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from analysis import coupling_r_bound, match_topologies
from errors import FhnIdentError, ValidationError
from experiments import (DEFAULT_L_VALUES, bounds_for, pe_for_samples, run_from_signals, run_gain_sweep,
                         run_identification, run_pe_sweep, summarize_run, with_filter_start, with_integrator)
from export import load_regressors, write_pe, write_run, write_signals, write_sweep
from filters import STARTS
from model import rotational_scheme
from parsers import load_config, load_signals
from pdf_generator import generate_pdf_report, save_run_plots

logger = logging.getLogger("cli")


# ------------------ Argument Types ------------------
def parse_l_range(text):
    """'a:b:step' -> inclusive grid of window lengths."""
    try:
        start, stop, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got '{text}'")
    if not (start > 0 and step > 0 and stop >= start):
        raise argparse.ArgumentTypeError("need 0 < a <= b and step > 0")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def parse_gains(text):
    try:
        gains = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected g1,g2,..., got '{text}'")
    if not gains or any(not g > 0 for g in gains):
        raise argparse.ArgumentTypeError("gains must be positive")
    return gains


# ------------------ Helpers ------------------
def _load(args):
    cfg = load_config(args.config)
    cfg = with_integrator(cfg, getattr(args, "dt", None), getattr(args, "t_end", None),
                          getattr(args, "stride", None))
    if getattr(args, "filter_start", None):
        cfg = with_filter_start(cfg, args.filter_start)
    return cfg


def print_summary(summary, bounds=None):
    """Table-style printout: (a, b, c, eps) at start, end and true, plus convergence scalars."""
    names = ("a", "b", "c", "eps")
    print(f"{'':<10}" + "".join(f"{n:>14}" for n in names))
    for label, key in (("initial", "initial_params"), ("final", "final_params"), ("true", "true_params")):
        params = summary.get(key)
        if params:
            print(f"{label:<10}" + "".join(f"{params[n]:>14.6f}" for n in names))
    print(f"final estimate: {summary['final_status']}")
    for label, key in (("initial param error", "initial_param_error"),
                       ("final param error", "final_param_error"),
                       ("reduction factor", "reduction_factor"),
                       ("peak theta error", "peak_theta_error"),
                       ("time to tolerance", "time_to_tolerance")):
        if key in summary:
            print(f"{label}: {summary[key]:.6g}")
    if "h_monitor" in summary:
        h = summary["h_monitor"]
        print(f"H(t): sup {h['sup']:.6g}, last-quartile growth {h['last_quartile_growth']:.3g}, "
              f"bounded {h['bounded']}")
    if bounds is not None:
        print_bounds(bounds)


def print_bounds(report):
    verdict = "ok" if report.ok else "VIOLATED (sufficient condition only)"
    print(f"r = {report.r:.6g}, eps*b/r = {report.sigma_max:.6g}, sigma = {report.sigma:.6g}: {verdict}")


def print_pe(pe):
    passing = pe.smallest_passing_length()
    if passing is None:
        print(f"M_L is never positive definite for L in [{pe.l_values[0]:g}, {pe.l_values[-1]:g}] "
              f"(t = {pe.t_start:g})")
    else:
        print(f"M_L positive definite for L >= {passing:g} (t = {pe.t_start:g})")


def write_identification(record, outdir, cfg, args, bounds=None):
    """Summary, PE sweep, artifacts and optional plots/report for one run."""
    summary = summarize_run(record, t_transient=float(cfg.output.get("t_transient", 1.0)),
                            tolerance=float(cfg.output.get("tolerance", 0.05)))
    pe = run_pe_sweep(record, cfg)
    manifest = write_run(record, outdir, summary=summary, pe=pe, bounds=bounds)
    if getattr(args, "plots", False):
        save_run_plots(record, outdir, pe)
    if getattr(args, "report", False):
        pdf = generate_pdf_report(summary, record=record, bounds=bounds, pe=pe, title=f"{cfg.name} report")
        (Path(outdir) / "report.pdf").write_bytes(pdf.getvalue())
    return summary, manifest


# ------------------ Commands ------------------
def cmd_simulate(args):
    cfg = _load(args)
    record = run_identification(cfg)
    channels = record.y
    if args.noise > 0:
        rng = np.random.default_rng(args.seed)
        channels = channels + rng.normal(0.0, args.noise, size=channels.shape)
    out = Path(args.out)
    write_signals(out / "signals.csv", record.times, channels)
    write_run(record, out, summary=summarize_run(record))
    print(f"wrote {record.times.size} samples of {record.n} channels to {out / 'signals.csv'}")
    return 0


def cmd_identify(args):
    cfg = _load(args)
    if cfg.mode != "simulation":
        raise ValidationError("identify needs a simulation-mode config; use from-data for signals")
    bounds = bounds_for(cfg)
    record = run_identification(cfg)
    summary, _ = write_identification(record, args.out, cfg, args, bounds)
    print_summary(summary, bounds)
    if summary["final_status"] == "non_recoverable":
        logger.error("final estimate is not recoverable: theta = %s", summary["final_theta"])
        return 1
    return 0


def cmd_pe_check(args):
    if args.run:
        times, z = load_regressors(args.run)
    else:
        if not args.config:
            raise ValidationError("pe-check needs --config or --run")
        record = run_identification(_load(args))
        times, z = record.times, record.z
    pe = pe_for_samples(times, z, args.t_start + float(times[0]), args.l_range)
    if args.out:
        write_pe(pe, args.out)
    print_pe(pe)
    return 0


def cmd_bounds(args):
    cfg = _load(args)
    report = bounds_for(cfg)
    if report is None:
        r = coupling_r_bound(cfg.coupling.adjacency, cfg.coupling.b_uu, cfg.coupling.b_vv)
        print(f"r = {r:.6g} (no [fhn] section, eps*b/r unavailable)")
        return 0
    print_bounds(report)
    return 0


def cmd_sweep_gain(args):
    cfg = _load(args)
    bounds = bounds_for(cfg)
    results = run_gain_sweep(cfg, args.gains, max_workers=args.workers)
    out = Path(args.out)
    summaries = {}
    failed = 0
    for g, result in results.items():
        if isinstance(result, Exception):
            summaries[g] = result
            failed += 1
            continue
        summary, _ = write_identification(result, out / f"g_{g:g}", cfg, args, bounds)
        summaries[g] = summary
    write_sweep(summaries, out)
    print(f"{'g':>10}{'peak error':>14}{'t to tol':>12}{'final error':>14}")
    for g, summary in summaries.items():
        if isinstance(summary, Exception):
            print(f"{g:>10g}  failed: {summary}")
        else:
            print(f"{g:>10g}{summary['peak_theta_error']:>14.6g}{summary['time_to_tolerance']:>12.6g}"
                  f"{summary['final_theta_error']:>14.6g}")
    return 1 if failed else 0


def cmd_from_data(args):
    cfg = _load(args)
    if cfg.mode != "data":
        raise ValidationError("from-data needs a config with a [signals] section")
    path = args.signals
    if path is None:
        path = Path(cfg.signals.path)
        # relative to the config file
        if not path.is_absolute() and cfg.source:
            path = Path(cfg.source).parent / path
    signals = load_signals(path, cfg.coupling.n)
    record = run_from_signals(cfg, signals)
    summary, _ = write_identification(record, args.out, cfg, args)
    print_summary(summary)
    if summary["final_status"] != "ok":
        logger.warning("estimates flagged %s: the channels may not carry FHN structure", summary["final_status"])
    return 0


def cmd_find_topology(args):
    if args.phi is not None:
        b_uu, _, _, b_vv = rotational_scheme(args.phi)
    else:
        b_uu, b_vv = args.b_uu, args.b_vv
    matches = match_topologies(args.n, b_uu, b_vv, args.r_target, args.tol)
    if not matches:
        print(f"no connected {args.n}-node graph has r within {args.tol:g} of {args.r_target:g}")
        return 0
    for adj in matches:
        edges = [(i, j) for i in range(args.n) for j in range(i + 1, args.n) if adj[i, j]]
        r = coupling_r_bound(adj, b_uu, b_vv)
        print(f"r = {r:.6f}  edges = {edges}")
    return 0


# ------------------ Parser ------------------
def _common(sub, config_required=True, out_required=True):
    sub.add_argument("--config", required=config_required, help="YAML experiment config")
    sub.add_argument("--out", required=out_required, help="output directory")
    sub.add_argument("--dt", type=float, help="override integrator step")
    sub.add_argument("--t-end", type=float, dest="t_end", help="override integration horizon")
    sub.add_argument("--stride", type=int, help="override record stride (samples every stride steps)")
    sub.add_argument("--filter-start", choices=STARTS, dest="filter_start",
                     help="filter initial state: zero, or at rest on the first input (steady)")


def _figures(sub):
    sub.add_argument("--plots", action="store_true", help="save PNG figures next to the CSVs")
    sub.add_argument("--report", action="store_true", help="write report.pdf")


def build_parser():
    parser = argparse.ArgumentParser(prog="fhn-ident",
                                     description="Speed-gradient identification of FHN neuron networks")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("simulate", help="integrate the network and export its channels")
    _common(sub)
    sub.add_argument("--noise", type=float, default=0.0, help="std of Gaussian noise added to exports")
    sub.add_argument("--seed", type=int, default=0)
    sub.set_defaults(handler=cmd_simulate)

    sub = commands.add_parser("identify", help="closed-loop identification run")
    _common(sub)
    _figures(sub)
    sub.set_defaults(handler=cmd_identify)

    sub = commands.add_parser("pe-check", help="smallest eigenvalue of M_L against L")
    _common(sub, config_required=False, out_required=False)
    sub.add_argument("--run", help="reuse regressors.csv from a run directory")
    sub.add_argument("--l-range", type=parse_l_range, default=np.array(DEFAULT_L_VALUES), dest="l_range")
    sub.add_argument("--t-start", type=float, default=1.0, dest="t_start")
    sub.set_defaults(handler=cmd_pe_check)

    sub = commands.add_parser("bounds", help="coupling-strength bound sigma < eps*b/r")
    _common(sub, out_required=False)
    sub.set_defaults(handler=cmd_bounds)

    sub = commands.add_parser("sweep-gain", help="one run per scalar gain g")
    _common(sub)
    _figures(sub)
    sub.add_argument("--gains", type=parse_gains, required=True)
    sub.add_argument("--workers", type=int, default=None)
    sub.set_defaults(handler=cmd_sweep_gain)

    sub = commands.add_parser("from-data", help="identify from recorded channels")
    _common(sub)
    _figures(sub)
    sub.add_argument("--signals", help="signals CSV (overrides the config's signals.path)")
    sub.set_defaults(handler=cmd_from_data)

    sub = commands.add_parser("find-topology", help="graphs whose coupling bound r matches a target")
    sub.add_argument("--n", type=int, required=True)
    sub.add_argument("--phi", type=float, help="rotational scheme angle")
    sub.add_argument("--b-uu", type=float, default=1.0, dest="b_uu")
    sub.add_argument("--b-vv", type=float, default=0.0, dest="b_vv")
    sub.add_argument("--r-target", type=float, required=True, dest="r_target")
    sub.add_argument("--tol", type=float, default=0.005)
    sub.set_defaults(handler=cmd_find_topology)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.handler(args)
    except FhnIdentError as exc:
        logger.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())

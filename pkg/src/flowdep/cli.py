"""``flowdep`` command-line interface.

Exit status: 0 success, 1 usage or configuration error, 2 unreadable or
malformed input data, 3 numeric domain error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .corr import (DEFAULT_DURATION_THRESHOLDS_S, DEFAULT_SIZE_THRESHOLDS_BYTES, Pair,
                   ThresholdGrid, corr_grid, format_grid_json, format_grid_tsv)
from .errors import ConfigError, FlowdepError, ParseError
from .extremal import (DEFAULT_FRACTIONS, DEPENDENCE_ABOVE, INDEPENDENCE_BELOW,
                       UNIFORM_EDM, edm_curve, format_curve_json, format_curve_tsv,
                       format_histogram_tsv)
from .ingest import (DEFAULT_HTTP_PORTS, DEFAULT_QUIET_THRESHOLD_S, aggregate_connections,
                     format_adu_summary, format_flow_summary, parse_packet_events,
                     read_summaries, segment_adus)
from .metrics import batch_log_points
from .truncnorm import (DEFAULT_SIMULATION_PARAMS, BivariateNormalParams,
                        estimate_params, mc_standard_error, mc_truncated_corr,
                        simulate_flow_summaries, truncated_corr, truncated_corr_t)

SUBCOMMANDS = ("ingest", "summarize", "corr-grid", "truncnorm", "simulate", "edm", "scatter")

# left out of the recorded invocation: they never change an output's content
_UNRECORDED = {"--threads", "--out", "--conn-out", "--adu-out", "--angles-out"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def _int_list(text):
    try:
        return frozenset(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of integers: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flowdep",
                     description="Dependence analysis of Internet flow size, duration and rate.")
    parser.add_argument("--version", action="version", version=f"flowdep {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    common = _Parser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $FLOWDEP_THREADS or 1)")

    def population(p):
        p.add_argument("--in", dest="input", required=True,
                       help="flow-summary, ADU or packet-event CSV ('-' for stdin)")
        p.add_argument("--http-only", action="store_true",
                       help="restrict to HTTP records before any statistic")
        p.add_argument("--http-ports", type=_int_list, default=DEFAULT_HTTP_PORTS,
                       help="ports classifying HTTP when reading packet events")

    def output(p, formats=True):
        p.add_argument("--out", default="-", help="output path ('-' for stdout)")
        if formats:
            p.add_argument("--format", choices=("tsv", "json"), default="tsv")

    p = sub.add_parser("ingest", parents=[common],
                       help="aggregate packet events into connection and ADU CSVs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--conn-out", required=True)
    p.add_argument("--adu-out")
    p.add_argument("--http-ports", type=_int_list, default=DEFAULT_HTTP_PORTS)
    p.add_argument("--quiet-threshold", type=float, default=DEFAULT_QUIET_THRESHOLD_S,
                   help="idle gap in seconds that closes an ADU")

    p = sub.add_parser("summarize", parents=[common],
                       help="population counts and bytes, overall and HTTP")
    population(p)
    output(p)

    p = sub.add_parser("corr-grid", parents=[common],
                       help="log-log correlations over a joint threshold grid")
    population(p)
    p.add_argument("--pair", type=Pair, default=Pair.SIZE_RATE,
                   choices=list(Pair), metavar="{size-duration,size-rate,duration-rate}")
    p.add_argument("--sizes", type=_float_list, default=DEFAULT_SIZE_THRESHOLDS_BYTES,
                   help="size thresholds in bytes")
    p.add_argument("--durations", type=_float_list, default=DEFAULT_DURATION_THRESHOLDS_S,
                   help="duration thresholds in seconds")
    output(p)

    p = sub.add_parser("truncnorm", parents=[common],
                       help="correlation of a truncated bivariate normal")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--t", type=float, help="standardised truncation point")
    p.add_argument("--a", type=float, help="raw truncation point ('-inf' for none)")
    p.add_argument("--mu1", type=float, default=0.0)
    p.add_argument("--sigma1", type=float, default=1.0)
    p.add_argument("--mc", type=int, default=0, metavar="N",
                   help="also estimate by Monte Carlo with N samples")
    p.add_argument("--seed", type=int, default=0)
    output(p, formats=False)

    p = sub.add_parser("simulate", parents=[common],
                       help="write simulated log-normal connections as flow-summary CSV")
    p.add_argument("--n", type=int, default=1_433_924)
    p.add_argument("--seed", type=int, default=0)
    d = DEFAULT_SIMULATION_PARAMS
    p.add_argument("--mu1", type=float, default=d.mu1, help="mean of log10(size)")
    p.add_argument("--mu2", type=float, default=d.mu2, help="mean of log10(duration)")
    p.add_argument("--sigma1", type=float, default=d.sigma1)
    p.add_argument("--sigma2", type=float, default=d.sigma2)
    p.add_argument("--rho", type=float, default=d.rho)
    p.add_argument("--fit-from", help="estimate parameters from this population instead")
    output(p, formats=False)

    p = sub.add_parser("edm", parents=[common], help="extremal dependence measure curve")
    population(p)
    p.add_argument("--pair", type=Pair, default=Pair.SIZE_RATE,
                   choices=list(Pair), metavar="{size-duration,size-rate,duration-rate}")
    p.add_argument("--fractions", type=_float_list, default=DEFAULT_FRACTIONS)
    p.add_argument("--norm", choices=("l2", "l1"), default="l2")
    p.add_argument("--angles-out", help="write 64-bin angle histograms here")
    output(p)

    p = sub.add_parser("scatter", parents=[common],
                       help="downsampled log-log point cloud with threshold lines")
    population(p)
    p.add_argument("--pair", type=Pair, default=Pair.SIZE_RATE,
                   choices=list(Pair), metavar="{size-duration,size-rate,duration-rate}")
    p.add_argument("--max-points", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=_float_list, default=DEFAULT_SIZE_THRESHOLDS_BYTES)
    p.add_argument("--durations", type=_float_list, default=DEFAULT_DURATION_THRESHOLDS_S)
    output(p)
    return parser


def recorded_invocation(argv) -> str:
    kept = []
    skip = False
    for arg in argv:
        if skip:
            skip = False
            continue
        name = arg.split("=", 1)[0]
        if name in _UNRECORDED:
            skip = "=" not in arg
            continue
        kept.append(arg)
    return " ".join(["flowdep"] + kept)


def _header(args) -> str:
    return f"# flowdep {__version__}: {args.invocation}\n"


def _threads(args) -> int:
    value = args.threads
    if value is None:
        env = os.environ.get("FLOWDEP_THREADS", "1")
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"FLOWDEP_THREADS is not an integer: {env!r}") from None
    if value < 1:
        raise ConfigError("thread count must be at least 1")
    return value


def _read_lines(path):
    if path == "-":
        return sys.stdin.read().splitlines()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None


def _write(path, text):
    if path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from None


def _record_width(lines):
    for line in lines:
        s = line.strip()
        if s and not s.startswith("#"):
            return s.count(",") + 1
    return 0


def load_population(path, http_only=False, http_ports=DEFAULT_HTTP_PORTS):
    """Summaries from any supported CSV; packet events are aggregated first.

    Returns ``(summaries, packet_count)`` where the packet count is None
    unless packet events were read.
    """
    lines = _read_lines(path)
    packets = None
    if _record_width(lines) == 5:
        events = list(parse_packet_events(lines))
        packets = len(events)
        summaries = aggregate_connections(events, http_ports)
    else:
        summaries = read_summaries(lines)
    if http_only:
        summaries = [s for s in summaries if s.is_http]
    return summaries, packets


def _cmd_ingest(args):
    lines = _read_lines(args.input)
    events = list(parse_packet_events(lines))
    conns = aggregate_connections(events, args.http_ports)
    header = _header(args)
    _write(args.conn_out, header + "".join(format_flow_summary(c) + "\n" for c in conns))
    if args.adu_out:
        adus = segment_adus(events, args.quiet_threshold, args.http_ports)
        _write(args.adu_out, header + "".join(format_adu_summary(a) + "\n" for a in adus))


def _cmd_summarize(args):
    summaries, packets = load_population(args.input, args.http_only, args.http_ports)
    http = [s for s in summaries if s.is_http]
    row = {
        "packets": packets,
        "connections": len(summaries),
        "bytes": sum(s.size_bytes for s in summaries),
        "http_connections": len(http),
        "http_bytes": sum(s.size_bytes for s in http),
    }
    if args.format == "json":
        text = json.dumps({"invocation": args.invocation, "version": __version__, **row},
                          indent=2) + "\n"
    else:
        text = _header(args) + "\t".join(row) + "\n" + "\t".join(
            "NA" if v is None else str(v) for v in row.values()) + "\n"
    _write(args.out, text)


def _cmd_corr_grid(args):
    summaries, _ = load_population(args.input, args.http_only, args.http_ports)
    grid = ThresholdGrid(args.sizes, args.durations)
    result = corr_grid(batch_log_points(summaries), grid, args.pair, threads=_threads(args))
    if args.format == "json":
        text = format_grid_json(result, invocation=args.invocation, version=__version__)
    else:
        text = _header(args) + format_grid_tsv(result)
    _write(args.out, text)


def _cmd_truncnorm(args):
    if (args.t is None) == (args.a is None):
        raise ConfigError("give exactly one of --t or --a")
    if args.t is not None:
        params = BivariateNormalParams(0.0, 0.0, 1.0, 1.0, args.rho)
        a = args.t
        value = truncated_corr_t(args.rho, args.t)
    else:
        params = BivariateNormalParams(args.mu1, 0.0, args.sigma1, 1.0, args.rho)
        a = args.a
        value = truncated_corr(params, args.a)
    if not args.mc:
        _write(args.out, f"{value:.6f}\n")
        return
    mc, kept = mc_truncated_corr(params, a, args.mc, seed=args.seed,
                                 threads=_threads(args), full_output=True)
    text = (_header(args) + f"formula\t{value:.6f}\nmonte_carlo\t{mc:.6f}\n"
            f"survivors\t{kept}\nstd_error\t{mc_standard_error(mc, kept):.6f}\n")
    _write(args.out, text)


def _cmd_simulate(args):
    if args.fit_from:
        summaries, _ = load_population(args.fit_from)
        params = estimate_params(batch_log_points(summaries))
    else:
        params = BivariateNormalParams(args.mu1, args.mu2, args.sigma1, args.sigma2, args.rho)
    sims = simulate_flow_summaries(params, args.n, seed=args.seed)
    buf = io.StringIO()
    buf.write(_header(args))
    buf.write(f"# params mu1={params.mu1!r} mu2={params.mu2!r} sigma1={params.sigma1!r} "
              f"sigma2={params.sigma2!r} rho={params.rho!r}\n")
    for s in sims:
        buf.write(format_flow_summary(s))
        buf.write("\n")
    _write(args.out, buf.getvalue())


def _cmd_edm(args):
    summaries, _ = load_population(args.input, args.http_only, args.http_ports)
    x, y = args.pair.columns(batch_log_points(summaries))
    curve = edm_curve(x, y, args.fractions, norm=args.norm)
    if args.format == "json":
        text = format_curve_json(curve, invocation=args.invocation, version=__version__,
                                 pair=args.pair.value)
    else:
        text = (_header(args)
                + f"# reference: uniform angles give {UNIFORM_EDM:.6f}; "
                  f"below {INDEPENDENCE_BELOW:g} extremal independence, "
                  f"above {DEPENDENCE_ABOVE:g} strong extremal dependence\n"
                + format_curve_tsv(curve))
    _write(args.out, text)
    if args.angles_out:
        _write(args.angles_out, _header(args) + format_histogram_tsv(curve))


def threshold_lines(pair: Pair, sizes, durations) -> list[dict]:
    """Boundaries of the threshold cells in the (x, y) plane of *pair*.

    Each entry is either vertical (``x``) or a line ``y = slope*x + intercept``.
    """
    lines = []
    for var, values in (("size", sizes), ("duration", durations)):
        for v in values:
            if v <= 0:
                continue
            c = math.log10(v)
            entry = {"variable": var, "threshold": v, "log10_threshold": c}
            if pair is Pair.SIZE_RATE:
                # log rate = log size - log duration
                geom = {"x": c} if var == "size" else {"slope": 1.0, "intercept": 0.0 - c}
            elif pair is Pair.SIZE_DURATION:
                geom = {"x": c} if var == "size" else {"slope": 0.0, "intercept": c}
            else:
                geom = {"x": c} if var == "duration" else {"slope": -1.0, "intercept": c}
            lines.append({**entry, **geom})
    return lines


def downsample_indices(n: int, max_points: int, seed) -> np.ndarray:
    """Every k-th index of a seeded shuffle, returned in ascending order."""
    if max_points < 1:
        raise ConfigError("--max-points must be at least 1")
    step = max(1, math.ceil(n / max_points))
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[::step])


def _cmd_scatter(args):
    summaries, _ = load_population(args.input, args.http_only, args.http_ports)
    points = batch_log_points(summaries)
    ThresholdGrid(args.sizes, args.durations)  # validation only
    x, y = args.pair.columns(points)
    idx = downsample_indices(len(points), args.max_points, args.seed)
    lines = threshold_lines(args.pair, args.sizes, args.durations)
    xname, yname = args.pair.value.split("-")
    if args.format == "json":
        text = json.dumps({
            "invocation": args.invocation, "version": __version__,
            "pair": args.pair.value, "total_n": len(points), "shown_n": int(idx.size),
            "threshold_lines": lines,
            "x": x[idx].tolist(), "y": y[idx].tolist(),
        }) + "\n"
    else:
        out = [_header(args), f"# total_n={len(points)} shown_n={idx.size}\n"]
        for ln in lines:
            out.append("# threshold " + " ".join(f"{k}={v!r}" for k, v in ln.items()) + "\n")
        out.append(f"log_{xname}\tlog_{yname}\n")
        out.extend(f"{a!r}\t{b!r}\n" for a, b in zip(x[idx].tolist(), y[idx].tolist()))
        text = "".join(out)
    _write(args.out, text)


_COMMANDS = {
    "ingest": _cmd_ingest,
    "summarize": _cmd_summarize,
    "corr-grid": _cmd_corr_grid,
    "truncnorm": _cmd_truncnorm,
    "simulate": _cmd_simulate,
    "edm": _cmd_edm,
    "scatter": _cmd_scatter,
}


def run(args: argparse.Namespace) -> int:
    """Dispatch a parsed invocation; returns the process exit status."""
    try:
        _threads(args)
        _COMMANDS[args.subcommand](args)
    except FlowdepError as exc:
        print(f"flowdep: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.invocation = recorded_invocation(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())

"""
Command-line driver: run a sweep and write the long-format CSV.

Exit codes: 0 success, 2 usage/config error, 3 I/O or numerical failure.
"""

import argparse
import io
import sys
from dataclasses import dataclass

from .channel import (AntennaConfig, Environment, Geometry,
                      elevation_angle_deg, tau_from_environment)
from .errors import ConfigError, InvalidInputError, NumericalFailureError
from .schemes import SCHEMES
from .simulate import SimConfig, run_sweep, slope_between

CSV_HEADER = "scheme,tau,snr_db,trials,sum_rate_mean_bpcu,sum_rate_stderr_bpcu"
SLOPE_WINDOW_DB = (40.0, 60.0)


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class CliConfig:
    sim: SimConfig
    out: str = None
    workers: int = 1
    # (env name, elevation deg, tau) for each environment-resolved tau
    resolved: tuple = ()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed number list: {text!r}")


def _antennas(text):
    try:
        vals = [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed antenna list: {text!r}")
    if len(vals) != 3:
        raise argparse.ArgumentTypeError("--antennas needs exactly M1,M2,M3")
    return vals


def _snr_range(text):
    """``start:stop:step`` in dB with inclusive stop, or a single value."""
    try:
        parts = [float(x) for x in text.split(":")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed SNR range: {text!r}")
    if len(parts) == 1:
        return parts
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise argparse.ArgumentTypeError(
            f"SNR range must be start:stop:step with step > 0: {text!r}")
    start, stop, step = parts
    n = int(round((stop - start) / step + 1e-9)) + 1
    pts = [start + step * m for m in range(n)]
    return [round(p, 9) for p in pts if p <= stop + 1e-9]


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed seed: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser():
    p = _Parser(prog="uav-multiway",
                description="Sum-rate sweeps for the UAV-aided 3-way MIMO channel.")
    p.add_argument("--antennas", type=_antennas, default=[5, 3, 2],
                   help="antenna counts M1,M2,M3 (M1 >= M2 >= M3)")
    p.add_argument("--tau", type=_float_list, default=None,
                   help="comma-separated UAV availability probabilities")
    p.add_argument("--env", default=None,
                   help="ground environment(s): suburban, urban, dense-urban, "
                        "urban-high-rise (comma-separated)")
    p.add_argument("--altitude", type=float, default=None, help="UAV altitude [m]")
    p.add_argument("--distance", type=float, default=None,
                   help="UAV-to-user distance [m]")
    p.add_argument("--snr", type=_snr_range, default=_snr_range("0:60:5"),
                   help="SNR grid start:stop:step in dB (default 0:60:5)")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--schemes", default=",".join(SCHEMES),
                   help="comma-separated subset of " + ", ".join(SCHEMES))
    p.add_argument("--workers", type=int, default=1,
                   help="worker processes (results do not depend on it)")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    return p


def parse_args(argv):
    """Parse ``argv`` into a CliConfig; raises UsageError on bad input."""
    ns = build_parser().parse_args(argv)
    geo_given = [x is not None for x in (ns.env, ns.altitude, ns.distance)]
    resolved = ()
    if ns.tau is not None and any(geo_given):
        raise UsageError("--tau conflicts with --env/--altitude/--distance")
    if any(geo_given):
        if not all(geo_given):
            raise UsageError("--env, --altitude and --distance go together")
        try:
            geo = Geometry(ns.altitude, ns.distance)
            theta = elevation_angle_deg(geo)
            rows = []
            for name in ns.env.split(","):
                env = Environment.from_name(name.strip())
                rows.append((env.kind, theta, tau_from_environment(env, geo).tau))
        except InvalidInputError as err:
            raise UsageError(str(err)) from None
        resolved = tuple(rows)
        taus = [r[2] for r in rows]
    elif ns.tau is not None:
        taus = ns.tau
    else:
        taus = [0.1, 0.7, 0.9]
    if ns.workers < 1:
        raise UsageError("--workers must be at least 1")
    schemes = [s.strip() for s in ns.schemes.split(",") if s.strip()]
    try:
        sim = SimConfig(cfg=AntennaConfig(*ns.antennas), snr_db=ns.snr,
                        taus=taus, trials=ns.trials, seed=ns.seed,
                        schemes=schemes)
    except (ConfigError, InvalidInputError) as err:
        raise UsageError(str(err)) from None
    return CliConfig(sim=sim, out=ns.out, workers=ns.workers, resolved=resolved)


def _g6(x):
    return f"{x:.6g}"


def format_csv(res):
    rows = sorted(res.records, key=lambda r: (r.scheme, r.tau, r.snr_db))
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    for r in rows:
        buf.write(",".join([r.scheme, _g6(r.tau), _g6(r.snr_db), str(r.trials),
                            _g6(r.mean), _g6(r.stderr)]) + "\n")
    return buf.getvalue()


def write_csv(res, path):
    """Write the sweep as CSV; ``path`` of None or '-' means stdout."""
    text = format_csv(res)
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def summarize(conf, res):
    lines = []
    for env, theta, tau in conf.resolved:
        lines.append(f"{env}: elevation {theta:.4g} deg -> tau {_g6(tau)}")
    lines.append("tau: " + ", ".join(_g6(t) for t in sorted(set(conf.sim.taus))))
    lo, hi = SLOPE_WINDOW_DB
    for scheme in sorted(conf.sim.schemes):
        for tau in sorted(set(conf.sim.taus)):
            series = res.series(scheme, tau)
            try:
                slope = _g6(slope_between(series, lo, hi))
            except InvalidInputError:
                slope = "n/a"
            lines.append(f"slope[{lo:g}-{hi:g} dB] {scheme} tau={_g6(tau)}: {slope}")
    return "\n".join(lines) + "\n"


def run_cli(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        conf = parse_args(argv)
    except UsageError as err:
        sys.stderr.write(f"usage error: {err}\n")
        return 2
    try:
        res = run_sweep(conf.sim, workers=conf.workers)
    except NumericalFailureError as err:
        sys.stderr.write(f"numerical failure: {err}\n")
        return 3
    try:
        write_csv(res, conf.out)
    except OSError as err:
        sys.stderr.write(f"cannot write {conf.out}: {err}\n")
        return 3
    # keep stdout clean when the CSV itself goes there
    summary_sink = sys.stderr if conf.out in (None, "-") else sys.stdout
    summary_sink.write(summarize(conf, res))
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()

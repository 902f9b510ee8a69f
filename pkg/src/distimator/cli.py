"""
Command-line front end.

Subcommands: ``simulate``, ``estimate``, ``sweep-werner``, ``sweep-bell`` and
``compare-tomography``.  Options may also come from a JSON file given with
``--config``; keys are option names with dashes or underscores, and explicit
flags win over the file.  Exit codes: 0 success, 2 usage or configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import math
import os
import sys

import numpy as np

from . import bellvec as bv
from . import estimator as est
from .experiment import ExperimentConfig, run_experiment
from .logio import LogFormatError, fmt_float, read_logs, report_csv, write_logs
from .protocols import PROTOCOLS, ProtocolId, noiseless_success

EXIT_USAGE = 2
EXIT_IO = 3

PRESETS = {
    "noiseless": {},
    # Z readout and CNOT noise plus memory decay; "full" adds rotation and X readout noise
    "memory": {"eta_z": 0.99, "y": 0.01, "t_dpo": 1.0, "t_dph": 1.0},
    "full": {"eta_z": 0.99, "eta_x": 0.99, "y": 0.01, "m": 0.01, "t_dpo": 1.0, "t_dph": 1.0},
}

NOISE_DEFAULTS = {
    "preset": "noiseless",
    "lam": 0.0,
    "zeta": 0.0,
    "m": 0.0,
    "y": 0.0,
    "eta_z": 1.0,
    "eta_x": 1.0,
    "t_dpo": math.inf,
    "t_dph": math.inf,
    "p_g": 0.2,
    "delay_scale": 100.0,
    "seed": 0,
    "workers": 1,
}

DEFAULTS = {
    "simulate": {**NOISE_DEFAULTS, "werner": None, "q": None, "protocol": None, "rounds": None, "out": "-"},
    "estimate": {"logs": [], "eps": [0.01], "mode": "auto", "bracket": list(est.WERNER_BRACKET),
                 "csv": None, "format": "json"},
    "sweep-werner": {**NOISE_DEFAULTS, "w": None, "w_start": 0.0, "w_stop": 2 / 3, "w_num": 7,
                     "eps": [0.01], "delta": 0.01, "survival": 1.0, "rounds": 0, "out": "-"},
    "sweep-bell": {**NOISE_DEFAULTS, "q1": [0.6, 0.7, 0.8, 0.9, 0.95], "q2": None, "q2_frac": [0.1, 0.3, 0.5, 0.7, 0.9],
                   "eps": [0.01], "delta": 0.01, "rounds": 0, "out": "-"},
    "compare-tomography": {"w": None, "w_start": 0.0, "w_stop": 2 / 3, "w_num": 21,
                           "eps": [0.01], "delta": 0.01, "survival": 1.0, "out": "-"},
}

WERNER_SWEEP_COLUMNS = (
    "w", "eps_w", "delta_target", "p_expected", "n_required", "n_consumed", "n_tomography",
    "rounds", "p_hat", "w_hat", "abs_error", "trace_distance", "delta", "clamped",
)
BELL_SWEEP_COLUMNS = (
    "q1", "q2", "q3", "q4", "eps_1", "eps_2", "eps_3", "delta_target", "p_1", "p_2", "p_3",
    "n_required", "n_consumed", "n_tomography", "rounds", "p_hat_1", "p_hat_2", "p_hat_3",
    "q_hat_1", "q_hat_2", "q_hat_3", "q_hat_4", "trace_distance", "delta", "valid", "clamped",
)
TOMOGRAPHY_COLUMNS = (
    "w", "eps_w", "delta_target", "n_distill", "n_consumed", "n_tomography", "worst_case_n_distill", "distill_wins",
)


class UsageError(Exception):
    pass


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_int(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def _add_noise(p):
    g = p.add_argument_group("noise model (same device noise for both parties)")
    g.add_argument("--preset", choices=sorted(PRESETS), help="start from a named noise setting")
    g.add_argument("--lam", type=float, help="static memory depolarizing probability")
    g.add_argument("--zeta", type=float, help="static memory dephasing probability")
    g.add_argument("--m", type=float, help="rotation depolarizing probability")
    g.add_argument("--y", type=float, help="CNOT depolarizing probability")
    g.add_argument("--eta-z", dest="eta_z", type=float, help="Z readout non-error probability")
    g.add_argument("--eta-x", dest="eta_x", type=float, help="X readout non-error probability")
    g.add_argument("--t-dpo", dest="t_dpo", type=float, help="memory depolarizing time (inf = off)")
    g.add_argument("--t-dph", dest="t_dph", type=float, help="memory dephasing time (inf = off)")
    g.add_argument("--p-g", dest="p_g", type=float, help="generation success probability per attempt")
    g.add_argument("--delay-scale", dest="delay_scale", type=float, help="attempts per unit storage time")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--workers", type=_positive_int, help="parallel workers")


def _add_out(p):
    p.add_argument("--out", help="output path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="distimator",
        description="Simulate distillation experiments and estimate Bell-diagonal states from their statistics.",
    )
    parser.add_argument("--config", help="JSON file with option values; flags override it")
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("simulate", argument_default=S, help="run protocols and write distimator-log v1 records")
    state = p.add_mutually_exclusive_group()
    state.add_argument("--werner", type=float, help="Werner parameter w of the shared copies")
    state.add_argument("--q", type=float, nargs=4, metavar="Q", help="Bell vector q1 q2 q3 q4")
    p.add_argument("--protocol", choices=["a", "b", "c", "all", "A", "B", "C", "ALL"],
                   help="protocol to run (default: a for --werner, all for --q)")
    p.add_argument("--rounds", type=_positive_int, help="rounds per protocol")
    _add_noise(p)
    _add_out(p)

    p = sub.add_parser(
        "estimate", argument_default=S, help="estimate from log files",
        description="Print an estimate report as JSON (fields: w_hat, q_hat, x_hat, eps_left, "
        "eps_right, delta, clamped, consumed).  Werner mode needs one protocol-A record, "
        "Bell mode one record each of A, B and C.",
    )
    p.add_argument("logs", nargs="+", help="log files (records may be spread over several files)")
    p.add_argument("--eps", type=float, nargs="+", help="error bound on w, or on x_1..x_3 (one or three values)")
    p.add_argument("--mode", choices=["auto", "werner", "bell"])
    p.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"), help="Werner search interval")
    p.add_argument("--csv", help="append a CSV row with columns " + ",".join(_report_columns()))
    p.add_argument("--format", choices=["json", "keyvalue"])

    p = sub.add_parser(
        "sweep-werner", argument_default=S, help="Werner grid: required rounds, tomography cost, optional simulation",
        description="CSV columns: " + ",".join(WERNER_SWEEP_COLUMNS),
    )
    p.add_argument("--w", type=float, nargs="*", help="explicit Werner parameters (overrides the linspace)")
    p.add_argument("--w-start", dest="w_start", type=float)
    p.add_argument("--w-stop", dest="w_stop", type=float)
    p.add_argument("--w-num", dest="w_num", type=_nonneg_int)
    p.add_argument("--eps", type=float, nargs="+", help="error bounds on w")
    p.add_argument("--delta", type=float, help="target failure probability")
    p.add_argument("--survival", type=float, help="mean survival S for the closed-form round count")
    p.add_argument("--rounds", type=_nonneg_int, help="simulate this many rounds per point (0: analytic only)")
    _add_noise(p)
    _add_out(p)

    p = sub.add_parser(
        "sweep-bell", argument_default=S, help="(q1, q2) grid with q3 = q4",
        description="CSV columns: " + ",".join(BELL_SWEEP_COLUMNS),
    )
    p.add_argument("--q1", type=float, nargs="*")
    p.add_argument("--q2", type=float, nargs="*", help="absolute q2 values (overrides --q2-frac)")
    p.add_argument("--q2-frac", dest="q2_frac", type=float, nargs="*", help="q2 as fractions of 1 - q1")
    p.add_argument("--eps", type=float, nargs="+", help="error bounds on x_1..x_3 (one or three values)")
    p.add_argument("--delta", type=float)
    p.add_argument("--rounds", type=_nonneg_int, help="simulate this many rounds per protocol (0: analytic only)")
    _add_noise(p)
    _add_out(p)

    p = sub.add_parser(
        "compare-tomography", argument_default=S, help="distillation vs tomography state consumption for Werner states",
        description="CSV columns: " + ",".join(TOMOGRAPHY_COLUMNS) + ".  The crossover w is printed to stderr.",
    )
    p.add_argument("--w", type=float, nargs="*")
    p.add_argument("--w-start", dest="w_start", type=float)
    p.add_argument("--w-stop", dest="w_stop", type=float)
    p.add_argument("--w-num", dest="w_num", type=_nonneg_int)
    p.add_argument("--eps", type=float, nargs="+")
    p.add_argument("--delta", type=float)
    p.add_argument("--survival", type=float)
    _add_out(p)
    return parser


def _report_columns():
    from .logio import REPORT_COLUMNS

    return REPORT_COLUMNS


def resolve_options(command, cli_values, config_path=None) -> dict:
    """Merge defaults, preset, JSON config and explicit flags (last wins)."""
    defaults = DEFAULTS[command]
    options = dict(defaults)
    file_values = {}
    if config_path:
        with open(config_path, encoding="utf-8") as fh:
            raw = json.load(fh)
        if not isinstance(raw, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in raw.items():
            name = key.replace("-", "_")
            if name not in defaults:
                raise UsageError(f"unknown config key {key!r} for {command}")
            file_values[name] = value
    preset = cli_values.get("preset", file_values.get("preset", defaults.get("preset")))
    if preset is not None:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}")
        options.update(PRESETS[preset])
    options.update(file_values)
    options.update(cli_values)
    return options


def noise_model(opts) -> bv.NoiseModel:
    return bv.NoiseModel.symmetric(
        t_dpo=float(opts["t_dpo"]), t_dph=float(opts["t_dph"]),
        lam=opts["lam"], zeta=opts["zeta"], m=opts["m"], y=opts["y"],
        eta_z=opts["eta_z"], eta_x=opts["eta_x"],
    )


def _open_out(path):
    if path in (None, "-"):
        return _Stdout()
    return open(path, "w", encoding="utf-8", newline="")


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()
        return False


def _linspace_or_list(opts, key):
    if opts.get(key) is not None:
        return [float(v) for v in opts[key]]
    return list(np.linspace(opts[f"{key}_start"], opts[f"{key}_stop"], int(opts[f"{key}_num"])))


def _eps_triple(values):
    values = [float(v) for v in values]
    if len(values) == 1:
        return values * 3
    if len(values) != 3:
        raise UsageError("--eps takes one or three values")
    return values


def _point_seed(seed, index):
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(index),)).generate_state(1, np.uint64)[0])


# --- simulate --------------------------------------------------------------


def cmd_simulate(opts):
    if opts["rounds"] is None:
        raise UsageError("simulate needs --rounds")
    if opts["werner"] is None and opts["q"] is None:
        raise UsageError("simulate needs --werner or --q")
    if opts["werner"] is not None:
        q = bv.werner_vector(float(opts["werner"]))
        default_protocol = "a"
    else:
        q = bv.as_bell_vector(opts["q"])
        default_protocol = "all"
    choice = str(opts["protocol"] or default_protocol).lower()
    protocols = PROTOCOLS if choice == "all" else (ProtocolId.parse(choice),)
    model = noise_model(opts)
    logs = []
    for protocol in protocols:
        cfg = ExperimentConfig(protocol, int(opts["rounds"]), float(opts["p_g"]), float(opts["delay_scale"]),
                               model, int(opts["seed"]))
        logs.append(run_experiment(q, cfg, workers=int(opts["workers"])))
    with _open_out(opts["out"]) as fh:
        write_logs(fh, logs)
    return 0


# --- estimate --------------------------------------------------------------


def estimate_from_logs(logs, eps, mode="auto", bracket=est.WERNER_BRACKET):
    """Pick Werner or Bell mode from the records and run the estimator."""
    by_protocol = {}
    for log in logs:
        if log.protocol in by_protocol:
            raise UsageError(f"more than one record for protocol {log.protocol.value}")
        by_protocol[log.protocol] = log
    if mode == "auto":
        mode = "werner" if set(by_protocol) == {ProtocolId.A} else "bell"
    if mode == "werner":
        if set(by_protocol) != {ProtocolId.A}:
            raise UsageError("Werner mode takes exactly one protocol A record")
        if len(eps) != 1:
            raise UsageError("Werner mode takes a single --eps value")
        return est.estimate_werner(by_protocol[ProtocolId.A], float(eps[0]), tuple(bracket))
    missing = [p.value for p in PROTOCOLS if p not in by_protocol]
    if missing:
        raise UsageError(f"Bell mode needs records for A, B and C; missing {', '.join(missing)}")
    return est.estimate_bell([by_protocol[p] for p in PROTOCOLS], _eps_triple(eps))


def cmd_estimate(opts):
    logs = []
    for path in opts["logs"]:
        logs.extend(read_logs(path))
    report = estimate_from_logs(logs, opts["eps"], opts["mode"], opts["bracket"])
    if opts["format"] == "keyvalue":
        sys.stdout.write(report.to_keyvalue())
    else:
        sys.stdout.write(report.to_json() + "\n")
    if opts["csv"]:
        new = not os.path.exists(opts["csv"]) or os.path.getsize(opts["csv"]) == 0
        with open(opts["csv"], "a", encoding="utf-8", newline="") as fh:
            fh.write(report_csv(report, header=new))
    return 0


# --- sweeps ----------------------------------------------------------------


def _werner_point(args):
    w, eps_w, opts, index = args
    delta_t, s = float(opts["delta"]), float(opts["survival"])
    row = {
        "w": w, "eps_w": eps_w, "delta_target": delta_t,
        "p_expected": (s * w**2 - 2 * s * w + s + 1) / 4,
        "n_required": est.werner_required_rounds(w, delta_t, eps_w, s),
        "n_tomography": est.tomography_werner_rounds(delta_t, eps_w),
        "rounds": int(opts["rounds"]),
    }
    row["n_consumed"] = (2 - row["p_expected"]) * row["n_required"]
    if row["rounds"] > 0:
        cfg = ExperimentConfig("A", row["rounds"], float(opts["p_g"]), float(opts["delay_scale"]),
                               noise_model(opts), _point_seed(opts["seed"], index))
        log = run_experiment(bv.werner_vector(w), cfg)
        rep = est.estimate_werner(log, eps_w)
        row.update(p_hat=log.p_hat, w_hat=rep.w_hat, abs_error=abs(rep.w_hat - w),
                   trace_distance=rep.trace_distance_to(bv.werner_vector(w)),
                   delta=rep.delta, clamped=int(rep.clamped[0]))
    return row


def _bell_point(args):
    q, eps, opts, index = args
    delta_t = float(opts["delta"])
    p = [float(noiseless_success(P, q)) for P in PROTOCOLS]
    n_req = est.bell_required_rounds(q, delta_t, eps)
    row = {
        "q1": q[0], "q2": q[1], "q3": q[2], "q4": q[3],
        "eps_1": eps[0], "eps_2": eps[1], "eps_3": eps[2], "delta_target": delta_t,
        "p_1": p[0], "p_2": p[1], "p_3": p[2],
        "n_required": n_req, "n_consumed": est.consumed_pairs(p, n_req)[0],
        "n_tomography": est.tomography_bell_rounds(delta_t, eps),
        "rounds": int(opts["rounds"]),
    }
    if row["rounds"] > 0:
        model = noise_model(opts)
        seed = _point_seed(opts["seed"], index)
        logs = [
            run_experiment(q, ExperimentConfig(P, row["rounds"], float(opts["p_g"]), float(opts["delay_scale"]),
                                               model, seed))
            for P in PROTOCOLS
        ]
        rep = est.estimate_bell(logs, eps)
        row.update({f"p_hat_{i + 1}": log.p_hat for i, log in enumerate(logs)})
        row.update({f"q_hat_{i + 1}": v for i, v in enumerate(rep.q_hat)})
        row.update(trace_distance=rep.trace_distance_to(q), delta=rep.delta, valid=int(rep.valid),
                   clamped=";".join("1" if c else "0" for c in rep.clamped))
    return row


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def _write_rows(path, columns, rows):
    with _open_out(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])


def _map(fn, jobs, workers):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


def cmd_sweep_werner(opts):
    noise_model(opts)  # validate before any work
    ws = _linspace_or_list(opts, "w")
    jobs = []
    for eps_w in opts["eps"]:
        for w in ws:
            jobs.append((float(w), float(eps_w), opts, len(jobs)))
    rows = _map(_werner_point, jobs, int(opts["workers"]))
    _write_rows(opts["out"], WERNER_SWEEP_COLUMNS, rows)
    return 0


def bell_grid(q1_values, q2_values=None, q2_frac=None):
    """Points ``(q1, q2, r, r)`` with ``r = (1 - q1 - q2) / 2``; infeasible pairs are skipped."""
    points = []
    for q1 in q1_values:
        seconds = q2_values if q2_values is not None else [f * (1 - q1) for f in q2_frac]
        for q2 in seconds:
            r = (1 - q1 - q2) / 2
            if r < -1e-15 or q2 < 0:
                continue
            r = max(r, 0.0)
            points.append(np.array([q1, q2, r, r]))
    return points


def cmd_sweep_bell(opts):
    noise_model(opts)
    eps = _eps_triple(opts["eps"])
    points = bell_grid(opts["q1"] or [], opts["q2"], opts["q2_frac"] or [])
    jobs = [(q, eps, opts, i) for i, q in enumerate(points)]
    rows = _map(_bell_point, jobs, int(opts["workers"]))
    _write_rows(opts["out"], BELL_SWEEP_COLUMNS, rows)
    return 0


def cmd_compare_tomography(opts):
    ws = _linspace_or_list(opts, "w")
    delta_t, s = float(opts["delta"]), float(opts["survival"])
    rows = []
    for eps_w in (float(e) for e in opts["eps"]):
        n_tom = est.tomography_werner_rounds(delta_t, eps_w)
        worst = est.werner_sample_bound(delta_t, eps_w)
        for w in ws:
            n = est.werner_required_rounds(w, delta_t, eps_w, s)
            consumed = est.werner_consumed(w, delta_t, eps_w, s)
            rows.append({
                "w": w, "eps_w": eps_w, "delta_target": delta_t, "n_distill": n,
                "n_consumed": consumed, "n_tomography": n_tom, "worst_case_n_distill": worst,
                "distill_wins": int(consumed < n_tom),
            })
        cross = est.werner_crossover(delta_t, eps_w, s)
        print(f"# eps_w={eps_w:g} crossover_w={'none' if cross is None else format(cross, '.6f')}", file=sys.stderr)
    _write_rows(opts["out"], TOMOGRAPHY_COLUMNS, rows)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "sweep-werner": cmd_sweep_werner,
    "sweep-bell": cmd_sweep_bell,
    "compare-tomography": cmd_compare_tomography,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)  # exits with 2 on usage errors
    values = vars(ns)
    command = values.pop("command")
    config = values.pop("config", None)
    try:
        opts = resolve_options(command, values, config)
        return COMMANDS[command](opts)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, LogFormatError):
            print(f"distimator: cannot read log: {exc}", file=sys.stderr)
            return EXIT_IO
        print(f"distimator {command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"distimator {command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

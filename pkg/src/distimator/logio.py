"""
Text formats: the ``distimator-log v1`` experiment record and report CSV rows.

A log file holds one or more records::

    # distimator-log v1
    # model {"alice": {...}, "bob": {...}, "t_dpo_a": 1.0, ...}
    A,1000000,321047
    0.050000000000000003
    ...

The model line is optional on input (a noiseless model is assumed without
it); every other ``#`` line after the header is ignored.  Floats are written
with 17 significant digits so a record replays bit for bit.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json

import numpy as np

from .bellvec import NoiseModel, PartyNoise
from .estimator import EstimateReport
from .experiment import ExperimentLog

HEADER = "# distimator-log v1"


class LogFormatError(ValueError):
    pass


def fmt_float(x) -> str:
    return format(float(x), ".17g")


def model_to_dict(model: NoiseModel) -> dict:
    return dataclasses.asdict(model)


def model_from_dict(data: dict) -> NoiseModel:
    data = dict(data)
    alice = PartyNoise(**data.pop("alice", {}))
    bob = PartyNoise(**data.pop("bob", {}))
    return NoiseModel(alice, bob, **{k: float(v) for k, v in data.items()})


def format_log(log: ExperimentLog) -> str:
    lines = [
        HEADER,
        "# model " + json.dumps(model_to_dict(log.model), sort_keys=True),
        f"{log.protocol.value},{log.n_rounds},{log.n_success}",
    ]
    lines.extend(fmt_float(d) for d in log.delays)
    return "\n".join(lines) + "\n"


def write_logs(path_or_file, logs) -> None:
    text = "".join(format_log(log) for log in logs)
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w", encoding="utf-8") as fh:
            fh.write(text)


def parse_logs(text: str) -> list[ExperimentLog]:
    """Parse every record in ``text``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise LogFormatError(f"missing '{HEADER}' header")
    starts = [i for i, line in enumerate(lines) if line.strip() == HEADER] + [len(lines)]
    return [_parse_record(lines[a + 1 : b]) for a, b in zip(starts, starts[1:])]


def _parse_record(lines) -> ExperimentLog:
    model = NoiseModel.noiseless()
    body = []
    for line in lines:
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            if s.startswith("# model "):
                try:
                    model = model_from_dict(json.loads(s[len("# model "):]))
                except (ValueError, TypeError) as exc:
                    raise LogFormatError(f"bad model line: {exc}") from exc
            continue
        body.append(s)
    if not body:
        raise LogFormatError("record has no 'protocol,n_rounds,n_success' line")
    fields = body[0].split(",")
    if len(fields) != 3:
        raise LogFormatError(f"expected 'protocol,n_rounds,n_success', got {body[0]!r}")
    try:
        n_rounds, n_success = int(fields[1]), int(fields[2])
        delays = np.array(body[1:], dtype=float)
        return ExperimentLog(fields[0], n_rounds, n_success, delays, model)
    except ValueError as exc:
        raise LogFormatError(str(exc)) from exc


def read_logs(path) -> list[ExperimentLog]:
    with open(path, encoding="utf-8") as fh:
        return parse_logs(fh.read())


REPORT_COLUMNS = (
    "w_hat",
    "q_hat_1", "q_hat_2", "q_hat_3", "q_hat_4",
    "x_hat_1", "x_hat_2", "x_hat_3",
    "eps_left_1", "eps_left_2", "eps_left_3",
    "eps_right_1", "eps_right_2", "eps_right_3",
    "delta", "clamped", "consumed",
)


def _cells(values, width):
    values = list(values or ())
    return ["" if v is None else fmt_float(v) for v in values] + [""] * (width - len(values))


def report_row(report: EstimateReport) -> list[str]:
    """Flat CSV row in :data:`REPORT_COLUMNS` order; clamped flags as ``0``/``1`` joined by ``;``."""
    return (
        ["" if report.w_hat is None else fmt_float(report.w_hat)]
        + _cells(report.q_hat, 4)
        + _cells(report.x_hat, 3)
        + _cells(report.eps_left, 3)
        + _cells(report.eps_right, 3)
        + [fmt_float(report.delta), ";".join("1" if c else "0" for c in report.clamped), fmt_float(report.consumed)]
    )


def report_from_row(row: dict) -> EstimateReport:
    def num(key):
        v = row.get(key, "")
        return None if v == "" else float(v)

    def seq(prefix, width):
        vals = [num(f"{prefix}_{i}") for i in range(1, width + 1)]
        return None if all(v is None for v in vals) else tuple(vals)

    n_channels = 1 if row.get("w_hat", "") != "" else 3
    return EstimateReport(
        w_hat=num("w_hat"),
        q_hat=seq("q_hat", 4),
        x_hat=seq("x_hat", 3),
        eps_left=tuple([num(f"eps_left_{i}") for i in range(1, n_channels + 1)]),
        eps_right=tuple([num(f"eps_right_{i}") for i in range(1, n_channels + 1)]),
        delta=float(row["delta"]),
        delta_raw=float(row["delta"]),
        clamped=tuple(c == "1" for c in row["clamped"].split(";")),
        consumed=float(row["consumed"]),
    )


def report_csv(report: EstimateReport, header=True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header:
        writer.writerow(REPORT_COLUMNS)
    writer.writerow(report_row(report))
    return buf.getvalue()


def read_report_csv(text: str) -> list[EstimateReport]:
    return [report_from_row(row) for row in csv.DictReader(io.StringIO(text))]

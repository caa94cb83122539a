"""CSV and JSON serialization for observations, smoother grids, and reports.

Observation CSV: header ``t,y1,...,yd``, one row per sample time, UTF-8,
``.`` decimal separator.  Floats are written with 17 significant digits so a
write/read round trip is value-exact.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from .exceptions import ParameterError
from .smoothing import ObservationSet, SmootherOutput

__all__ = [
    "write_observations_csv",
    "read_observations_csv",
    "write_grid_csv",
    "report_to_dict",
    "mc_report_to_dict",
    "supnorm_report_to_dict",
    "write_json",
]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_observations_csv(path, obs: ObservationSet):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t"] + [f"y{j + 1}" for j in range(obs.dim)])
        for i in range(obs.n):
            writer.writerow([_fmt(obs.times[i])] + [_fmt(v) for v in obs.y[i]])


def read_observations_csv(path, t_origin=None) -> ObservationSet:
    """Parse an observation CSV; malformed cells report their line and column."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParameterError(f"{path}: empty file") from None
        if not header or header[0].strip() != "t":
            raise ParameterError(f"{path}: line 1: expected header starting with 't'")
        d = len(header) - 1
        if d < 1:
            raise ParameterError(f"{path}: line 1: expected at least one y column")
        times, rows = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != d + 1:
                raise ParameterError(
                    f"{path}: line {lineno}: expected {d + 1} columns, got {len(row)}"
                )
            values = []
            for col, cell in enumerate(row, start=1):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParameterError(
                        f"{path}: line {lineno}, column {col}: not a number: {cell!r}"
                    ) from None
            times.append(values[0])
            rows.append(values[1:])
    if len(times) < 2:
        raise ParameterError(f"{path}: needs at least two observation rows")
    return ObservationSet(times=np.array(times), y=np.array(rows), t_origin=t_origin)


def write_grid_csv(path, sm: SmootherOutput):
    """Plot-ready grid CSV: s, smoothed values, smoothed derivatives."""
    d = sm.xhat.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["s"]
            + [f"xhat{j + 1}" for j in range(d)]
            + [f"xhatp{j + 1}" for j in range(d)]
        )
        for k in range(sm.grid.size):
            writer.writerow(
                [_fmt(sm.grid[k])]
                + [_fmt(v) for v in sm.xhat[k]]
                + [_fmt(v) for v in sm.xhat_prime[k]]
            )


def report_to_dict(report) -> dict:
    return {
        "theta_hat": report.theta_hat.tolist(),
        "criterion": report.criterion_at_min,
        "method": report.method,
        "wall_time_s": report.wall_time,
        "bandwidth": report.bandwidth_used,
        "iterations": report.iterations,
        "warnings": list(report.warnings),
        "j_theta_condition": report.j_theta_condition,
    }


def mc_report_to_dict(report) -> dict:
    return {
        "n_values": list(report.n_values),
        "rmse": report.rmse.tolist(),
        "scaled_rmse": report.scaled.tolist(),
        "replications": report.replications,
        "failures": report.failures,
        "bandwidths": list(report.bandwidths),
        "gamma": report.gamma,
        "theta_true": None if report.theta_true is None else report.theta_true.tolist(),
    }


def supnorm_report_to_dict(report) -> dict:
    return {
        "n_values": list(report.n_values),
        "bandwidths": list(report.bandwidths),
        "mean_sup_x": list(report.mean_sup_x),
        "mean_sup_xprime": list(report.mean_sup_xprime),
        "envelope_x": list(report.envelope_x),
        "envelope_xprime": list(report.envelope_xprime),
        "ratio_x": list(report.ratio_x),
        "ratio_xprime": list(report.ratio_xprime),
        "replications": report.replications,
        "family": report.family,
        "interval": list(report.interval),
    }


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")

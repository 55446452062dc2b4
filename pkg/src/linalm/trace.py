"""Per-epoch convergence metrics, recording schedules, and CSV emission."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .model import feasibility_residual, kkt_residual

# Single schema across all methods; unavailable columns stay empty.
CSV_COLUMNS = ("method", "epoch", "obj", "obj_gap", "feas", "kkt_stat",
               "erg_obj_gap", "erg_feas", "eta_max", "time_ms")


@dataclass
class TraceRecord:
    """One row of per-epoch metrics.

    The first ten fields form the CSV schema. ``kkt_comp`` (complementarity)
    is kept for stopping decisions, and the ``*_scaled`` fields carry the
    block solver's alternative ergodic normalization; none of these three is
    emitted to CSV.
    """

    method: str
    epoch: int
    obj: float
    obj_gap: float | None
    feas: float
    kkt_stat: float
    erg_obj_gap: float | None
    erg_feas: float | None
    eta_max: float | None
    time_ms: float
    kkt_comp: float = 0.0
    erg_obj_gap_scaled: float | None = None
    erg_feas_scaled: float | None = None


class MetricsRecorder:
    """Computes TraceRecords for a fixed problem, method, and wall clock."""

    def __init__(self, prob, method, f0_star=None, clock=None):
        self.prob = prob
        self.method = method
        self.f0_star = f0_star
        self.clock = time.perf_counter if clock is None else clock
        self.t0 = self.clock()

    def _gap_feas(self, x):
        feas = feasibility_residual(x, self.prob)
        gap = None
        if self.f0_star is not None:
            gap = abs(self.prob.f0(x) - self.f0_star)
        return gap, feas

    def snapshot(self, epoch, w, eta_max=None, erg_x=None, erg_x_scaled=None):
        obj = self.prob.f0(w.x)
        kkt = kkt_residual(w, self.prob)
        obj_gap = None if self.f0_star is None else abs(obj - self.f0_star)
        erg_gap = erg_feas = erg_gap_s = erg_feas_s = None
        if erg_x is not None:
            erg_gap, erg_feas = self._gap_feas(erg_x)
        if erg_x_scaled is not None:
            erg_gap_s, erg_feas_s = self._gap_feas(erg_x_scaled)
        return TraceRecord(
            method=self.method, epoch=int(epoch), obj=float(obj),
            obj_gap=obj_gap, feas=kkt.feasibility, kkt_stat=kkt.stationarity,
            erg_obj_gap=erg_gap, erg_feas=erg_feas, eta_max=eta_max,
            time_ms=(self.clock() - self.t0) * 1000.0,
            kkt_comp=kkt.complementarity,
            erg_obj_gap_scaled=erg_gap_s, erg_feas_scaled=erg_feas_s)


def should_stop(record, tol, have_reference):
    """Stopping rule: objective gap and feasibility when a reference value is
    known, otherwise the largest KKT residual component."""
    if have_reference:
        return record.obj_gap <= tol and record.feas <= tol
    return max(record.kkt_stat, record.feas, record.kkt_comp) <= tol


def record_epochs(total, every=None):
    """Set of epochs at which metrics are recorded (always includes 0).

    With an explicit interval the epochs are 0, every, 2*every, ...; the
    default records every epoch up to 10^3 total and about 500
    logarithmically spaced epochs beyond that.
    """
    if every is not None:
        if every < 1:
            raise ValueError("record interval must be >= 1")
        return set(range(0, total + 1, every))
    if total <= 1000:
        return set(range(total + 1))
    pts = np.unique(np.logspace(0, np.log10(total), 500).astype(int))
    return {0, total} | set(int(p) for p in pts)


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def write_trace_csv(records, path):
    """Write records under the fixed CSV schema; returns the path."""
    with open(path, "w") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for rec in records:
            fh.write(",".join(_format(getattr(rec, c)) for c in CSV_COLUMNS) + "\n")
    return path


def read_trace_csv(path):
    """Read back a trace CSV into TraceRecords (inverse of write_trace_csv)."""
    records = []
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header: {header}")
        for line in fh:
            raw = line.rstrip("\n").split(",")
            vals = dict(zip(CSV_COLUMNS, raw))
            records.append(TraceRecord(
                method=vals["method"], epoch=int(vals["epoch"]),
                obj=float(vals["obj"]),
                obj_gap=float(vals["obj_gap"]) if vals["obj_gap"] else None,
                feas=float(vals["feas"]), kkt_stat=float(vals["kkt_stat"]),
                erg_obj_gap=float(vals["erg_obj_gap"]) if vals["erg_obj_gap"] else None,
                erg_feas=float(vals["erg_feas"]) if vals["erg_feas"] else None,
                eta_max=float(vals["eta_max"]) if vals["eta_max"] else None,
                time_ms=float(vals["time_ms"])))
    return records

"""TEP decoder: interleave degree-2 merges with BP restarts.

Two schedules:
  "decoder"  -- restart BP after every merge (eager; the practical decoder);
  "analysis" -- exhaust all degree-2 checks first, then run BP, repeating
                until neither makes progress (the schedule whose mean-field
                behavior the staged ODE systems describe).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bp import SUCCESS, DecodeOutcome, bp_run
from .graph import MergeReport, ResolutionLedger, TannerGraph, resolve

SCHEDULES = ("decoder", "analysis")


def _drive(
    graph: TannerGraph,
    ledger: ResolutionLedger,
    schedule: str,
    on_merge: Callable[[MergeReport], None] | None = None,
) -> None:
    if schedule not in SCHEDULES:
        raise ValueError(f"unknown schedule {schedule!r}")
    bp_run(graph, build_summary=False)
    if schedule == "decoder":
        while graph.alive_variables > 0:
            c = graph.pop_degree2()
            if c is None:
                break
            report = graph.merge_variables(c, ledger)
            if on_merge is not None:
                on_merge(report)
            if report.new_degree1:
                bp_run(graph, build_summary=False)
        return
    # analysis: rounds of (all degree-2 merges, then BP) until fixpoint
    progress = True
    while progress and graph.alive_variables > 0:
        progress = False
        while graph.alive_variables > 0:
            c = graph.pop_degree2()
            if c is None:
                break
            report = graph.merge_variables(c, ledger)
            if on_merge is not None:
                on_merge(report)
            progress = True
        before = graph.removals
        bp_run(graph, build_summary=False)
        if graph.removals > before:
            progress = True


def tep_run(
    graph: TannerGraph,
    ledger: ResolutionLedger | None = None,
    schedule: str = "decoder",
    build_summary: bool = True,
) -> DecodeOutcome:
    """Run BP to a stall, then consume degree-2 checks until success or
    exhaustion of both queues; merged variables are filled in on success
    through the ledger."""
    if ledger is None:
        ledger = ResolutionLedger(graph.n)
    start = graph.removals
    _drive(graph, ledger, schedule)
    assignment = resolve(ledger, np.asarray(graph.assign, dtype=np.int8))
    return DecodeOutcome(
        status=SUCCESS if graph.alive_variables == 0 else "stalled",
        assignment=assignment,
        residual=graph.summary() if build_summary else None,
        iterations=graph.removals - start,
    )


@dataclass
class TraceRow:
    """Snapshot taken after one merge, before any BP restart it triggers.

    Edge fractions are in units of the original edge count E.
    """

    t: float
    e: float
    l: dict[int, float]
    r: dict[int, float]
    shared_event: bool


def tep_trace(
    graph: TannerGraph,
    ledger: ResolutionLedger | None = None,
    schedule: str = "analysis",
) -> tuple[DecodeOutcome, list[TraceRow]]:
    """tep_run with per-merge degree-distribution records.

    The graph must have been initialized with track_counts=True.  Scaled
    time advances by 1/E per merge; row 0 is the BP stall state.
    """
    if not graph.track_counts:
        raise ValueError("tep_trace requires a graph initialized with track_counts=True")
    if ledger is None:
        ledger = ResolutionLedger(graph.n)
    start = graph.removals
    E = float(graph.E)
    rows: list[TraceRow] = []
    merges = [0]

    def snapshot(t: float, shared: bool) -> None:
        l = {d: d * c / E for d, c in sorted(graph.var_deg_counts.items()) if c > 0}
        r = {d: d * c / E for d, c in sorted(graph.chk_deg_counts.items()) if c > 0}
        rows.append(TraceRow(t=t, e=graph.edge_total() / E, l=l, r=r,
                             shared_event=shared))

    def on_merge(report: MergeReport) -> None:
        merges[0] += 1
        snapshot(merges[0] / E, report.shared)

    bp_run(graph, build_summary=False)
    if graph.alive_variables > 0:
        snapshot(0.0, False)  # row 0: the BP stall state; no rows when BP finished
    _drive(graph, ledger, schedule, on_merge)
    assignment = resolve(ledger, np.asarray(graph.assign, dtype=np.int8))
    outcome = DecodeOutcome(
        status=SUCCESS if graph.alive_variables == 0 else "stalled",
        assignment=assignment,
        residual=graph.summary(),
        iterations=graph.removals - start,
    )
    return outcome, rows


def write_trace_csv(rows: list[TraceRow], path: str, lmax: int = 16) -> None:
    """CSV schema: t,e,l_2,...,l_<lmax>,r_1,...,r_<rmax>,shared_event."""
    rmax = max((max(row.r) for row in rows if row.r), default=1)
    header = (["t", "e"]
              + [f"l_{i}" for i in range(2, lmax + 1)]
              + [f"r_{i}" for i in range(1, rmax + 1)]
              + ["shared_event"])
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            rec = [f"{row.t:.9g}", f"{row.e:.9g}"]
            rec += [f"{row.l.get(i, 0.0):.9g}" for i in range(2, lmax + 1)]
            rec += [f"{row.r.get(i, 0.0):.9g}" for i in range(1, rmax + 1)]
            rec.append("1" if row.shared_event else "0")
            w.writerow(rec)

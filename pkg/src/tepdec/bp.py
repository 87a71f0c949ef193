"""Belief-propagation peeling decoder: resolve degree-1 checks until none remain."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import ResidualSummary, ResolutionLedger, TannerGraph, resolve

SUCCESS = "success"
STALLED = "stalled"


@dataclass
class DecodeOutcome:
    """Result of one decode attempt.

    status is "success" iff no alive variables remain; assignment holds -1
    at positions still erased.  `iterations` counts (check, variable)
    removals performed by the call.
    """

    status: str
    assignment: np.ndarray
    residual: ResidualSummary | None
    iterations: int

    @property
    def ok(self) -> bool:
        return self.status == SUCCESS


def bp_run(
    graph: TannerGraph,
    ledger: ResolutionLedger | None = None,
    build_summary: bool = True,
) -> DecodeOutcome:
    """Peel degree-1 checks to exhaustion; resumable on a stalled graph.

    Safe to call again after the graph changes (e.g. after a merge); calling
    it on an already-stalled graph is a no-op.
    """
    start = graph.removals
    budget = graph.n + graph.m + 1
    step = graph.remove_degree1_check
    while step() is not None:
        if graph.removals - start > budget:
            raise RuntimeError("peeling exceeded its iteration budget; decoder bug")
    assignment = np.asarray(graph.assign, dtype=np.int8)
    if ledger is not None and ledger.merge_count:
        assignment = resolve(ledger, assignment)
    return DecodeOutcome(
        status=SUCCESS if graph.alive_variables == 0 else STALLED,
        assignment=assignment,
        residual=graph.summary() if build_summary else None,
        iterations=graph.removals - start,
    )
